"""Primal heuristics: greedy construction, LP rounding, iterated exchange
with random perturbations, and the sparsified sub-solve.

All of them operate on the assignment alone; the linearization variables of
any formulation are implied by it.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from cyclecluster.instance import Clustering, Instance, objective


def _delta_matrix(inst: Instance, assign: np.ndarray, member: np.ndarray) -> np.ndarray:
    """delta[v, t] = objective change from moving v into cluster t (O(n^2 m))."""
    alpha = inst.alpha
    s_plus = inst.q_plus @ member  # (n, m): coherence mass of v against each cluster
    s_mto = inst.q_minus @ member  # (n, m): net flow from v into each cluster
    contrib = (1.0 - alpha) * s_plus + alpha * (np.roll(s_mto, -1, axis=1) - np.roll(s_mto, 1, axis=1))
    current = contrib[np.arange(len(assign)), assign]
    return contrib - current[:, None]


def greedy(inst: Instance, rng_seed: int = 0) -> Clustering:
    """Construct a feasible clustering by repeated best-gain assignment.

    One seed vertex per cluster first (the m heaviest vertices by total
    undirected weight, heaviest into cluster 0), then the (vertex, cluster)
    pair with the largest objective gain is committed until every vertex is
    placed.  Deterministic; ties break to the lowest vertex, then cluster.
    The seed argument is accepted for interface uniformity only.
    """
    del rng_seed
    n, m = inst.n, inst.m
    alpha = inst.alpha
    degree = inst.q_plus.sum(axis=1)
    seeds = sorted(range(n), key=lambda v: (-degree[v], v))[:m]

    assign = np.full(n, -1, dtype=np.int64)
    # gain[v, t]: objective delta of putting v into t given current partials
    gain = np.zeros((n, m))

    def commit(v: int, t: int) -> None:
        assign[v] = t
        gain[v, :] = -np.inf
        unplaced = assign < 0
        if unplaced.any():
            gain[unplaced, t] += (1.0 - alpha) * inst.q_plus[unplaced, v]
            gain[unplaced, (t - 1) % m] += alpha * inst.q_minus[unplaced, v]
            gain[unplaced, (t + 1) % m] += alpha * inst.q_minus[v, unplaced]

    for t, v in enumerate(seeds):
        commit(v, t)
    for _ in range(n - m):
        flat = int(np.argmax(gain))  # first maximum = lowest (v, t) on ties
        v, t = divmod(flat, m)
        commit(v, t)
    return Clustering(tuple(int(a) for a in assign), m)


def rounding(inst: Instance, x_fractional: np.ndarray) -> Optional[Clustering]:
    """Round each vertex to its largest assignment value, smallest cluster on
    ties; returns None when some cluster ends up empty."""
    x = np.asarray(x_fractional, dtype=float).reshape(inst.n, inst.m)
    assign = np.argmax(x, axis=1)  # argmax takes the smallest index on ties
    if len(np.unique(assign)) < inst.m:
        return None
    return Clustering(tuple(int(a) for a in assign), inst.m)


def exchange(
    inst: Instance,
    start: Clustering,
    rng_seed: int = 0,
    max_perturbations: int = 5,
) -> Clustering:
    """Single-move local search with best tracking and cyclic perturbations.

    A pass reassigns every vertex once, applying the move with the largest
    objective change (even when negative) among those that leave the fewest
    clusters empty, while remembering the best clustering seen.  While every
    cluster is nonempty this is exactly "best move that keeps feasibility";
    when only emptying moves remain (e.g. all-singleton clusters) the pass
    walks through the empty-cluster state instead of stalling, and hole
    filling moves are preferred right after.  Only states with all clusters
    nonempty can become the best.  Passes restart from that best until it
    stops improving; then half of each cluster is pushed to the next cluster
    and the search restarts, at most `max_perturbations` times.  Never
    returns a clustering worse than `start`.
    """
    n, m = inst.n, inst.m
    rng = np.random.default_rng(rng_seed)

    best_assign = start.as_array()
    best_val = objective(inst, start)

    def one_pass(assign: np.ndarray, value: float) -> tuple[np.ndarray, float]:
        nonlocal best_assign, best_val
        assign = assign.copy()
        member = np.zeros((n, m))
        member[np.arange(n), assign] = 1.0
        sizes = member.sum(axis=0)
        processed = np.zeros(n, dtype=bool)
        for _ in range(n):
            delta = _delta_matrix(inst, assign, member)
            delta[processed, :] = -np.inf
            delta[np.arange(n), assign] = -np.inf
            # change in number of empty clusters per candidate move
            empty_shift = np.where(sizes == 0, -1, 0)[None, :] + (sizes[assign] == 1).astype(int)[:, None]
            empty_shift = np.where(np.isfinite(delta), empty_shift, np.inf)
            tier = empty_shift.min()
            if not np.isfinite(tier):
                break
            delta = np.where(empty_shift == tier, delta, -np.inf)
            flat = int(np.argmax(delta))
            v, t = divmod(flat, m)
            if not np.isfinite(delta[v, t]):
                break
            value += float(delta[v, t])
            member[v, assign[v]] = 0.0
            sizes[assign[v]] -= 1
            assign[v] = t
            member[v, t] = 1.0
            sizes[t] += 1
            processed[v] = True
            if value > best_val + 1e-12 and sizes.min() >= 1:
                best_val = value
                best_assign = assign.copy()
        return assign, value

    def perturb(assign: np.ndarray) -> np.ndarray:
        out = assign.copy()
        for t in range(m):
            members = np.nonzero(assign == t)[0]
            k = (len(members) + 1) // 2
            chosen = rng.choice(members, size=k, replace=False)
            out[chosen] = (t + 1) % m
        return out

    perturbations = 0
    current = best_assign.copy()
    current_val = best_val
    while True:
        before = best_val
        one_pass(current, current_val)
        if best_val > before + 1e-12:
            current = best_assign.copy()
            current_val = best_val
            continue
        if perturbations >= max_perturbations:
            break
        perturbations += 1
        current = perturb(best_assign)
        current_val = objective(inst, Clustering(tuple(int(a) for a in current), m))
    return Clustering(tuple(int(a) for a in best_assign), m)


def sparsify(
    inst: Instance,
    engine_handle: Callable[[Instance], object],
    keep_fraction: float = 0.03,
    rng_seed: int = 0,
) -> Optional[Clustering]:
    """Root-solve a reduced instance keeping only the heaviest pair weights.

    All but the top `keep_fraction` of unordered pairs by undirected weight
    (ties by lexicographic pair order) are zeroed in both directions, and the
    handle runs the solver on the reduction; the caller re-scores the result
    under the original objective.  Returns None when the sub-solve produces
    no integral solution.  The seed argument only feeds the handle's config.
    """
    del rng_seed
    n = inst.n
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pairs.sort(key=lambda p: (-inst.q_plus[p[0], p[1]], p))
    keep = int(np.ceil(keep_fraction * len(pairs)))
    dropped = pairs[keep:]
    q = inst.Q.copy()
    for (i, j) in dropped:
        q[i, j] = q[j, i] = 0.0
    reduced = Instance(n=inst.n, m=inst.m, alpha=inst.alpha, Q=q)
    result = engine_handle(reduced)
    best = getattr(result, "best_clustering", None)
    if best is None:
        return None
    return Clustering(best.assignment, best.m)
