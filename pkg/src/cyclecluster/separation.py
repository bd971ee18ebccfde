"""Separation of valid inequalities for the cycle clustering polytope.

Three families are separated against a (fractional) point over the compact
model's variables:

* triangle inequalities, by complete O(n^3) enumeration of vertex triples,
  with the subfamilies gated on the cluster count they are stated for;
* partition inequalities over disjoint seed sets (S, T), grown greedily from
  almost-violated two-against-one triangles, capped at |S| + |T| <= 5;
* extended subtour and path inequalities, via a maximum-weight-walk dynamic
  program per start node in O(n^3 m); extracted walks that revisit a vertex
  are discarded, so the walk value is only a search bound while every emitted
  cut is sound.

A cut references only variables that exist for the instance.  Terms with a
positive coefficient may be dropped when their pair carries no weight (this
only weakens the inequality); templates whose negative-coefficient variables
are missing are skipped entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from cyclecluster.formulation import VariableSpace, VarId

DEFAULT_TOL = 1e-4
PARTITION_MAX_SIZE = 5
PARTITION_MAX_SEEDS = 50
PARTITION_ALMOST_VIOLATED = 0.1


@dataclass
class Cut:
    """A sparse valid inequality  coeffs . v <= rhs  with its violation."""

    coeffs: dict[VarId, float]
    rhs: float
    family: str
    violation: float
    support: tuple = field(init=False)

    def __post_init__(self):
        self.support = (self.rhs, tuple(sorted(self.coeffs.items())))

    def lhs(self, space: VariableSpace, point: np.ndarray) -> float:
        return float(sum(coef * point[space.index[var]] for var, coef in self.coeffs.items() if var in space.index))

    def as_row(self, space: VariableSpace) -> tuple[list[int], list[float], str, float]:
        cols, vals = [], []
        for var, coef in self.coeffs.items():
            cols.append(space.index[var])
            vals.append(coef)
        return cols, vals, "<", self.rhs

    def __str__(self) -> str:
        def vname(var):
            return f"{var[0]}[{','.join(str(p) for p in var[1:])}]"

        terms = " ".join(f"{'+' if c >= 0 else '-'} {abs(c):g} {vname(v)}" for v, c in sorted(self.coeffs.items()))
        return f"[{self.family}] {terms} <= {self.rhs:g}   (violation {self.violation:.6g})"


def _sorted_unique(cuts: Iterable[Cut]) -> list[Cut]:
    by_support: dict[tuple, Cut] = {}
    for cut in cuts:
        if cut.support not in by_support:
            by_support[cut.support] = cut
    return sorted(by_support.values(), key=lambda c: (-c.violation, c.support))


# ---------------------------------------------------------------------------
# Triangle inequalities
# ---------------------------------------------------------------------------


def _triple_hits(values: np.ndarray, mask: np.ndarray, bound: float, tol: float, limit: int | None):
    """Violated triples as (i, j, k, violation), strongest first, capped."""
    viol = values - bound
    hit = mask & (viol > tol)
    idx = np.argwhere(hit)
    if idx.size == 0:
        return []
    v = viol[hit]
    order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0], -v))
    if limit is not None:
        order = order[:limit]
    return [(int(idx[r, 0]), int(idx[r, 1]), int(idx[r, 2]), float(v[r])) for r in order]


def separate_triangle(
    space: VariableSpace, point: np.ndarray, tol: float = DEFAULT_TOL, max_per_family: int | None = None
) -> list[Cut]:
    """All violated triangle inequalities applicable to the instance's m.

    m == 3 uses the pure-z cyclic implication; m == 4 uses the y-transitivity,
    mixed y/z, half-integral and the strengthened two-against-one forms;
    m >= 5 replaces the strengthened form with the plain two-against-one pair.
    With `max_per_family`, only the most violated cuts per subfamily are built.
    """
    n, m = space.n, space.m
    cap = max_per_family
    _, Y, Z = space.point_matrices(point)
    E = space._exists
    idx = np.arange(n)
    distinct = (
        (idx[:, None, None] != idx[None, :, None])
        & (idx[None, :, None] != idx[None, None, :])
        & (idx[:, None, None] != idx[None, None, :])
    )
    # all_pairs[i,j,k] requires the pairs (i,j), (j,k) and (i,k) to exist
    all_pairs = E[:, :, None] & E[None, :, :] & E[:, None, :]
    base_mask = distinct & all_pairs

    cuts: list[Cut] = []

    if m == 3:
        vals = Z[:, :, None] + Z[None, :, :] - Z.T[:, None, :]
        for i, j, k, v in _triple_hits(vals, base_mask, 1.0, tol, cap):
            cuts.append(
                Cut({("z", i, j): 1.0, ("z", j, k): 1.0, ("z", k, i): -1.0}, 1.0, "TriangleZ3", v)
            )
        return _sorted_unique(cuts)

    i_lt_k = idx[:, None, None] < idx[None, None, :]
    j_lt_k = idx[None, :, None] < idx[None, None, :]

    # y-transitivity: y(i,j) + y(j,k) - y(i,k) <= 1, middle vertex j, i < k
    vals = Y[:, :, None] + Y[None, :, :] - Y[:, None, :]
    for i, j, k, v in _triple_hits(vals, base_mask & i_lt_k, 1.0, tol, cap):
        cuts.append(Cut({("y", *sorted((i, j))): 1.0, ("y", *sorted((j, k))): 1.0, ("y", i, k): -1.0}, 1.0, "TriangleY", v))

    # same-cluster shift: y(i,j) + z(i,k) - z(j,k) <= 1 and y(i,j) + z(k,i) - z(k,j) <= 1
    vals = Y[:, :, None] + Z[:, None, :] - Z[None, :, :]
    for i, j, k, v in _triple_hits(vals, base_mask, 1.0, tol, cap):
        cuts.append(Cut({("y", *sorted((i, j))): 1.0, ("z", i, k): 1.0, ("z", j, k): -1.0}, 1.0, "TriangleYZ", v))
    vals = Y[:, :, None] + Z.T[:, None, :] - Z.T[None, :, :]
    for i, j, k, v in _triple_hits(vals, base_mask, 1.0, tol, cap):
        cuts.append(Cut({("y", *sorted((i, j))): 1.0, ("z", k, i): 1.0, ("z", k, j): -1.0}, 1.0, "TriangleYZ", v))

    # half-integral mixed triangle, middle vertex j, i < k
    vals = (
        Y[:, :, None]
        + Y[None, :, :]
        - Y[:, None, :]
        + 0.5 * (Z[:, :, None] + Z.T[:, :, None] + Z[None, :, :] + Z.T[None, :, :] - Z[:, None, :] - Z.T[:, None, :])
    )
    for i, j, k, v in _triple_hits(vals, base_mask & i_lt_k, 1.0, tol, cap):
        cuts.append(
            Cut(
                {
                    ("y", *sorted((i, j))): 1.0,
                    ("y", *sorted((j, k))): 1.0,
                    ("y", i, k): -1.0,
                    ("z", i, j): 0.5,
                    ("z", j, i): 0.5,
                    ("z", j, k): 0.5,
                    ("z", k, j): 0.5,
                    ("z", i, k): -0.5,
                    ("z", k, i): -0.5,
                },
                1.0,
                "TriangleMixed",
                v,
            )
        )

    if m == 4:
        # strengthened two-against-one (valid exactly for four clusters): common tail i, j < k
        vals = (
            Z[:, :, None]
            + Z[:, None, :]
            - 2.0 * Y[None, :, :]
            - Z[None, :, :]
            - Z.T[None, :, :]
            - Z.T[:, :, None]
            - Z.T[:, None, :]
        )
        for i, j, k, v in _triple_hits(vals, base_mask & j_lt_k, 0.0, tol, cap):
            cuts.append(
                Cut(
                    {
                        ("z", i, j): 1.0,
                        ("z", i, k): 1.0,
                        ("y", j, k): -2.0,
                        ("z", j, k): -1.0,
                        ("z", k, j): -1.0,
                        ("z", j, i): -1.0,
                        ("z", k, i): -1.0,
                    },
                    0.0,
                    "TriangleZZY4",
                    v,
                )
            )
    else:
        # two-against-one: z(i,j) + z(i,k) - y(j,k) <= 1 and z(j,i) + z(k,i) - y(j,k) <= 1
        vals = Z[:, :, None] + Z[:, None, :] - Y[None, :, :]
        for i, j, k, v in _triple_hits(vals, base_mask & j_lt_k, 1.0, tol, cap):
            cuts.append(Cut({("z", i, j): 1.0, ("z", i, k): 1.0, ("y", j, k): -1.0}, 1.0, "TriangleZZY", v))
        vals = Z.T[:, :, None] + Z.T[:, None, :] - Y[None, :, :]
        for i, j, k, v in _triple_hits(vals, base_mask & j_lt_k, 1.0, tol, cap):
            cuts.append(Cut({("z", j, i): 1.0, ("z", k, i): 1.0, ("y", j, k): -1.0}, 1.0, "TriangleZZY", v))

    return _sorted_unique(cuts)


# ---------------------------------------------------------------------------
# Partition inequalities
# ---------------------------------------------------------------------------


def _partition_lhs(S: Sequence[int], T: Sequence[int], Y: np.ndarray, Z: np.ndarray) -> float:
    lhs = sum(Z[i, j] for i in S for j in T)
    lhs -= sum(Y[S[a], S[b]] for a in range(len(S)) for b in range(a + 1, len(S)))
    lhs -= sum(Y[T[a], T[b]] for a in range(len(T)) for b in range(a + 1, len(T)))
    return float(lhs)


def _partition_cut(space: VariableSpace, S: Sequence[int], T: Sequence[int], violation: float) -> Cut:
    coeffs: dict[VarId, float] = {}
    for i in S:
        for j in T:
            if space.has_pair(i, j):
                coeffs[("z", i, j)] = coeffs.get(("z", i, j), 0.0) + 1.0
    for side in (S, T):
        for a in range(len(side)):
            for b in range(a + 1, len(side)):
                i, j = sorted((side[a], side[b]))
                coeffs[("y", i, j)] = coeffs.get(("y", i, j), 0.0) - 1.0
    return Cut(coeffs, float(min(len(S), len(T))), "Partition", violation)


def separate_partition(
    space: VariableSpace,
    point: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_size: int = PARTITION_MAX_SIZE,
    max_seeds: int = PARTITION_MAX_SEEDS,
    almost_violated: float = PARTITION_ALMOST_VIOLATED,
) -> list[Cut]:
    """Heuristic separation of sum z(S->T) - y(S) - y(T) <= min(|S|, |T|).

    Seeds are two-against-one triangles within `almost_violated` of being
    tight; the smaller side is then grown by the vertex with the best lhs
    gain.  Growing a side requires its internal y-variables to exist (their
    coefficient is negative); missing z-terms are simply dropped.
    """
    n, m = space.n, space.m
    if m < 3:
        return []
    _, Y, Z = space.point_matrices(point)
    E = space._exists

    seeds: list[tuple[float, tuple[int, ...], tuple[int, ...]]] = []
    for j in range(n):
        for k in range(j + 1, n):
            if not E[j, k]:
                continue
            for i in range(n):
                if i == j or i == k or not (E[i, j] and E[i, k]):
                    continue
                slack_fwd = 1.0 - (Z[i, j] + Z[i, k] - Y[j, k])
                if slack_fwd < almost_violated:
                    seeds.append((slack_fwd, (i,), (j, k)))
                slack_bwd = 1.0 - (Z[j, i] + Z[k, i] - Y[j, k])
                if slack_bwd < almost_violated:
                    seeds.append((slack_bwd, (j, k), (i,)))
    seeds.sort(key=lambda s: (s[0], s[1], s[2]))
    seen_seed: set[tuple] = set()

    cuts: list[Cut] = []
    for slack, S0, T0 in seeds:
        key = (S0, T0)
        if key in seen_seed:
            continue
        seen_seed.add(key)
        if len(seen_seed) > max_seeds:
            break
        S, T = list(S0), list(T0)
        lhs = _partition_lhs(S, T, Y, Z)
        best_viol = lhs - min(len(S), len(T))
        best_sets = (tuple(S), tuple(T))
        while len(S) + len(T) < max_size:
            members = frozenset(S) | frozenset(T)

            def best_candidate(side: list[int], other: list[int], into_s: bool):
                best_v, best_gain = -1, -np.inf
                for v in range(n):
                    if v in members:
                        continue
                    if any(not E[v, u] for u in side):
                        continue  # internal y-term would be missing
                    if into_s:
                        gain = sum(Z[v, j] for j in other) - sum(Y[v, u] for u in side)
                    else:
                        gain = sum(Z[i, v] for i in other) - sum(Y[v, u] for u in side)
                    if gain > best_gain + 1e-12:
                        best_v, best_gain = v, gain
                return best_v, best_gain

            if len(S) < len(T):
                choice = best_candidate(S, T, True) + ("S",)
            elif len(T) < len(S):
                choice = best_candidate(T, S, False) + ("T",)
            else:
                cand_s = best_candidate(S, T, True)
                cand_t = best_candidate(T, S, False)
                choice = cand_s + ("S",) if cand_s[1] >= cand_t[1] else cand_t + ("T",)
            v, gain, side = choice
            if v < 0:
                break
            if side == "S":
                S.append(v)
            else:
                T.append(v)
            lhs += gain
            viol = lhs - min(len(S), len(T))
            if viol > best_viol:
                best_viol = viol
                best_sets = (tuple(S), tuple(T))
        if best_viol > tol:
            cuts.append(_partition_cut(space, list(best_sets[0]), list(best_sets[1]), best_viol))

    return _sorted_unique(cuts)


# ---------------------------------------------------------------------------
# Extended subtour and path inequalities (maximum-weight walk DP)
# ---------------------------------------------------------------------------


def _walk_dp(C: np.ndarray, i1: int, max_len: int) -> tuple[np.ndarray, np.ndarray]:
    n = C.shape[0]
    W = np.full((max_len + 1, n), -np.inf)
    P = np.full((max_len + 1, n), -1, dtype=np.int64)
    W[1] = C[i1]
    P[1][np.isfinite(W[1])] = i1
    for ell in range(2, max_len + 1):
        cand = W[ell - 1][:, None] + C
        W[ell] = cand.max(axis=0)
        P[ell] = cand.argmax(axis=0)
        P[ell][~np.isfinite(W[ell])] = -1
    return W, P


def _extract_walk(P: np.ndarray, ell: int, end: int) -> list[int] | None:
    nodes = [end]
    cur = end
    for step in range(ell, 0, -1):
        cur = int(P[step][cur])
        if cur < 0:
            return None
        nodes.append(cur)
    nodes.reverse()
    return nodes


def _subtour_cut(space: VariableSpace, walk: list[int], violation: float) -> Cut:
    coeffs: dict[VarId, float] = {}
    arcs = list(zip(walk[:-1], walk[1:]))
    for (u, v) in arcs:
        coeffs[("z", u, v)] = 1.0
    for (u, v) in arcs[1:]:
        coeffs[("y", *sorted((u, v)))] = 1.0
    return Cut(coeffs, float(len(arcs) - 1), "Subtour", violation)


def _path_cut(space: VariableSpace, walk: list[int], violation: float) -> Cut:
    coeffs: dict[VarId, float] = {}
    arcs = list(zip(walk[:-1], walk[1:]))
    for (u, v) in arcs:
        coeffs[("z", u, v)] = 1.0
    for (u, v) in arcs[1:]:
        coeffs[("y", *sorted((u, v)))] = 1.0
    i1, end = walk[0], walk[-1]
    if space.has_pair(i1, end):
        key = ("y", *sorted((i1, end)))
        coeffs[key] = coeffs.get(key, 0.0) + 1.0
    return Cut(coeffs, float(len(arcs)), "Path", violation)


def _separate_from_start(
    space: VariableSpace, Y: np.ndarray, Z: np.ndarray, i1: int, tol: float
) -> list[Cut]:
    n, m = space.n, space.m
    C = Z + Y
    C[i1, :] = Z[i1, :]
    C[C <= 0.0] = -np.inf
    np.fill_diagonal(C, -np.inf)
    W, P = _walk_dp(C, i1, m - 1)

    cuts: list[Cut] = []
    for ell in range(2, m):
        w = float(W[ell][i1])
        if w > ell - 1 + tol:
            walk = _extract_walk(P, ell, i1)
            if walk is not None and len(set(walk[:-1])) == ell:
                cuts.append(_subtour_cut(space, walk, w - (ell - 1)))
    ell = m - 1
    if ell >= 2:
        for v in range(n):
            if v == i1:
                continue
            w = float(W[ell][v])
            if not np.isfinite(w):
                continue
            total = w + Y[i1, v]
            if total > m - 1 + tol:
                walk = _extract_walk(P, ell, v)
                if walk is not None and len(set(walk)) == len(walk):
                    cuts.append(_path_cut(space, walk, total - (m - 1)))
    return cuts


def separate_subtour_path(space: VariableSpace, point: np.ndarray, tol: float = DEFAULT_TOL) -> list[Cut]:
    """Extended subtour and path cuts from maximum-weight walks per start node.

    Arc weights are z for arcs leaving the start node and z + y elsewhere, so
    the y-terms cover every cycle arc but the first one.  Closed walks of
    length 2..m-1 give subtour cuts; walks of exactly m-1 arcs plus the
    closing same-cluster term give path cuts.
    """
    if space.m < 3:
        return []
    _, Y, Z = space.point_matrices(point)
    cuts: list[Cut] = []
    for i1 in range(space.n):
        cuts.extend(_separate_from_start(space, Y, Z, i1, tol))
    return _sorted_unique(cuts)
