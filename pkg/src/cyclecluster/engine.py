"""Branch and cut on the compact formulation.

Best timeout-aware best-bound search with x-variable branching, a global cut
pool fed by the three separator families, LP bounding with a safety pad, and
incumbents seeded by the primal heuristics before the tree and improved by
the exchange heuristic on every new incumbent.

Nodes whose LP optimum is integral in x but slack in the linearization
variables (possible when clusters sit more than one step apart) fall back to
branching on the most fractional y/z column; their fixings partition the
subtree exactly like x fixings do.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field, replace
from typing import IO, Optional, Sequence

import numpy as np
from scipy import sparse

from cyclecluster.formulation import ConversionError, build_cc, point_to_clustering
from cyclecluster.heuristics import exchange, greedy, rounding, sparsify
from cyclecluster.instance import Clustering, Instance, objective
from cyclecluster.lp import LinearProgram, lp_relaxation, solve_lp
from cyclecluster.separation import Cut, separate_partition, separate_subtour_path, separate_triangle

GAP_INFINITE = 1e20

SEPARATOR_ORDER = ("triangle", "subtour_path", "partition")
HEURISTIC_NAMES = ("greedy", "sparsify", "rounding", "exchange")


@dataclass(frozen=True)
class SolverConfig:
    time_limit_s: float = 300.0
    node_limit: Optional[int] = None
    cut_rounds_root: int = 10
    cut_rounds_node: int = 2
    separators: tuple = SEPARATOR_ORDER
    heuristics: tuple = HEURISTIC_NAMES
    tol_integrality: float = 1e-6
    tol_cut: float = 1e-4
    epsilon_gap: float = 1e-6
    rng_seed: int = 0
    symmetry_break: bool = False
    max_cuts_per_family: int = 200
    partition_min_m: int = 5  # partition separation engaged only for m >= this
    dual_pad: float = 1e-6  # added to LP bounds before pruning decisions

    def __post_init__(self):
        if self.time_limit_s <= 0:
            raise ValueError("time limit must be positive")
        if self.node_limit is not None and self.node_limit <= 0:
            raise ValueError("node limit must be positive")
        for tol in (self.tol_integrality, self.tol_cut, self.epsilon_gap):
            if tol <= 0:
                raise ValueError("tolerances must be positive")
        unknown = set(self.separators) - set(SEPARATOR_ORDER)
        if unknown:
            raise ValueError(f"unknown separators: {sorted(unknown)}")
        unknown = set(self.heuristics) - set(HEURISTIC_NAMES)
        if unknown:
            raise ValueError(f"unknown heuristics: {sorted(unknown)}")


@dataclass(frozen=True)
class BoundEvent:
    time_s: float
    nodes: int
    primal: float
    dual: float
    event: str


@dataclass
class SolveResult:
    status: str  # "optimal" | "time_limit" | "node_limit"
    best_clustering: Optional[Clustering]
    primal_bound: float
    dual_bound: float
    gap_percent: float
    nodes_processed: int
    wall_time_s: float
    bound_history: list[BoundEvent]
    cut_counts: dict[str, int]
    heuristic_stats: dict[str, dict[str, int]]
    root_lp_values: list[float] = field(default_factory=list)
    root_dual_bound: float = math.inf

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def compute_gap(primal: float, dual: float, epsilon: float = 1e-6) -> float:
    """Relative gap in percent: 100 (d - p) / min(p + eps, d + eps).

    Returns the infinite-gap sentinel when either bound is missing, the bounds
    have opposite signs, or the denominator vanishes; the value can exceed
    100 percent.
    """
    if primal is None or dual is None or not math.isfinite(primal) or not math.isfinite(dual):
        return GAP_INFINITE
    if primal * dual < 0:
        return GAP_INFINITE
    denom = min(primal + epsilon, dual + epsilon)
    if abs(denom) <= epsilon * epsilon:
        return GAP_INFINITE
    return 100.0 * (dual - primal) / denom


def _distance(value: float, reference: float, epsilon: float = 1e-6) -> float:
    if value is None or not math.isfinite(value):
        return 1.0
    diff = abs(reference - value)
    if diff <= epsilon:
        return 0.0
    return min(1.0, diff / max(abs(reference), abs(value), epsilon))


def _bound_integral(history: Sequence[BoundEvent], final_time: float, reference: float, attr: str) -> float:
    events = sorted(history, key=lambda e: e.time_s)
    integral = 0.0
    t_prev = 0.0
    current = -math.inf if attr == "primal" else math.inf
    for ev in events:
        t = min(max(ev.time_s, t_prev), final_time)
        integral += (t - t_prev) * _distance(current, reference)
        current = getattr(ev, attr)
        t_prev = t
    integral += max(0.0, final_time - t_prev) * _distance(current, reference)
    return integral


def primal_integral(history: Sequence[BoundEvent], final_time: float, reference: float) -> float:
    """Time-weighted normalized distance of the incumbent to the reference."""
    return _bound_integral(history, final_time, reference, "primal")


def dual_integral(history: Sequence[BoundEvent], final_time: float, reference: float) -> float:
    """Time-weighted normalized distance of the dual bound to the reference."""
    return _bound_integral(history, final_time, reference, "dual")


class _Search:
    def __init__(self, inst: Instance, config: SolverConfig, log_stream: Optional[IO[str]]):
        self.inst = inst
        self.config = config
        self.log = log_stream
        self.t0 = time.perf_counter()
        self.model = build_cc(inst, symmetry_break=config.symmetry_break)
        self.space = self.model.space
        self.base_lp = lp_relaxation(self.model)
        self.incumbent: Optional[Clustering] = None
        self.primal = -math.inf
        self.dual = math.inf
        self.history: list[BoundEvent] = []
        self.cut_counts: dict[str, int] = {}
        self.heur_stats = {name: {"runs": 0, "successes": 0} for name in HEURISTIC_NAMES}
        self.nodes_processed = 0
        self.status = "optimal"
        self.root_lp_values: list[float] = []
        self.root_dual_bound = math.inf
        # cut pool
        self.pool_matrix: Optional[sparse.csr_matrix] = None
        self.pool_rhs = np.zeros(0)
        self.pool_supports: set = set()
        self.pool_active_default: list[int] = []
        # search tree
        self.heap: list[tuple[float, int, dict[int, float]]] = []
        self.next_id = 0

    # -- bookkeeping --------------------------------------------------------

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0

    def out_of_time(self) -> bool:
        return self.elapsed() >= self.config.time_limit_s

    def record(self, kind: str) -> None:
        ev = BoundEvent(self.elapsed(), self.nodes_processed, float(self.primal), float(self.dual), kind)
        self.history.append(ev)
        if self.log is not None:
            self.log.write(f"{ev.time_s:.6f} {ev.nodes} {ev.primal!r} {ev.dual!r} {ev.event}\n")

    def offer(self, clustering: Clustering, source: str) -> bool:
        val = objective(self.inst, clustering)
        improved = val > self.primal + 1e-12
        if improved:
            self.primal = val
            self.incumbent = clustering
            if source in self.heur_stats:
                self.heur_stats[source]["successes"] += 1
            self.record(f"incumbent:{source}")
        if improved and source != "exchange" and "exchange" in self.config.heuristics:
            self.heur_stats["exchange"]["runs"] += 1
            polished = exchange(self.inst, self.incumbent, rng_seed=self.config.rng_seed)
            pval = objective(self.inst, polished)
            if pval > self.primal + 1e-12:
                self.primal = pval
                self.incumbent = polished
                self.heur_stats["exchange"]["successes"] += 1
                self.record("incumbent:exchange")
        return improved

    # -- cut pool -----------------------------------------------------------

    def add_cuts(self, cuts: Sequence[Cut]) -> list[int]:
        """Append new cuts to the pool; returns their pool indices."""
        added = []
        rows = []
        for cut in cuts:
            if cut.support in self.pool_supports:
                continue
            self.pool_supports.add(cut.support)
            cols, vals, _, rhs = cut.as_row(self.space)
            rows.append((cols, vals, rhs))
            self.cut_counts[cut.family] = self.cut_counts.get(cut.family, 0) + 1
        if not rows:
            return []
        data, cols_all, indptr = [], [], [0]
        rhs_all = []
        for cols, vals, rhs in rows:
            cols_all.extend(cols)
            data.extend(vals)
            indptr.append(len(cols_all))
            rhs_all.append(rhs)
        extra = sparse.csr_matrix(
            (np.asarray(data), np.asarray(cols_all, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
            shape=(len(rhs_all), self.space.ncols),
        )
        start = 0 if self.pool_matrix is None else self.pool_matrix.shape[0]
        self.pool_matrix = extra if self.pool_matrix is None else sparse.vstack([self.pool_matrix, extra], format="csr")
        self.pool_rhs = np.concatenate([self.pool_rhs, np.asarray(rhs_all)])
        added = list(range(start, start + len(rhs_all)))
        return added

    def violated_pool(self, values: np.ndarray, active: Sequence[int]) -> list[int]:
        if self.pool_matrix is None or self.pool_matrix.shape[0] == 0:
            return []
        lhs = self.pool_matrix @ values
        viol = lhs - self.pool_rhs
        mask = viol > self.config.tol_cut
        if mask.any():
            mask[list(active)] = False
        return np.nonzero(mask)[0].tolist()

    def separate(self, point: np.ndarray) -> list[Cut]:
        cfg = self.config
        cuts: list[Cut] = []
        for name in SEPARATOR_ORDER:
            if name not in cfg.separators:
                continue
            if name == "triangle":
                found = separate_triangle(self.space, point, cfg.tol_cut, max_per_family=cfg.max_cuts_per_family)
            elif name == "subtour_path":
                found = separate_subtour_path(self.space, point, cfg.tol_cut)
            else:
                if self.inst.m < cfg.partition_min_m:
                    continue
                found = separate_partition(self.space, point, cfg.tol_cut)
            per_family: dict[str, int] = {}
            for cut in found:
                k = per_family.get(cut.family, 0)
                if k < cfg.max_cuts_per_family:
                    per_family[cut.family] = k + 1
                    cuts.append(cut)
        return cuts

    # -- LP solving ---------------------------------------------------------

    def solve_node_lp(self, lo: np.ndarray, hi: np.ndarray, active: Sequence[int]):
        lp = self.base_lp
        if active:
            rows = sparse.vstack([self.base_lp.rows, self.pool_matrix[list(active)]], format="csr")
            senses = np.concatenate([self.base_lp.senses, np.full(len(active), "<")])
            rhs = np.concatenate([self.base_lp.rhs, self.pool_rhs[list(active)]])
            lp = LinearProgram(self.base_lp.objective, rows, senses, rhs, lo, hi)
        else:
            lp = LinearProgram(self.base_lp.objective, self.base_lp.rows, self.base_lp.senses, self.base_lp.rhs, lo, hi)
        return solve_lp(lp)

    # -- heuristics ---------------------------------------------------------

    def run_root_heuristics(self) -> None:
        cfg = self.config
        if "greedy" in cfg.heuristics:
            self.heur_stats["greedy"]["runs"] += 1
            self.offer(greedy(self.inst, cfg.rng_seed), "greedy")
        if "sparsify" in cfg.heuristics:
            self.heur_stats["sparsify"]["runs"] += 1
            remaining = max(1e-3, cfg.time_limit_s - self.elapsed())
            sub_cfg = replace(
                cfg,
                node_limit=1,
                time_limit_s=remaining,
                heuristics=tuple(h for h in cfg.heuristics if h != "sparsify"),
            )
            result = sparsify(self.inst, lambda reduced: solve(reduced, sub_cfg), rng_seed=cfg.rng_seed)
            if result is not None:
                self.offer(result, "sparsify")

    # -- node processing ----------------------------------------------------

    def process_node(self, fixings: dict[int, float], parent_bound: float, is_root: bool) -> None:
        cfg = self.config
        lo = self.base_lp.lo.copy()
        hi = self.base_lp.hi.copy()
        for col, val in fixings.items():
            lo[col] = hi[col] = val

        active: list[int] = []
        sol = self.solve_node_lp(lo, hi, active)
        if not sol.optimal:
            return
        for _ in range(50):  # re-add violated pool cuts before fresh separation
            pool_hits = self.violated_pool(sol.values, active)
            if not pool_hits or self.out_of_time():
                break
            active.extend(pool_hits)
            sol = self.solve_node_lp(lo, hi, active)
            if not sol.optimal:
                return

        rounds = cfg.cut_rounds_root if is_root else cfg.cut_rounds_node
        lp_values = [sol.objective_value]
        for _ in range(rounds):
            if sol.objective_value + cfg.dual_pad <= self.primal + cfg.epsilon_gap:
                break
            if self.out_of_time():
                break
            batch = self.violated_pool(sol.values, active)
            fresh = self.separate(sol.values)
            batch.extend(self.add_cuts(fresh))
            if not batch:
                break
            active.extend(batch)
            sol = self.solve_node_lp(lo, hi, active)
            if not sol.optimal:
                return
            lp_values.append(sol.objective_value)

        bound = min(parent_bound, sol.objective_value + cfg.dual_pad)
        if is_root:
            self.root_lp_values = lp_values
            self.root_dual_bound = bound
        if bound <= self.primal + cfg.epsilon_gap:
            return

        values = sol.values
        x = values[: self.space.num_x]
        frac_x = np.minimum(x, 1.0 - x)
        frac_x[[c for c in fixings if c < self.space.num_x]] = 0.0
        if frac_x.max() <= cfg.tol_integrality:
            try:
                clustering = point_to_clustering(self.space, values, tol=cfg.tol_integrality)
            except ConversionError:
                clustering = None
            if clustering is not None:
                self.offer(clustering, "node_integral")
                if bound <= self.primal + cfg.epsilon_gap:
                    return
            branch_col = self.pick_branch_column(values, fixings, self.space.num_x, self.space.ncols)
        else:
            if "rounding" in cfg.heuristics:
                self.heur_stats["rounding"]["runs"] += 1
                rounded = rounding(self.inst, x)
                if rounded is not None:
                    self.offer(rounded, "rounding")
                    if bound <= self.primal + cfg.epsilon_gap:
                        return
            branch_col = self.pick_branch_column(values, fixings, 0, self.space.num_x)

        if branch_col is None:
            return  # fully integral point; the bound check above already covers it
        for val in (0.0, 1.0):
            child = dict(fixings)
            child[branch_col] = val
            heapq.heappush(self.heap, (-bound, self.next_id, child))
            self.next_id += 1

    def pick_branch_column(self, values: np.ndarray, fixings: dict[int, float], lo_col: int, hi_col: int) -> Optional[int]:
        block = values[lo_col:hi_col]
        score = np.abs(block - 0.5)
        fractional = np.minimum(block, 1.0 - block) > self.config.tol_integrality
        score = np.where(fractional, score, np.inf)
        fixed = [c - lo_col for c in fixings if lo_col <= c < hi_col]
        if fixed:
            score[fixed] = np.inf
        col = int(np.argmin(score))
        if not np.isfinite(score[col]):
            return None
        return lo_col + col

    # -- main loop ----------------------------------------------------------

    def run(self) -> None:
        cfg = self.config
        self.record("start")
        self.run_root_heuristics()
        heapq.heappush(self.heap, (-math.inf, self.next_id, {}))
        self.next_id += 1
        while self.heap:
            if self.out_of_time():
                self.status = "time_limit"
                break
            if cfg.node_limit is not None and self.nodes_processed >= cfg.node_limit:
                self.status = "node_limit"
                break
            neg_bound, _, fixings = heapq.heappop(self.heap)
            parent_bound = -neg_bound
            if parent_bound <= self.primal + cfg.epsilon_gap:
                self.heap.clear()  # best-bound order: nothing better remains
                break
            is_root = self.nodes_processed == 0
            self.nodes_processed += 1
            self.process_node(fixings, parent_bound, is_root)
            new_dual = max(self.primal, -self.heap[0][0]) if self.heap else self.primal
            new_dual = min(self.dual, new_dual)
            if new_dual != self.dual:
                self.dual = new_dual
                self.record("dual")
        if not self.heap and self.status == "optimal":
            self.dual = self.primal if self.incumbent is not None else self.dual
        else:
            self.dual = min(self.dual, max(self.primal, max((-b for b, _, _ in self.heap), default=self.primal)))
        self.record("final")

    def result(self) -> SolveResult:
        gap = 0.0 if (self.status == "optimal" and self.incumbent is not None) else compute_gap(
            self.primal, self.dual, self.config.epsilon_gap
        )
        return SolveResult(
            status=self.status,
            best_clustering=self.incumbent,
            primal_bound=self.primal,
            dual_bound=self.dual,
            gap_percent=gap,
            nodes_processed=self.nodes_processed,
            wall_time_s=self.elapsed(),
            bound_history=self.history,
            cut_counts=dict(sorted(self.cut_counts.items())),
            heuristic_stats=self.heur_stats,
            root_lp_values=self.root_lp_values,
            root_dual_bound=self.root_dual_bound,
        )


def solve(inst: Instance, config: Optional[SolverConfig] = None, log_stream: Optional[IO[str]] = None) -> SolveResult:
    """Solve an instance by branch and cut; deterministic for a fixed config.

    Raises ParameterError for m < 3 (the compact formulation needs a proper
    cycle); limit terminations are normal statuses on the result.
    """
    cfg = config or SolverConfig()
    search = _Search(inst, cfg, log_stream)
    search.run()
    return search.result()
