"""Box-bounded linear programming used for relaxations and the cut loop.

Solving is delegated to HiGHS through scipy.optimize.linprog, which handles
the sparse row systems of the compact model at benchmark scale and is
deterministic for a fixed input.  The augmented-resolve entry point keeps the
same contract as a cold solve; warm starting is an optimization HiGHS applies
internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from cyclecluster.formulation import EQUAL, GREATER_EQUAL, LESS_EQUAL, Model

FEASIBILITY_TOL = 1e-7

RowSpec = tuple[Sequence[int], Sequence[float], str, float]


class LpNumericalError(RuntimeError):
    """The LP solver failed numerically; the bound must not be trusted."""


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective @ v  subject to  rows (sense) rhs,  lo <= v <= hi."""

    objective: np.ndarray
    rows: sparse.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def ncols(self) -> int:
        return self.objective.shape[0]

    def with_added_rows(self, new_rows: Sequence[RowSpec]) -> "LinearProgram":
        if not new_rows:
            return self
        data, cols, indptr = [], [], [0]
        senses, rhs = [], []
        for row_cols, row_vals, sense, row_rhs in new_rows:
            cols.extend(row_cols)
            data.extend(row_vals)
            indptr.append(len(cols))
            senses.append(sense)
            rhs.append(row_rhs)
        extra = sparse.csr_matrix(
            (np.asarray(data, dtype=float), np.asarray(cols, dtype=np.int32), np.asarray(indptr, dtype=np.int32)),
            shape=(len(rhs), self.ncols),
        )
        return LinearProgram(
            objective=self.objective,
            rows=sparse.vstack([self.rows, extra], format="csr"),
            senses=np.concatenate([self.senses, np.asarray(senses)]),
            rhs=np.concatenate([self.rhs, np.asarray(rhs, dtype=float)]),
            lo=self.lo,
            hi=self.hi,
        )

    def with_bounds(self, lo: np.ndarray, hi: np.ndarray) -> "LinearProgram":
        return LinearProgram(self.objective, self.rows, self.senses, self.rhs, lo, hi)


@dataclass(frozen=True)
class LpSolution:
    status: str  # "optimal" | "infeasible"
    values: np.ndarray | None
    objective_value: float | None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def lp_relaxation(model: Model) -> LinearProgram:
    return LinearProgram(
        objective=model.objective,
        rows=model.rows,
        senses=model.senses,
        rhs=model.rhs,
        lo=model.lo.copy(),
        hi=model.hi.copy(),
    )


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Solve to optimality or report infeasibility; numerical trouble raises."""
    le = lp.senses == LESS_EQUAL
    ge = lp.senses == GREATER_EQUAL
    eq = lp.senses == EQUAL
    ub_mask = le | ge
    a_ub = b_ub = None
    if ub_mask.any():
        flip = np.where(ge[ub_mask], -1.0, 1.0)
        a_ub = sparse.diags(flip) @ lp.rows[ub_mask]
        b_ub = flip * lp.rhs[ub_mask]
    a_eq = b_eq = None
    if eq.any():
        a_eq = lp.rows[eq]
        b_eq = lp.rhs[eq]
    res = linprog(
        c=-lp.objective,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=np.column_stack([lp.lo, lp.hi]),
        method="highs",
    )
    if res.status == 0:
        return LpSolution(status="optimal", values=np.asarray(res.x), objective_value=float(-res.fun))
    if res.status == 2:
        return LpSolution(status="infeasible", values=None, objective_value=None)
    raise LpNumericalError(f"LP solve failed (status {res.status}): {res.message}")


def resolve_with_added_rows(lp: LinearProgram, prior: LpSolution, new_rows: Sequence[RowSpec]) -> LpSolution:
    """Re-solve after appending rows; contract identical to a cold solve.

    When none of the new rows cuts off the prior optimum, that optimum is
    returned unchanged without touching the solver.
    """
    if prior.optimal and new_rows:
        v = prior.values
        ok = True
        for cols, vals, sense, rhs in new_rows:
            lhs = float(np.dot(np.asarray(vals), v[np.asarray(cols, dtype=int)]))
            if sense == LESS_EQUAL and lhs > rhs + FEASIBILITY_TOL:
                ok = False
            elif sense == GREATER_EQUAL and lhs < rhs - FEASIBILITY_TOL:
                ok = False
            elif sense == EQUAL and abs(lhs - rhs) > FEASIBILITY_TOL:
                ok = False
            if not ok:
                break
        if ok:
            return prior
    return solve_lp(lp.with_added_rows(new_rows))
