"""Dense two-phase simplex for the small programs used by the price solvers.

Problems are of the form::

    maximize    c . x
    subject to  A x <= b
                lower <= x <= upper

Pivoting follows Bland's rule (lowest eligible column enters, lowest basic
variable index wins ratio ties), so the vertex returned for a given program
is always the same.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
MAX_PIVOTS = 5000


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n) if n else np.zeros((len(self.b), 0))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise ValueError(f"A has {self.A.shape[0]} rows but b has {self.b.size} entries")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        if self.upper is None:
            self.upper = np.full(n, np.inf)
        else:
            self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if not np.all(np.isfinite(self.lower)):
            raise ValueError("lower bounds must be finite")
        if np.any(self.upper < self.lower):
            raise ValueError("upper bound below lower bound")
        for name, arr in (("c", self.c), ("A", self.A), ("b", self.b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class LpOutcome:
    status: str  # optimal | infeasible | unbounded | failed
    x: np.ndarray | None = None
    value: float | None = None
    message: str = ""
    pivots: int = field(default=0, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Breakdown(RuntimeError):
    pass


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0


def _run(T: np.ndarray, basis: list[int], allowed: int, budget: list[int]) -> str:
    """Minimize the cost row of ``T`` in place. Columns >= ``allowed`` never enter."""
    m = T.shape[0] - 1
    while True:
        cost = T[-1, :allowed]
        entering = np.flatnonzero(cost < -PIVOT_TOL)
        if entering.size == 0:
            return "optimal"
        col = int(entering[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return "unbounded"
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        budget[0] += 1
        if budget[0] > MAX_PIVOTS:
            raise _Breakdown("pivot limit reached")


def solve(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp`` with the two-phase simplex method."""
    n = lp.n_vars
    lo, up = lp.lower, lp.upper
    # shift x = lo + y so that y >= 0; finite upper bounds become rows
    A_rows = [lp.A]
    b_rows = [lp.b - lp.A @ lo]
    bounded = np.flatnonzero(np.isfinite(up))
    if bounded.size:
        E = np.zeros((bounded.size, n))
        E[np.arange(bounded.size), bounded] = 1.0
        A_rows.append(E)
        b_rows.append(up[bounded] - lo[bounded])
    A = np.vstack(A_rows) if n else np.zeros((sum(r.shape[0] for r in A_rows), 0))
    b = np.concatenate(b_rows)
    m = A.shape[0]

    if m == 0:
        if np.any(lp.c > 0):
            return LpOutcome("unbounded", message="no constraints and positive objective")
        return LpOutcome("optimal", x=lo.copy(), value=float(lp.c @ lo))

    neg = b < 0
    sign = np.where(neg, -1.0, 1.0)
    n_art = int(neg.sum())
    # columns: structural | slack/surplus (one per row) | artificial
    n_cols = n + m + n_art
    T = np.zeros((m + 1, n_cols + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.diag(sign)
    T[:m, -1] = b * sign
    basis: list[int] = []
    art = n + m
    for i in range(m):
        if neg[i]:
            T[i, art] = 1.0
            basis.append(art)
            art += 1
        else:
            basis.append(n + i)

    budget = [0]
    try:
        if n_art:
            T[-1, n + m:n + m + n_art] = 1.0
            for i in range(m):
                if basis[i] >= n + m:
                    T[-1] -= T[i]
            _run(T, basis, n_cols, budget)
            scale = 1.0 + np.abs(b).max()
            if -T[-1, -1] > FEAS_TOL * scale:
                return LpOutcome("infeasible", message="phase one left artificial mass", pivots=budget[0])
            # drive zero-level artificials out of the basis
            keep = []
            for i in range(m):
                if basis[i] >= n + m:
                    cand = np.flatnonzero(np.abs(T[i, :n + m]) > PIVOT_TOL)
                    if cand.size:
                        _pivot(T, i, int(cand[0]))
                        basis[i] = int(cand[0])
                        keep.append(i)
                else:
                    keep.append(i)
            if len(keep) < m:
                T = np.vstack([T[keep], T[-1:]])
                basis = [basis[i] for i in keep]
            T = np.delete(T, np.s_[n + m:n + m + n_art], axis=1)

        rows = T.shape[0] - 1
        T[-1] = 0.0
        T[-1, :n] = -lp.c
        for i in range(rows):
            if basis[i] < n and lp.c[basis[i]] != 0.0:
                T[-1] -= T[-1, basis[i]] * T[i]
        status = _run(T, basis, n + m, budget)
    except _Breakdown as exc:
        return LpOutcome("failed", message=str(exc), pivots=budget[0])

    if status == "unbounded":
        return LpOutcome("unbounded", pivots=budget[0])

    y = np.zeros(n + m)
    for i, var in enumerate(basis):
        y[var] = T[i, -1]
    x = lo + y[:n]
    x = np.where(np.abs(x) < 1e-13, 0.0, x)

    resid = lp.A @ x - lp.b
    row_scale = 1.0 + np.abs(lp.b) + np.abs(lp.A) @ np.abs(x)
    if np.any(resid > FEAS_TOL * row_scale) or np.any(x < lo - FEAS_TOL * (1 + np.abs(lo))) or np.any(
        x > up + FEAS_TOL * (1 + np.abs(np.where(np.isfinite(up), up, 0.0)))
    ):
        return LpOutcome("failed", message="solution violates constraints beyond tolerance", pivots=budget[0])
    return LpOutcome("optimal", x=x, value=float(lp.c @ x), pivots=budget[0])


def is_feasible(A, b, lower=None, upper=None) -> bool:
    """True when ``{x : A x <= b, lower <= x <= upper}`` is non-empty."""
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    out = solve(LinearProgram(np.zeros(n), A, b, lower, upper))
    if out.status == "failed":
        raise RuntimeError(f"LP breakdown during feasibility check: {out.message}")
    return out.status == "optimal"
