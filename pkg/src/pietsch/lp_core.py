"""Dense primal simplex for ``max c.w  s.t.  A w <= b, w >= 0``.

Two-phase tableau method.  Pricing is Dantzig (largest reduced cost) until
the objective stalls for ``STALL_WINDOW`` consecutive pivots, after which the
phase switches permanently to Bland's rule, which cannot cycle.  The final
basis is re-solved against the original (unscaled) data so that reported
primal and dual vectors carry only one factorization's worth of rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
STALL_WINDOW = 50
REFRESH_EVERY = 100

OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"


class IterationLimitError(RuntimeError):
    """The simplex hit its iteration cap; no optimum is claimed."""

    def __init__(self, message: str, best_value: float, iterations: int, phase: int):
        super().__init__(message)
        self.best_value = best_value
        self.iterations = iterations
        self.phase = phase


@dataclass(frozen=True, eq=False)
class LpProblem:
    objective: np.ndarray
    constraint_matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        A = np.asarray(self.constraint_matrix, dtype=float)
        b = np.asarray(self.rhs, dtype=float)
        if A.ndim != 2:
            raise ValueError(f"constraint_matrix must be 2-d, got shape {A.shape}")
        q, n = A.shape
        if q < 1 or n < 1:
            raise ValueError(f"need at least one variable and one constraint, got {A.shape}")
        if c.shape != (n,):
            raise ValueError(f"objective has shape {c.shape}, expected ({n},)")
        if b.shape != (q,):
            raise ValueError(f"rhs has shape {b.shape}, expected ({q},)")
        for name, arr in (("objective", c), ("constraint_matrix", A), ("rhs", b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entry in {name}")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "constraint_matrix", A)
        object.__setattr__(self, "rhs", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.constraint_matrix.shape


@dataclass(eq=False)
class LpSolution:
    status: str
    value: float
    primal: np.ndarray
    dual: np.ndarray
    iterations: int
    ray: np.ndarray | None = None
    basis: tuple[int, ...] | None = None


@dataclass
class DualityReport:
    ok: bool
    primal_residual: float
    dual_residual: float
    gap: float
    primal_value: float
    dual_value: float


class _Tableau:
    def __init__(self, M: np.ndarray, rhs: np.ndarray, basis: list[int], n_art: int):
        self.M0 = M
        self.rhs0 = rhs
        self.q, self.ncols = M.shape
        self.n_art = n_art
        self.T = np.zeros((self.q + 1, self.ncols + 1))
        self.T[: self.q, : self.ncols] = M
        self.T[: self.q, -1] = rhs
        self.basis = list(basis)
        self.cost = np.zeros(self.ncols)
        self.iterations = 0

    @property
    def value(self) -> float:
        return -self.T[self.q, -1]

    def set_objective(self, cost: np.ndarray) -> None:
        self.cost = cost
        cb = cost[self.basis]
        self.T[self.q, : self.ncols] = cost - cb @ self.T[: self.q, : self.ncols]
        self.T[self.q, -1] = -(cb @ self.T[: self.q, -1])

    def refresh(self) -> None:
        """Rebuild the tableau from the current basis to shed accumulated drift."""
        B = self.M0[:, self.basis]
        try:
            body = np.linalg.solve(B, np.column_stack([self.M0, self.rhs0]))
        except np.linalg.LinAlgError:
            return
        xb = body[:, -1]
        xb = xb + np.linalg.solve(B, self.rhs0 - B @ xb)
        body[:, -1] = xb
        body[:, self.basis] = np.eye(self.q)
        self.T[: self.q] = body
        self.set_objective(self.cost)

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[r, j] = 1.0
        rhs = T[: self.q, -1]
        rhs[(rhs < 0) & (rhs > -1e-13)] = 0.0
        self.basis[r] = j
        self.iterations += 1


def _run_phase(tab: _Tableau, allowed: np.ndarray, opt_tol, cap: int, phase: int,
               *, done=None, bland: bool = False):
    """Iterate to optimality (or until ``done(tab)`` holds).

    Returns ``None`` at optimality or the entering column of a ray.
    """
    q = tab.q
    stall = 0
    best = tab.value
    since_refresh = 0
    refreshed_at_end = False
    while True:
        d = tab.T[q, : tab.ncols]
        cand = np.flatnonzero(allowed & (d > opt_tol))
        if cand.size == 0 or (done is not None and done(tab)):
            if refreshed_at_end:
                return None
            tab.refresh()
            refreshed_at_end = True
            continue
        refreshed_at_end = False
        if tab.iterations >= cap:
            raise IterationLimitError(
                f"simplex iteration cap {cap} reached in phase {phase}",
                best_value=tab.value,
                iterations=tab.iterations,
                phase=phase,
            )
        j = int(cand[0]) if bland else int(cand[np.argmax(d[cand])])
        col = tab.T[:q, j]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return j
        rhs = np.maximum(tab.T[:q, -1], 0.0)
        ratios = rhs[pos] / col[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta + 1e-12 * (1.0 + theta)]
        if bland:
            r = int(min(ties, key=lambda i: tab.basis[i]))
        else:
            r = int(ties[np.argmax(col[ties])])
        tab.pivot(r, j)
        since_refresh += 1
        if since_refresh >= REFRESH_EVERY:
            tab.refresh()
            since_refresh = 0
        if tab.value > best + 1e-12 * (1.0 + abs(best)):
            best = tab.value
            stall = 0
        else:
            stall += 1
            if stall >= STALL_WINDOW:
                bland = True


def solve_lp(problem: LpProblem, *, max_iter: int | None = None) -> LpSolution:
    """Solve ``max c.w  s.t.  A w <= b, w >= 0``.

    Returns an :class:`LpSolution` with status ``optimal``, ``unbounded``
    (with a certified ray ``d >= 0, A d <= 0, c.d > 0``) or ``infeasible``.
    Raises :class:`IterationLimitError` instead of returning an unproven
    optimum when the iteration cap (default ``50 (n + q)``) is hit.
    """
    A = problem.constraint_matrix
    b = problem.rhs
    c = problem.objective
    q, n = A.shape
    cap = 50 * (n + q) if max_iter is None else int(max_iter)

    # Equilibrate: rows, then columns, to unit max-abs.
    row_scale = np.max(np.abs(A), axis=1)
    row_scale[row_scale == 0] = 1.0
    row_scale = 1.0 / row_scale
    As = A * row_scale[:, None]
    col_scale = np.max(np.abs(As), axis=0)
    col_scale[col_scale == 0] = 1.0
    col_scale = 1.0 / col_scale
    As = As * col_scale[None, :]
    bs = b * row_scale
    cs = c * col_scale

    neg = np.flatnonzero(bs < 0)
    n_art = neg.size
    ncols = n + q + n_art
    M = np.zeros((q, ncols))
    M[:, :n] = As
    M[:, n : n + q] = np.eye(q)
    rhs = bs.copy()
    basis = list(range(n, n + q))
    for a, i in enumerate(neg):
        M[i, : n + q] *= -1.0
        rhs[i] = -rhs[i]
        M[i, n + q + a] = 1.0
        basis[i] = n + q + a
    tab = _Tableau(M, rhs, basis, n_art)

    if n_art:
        # Stop only when every row's unmet fraction art_i / rhs_i is negligible:
        # an absolute test would accept a row whose scaled rhs is tiny while it
        # is still fully unmet.  Infeasibility is judged on the absolute value.
        art_rows = {n + q + a: i for a, i in enumerate(neg)}

        def unmet(t: _Tableau) -> float:
            worst = 0.0
            for r, bv in enumerate(t.basis):
                if bv in art_rows:
                    worst = max(worst, t.T[r, -1] / rhs[art_rows[bv]])
            return worst

        cost1 = np.zeros(ncols)
        cost1[n + q :] = -1.0
        tab.set_objective(cost1)
        done = lambda t: unmet(t) <= 1e-12
        everything = np.ones(ncols, dtype=bool)
        if _run_phase(tab, everything, 1e-11, cap, phase=1, done=done) is not None:
            tab.refresh()
            if _run_phase(tab, everything, 1e-11, cap, phase=1, done=done, bland=True) is not None:
                raise ArithmeticError("phase 1 reported a ray; the tableau lost accuracy")
        b_norm = float(np.max(np.abs(bs)))
        if tab.value < -1e-9 * (1.0 + b_norm):
            return LpSolution(
                status=INFEASIBLE,
                value=float("nan"),
                primal=np.zeros(n),
                dual=np.zeros(q),
                iterations=tab.iterations,
            )
        # Drive zero-level artificials out of the basis.
        for r in range(q):
            if tab.basis[r] >= n + q:
                row = np.abs(tab.T[r, : n + q])
                j = int(np.argmax(row))
                if row[j] > PIVOT_TOL:
                    tab.pivot(r, j)

    allowed = np.zeros(ncols, dtype=bool)
    allowed[: n + q] = True
    cost2 = np.zeros(ncols)
    cost2[:n] = cs
    tab.set_objective(cost2)
    # per-column: a single badly scaled column must not mask the others
    opt_tol = 1e-11 * (1.0 + np.abs(cost2))
    entering = _run_phase(tab, allowed, opt_tol, cap, phase=2)

    if entering is not None:
        d = np.zeros(ncols)
        d[entering] = 1.0
        for r, bv in enumerate(tab.basis):
            d[bv] = -tab.T[r, entering]
        ray = np.maximum(d[:n], 0.0) * col_scale
        ray /= ray.max()
        return LpSolution(
            status=UNBOUNDED,
            value=float("inf"),
            primal=np.zeros(n),
            dual=np.zeros(q),
            iterations=tab.iterations,
            ray=ray,
        )

    primal, dual = _polish(A, b, c, tab.basis, n)
    if primal is None:
        x = np.zeros(ncols)
        x[tab.basis] = tab.T[:q, -1]
        primal = np.maximum(x[:n] * col_scale, 0.0)
        dual = np.maximum(-tab.T[q, n : n + q] * row_scale, 0.0)
    return LpSolution(
        status=OPTIMAL,
        value=float(c @ primal),
        primal=primal,
        dual=dual,
        iterations=tab.iterations,
        basis=tuple(tab.basis),
    )


def _polish(A, b, c, basis, n):
    """Recompute ``x_B = B^{-1} b`` and ``y = B^{-T} c_B`` on the original data."""
    q = A.shape[0]
    if any(j >= n + q for j in basis):
        return None, None
    full = np.hstack([A, np.eye(q)])
    B = full[:, basis]
    cb = np.concatenate([c, np.zeros(q)])[basis]
    try:
        xb = np.linalg.solve(B, b)
        xb = xb + np.linalg.solve(B, b - B @ xb)
        y = np.linalg.solve(B.T, cb)
        y = y + np.linalg.solve(B.T, cb - B.T @ y)
    except np.linalg.LinAlgError:
        return None, None
    x = np.zeros(n + q)
    x[list(basis)] = xb
    return np.maximum(x[:n], 0.0), np.maximum(y, 0.0)


def check_strong_duality(problem: LpProblem, solution: LpSolution, tol: float = 1e-9) -> DualityReport:
    """Recompute primal/dual feasibility residuals and the duality gap."""
    A, b, c = problem.constraint_matrix, problem.rhs, problem.objective
    x = np.asarray(solution.primal, dtype=float)
    y = np.asarray(solution.dual, dtype=float)
    primal_res = max(0.0, float(np.max(A @ x - b)), float(np.max(-x)))
    dual_res = max(0.0, float(np.max(c - A.T @ y)), float(np.max(-y)))
    pv = float(c @ x)
    dv = float(b @ y)
    gap = abs(pv - dv)
    ok = (
        solution.status == OPTIMAL
        and primal_res <= tol * (1.0 + float(np.max(np.abs(b))))
        and dual_res <= tol * (1.0 + float(np.max(np.abs(c))))
        and gap <= tol * (1.0 + abs(pv))
    )
    return DualityReport(ok, primal_res, dual_res, gap, pv, dv)
