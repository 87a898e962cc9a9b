"""Minimum-norm points of ``S(F)`` with certified lower bounds.

For coefficient vectors ``xi`` with ``|xi_h| <= box`` and pairing rows
``(C xi)_l = b_l`` on an active set of rows, minimize ``||A xi||``. Any
functional ``w`` of dual norm at most 1 and any multipliers ``lam`` give

    ||A xi|| >= lam . b - box * ||A^T w - C_act^T lam||_1

for every feasible ``xi`` (weak duality), so each solve returns an upper
value, a lower value and the gap between them.

For ``l_1`` and ``l_inf`` the problem is a linear program solved by HiGHS
on a single model whose pairing rows are switched on and off through
their bounds, which keeps the simplex basis warm across thousands of
related solves. Other norms go through cvxpy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhausted, CheckFailed
from .spaces import INF, Lp, Space, _norm, _norming, dual_space

__all__ = ["MinNormResult", "MinNormSolver", "TOL_FEAS", "TOL_SOLVE"]

log = logging.getLogger(__name__)

TOL_FEAS = 1e-8
TOL_SOLVE = 1e-6


@dataclass(frozen=True, eq=False)
class MinNormResult:
    xi: np.ndarray
    value: float      # ||A xi|| of the returned feasible point
    lower: float      # certified lower bound on the minimum

    @property
    def gap(self) -> float:
        return max(self.value - self.lower, 0.0)


class _HighsBackend:
    def __init__(self, space: Lp, A: np.ndarray, C: np.ndarray, box: float):
        import highspy
        from scipy.sparse import csc_matrix

        d, N = A.shape
        inf = highspy.kHighsInf
        self.inf, self.N, self.d = inf, N, d
        if space.p is INF:
            # min t  s.t.  -t <= (A xi)_i <= t
            aux = -np.ones((d, 1))
            cost = np.r_[np.zeros(N), 1.0]
            n_aux = 1
        else:
            # min sum u  s.t.  -u_i <= (A xi)_i <= u_i
            aux = -np.eye(d)
            cost = np.r_[np.zeros(N), np.ones(d)]
            n_aux = d
        M = np.vstack([
            np.hstack([A, aux]),
            np.hstack([-A, aux]),
            np.hstack([C, np.zeros((N, n_aux))]),
        ])
        lp = highspy.HighsLp()
        lp.num_col_ = N + n_aux
        lp.num_row_ = M.shape[0]
        lp.col_cost_ = cost
        lp.col_lower_ = np.r_[np.full(N, -box), np.zeros(n_aux)]
        lp.col_upper_ = np.r_[np.full(N, box), np.full(n_aux, inf)]
        lp.row_lower_ = np.full(M.shape[0], -inf)
        lp.row_upper_ = np.r_[np.zeros(2 * d), np.full(N, inf)]
        sp = csc_matrix(M)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = sp.indptr
        lp.a_matrix_.index_ = sp.indices
        lp.a_matrix_.value_ = sp.data
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.passModel(lp)
        self.h, self.highspy = h, highspy
        self.pair_rows = np.arange(2 * d, 2 * d + N, dtype=np.int32)

    def solve(self, rows: np.ndarray, b: np.ndarray):
        lo = np.full(self.N, -self.inf)
        hi = np.full(self.N, self.inf)
        lo[rows], hi[rows] = b, b
        self.h.changeRowsBounds(self.N, self.pair_rows, lo, hi)
        self.h.run()
        status = self.h.getModelStatus()
        if status != self.highspy.HighsModelStatus.kOptimal:
            raise CheckFailed(f"LP solve failed: {self.h.modelStatusToString(status)}")
        sol = self.h.getSolution()
        col = np.array(sol.col_value)
        dual = np.array(sol.row_dual)
        d = self.d
        w = dual[:d] - dual[d:2 * d]
        lam = dual[2 * d:][rows]
        return col[:self.N], [(w, lam)]


class _ConicBackend:
    def __init__(self, space: Space, A: np.ndarray, C: np.ndarray, box: float):
        import cvxpy as cp

        from .operators import _cvx_norm

        N = A.shape[1]
        self.space, self.A, self.cp = space, A, cp
        self.xi = cp.Variable(N)
        self.mask = cp.Parameter(N, nonneg=True)
        self.rhs = cp.Parameter(N)
        self.eq = cp.multiply(self.mask, C @ self.xi) == self.rhs
        self.prob = cp.Problem(cp.Minimize(_cvx_norm(space, A @ self.xi)),
                               [self.eq, cp.abs(self.xi) <= box])

    def solve(self, rows: np.ndarray, b: np.ndarray):
        cp = self.cp
        mask = np.zeros(self.A.shape[1])
        rhs = np.zeros(self.A.shape[1])
        mask[rows], rhs[rows] = 1.0, b
        self.mask.value, self.rhs.value = mask, rhs
        try:
            self.prob.solve(solver=cp.CLARABEL)
        except cp.error.SolverError as exc:
            raise CheckFailed(f"conic solve failed: {exc}") from exc
        if self.prob.status not in ("optimal", "optimal_inaccurate"):
            raise CheckFailed(f"conic solve failed: {self.prob.status}")
        xi = np.asarray(self.xi.value, dtype=float)
        v = self.A @ xi
        w = _norming(self.space, v) if np.any(v) else np.zeros_like(v)
        lam = np.asarray(self.eq.dual_value, dtype=float)[rows]
        return xi, [(w, lam)]


class MinNormSolver:
    """Memoized minimizer of ``||A xi||`` over ``S(F)``.

    ``A`` has shape ``(dim, N)`` (columns ``x_h``) and ``C = B A`` is the
    ``N x N`` pairing table. Families are passed as tuples of 1-based
    ``(l_j, r_j)`` intervals; the constraint on ``F_j`` is
    ``(C xi)_l = (-1)^j`` for ``l_j <= l <= r_j``.
    """

    def __init__(self, space: Space, A: np.ndarray, C: np.ndarray, box: float = 2.0,
                 tol_solve: float = TOL_SOLVE, tol_feas: float = TOL_FEAS):
        self.space, self.A, self.C, self.box = space, A, C, box
        self.tol_solve, self.tol_feas = tol_solve, tol_feas
        self.dual = dual_space(space)
        if isinstance(space, Lp) and (space.p is INF or space.p == 1):
            self.backend = _HighsBackend(space, A, C, box)
        else:
            self.backend = _ConicBackend(space, A, C, box)
        self.cache: dict[tuple, MinNormResult] = {}
        self.solves = 0

    def constraints(self, intervals) -> tuple[np.ndarray, np.ndarray]:
        rows, b = [], []
        for j, (l, r) in enumerate(intervals, 1):
            rows.extend(range(l - 1, r))
            b.extend([(-1.0) ** j] * (r - l + 1))
        return np.array(rows, dtype=np.int64), np.array(b)

    def lower_bound(self, rows, b, w, lam) -> float:
        """Weak-duality bound; every sign choice is valid so take the best."""
        scale = max(1.0, _norm(self.dual, w))
        w = w / scale
        gw = self.A.T @ w
        gl = self.C[rows].T @ lam
        lb = float(lam @ b)
        best = -np.inf
        for sw in (1.0, -1.0):
            for sl in (1.0, -1.0):
                best = max(best, sl * lb - self.box * float(np.abs(sw * gw - sl * gl).sum()))
        return best

    def solve(self, intervals) -> MinNormResult:
        key = tuple(tuple(iv) for iv in intervals)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        rows, b = self.constraints(key)
        xi, duals = self.backend.solve(rows, b)
        self.solves += 1
        xi = np.clip(xi, -self.box, self.box)
        resid = float(np.max(np.abs(self.C[rows] @ xi - b))) if len(rows) else 0.0
        if resid > self.tol_feas:
            raise CheckFailed(f"solution violates pairing constraints by {resid!r}")
        value = _norm(self.space, self.A @ xi)
        lower = max(self.lower_bound(rows, b, w, lam) for w, lam in duals)
        res = MinNormResult(xi, value, min(lower, value))
        if res.gap > self.tol_solve:
            raise BudgetExhausted(f"optimality gap {res.gap!r} > {self.tol_solve!r} for {key}")
        self.cache[key] = res
        return res
