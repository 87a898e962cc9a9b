"""From a J-witness to an explicit factorization of ``S_n``.

A witness ``z_1..z_n`` with margin ``1 - eps`` yields norming functionals
``y_k`` of its signed sums. The shifted vectors ``x_h = (z_1 + z_h)/2`` pair
with them almost like the summation matrix, and a small linear correction
of the ``x_h`` (the distortion step) turns the pairing into ``S_n`` exactly
while the norms grow by ``O(n^2 eps)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import CheckFailed, DimensionMismatch, PreconditionError
from .jconvexity import JWitness, signed_sums
from .operators import Factorization, LinOperator, verify_factorization
from .spaces import INF, TOL_ALG, Space, _norm, _norming, dual_space, make_lp

__all__ = [
    "NearTriangularSystem", "NormingSystem", "norming_system", "shifted_system",
    "distortion_coefficients", "distortion_factorize", "theorem1_pipeline",
    "pairing_band", "DET_FLOOR", "TOL_PIPELINE",
]

DET_FLOOR = 1e-6
TOL_PIPELINE = 1e-6


def pairing_band(alpha: np.ndarray) -> float:
    """Smallest ``b`` with ``alpha[h, k] >= 1 - b`` for ``h <= k`` and
    ``|alpha[h, k]| <= b`` for ``h > k``."""
    n = alpha.shape[0]
    upper = np.triu(np.ones((n, n), dtype=bool))
    dev = np.where(upper, 1.0 - alpha, np.abs(alpha))
    return float(max(dev.max(), 0.0))


@dataclass(frozen=True, eq=False)
class NearTriangularSystem:
    """Vectors ``x_l`` and functionals ``y_k`` whose pairing table
    ``alpha[l, k] = <x_l, y_k>`` is within ``band`` of the upper-triangular
    ones pattern (rows indexed by ``l``)."""

    space: Space
    x: np.ndarray
    y: np.ndarray
    alpha: np.ndarray
    band: float
    tol: float = TOL_ALG

    def __post_init__(self):
        n = self.x.shape[0]
        if self.x.shape != (n, self.space.dim) or self.y.shape != self.x.shape:
            raise DimensionMismatch("x and y must both have shape (n, dim)")
        if self.alpha.shape != (n, n):
            raise DimensionMismatch("alpha must be n x n")
        if not np.allclose(self.alpha, self.x @ self.y.T, atol=self.tol, rtol=0.0):
            raise PreconditionError("alpha is not the pairing table of x and y")
        dual = dual_space(self.space)
        if max(_norm(self.space, v) for v in self.x) > 1.0 + self.tol:
            raise PreconditionError("some x_h lies outside the unit ball")
        if max(_norm(dual, v) for v in self.y) > 1.0 + self.tol:
            raise PreconditionError("some y_k lies outside the dual unit ball")
        if np.any(self.alpha > 1.0 + self.tol):
            raise PreconditionError("pairing exceeds 1")
        if pairing_band(self.alpha) > self.band + self.tol:
            raise PreconditionError(
                f"pairing table violates band {self.band!r} "
                f"(realized {pairing_band(self.alpha)!r})")

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True, eq=False)
class NormingSystem:
    """Norming functionals of the signed sums of a witness.

    ``band`` is the realized deviation: ``<z_h, y_k> >= 1 - band`` for
    ``h <= k`` and ``-<z_h, y_k> >= 1 - band`` for ``h > k``. It never
    exceeds ``n * eps`` with ``eps = 1 - margin``.
    """

    y: np.ndarray
    pairing: np.ndarray    # [h, k] = <z_h, y_k>
    eps: float
    band: float


def norming_system(space: Space, witness: JWitness, tol: float = TOL_ALG) -> NormingSystem:
    """Norming functionals ``y_k`` of ``sum_{h<=k} z_h - sum_{h>k} z_h``.

    Raises
    ------
    PreconditionError
        If a signed sum vanishes (the witness has margin 0).
    CheckFailed
        If the band inequalities fail by more than ``tol``.
    """
    if witness.space != space:
        raise DimensionMismatch("witness lives in a different space")
    n = witness.n
    s = signed_sums(witness.z)
    y = np.empty_like(s)
    for k in range(n):
        if not np.any(s[k]):
            raise PreconditionError(f"signed sum {k + 1} is zero; witness too weak")
        y[k] = _norming(space, s[k])
    pairing = witness.z @ y.T
    signs = np.where(np.triu(np.ones((n, n), dtype=bool)), 1.0, -1.0)
    band = float(np.max(1.0 - signs * pairing))
    eps = 1.0 - witness.margin
    if band > n * eps + tol:
        raise CheckFailed(f"band {band!r} exceeds n*eps = {n * eps!r}")
    return NormingSystem(y, pairing, eps, max(band, 0.0))


def shifted_system(witness: JWitness, y: np.ndarray, tol: float = TOL_ALG) -> NearTriangularSystem:
    """Pair ``x_h = (z_1 + z_h)/2`` with the functionals ``y``.

    The realized band is at most ``n * (1 - margin)``.

    Raises
    ------
    PreconditionError
        If the realized band is ``>= 1/2``.
    CheckFailed
        If the band exceeds ``n * (1 - margin)`` by more than ``tol``.
    """
    z = witness.z
    n = witness.n
    y = np.asarray(y, dtype=float)
    x = 0.5 * (z[0] + z)
    alpha = x @ y.T
    band = pairing_band(alpha)
    if band >= 0.5:
        raise PreconditionError(f"band {band!r} >= 1/2: system not near-triangular")
    if band > n * (1.0 - witness.margin) + tol:
        raise CheckFailed(f"band {band!r} exceeds n*eps = {n * (1.0 - witness.margin)!r}")
    return NearTriangularSystem(witness.space, x, y, alpha, band, tol)


def distortion_coefficients(alpha: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve the correction systems for every ``h``.

    Returns ``(xi, det)`` where row ``h`` of ``xi`` solves
    ``sum_l alpha[l, k] xi_l + alpha[h, k] = [h <= k]`` for all ``k``.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = alpha.shape[0]
    rhs = np.triu(np.ones((n, n))) - alpha        # row h is the right-hand side
    lu = lu_factor(alpha.T)
    sol = lu_solve(lu, rhs.T)
    sol += lu_solve(lu, rhs.T - alpha.T @ sol)     # one refinement step
    det = float(np.prod(np.diag(lu[0])) * (-1) ** int(np.sum(lu[1] != np.arange(n))))
    return sol.T, det


def distortion_factorize(sys: NearTriangularSystem, det_floor: float = DET_FLOOR,
                         tol: float = TOL_ALG) -> Factorization:
    """Factor ``S_n`` as ``B A`` with ``A e_h = x_h + sum_l xi_l^(h) x_l``
    and ``B x = (<x, y_k>)_k``.

    Raises
    ------
    PreconditionError
        If ``det(alpha) < det_floor``.
    CheckFailed
        If the result misses ``S_n`` by more than ``tol`` or its quality
        exceeds ``(1 + max_h sum_l |xi_l^(h)|) * max_k |y_k|_*``.
    """
    n = sys.n
    det = float(np.linalg.det(sys.alpha))
    if not det >= det_floor:
        raise PreconditionError(f"det(alpha) = {det!r} below floor {det_floor!r}")
    xi, _ = distortion_coefficients(sys.alpha)
    A = sys.x.T @ (xi.T + np.eye(n))
    fact = verify_factorization(
        LinOperator(A, make_lp(1, n), sys.space),
        LinOperator(sys.y, sys.space, make_lp(INF, n)), n, tol)
    if not fact.valid:
        raise CheckFailed(f"defect {fact.defect!r} > {tol!r}")
    dual = dual_space(sys.space)
    budget = (1.0 + float(np.abs(xi).sum(axis=1).max())) * max(_norm(dual, v) for v in sys.y)
    if fact.sigma > budget + tol:
        raise CheckFailed(f"sigma {fact.sigma!r} exceeds budget {budget!r}")
    return fact


def theorem1_pipeline(space: Space, witness: JWitness, tol: float = TOL_ALG,
                      tol_pipeline: float = TOL_PIPELINE) -> Factorization:
    """Witness -> norming functionals -> shifted system -> factorization.

    Requires ``eps = 1 - margin <= 1/(n 2^(n+1))`` and checks
    ``sigma <= 1 + 2 n^2 eps``.

    Raises
    ------
    PreconditionError
        If ``eps`` is too large, or from the stages.
    CheckFailed
        If the quality bound fails.
    """
    n = witness.n
    eps = max(1.0 - witness.margin, 0.0)
    limit = 1.0 / (n * 2 ** (n + 1))
    if eps > limit + tol:
        raise PreconditionError(f"1 - margin = {eps!r} exceeds 1/(n 2^(n+1)) = {limit!r}")
    ns = norming_system(space, witness, tol)
    sys = shifted_system(witness, ns.y, tol)
    fact = distortion_factorize(sys, tol=tol)
    bound = 1.0 + 2.0 * n * n * eps
    if fact.sigma > bound + tol_pipeline:
        raise CheckFailed(f"sigma {fact.sigma!r} exceeds 1 + 2n^2 eps = {bound!r}")
    return fact
