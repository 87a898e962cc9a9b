"""From a factorization of ``S_N`` to a J-witness.

Given ``S_N = B A`` through ``X`` with ``||A|| = 1`` and ``||B|| = sigma``,
every interval family ``F`` gets the norm of its minimal point
``x(F)`` in

    S(F) = { sum_h xi_h x_h : |xi_h| <= 2,  <x, y_l> = (-1)^j for l in F_j }.

Prefix norms grow with ``j`` and stay in ``[1/sigma, 2m]``, so two
consecutive prefixes share a geometric bucket; colorings built from this
are made constant on a large subset ``M`` by Ramsey extraction, and a fixed
overlapping pattern of families on ``M`` yields the witness.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CheckFailed, PreconditionError
from .jconvexity import JWitness, make_witness, signed_sums
from .minnorm import TOL_FEAS, TOL_SOLVE, MinNormResult, MinNormSolver
from .operators import Factorization, norm_from_l1, norm_to_linf
from .ramsey import (
    IntervalFamily, NBound, choose_m, iter_monochromatic, project, theorem2_N_bound,
)
from .spaces import Space, _norm, format_space

__all__ = [
    "ConstrainedMinProblem", "BucketScheme", "ExtractionReport", "feasible_point",
    "xF_minimize", "bucket_index", "coloring_f", "coloring_g", "build_patterns",
    "ExtractionContext", "extract_witness", "report_to_json",
]

log = logging.getLogger(__name__)

BOX = 2.0


@dataclass(frozen=True, eq=False)
class ConstrainedMinProblem:
    """``S(F)`` for vectors ``x`` (columns, shape ``(dim, N)``) and
    functionals ``y`` (rows, shape ``(N, dim)``)."""

    space: Space
    x_vectors: np.ndarray
    y_vectors: np.ndarray
    family: IntervalFamily
    box: float = BOX

    def __post_init__(self):
        d = self.space.dim
        if self.x_vectors.ndim != 2 or self.x_vectors.shape[0] != d:
            raise PreconditionError("x_vectors must have shape (dim, N)")
        if self.y_vectors.shape != (self.x_vectors.shape[1], d):
            raise PreconditionError("y_vectors must have shape (N, dim)")
        if self.family.intervals and self.family.intervals[-1][1] > self.x_vectors.shape[1]:
            raise PreconditionError("family reaches beyond N")

    @property
    def pairing(self) -> np.ndarray:
        return self.y_vectors @ self.x_vectors


def _violation(prob: ConstrainedMinProblem, xi: np.ndarray) -> float:
    C = prob.pairing
    worst = max(0.0, float(np.max(np.abs(xi))) - prob.box)
    for j, (l, r) in enumerate(prob.family.intervals, 1):
        worst = max(worst, float(np.max(np.abs(C[l - 1:r] @ xi - (-1) ** j))))
    return worst


def feasible_point(prob: ConstrainedMinProblem, tol: float = TOL_FEAS) -> np.ndarray:
    """Coefficients ``-1`` at ``l_1`` and ``2 (-1)^i`` at ``l_i`` (``i >= 2``).

    With a triangular pairing this point lies in ``S(F)`` and has norm at
    most ``2m - 1``.

    Raises
    ------
    CheckFailed
        If the point is infeasible, which means the pairing is not
        triangular.
    """
    xi = np.zeros(prob.x_vectors.shape[1])
    for i, (l, _) in enumerate(prob.family.intervals, 1):
        xi[l - 1] = -1.0 if i == 1 else 2.0 * (-1) ** i
    bad = _violation(prob, xi)
    if bad > tol:
        raise CheckFailed(f"constructed point violates S(F) by {bad!r}; defective factorization")
    return xi


def xF_minimize(prob: ConstrainedMinProblem, tol_solve: float = TOL_SOLVE,
                solver: MinNormSolver | None = None) -> MinNormResult:
    """Minimal-norm point of ``S(F)`` with a certified lower bound.

    Raises
    ------
    BudgetExhausted
        If the certified gap exceeds ``tol_solve``.
    """
    feasible_point(prob)
    if solver is None:
        solver = MinNormSolver(prob.space, prob.x_vectors, prob.pairing, prob.box, tol_solve)
    return solver.solve(prob.family.intervals)


@dataclass(frozen=True)
class BucketScheme:
    """Buckets ``A_i = (1/sigma) [r^(i-1), r^i)``, ``r = 1/(1-eps)``,
    ``i = 1..m-1``, covering ``[1/sigma, 2m]``."""

    sigma: float
    eps: float
    m: int

    def __post_init__(self):
        if not (0 < self.eps < 1) or self.sigma <= 0 or self.m < 2:
            raise PreconditionError("need 0 < eps < 1, sigma > 0, m >= 2")
        s, e = Fraction(self.sigma), Fraction(self.eps)
        if not 2 * self.m * s * (1 - e) ** (self.m - 1) < 1:
            raise PreconditionError("buckets do not cover [1/sigma, 2m]: m too small")

    @property
    def ratio(self) -> float:
        return 1.0 / (1.0 - self.eps)

    def edge(self, i: int) -> float:
        """Left end of ``A_{i+1}`` (``edge(0) = 1/sigma``)."""
        return self.ratio ** i / self.sigma

    def edges(self) -> list[float]:
        return [self.edge(i) for i in range(self.m)]


def bucket_index(value: float, scheme: BucketScheme, tol: float = TOL_SOLVE,
                 edges: list[float] | None = None) -> int:
    """The ``i`` with ``value`` in ``A_i`` (left-closed, right-open).

    Values within ``tol`` below ``1/sigma`` count as bucket 1.

    Raises
    ------
    PreconditionError
        If ``value`` lies outside ``[1/sigma, 2m]`` beyond ``tol``.
    """
    lo = scheme.edge(0)
    if value < lo - tol or value > 2 * scheme.m + tol:
        raise PreconditionError(
            f"value {value!r} outside [1/sigma, 2m] = [{lo!r}, {2 * scheme.m}]")
    if value < lo:
        return 1
    i = bisect.bisect_right(edges if edges is not None else scheme.edges(), value)
    return min(i, scheme.m - 1)


class ExtractionContext:
    """Prefix values ``||x(P_j F)||`` memoized by endpoint tuples.

    Runs the checks that every solved prefix must pass: the size bounds
    ``1/sigma <= value <= 2j - 1``, monotonicity along prefixes, and
    distance from the interior bucket boundaries.
    """

    def __init__(self, solver: MinNormSolver, scheme: BucketScheme,
                 tol_solve: float = TOL_SOLVE):
        self.solver, self.scheme, self.tol = solver, scheme, tol_solve
        self.guard = 10 * tol_solve
        self.edges = scheme.edges()
        self.interior = self.edges[1:scheme.m - 1]
        self.buckets: dict[tuple[int, ...], int] = {}

    def result(self, endpoints: tuple[int, ...]) -> MinNormResult:
        key = tuple(zip(endpoints[0::2], endpoints[1::2]))
        hit = self.solver.cache.get(key)
        if hit is not None:
            return hit
        res = self.solver.solve(key)
        self._check(key, res)
        return res

    def _check(self, key, res: MinNormResult):
        v, j = res.value, len(key)
        if v < self.scheme.edge(0) - self.tol or v > 2 * j - 1 + self.tol:
            raise CheckFailed(f"size bound violated for {key}: value {v!r}")
        if j > 1:
            prev = self.result(sum(key[:-1], ())).value
            if prev > v + self.tol:
                raise CheckFailed(f"prefix values decrease at {key}: {prev!r} > {v!r}")
        for b in self.interior:
            if abs(v - b) <= self.guard:
                raise CheckFailed(f"value {v!r} of {key} within {self.guard} of bucket edge {b!r}")

    def value(self, endpoints) -> float:
        return self.result(tuple(endpoints)).value

    def bucket(self, endpoints) -> int:
        endpoints = tuple(endpoints)
        i = self.buckets.get(endpoints)
        if i is None:
            i = bucket_index(self.value(endpoints), self.scheme, self.tol, self.edges)
            self.buckets[endpoints] = i
        return i


def _endpoints(fam) -> tuple[int, ...]:
    return fam.endpoints() if isinstance(fam, IntervalFamily) else tuple(fam)


def coloring_f(fam, ctx: ExtractionContext) -> int:
    """Least ``j >= 2`` whose prefixes ``P_{j-1}`` and ``P_j`` share a bucket.

    ``fam`` is an :class:`IntervalFamily` or its sorted endpoint tuple.

    Raises
    ------
    CheckFailed
        If no such ``j`` exists.
    """
    pts = _endpoints(fam)
    m = len(pts) // 2
    prev = ctx.bucket(pts[:2])
    for j in range(2, m + 1):
        cur = ctx.bucket(pts[:2 * j])
        if cur == prev:
            return j
        prev = cur
    raise CheckFailed(f"no repeated bucket along the prefixes of {pts}")


def coloring_g(fam, j0: int, ctx: ExtractionContext) -> int:
    """Bucket of ``||x(P_{j0} F)||``."""
    pts = _endpoints(fam)
    return ctx.bucket(pts[:2 * j0])


def build_patterns(M: Sequence[int], n: int, m: int
                   ) -> tuple[list[IntervalFamily], list[IntervalFamily]]:
    """Families ``F^(1..n)`` and ``E^(1..n)`` over ``M = (p_1, ..., p_{2nm+1})``.

    ``F^(h)`` are shifted overlapping patterns; ``E^(k)_j`` is the
    intersection of ``F^(h)_{j+1}`` over ``h <= k`` with ``F^(h)_j`` over
    ``h > k``, and ``E^(k)_m = [p_{2nm}, p_{2nm+1}]``.
    """
    pts = tuple(sorted(M))
    if n < 2 or m < 2:
        raise PreconditionError("need n >= 2 and m >= 2")
    if len(pts) != 2 * n * m + 1:
        raise PreconditionError(f"need exactly 2nm+1 = {2 * n * m + 1} points, got {len(pts)}")

    def p(i):
        return pts[i - 1]

    F, E = [], []
    for h in range(1, n + 1):
        ivs = [(p(h), p(n + 2 * h - 1))]
        for j in range(2, m):
            ivs.append((p(n * (2 * j - 3) + 2 * h), p(n * (2 * j - 1) + 2 * h - 1)))
        ivs.append((p(n * (2 * m - 3) + 2 * h), p(n * (2 * m - 1) + h)))
        F.append(IntervalFamily(pts, tuple(ivs)))
    for k in range(1, n + 1):
        ivs = [(p(n * (2 * j - 1) + 2 * k), p(n * (2 * j - 1) + 2 * k + 1)) for j in range(1, m)]
        ivs.append((p(2 * n * m), p(2 * n * m + 1)))
        E.append(IntervalFamily(pts, tuple(ivs)))
    return F, E


@dataclass(eq=False)
class ExtractionReport:
    n: int
    eps: float
    sigma: float
    m: int
    N: int
    j0: int
    i0: int
    L: tuple[int, ...]
    M: tuple[int, ...]
    witness: JWitness
    slack: float
    solver_gaps: list[float]
    F_values: list[float]
    E_values: list[float]
    chain: list[float]
    n_bound: NBound
    solves: int
    log: list[str] = field(default_factory=list)


def _normalize(fact: Factorization):
    A = np.array(fact.A.matrix)
    B = np.array(fact.B.matrix)
    a = norm_from_l1(fact.A)
    if a <= 0:
        raise PreconditionError("A is zero")
    return A / a, B * a, float(norm_to_linf(fact.B)) * a


def extract_witness(fact: Factorization, n: int, eps: float, c: int = 2,
                    budget: int = 10 ** 7, tol_solve: float = TOL_SOLVE) -> ExtractionReport:
    """Extract a witness of margin about ``1 - eps`` from a factorization.

    Raises
    ------
    PreconditionError
        On ``n < 2``, an invalid factorization, a ground set below
        ``2nm + 1``, or when no monochromatic ``2nm+1``-subset exists in
        the given ground set.
    CheckFailed
        If an intermediate check fails.
    BudgetExhausted
        If the Ramsey search exceeds ``budget`` colorings or a solve
        cannot be certified.
    """
    if n < 2:
        raise PreconditionError("n must be >= 2")
    if not 0 < eps < 1:
        raise PreconditionError("need 0 < eps < 1")
    if not fact.valid:
        raise PreconditionError(f"factorization defect {fact.defect!r} exceeds {fact.tol!r}")
    N = fact.n
    A, B, sigma = _normalize(fact)
    sigma = max(sigma, 1.0)
    m = choose_m(sigma, eps)
    size = 2 * n * m + 1
    if N < size:
        raise PreconditionError(f"ground set too small: N = {N} < 2nm+1 = {size}")
    notes = [f"space={format_space(fact.space)} N={N} n={n} eps={eps} sigma={sigma!r} m={m}"]
    scheme = BucketScheme(sigma, eps, m)
    solver = MinNormSolver(fact.space, A, B @ A, BOX, tol_solve)
    ctx = ExtractionContext(solver, scheme, tol_solve)

    # two Ramsey stages: f constant on L, then g constant on M inside L
    found = None
    for first in iter_monochromatic(N, 2 * m, lambda s: coloring_f(s, ctx), size, budget):
        j0 = first.color
        second = next(iter_monochromatic(first.subset, 2 * m,
                                         lambda s: coloring_g(s, j0, ctx), size, budget), None)
        if second is not None:
            found = first.subset, j0, second.subset, second.color
            break
    if found is None:
        raise PreconditionError(f"no subset of size {size} monochromatic for both colorings "
                                f"in a ground set of size {N}")
    L, j0, M, i0 = found
    notes.append(f"j0={j0} i0={i0} M={M}")

    F, E = build_patterns(M, n, m)
    for fam in F + E:
        if coloring_f(fam, ctx) != j0 or coloring_g(fam, j0, ctx) != i0:
            raise CheckFailed(f"pattern {fam.intervals} has colors off (j0, i0)")
    F_res = [ctx.result(fam.endpoints()[:2 * j0]) for fam in F]
    E_res = [ctx.result(fam.endpoints()[:2 * (j0 - 1)]) for fam in E]
    lo_i0 = scheme.edge(i0 - 1)
    hi_i0 = scheme.edge(i0)
    for r in F_res + E_res:
        if not lo_i0 - tol_solve <= r.value < hi_i0 + tol_solve:
            raise CheckFailed(f"value {r.value!r} not in bucket {i0}")

    # signed averages of the F-minimizers lie in S(P_{j0-1} E^(k))
    xis = np.array([r.xi for r in F_res])
    for k in range(1, n + 1):
        u = (-xis[:k].sum(axis=0) + xis[k:].sum(axis=0)) / n
        prob = ConstrainedMinProblem(fact.space, A, B, project(E[k - 1], j0 - 1), BOX)
        bad = _violation(prob, u)
        if bad > TOL_FEAS:
            raise CheckFailed(f"signed average {k} misses S(P_(j0-1) E^({k})) by {bad!r}")

    scale = sigma * (1.0 - eps) ** i0
    z = scale * (A @ xis.T).T
    gaps = [r.gap for r in solver.cache.values()]
    slack = scale * max(r.gap for r in F_res + E_res) + TOL_FEAS
    s = signed_sums(z)
    chain = []
    for k in range(n):
        lhs = _norm(fact.space, s[k])
        rhs = n * scale * E_res[k].lower
        if lhs < rhs - n * TOL_FEAS or lhs < n * (1 - eps) - n * slack:
            raise CheckFailed(f"final chain fails at k={k + 1}: {lhs!r}")
        chain.append(lhs)
    witness = make_witness(fact.space, z)
    if witness.margin < (1 - eps) - slack:
        raise CheckFailed(f"margin {witness.margin!r} below 1 - eps - slack")
    return ExtractionReport(
        n=n, eps=eps, sigma=sigma, m=m, N=N, j0=j0, i0=i0, L=tuple(L), M=tuple(M),
        witness=witness, slack=slack, solver_gaps=gaps,
        F_values=[r.value for r in F_res], E_values=[r.value for r in E_res],
        chain=chain, n_bound=theorem2_N_bound(n, sigma, eps, c), solves=solver.solves,
        log=notes)


def report_to_json(rep: ExtractionReport) -> dict:
    from .jconvexity import witness_to_json

    return {
        "n": rep.n, "eps": rep.eps, "sigma": rep.sigma, "m": rep.m, "N": rep.N,
        "j0": rep.j0, "i0": rep.i0, "L": list(rep.L), "M": list(rep.M),
        "witness": witness_to_json(rep.witness), "slack": rep.slack,
        "max_solver_gap": max(rep.solver_gaps) if rep.solver_gaps else 0.0,
        "F_values": rep.F_values, "E_values": rep.E_values, "chain": rep.chain,
        "N_bound": rep.n_bound.expression, "solves": rep.solves,
    }
