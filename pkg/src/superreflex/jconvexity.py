"""J-convexity: witness margins, searches, and certified grid enclosures.

For ``z_1..z_n`` in the unit ball the *margin* is

    (1/n) * min_k || z_1 + ... + z_k - z_{k+1} - ... - z_n ||,

and in finite dimensions ``J_n(X) = 1 - sup margin``. So any witness gives
an upper bound on ``J_n(X)`` and a certified bound on the supremum gives a
lower bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import BudgetExhausted, PreconditionError
from .spaces import (
    INF, TOL_ALG, Space, _norm, _norming, as_vector, dual_space, format_space,
    make_lp, parse_space, row_norms, sample_unit_ball,
)

__all__ = [
    "JWitness", "GridEnclosure", "j_margin", "signed_sums", "j_upper_search",
    "j_certify_grid", "witness_average_block", "witness_repeat_block",
    "lq_example_witness", "real_line_value", "perturbed_witness",
    "witness_to_json", "witness_from_json",
]


@dataclass(frozen=True, eq=False)
class JWitness:
    space: Space
    z: np.ndarray          # shape (n, dim)
    margin: float

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def j_upper(self) -> float:
        """Upper bound ``1 - margin`` on ``J_n`` implied by this witness."""
        return 1.0 - self.margin


def _as_witness_array(space: Space, z) -> np.ndarray:
    arr = np.asarray([as_vector(space, v) for v in z], dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise PreconditionError("a witness needs at least one vector")
    return arr


def signed_sums(z: np.ndarray) -> np.ndarray:
    """Row ``k-1`` is ``sum_{h<=k} z_h - sum_{h>k} z_h`` for ``k = 1..n``."""
    prefix = np.cumsum(z, axis=0)
    return 2.0 * prefix - prefix[-1]


def _margin(space: Space, z: np.ndarray) -> float:
    s = signed_sums(z)
    return min(_norm(space, row) for row in s) / z.shape[0]


def j_margin(space: Space, z: Sequence, tol: float = TOL_ALG) -> float:
    """Margin of ``z`` (a sequence of vectors or an ``(n, dim)`` array).

    Raises
    ------
    PreconditionError
        If some ``z_h`` lies outside the unit ball by more than ``tol``.
    """
    arr = _as_witness_array(space, z)
    for h, v in enumerate(arr, 1):
        if _norm(space, v) > 1.0 + tol:
            raise PreconditionError(f"z_{h} has norm {_norm(space, v)!r} > 1")
    return _margin(space, arr)


def make_witness(space: Space, z) -> JWitness:
    arr = _as_witness_array(space, z)
    return JWitness(space, arr, j_margin(space, arr))


# --------------------------------------------------------------------------
# search

def _project(space: Space, v: np.ndarray) -> np.ndarray:
    r = _norm(space, v)
    return v / r if r > 1.0 else v


def _ascent(space: Space, z: np.ndarray, iters: int, step0: float):
    n = z.shape[0]
    dual = dual_space(space)
    sign = np.ones(n)
    best_z, best = z.copy(), _margin(space, z)
    for t in range(1, iters + 1):
        s = signed_sums(z)
        norms = [_norm(space, row) for row in s]
        k = int(np.argmin(norms))
        if norms[k] == 0.0:
            break
        # primal direction increasing the active norm: norming vector of its
        # norming functional
        u = _norming(dual, _norming(space, s[k]))
        sign[:] = -1.0
        sign[:k + 1] = 1.0
        eta = step0 / math.sqrt(t)
        for h in range(n):
            z[h] = _project(space, z[h] + eta * sign[h] * u)
        m = _margin(space, z)
        if m > best:
            best, best_z = m, z.copy()
    return best_z, best


def _sign_pattern_start(space: Space, n: int) -> np.ndarray:
    z = np.zeros((n, space.dim))
    z[:, :n] = np.where(np.arange(n)[None, :] < np.arange(1, n + 1)[:, None], -1.0, 1.0)
    return np.array([v / _norm(space, v) for v in z])


def j_upper_search(space: Space, n: int, seed: int = 0, restarts: int = 8,
                   iters: int = 200, step: float = 0.5) -> JWitness:
    """Best witness found by random restarts of projected ascent.

    Restart 0 starts from the normalized sign-pattern witness in the first
    ``n`` coordinates (when ``dim >= n``), the others from independent
    unit-ball samples. At every step the minimizing split ``k`` is pushed
    outward along the norming direction and each vector is radially
    projected back onto the ball.
    Ties between restarts go to the lowest index.
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    seeds = np.random.SeedSequence(seed).spawn(restarts)
    if n == 1:
        rng = np.random.default_rng(seeds[0])
        v = sample_unit_ball(space, rng)
        while not np.any(v):
            v = sample_unit_ball(space, rng)
        return make_witness(space, [v / _norm(space, v)])
    best_z, best = None, -1.0
    for r in range(restarts):
        if r == 0 and space.dim >= n:
            z = _sign_pattern_start(space, n)
        else:
            rng = np.random.default_rng(seeds[r])
            z = np.array([sample_unit_ball(space, rng) for _ in range(n)])
        z, m = _ascent(space, z, iters, step)
        if m > best:
            best_z, best = z, m
    return make_witness(space, best_z)


# --------------------------------------------------------------------------
# certified enclosure

@dataclass(frozen=True, eq=False)
class GridEnclosure:
    """``sup margin`` lies in ``[lo, hi]``; hence ``J_n`` in ``[1-hi, 1-lo]``."""

    lo: float
    hi: float
    witness: JWitness | None
    step: float
    radius: float

    @property
    def j_interval(self) -> tuple[float, float]:
        return 1.0 - self.hi, 1.0 - self.lo


def _lattice(space: Space, step: float, reach: float):
    """Integer coordinates ``c`` with ``||step * c|| <= reach``, as a dense
    boolean mask over the box ``[-K, K]^d``."""
    d = space.dim
    K = int(math.floor(reach / step + 1e-12))
    axes = [np.arange(-K, K + 1)] * d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    return K, grid, row_norms(space, step * grid).reshape((2 * K + 1,) * d)


def j_certify_grid(space: Space, n: int, step: float,
                   budget: float = 5e9) -> GridEnclosure:
    """Certified enclosure of the supremal margin by an exhaustive lattice.

    The candidate set for each ``z_h`` is ``U_X`` intersected with the
    lattice ``step * Z^d``. Rounding each coordinate toward zero maps any
    ``u`` in ``U_X`` to a lattice point still in ``U_X`` (the norms here are
    monotone in ``|coordinates|``) at distance at most
    ``r = ||(step, ..., step)||``. The margin moves by at most ``r`` when
    every ``z_h`` moves by at most ``r``, so ``sup <= lo + r``.

    The lattice maximum ``lo`` is found exactly by a max-min dynamic program
    over prefix sums: for a fixed total ``T`` the value of a path of
    prefix sums ``P_1..P_n = T`` is ``min_k ||2 P_k - T||``.

    Raises
    ------
    BudgetExhausted
        If the estimated work exceeds ``budget`` elementary updates.
    """
    if n < 1 or step <= 0:
        raise PreconditionError("need n >= 1 and step > 0")
    d = space.dim
    # every DP layer touches the whole box, so refuse before allocating it
    box = float(2 * math.floor(n / step + 1e-12) + 1) ** d
    if box * n > budget:
        raise BudgetExhausted(f"grid certification needs > {box * n:.3g} updates > budget {budget:.3g}")
    _, _, ball_norms = _lattice(space, step, 1.0)
    moves = ball_norms <= 1.0 + 1e-12
    Kb = moves.shape[0] // 2
    Kr, states, state_norms = _lattice(space, step, float(n))
    reachable = state_norms <= n + 1e-9
    work = float(reachable.sum()) * n * float(moves.sum()) * float(reachable.sum())
    if work > budget:
        raise BudgetExhausted(f"grid certification needs ~{work:.3g} updates > budget {budget:.3g}")
    shape = state_norms.shape
    origin = (Kr,) * d

    # ||2P - T|| for every lattice point P, given T (by offsets)
    def objective(t_idx):
        t = np.array(t_idx) - Kr
        return row_norms(space, step * (2 * states - t)).reshape(shape)

    def run_dp(obj):
        val = np.full(shape, -np.inf)
        val[origin] = np.inf
        layers = [val]
        for _ in range(n):
            spread = ndimage.maximum_filter(val, footprint=moves, mode="constant", cval=-np.inf)
            val = np.minimum(spread, obj)
            val[~reachable] = -np.inf
            layers.append(val)
        return layers

    best, best_t = -np.inf, None
    # margin is invariant under z -> -z, so totals T and -T agree
    seen = set()
    for t_idx in zip(*np.nonzero(reachable)):
        neg = tuple(2 * Kr - i for i in t_idx)
        if neg in seen:
            continue
        seen.add(tuple(int(i) for i in t_idx))
        obj = objective(t_idx)
        value = run_dp(obj)[-1][t_idx]
        if value > best:
            best, best_t = value, t_idx
    lo = float(best) / n
    layers = run_dp(objective(best_t))
    # backtrack one optimal path
    offsets = np.argwhere(moves) - Kb
    path = [np.array(best_t)]
    target = best
    for k in range(n, 0, -1):
        prev = layers[k - 1]
        cur = path[-1]
        for off in offsets:
            q = cur - off
            if np.all(q >= 0) and np.all(q < shape[0]) and prev[tuple(q)] >= target:
                path.append(q)
                break
    pts = [(p - Kr) * step for p in reversed(path)]
    z = np.diff(np.array(pts), axis=0)
    witness = make_witness(space, z) if len(z) == n else None
    radius = _norm(space, np.full(d, step))
    return GridEnclosure(lo, lo + radius + 1e-12, witness, step, radius)


# --------------------------------------------------------------------------
# witness transforms

def witness_average_block(z, m: int) -> np.ndarray:
    """Average consecutive blocks of ``m`` vectors (``n*m`` -> ``n``)."""
    arr = np.asarray(z, dtype=float)
    if m < 1 or arr.shape[0] % m:
        raise PreconditionError(f"length {arr.shape[0]} is not a multiple of m={m}")
    return arr.reshape(arr.shape[0] // m, m, -1).mean(axis=1)


def witness_repeat_block(z, m: int) -> np.ndarray:
    """Repeat every vector ``m`` times in place (``n`` -> ``n*m``)."""
    if m < 1:
        raise PreconditionError("m must be >= 1")
    return np.repeat(np.asarray(z, dtype=float), m, axis=0)


# --------------------------------------------------------------------------
# explicit examples

def lq_example_witness(q, n: int) -> JWitness:
    """Sign-pattern witness in ``l_q^n``: ``x_h`` has ``h`` entries ``-1``
    followed by ``n-h`` entries ``+1``, scaled by ``n^{-1/q}``.

    The ``l_inf`` part of each signed sum has size ``n``, so the margin is
    at least ``n^{-1/q}``; for ``q = inf`` it is exactly 1.
    """
    space = make_lp(q, n)
    x = np.where(np.arange(n)[None, :] < np.arange(1, n + 1)[:, None], -1.0, 1.0)
    scale = 1.0 if space.p is INF else n ** (-1.0 / float(space.p))
    return make_witness(space, x * scale)


def real_line_value(n: int) -> Fraction:
    """Exact ``J_n(R) = 1 - 1/n``."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    return 1 - Fraction(1, n)


def perturbed_witness(n: int, eps: float, seed: int = 0, dim: int | None = None) -> JWitness:
    """Margin-1 ``l_inf`` witness with every coordinate moved by at most
    ``eps`` (then clipped to the ball); its margin is at least ``1 - eps``."""
    dim = n if dim is None else dim
    if dim < n:
        raise PreconditionError("dim must be >= n")
    rng = np.random.default_rng(seed)
    base = np.zeros((n, dim))
    base[:, :n] = lq_example_witness(INF, n).z
    if dim > n:
        base[:, n:] = rng.uniform(-1.0, 1.0, size=(n, dim - n))
    z = np.clip(base + rng.uniform(-eps, eps, size=base.shape), -1.0, 1.0)
    return make_witness(make_lp(INF, dim), z)


# --------------------------------------------------------------------------
# serialization

def witness_to_json(w: JWitness) -> dict:
    return {"space": format_space(w.space), "n": w.n, "z": w.z.tolist(), "margin": w.margin}


def witness_from_json(doc) -> JWitness:
    if isinstance(doc, str):
        doc = json.loads(doc)
    w = make_witness(parse_space(doc["space"]), doc["z"])
    if w.n != int(doc["n"]):
        raise PreconditionError("witness length does not match n")
    return w
