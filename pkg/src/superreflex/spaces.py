"""Finite-dimensional normed spaces: ``l_p^d`` and finite l2-sums of them.

Vectors are plain 1-D ``numpy`` float arrays; a space descriptor only
knows how to measure them. Every function here is pure.

The exponent ``p`` is stored exactly: finite values as
:class:`fractions.Fraction`, infinity as the symbolic :data:`INF`, so that
conjugate exponents round-trip without floating error.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import DimensionMismatch, PreconditionError

__all__ = [
    "INF", "Lp", "L2Sum", "Space", "make_lp", "make_l2sum", "conjugate",
    "dual_space", "norm", "dual_norm", "norming_functional",
    "sample_unit_ball", "to_unit_ball", "as_vector", "parse_space",
    "format_space", "row_norms", "is_l1", "is_linf", "is_polyhedral",
]

TOL_ALG = 1e-9


class _Infinity:
    """Symbolic exponent p = infinity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

Exponent = Union[Fraction, _Infinity]


@dataclass(frozen=True)
class Lp:
    p: Exponent
    dim: int

    def __str__(self):
        return format_space(self)


@dataclass(frozen=True)
class L2Sum:
    inner: "Space"
    copies: int

    @property
    def dim(self) -> int:
        return self.copies * self.inner.dim

    def __str__(self):
        return format_space(self)


Space = Union[Lp, L2Sum]


def _exponent(p) -> Exponent:
    if p is INF:
        return INF
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return INF
        p = Fraction(p.strip())
    if isinstance(p, float) and math.isinf(p):
        if p < 0:
            raise PreconditionError("p out of range: -inf")
        return INF
    try:
        q = Fraction(p)
    except (TypeError, ValueError) as exc:
        raise PreconditionError(f"not an exponent: {p!r}") from exc
    if q < 1:
        raise PreconditionError(f"p out of range: {p} < 1")
    return q


def make_lp(p, dim: int) -> Lp:
    """Return the descriptor of ``l_p^dim``; ``p`` may be ``math.inf``,
    ``"inf"`` or :data:`INF`."""
    q = _exponent(p)
    if int(dim) != dim or dim < 1:
        raise PreconditionError(f"dimension must be a positive integer, got {dim}")
    return Lp(q, int(dim))


def make_l2sum(inner: Space, copies: int) -> L2Sum:
    """l2-direct sum of ``copies`` copies of ``inner``: the finite-rank
    stand-in for the Bochner space ``[L_2, X]``."""
    if int(copies) != copies or copies < 1:
        raise PreconditionError(f"copies must be a positive integer, got {copies}")
    return L2Sum(inner, int(copies))


def conjugate(p: Exponent) -> Exponent:
    if p is INF:
        return Fraction(1)
    if p == 1:
        return INF
    return p / (p - 1)


def dual_space(space: Space) -> Space:
    if isinstance(space, Lp):
        return Lp(conjugate(space.p), space.dim)
    return L2Sum(dual_space(space.inner), space.copies)


def is_l1(space: Space) -> bool:
    return isinstance(space, Lp) and space.p == 1


def is_linf(space: Space) -> bool:
    return isinstance(space, Lp) and space.p is INF


def is_polyhedral(space: Space) -> bool:
    """True when the unit ball is a polytope (so norm problems are LPs)."""
    if isinstance(space, Lp):
        return space.p is INF or space.p == 1
    return space.copies == 1 and is_polyhedral(space.inner)


def as_vector(space: Space, v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != space.dim:
        raise DimensionMismatch(
            f"expected a vector of length {space.dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError("vector has non-finite entries")
    return arr


def _lp_norm(p: Exponent, v: np.ndarray) -> float:
    a = np.abs(v)
    if a.size == 0:
        return 0.0
    if p is INF:
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(math.sqrt(np.dot(a, a)))
    top = a.max()
    if top == 0.0:
        return 0.0
    pf = float(p)
    # scaled to avoid overflow for large p
    return float(top * np.sum((a / top) ** pf) ** (1.0 / pf))


def _norm(space: Space, v: np.ndarray) -> float:
    if isinstance(space, Lp):
        return _lp_norm(space.p, v)
    blocks = v.reshape(space.copies, space.inner.dim)
    return float(np.linalg.norm([_norm(space.inner, b) for b in blocks]))


def row_norms(space: Space, M: np.ndarray) -> np.ndarray:
    """Norms of the rows of ``M`` (vectorized :func:`norm`)."""
    M = np.asarray(M, dtype=float)
    if isinstance(space, L2Sum):
        blocks = M.reshape(M.shape[0], space.copies, space.inner.dim)
        inner = np.stack([row_norms(space.inner, blocks[:, i, :])
                          for i in range(space.copies)], axis=1)
        return np.sqrt(np.sum(inner * inner, axis=1))
    a = np.abs(M)
    p = space.p
    if p is INF:
        return a.max(axis=1)
    if p == 1:
        return a.sum(axis=1)
    top = a.max(axis=1)
    safe = np.where(top > 0, top, 1.0)
    pf = float(p)
    return top * np.sum((a / safe[:, None]) ** pf, axis=1) ** (1.0 / pf)


def norm(space: Space, v) -> float:
    """Norm of ``v`` in ``space`` (exact formula, no estimation)."""
    return _norm(space, as_vector(space, v))


def dual_norm(space: Space, y) -> float:
    """Norm of the functional ``y`` in the dual of ``space``."""
    return _norm(dual_space(space), as_vector(space, y))


def _norming(space: Space, v: np.ndarray) -> np.ndarray:
    if isinstance(space, Lp):
        p = space.p
        if p is INF:
            i = int(np.argmax(np.abs(v)))  # lowest maximizing index
            y = np.zeros_like(v)
            y[i] = np.sign(v[i])
            return y
        if p == 1:
            return np.sign(v)
        u = v / _lp_norm(p, v)
        return np.sign(u) * np.abs(u) ** (float(p) - 1.0)
    blocks = v.reshape(space.copies, space.inner.dim)
    norms = np.array([_norm(space.inner, b) for b in blocks])
    total = float(np.linalg.norm(norms))
    out = np.zeros_like(blocks)
    for i, b in enumerate(blocks):
        if norms[i] > 0:
            out[i] = (norms[i] / total) * _norming(space.inner, b)
    return out.reshape(-1)


def norming_functional(space: Space, v) -> np.ndarray:
    """Return ``y`` with ``dual_norm(y) == 1`` and ``<v, y> == norm(v)``.

    Raises
    ------
    PreconditionError
        If ``v`` is the zero vector.
    """
    v = as_vector(space, v)
    if not np.any(v):
        raise PreconditionError("zero vector has no norming functional")
    return _norming(space, v)


def to_unit_ball(space: Space, v) -> np.ndarray:
    """Radial projection onto the closed unit ball."""
    v = as_vector(space, v)
    r = _norm(space, v)
    return v / r if r > 1.0 else v


def sample_unit_ball(space: Space, seed) -> np.ndarray:
    """Draw a point of the unit ball (full support, not uniform).

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`,
    including an existing ``Generator``.
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(space.dim)
    r = _norm(space, g)
    while r == 0.0:
        g = rng.standard_normal(space.dim)
        r = _norm(space, g)
    radius = rng.random() ** (1.0 / space.dim)
    return g * (radius / r)


_LP_RE = re.compile(r"^lp:([^:()]+):(\d+)$")


def _format_p(p: Exponent) -> str:
    if p is INF:
        return "inf"
    if p.denominator == 1:
        return str(p.numerator)
    f = float(p)
    if Fraction(f) == p:
        return repr(f)
    return f"{p.numerator}/{p.denominator}"


def format_space(space: Space) -> str:
    """Inverse of :func:`parse_space`."""
    if isinstance(space, Lp):
        return f"lp:{_format_p(space.p)}:{space.dim}"
    return f"l2sum:{space.copies}:({format_space(space.inner)})"


def parse_space(text: str) -> Space:
    """Parse ``lp:<p>:<dim>`` or ``l2sum:<copies>:(<inner>)``."""
    s = text.strip()
    m = _LP_RE.match(s)
    if m:
        return make_lp(m.group(1), int(m.group(2)))
    if s.startswith("l2sum:"):
        head, sep, rest = s[len("l2sum:"):].partition(":")
        if sep and head.isdigit() and rest.startswith("(") and rest.endswith(")"):
            return make_l2sum(parse_space(rest[1:-1]), int(head))
    raise PreconditionError(f"cannot parse space spec {text!r}")
