"""Tower arithmetic, Ramsey bounds, monochromatic search, interval families.

``P_0(m) = m`` and ``P_{g+1}(m) = 2^{P_g(m)}``. A :class:`TowerInt` stores
``(g, m)`` and compares exactly without ever materializing huge values.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterator, Sequence

from .errors import BudgetExhausted, PreconditionError

__all__ = [
    "TowerInt", "tower", "tower_cmp", "ramsey_upper", "choose_m", "NBound",
    "theorem2_N_bound", "IntervalFamily", "enumerate_interval_families",
    "project", "Monochromatic", "iter_monochromatic", "monochromatic_search",
]

_ABSORB_BELOW = 63


@functools.total_ordering
class TowerInt:
    """Lazy ``P_height(base)``.

    The normal form absorbs one exponentiation at a time while the base is
    below 63, so either ``height == 0`` or ``base >= 63``.
    """

    __slots__ = ("height", "base")

    def __init__(self, height: int, base: int):
        if height < 0 or base < 0:
            raise PreconditionError("height and base must be nonnegative")
        height, base = int(height), int(base)
        while height > 0 and base < _ABSORB_BELOW:
            base, height = 1 << base, height - 1
        self.height, self.base = height, base

    @property
    def is_exact(self) -> bool:
        return self.height == 0

    def value(self) -> int:
        if self.height:
            raise OverflowError(f"{self} is too large to materialize")
        return self.base

    def scaled_bound(self, c: int) -> "TowerInt":
        """A tower ``>= c * self`` (``c P_h(b) <= P_h(c b)`` for ``c >= 1``)."""
        if c < 1:
            raise PreconditionError("c must be >= 1")
        return TowerInt(self.height, c * self.base)

    def __repr__(self):
        return f"TowerInt({self.height}, {self.base})"

    def __str__(self):
        if self.height == 0:
            return str(self.base)
        return f"P_{self.height}({self.base})"

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return tower_cmp(self, other) == 0

    def __lt__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return tower_cmp(self, other) < 0

    __hash__ = None


def _coerce(x):
    if isinstance(x, TowerInt):
        return x
    if isinstance(x, int) and x >= 0:
        return TowerInt(0, x)
    return NotImplemented


def tower(g: int, m: int) -> TowerInt:
    """``P_g(m)`` in lazy form."""
    return TowerInt(g, m)


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def _cmp_int_tower(x: int, g: int, m: int) -> int:
    """Sign of ``x - P_g(m)``."""
    while True:
        if g == 0:
            return _sign(x - m)
        if x <= 0:
            return -1
        # 2^(L-1) <= x < 2^L, so x vs 2^y is decided by L-1 vs y,
        # a tie meaning x > 2^y unless x is itself a power of two
        L = x.bit_length()
        if x & (x - 1):
            return 1 if _cmp_int_tower(L - 1, g - 1, m) >= 0 else -1
        x, g = L - 1, g - 1


def tower_cmp(a, b) -> int:
    """Exact sign of ``a - b`` for towers or nonnegative integers."""
    a, b = _coerce(a), _coerce(b)
    ga, gb = a.height, b.height
    # 2^x is strictly monotone: peel common exponentiations
    drop = min(ga, gb)
    ga, gb = ga - drop, gb - drop
    if ga == 0:
        return _cmp_int_tower(a.base, gb, b.base)
    return -_cmp_int_tower(b.base, ga, a.base)


def ramsey_upper(k: int, l, r: int, c: int = 2) -> TowerInt:
    """The bound ``P_k(c l) >= R_k(l, r)``; ``c`` stands for ``c(r, k)``.

    ``l`` may be a :class:`TowerInt`, in which case ``c l`` is replaced by
    the tower ``>= c l`` from :meth:`TowerInt.scaled_bound`.
    """
    if k < 1 or r < 1 or c < 1:
        raise PreconditionError("need k, r, c >= 1")
    l = _coerce(l)
    if l is NotImplemented or l < 1:
        raise PreconditionError("l must be a positive integer or TowerInt")
    inner = l.scaled_bound(c)
    return TowerInt(k + inner.height, inner.base)


def _ratio_below_one(m: int, sigma: Fraction, eps: Fraction) -> bool:
    return 2 * m * sigma * (1 - eps) ** (m - 1) < 1


def choose_m(sigma, eps) -> int:
    """Least ``m`` with ``2 m sigma < (1/(1-eps))^(m-1)``.

    Decided in floating point away from ties and exactly with fractions
    near them.
    """
    sigma_f, eps_f = float(sigma), float(eps)
    if not (0.0 < eps_f < 1.0) or not sigma_f >= 1.0:
        raise PreconditionError("need 0 < eps < 1 and sigma >= 1")
    s, e = Fraction(sigma), Fraction(eps)
    rate = -math.log1p(-eps_f)

    def holds(m):
        gap = (m - 1) * rate - math.log(2 * m * sigma_f)
        if abs(gap) > 1e-9 * max(1.0, (m - 1) * rate):
            return gap > 0
        return _ratio_below_one(m, s, e)

    # 2 m sigma (1-eps)^(m-1) increases up to m ~ (1-eps)/eps, then
    # decreases, and is >= 2 at m = 1, so the solution set is a tail
    lo = max(1, int((1.0 - eps_f) / eps_f))
    hi = max(2, 2 * lo)
    while not holds(hi):
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class NBound:
    """Ground-set size sufficient for extraction, with its collapse."""

    m: int
    c: int
    inner: TowerInt       # >= R_{2m}(2nm+1, m)
    outer: TowerInt       # >= R_{2m}(inner, m)
    collapsed: TowerInt   # P_{4m}(c^2 (2m+1) n) >= outer
    expression: str


def theorem2_N_bound(n: int, sigma, eps, c: int = 2) -> NBound:
    """``N = R_2m(R_2m(2nm+1, m), m)`` bounded through :func:`ramsey_upper`."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    m = choose_m(sigma, eps)
    inner = ramsey_upper(2 * m, 2 * n * m + 1, m, c)
    outer = ramsey_upper(2 * m, inner, m, c)
    collapsed = tower(4 * m, c * c * (2 * m + 1) * n)
    if tower_cmp(inner, 2 * n * m + 1) < 0 or tower_cmp(outer, inner) < 0:
        raise AssertionError("tower bound is not monotone")
    if tower_cmp(outer, collapsed) > 0:
        raise AssertionError("collapse bound failed")
    expr = (f"R_{2 * m}(R_{2 * m}({2 * n * m + 1},{m}),{m}) <= {outer} "
            f"<= P_{4 * m}({c * c * (2 * m + 1)}*{n})")
    return NBound(m, c, inner, outer, collapsed, expr)


# --------------------------------------------------------------------------
# interval families

@dataclass(frozen=True)
class IntervalFamily:
    """Consecutive integer intervals ``[l_j, r_j]`` with endpoints in
    ``ground`` and ``l_j < r_j < l_{j+1}``."""

    ground: tuple[int, ...]
    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        ground = tuple(int(g) for g in self.ground)
        if any(a >= b for a, b in zip(ground, ground[1:])) or (ground and ground[0] < 1):
            raise PreconditionError("ground must be strictly increasing positive integers")
        members = set(ground)
        ivs = tuple((int(a), int(b)) for a, b in self.intervals)
        flat = [e for iv in ivs for e in iv]
        if any(a >= b for a, b in zip(flat, flat[1:])):
            raise PreconditionError("need l_j < r_j < l_{j+1}")
        if not members.issuperset(flat):
            raise PreconditionError("interval endpoints must lie in the ground set")
        object.__setattr__(self, "ground", ground)
        object.__setattr__(self, "intervals", ivs)

    @property
    def m(self) -> int:
        return len(self.intervals)

    def endpoints(self) -> tuple[int, ...]:
        return tuple(e for iv in self.intervals for e in iv)

    def interval(self, j: int) -> range:
        """Integer members of ``F_j`` (1-based)."""
        a, b = self.intervals[j - 1]
        return range(a, b + 1)

    @classmethod
    def from_subset(cls, ground: Sequence[int], subset: Sequence[int]) -> "IntervalFamily":
        pts = sorted(subset)
        if len(pts) % 2:
            raise PreconditionError("subset must have even size")
        return cls(tuple(ground), tuple(zip(pts[0::2], pts[1::2])))


def enumerate_interval_families(M: Sequence[int], m: int) -> Iterator[IntervalFamily]:
    """All families of ``m`` intervals over ``M`` in lexicographic order."""
    ground = tuple(sorted(M))
    if m < 1 or len(ground) < 2 * m:
        raise PreconditionError(f"need 1 <= m and |M| >= 2m = {2 * m}")
    for sub in itertools.combinations(ground, 2 * m):
        yield IntervalFamily(ground, tuple(zip(sub[0::2], sub[1::2])))


def project(fam: IntervalFamily, j: int) -> IntervalFamily:
    """The prefix ``(F_1, ..., F_j)``."""
    if not 1 <= j <= fam.m:
        raise PreconditionError(f"j must lie in 1..{fam.m}")
    return IntervalFamily(fam.ground, fam.intervals[:j])


# --------------------------------------------------------------------------
# monochromatic subsets

@dataclass(frozen=True)
class Monochromatic:
    subset: tuple[int, ...]
    color: Hashable


class _Colors:
    """Memoized coloring with an evaluation budget."""

    def __init__(self, coloring, budget):
        self.coloring, self.budget = coloring, budget
        self.cache, self.calls = {}, 0

    def __call__(self, sub: tuple[int, ...]):
        try:
            return self.cache[sub]
        except KeyError:
            pass
        self.calls += 1
        if self.calls > self.budget:
            raise BudgetExhausted(f"more than {self.budget} coloring evaluations")
        c = self.cache[sub] = self.coloring(sub)
        return c


def _uniform(colors: _Colors, subset: Sequence[int], k: int):
    """The common color of all k-subsets, or a sentinel if they differ."""
    seen = _MIXED
    for sub in itertools.combinations(subset, k):
        c = colors(sub)
        if seen is _MIXED:
            seen = c
        elif c != seen:
            return _MIXED
    return seen


_MIXED = object()


def iter_monochromatic(ground, k: int, coloring: Callable, target: int,
                       budget: int = 10 ** 6, colors: _Colors | None = None
                       ) -> Iterator[Monochromatic]:
    """Yield target-size subsets whose k-subsets share one color.

    ``ground`` is ``N`` (meaning ``1..N``) or an increasing sequence; the
    coloring receives increasing k-tuples. If the whole ground set is
    monochromatic its first ``target`` points are yielded at once; a
    backtracking search then yields every monochromatic ``target``-subset
    in lexicographic order.
    Each result is rechecked over all its k-subsets.
    """
    pts = tuple(range(1, ground + 1)) if isinstance(ground, int) else tuple(ground)
    if k < 1 or target < k or len(pts) < target:
        raise PreconditionError("need 1 <= k <= target <= |ground|")
    colors = colors or _Colors(coloring, budget)
    whole = _uniform(colors, pts, k)
    if whole is not _MIXED:
        yield Monochromatic(pts[:target], whole)
        if len(pts) == target:
            return
    N = len(pts)

    def extend(chosen, start, color):
        if len(chosen) == target:
            yield tuple(chosen), color
            return
        for i in range(start, N - (target - len(chosen)) + 1):
            e = pts[i]
            c_new = color
            ok = True
            for rest in itertools.combinations(chosen, k - 1):
                c = colors(rest + (e,))
                if c_new is None:
                    c_new = c
                elif c != c_new:
                    ok = False
                    break
            if ok:
                chosen.append(e)
                yield from extend(chosen, i + 1, c_new)
                chosen.pop()

    for sub, color in extend([], 0, None):
        if _uniform(colors, sub, k) is _MIXED:
            raise AssertionError("search returned a non-monochromatic set")
        yield Monochromatic(sub, color)


def monochromatic_search(ground, k: int, coloring: Callable, target: int,
                         budget: int = 10 ** 6) -> Monochromatic | None:
    """First monochromatic subset of size ``target``, or ``None`` when
    exhaustive search shows there is none.

    Raises
    ------
    BudgetExhausted
        If more than ``budget`` distinct k-subsets had to be colored.
    """
    return next(iter_monochromatic(ground, k, coloring, target, budget), None)
