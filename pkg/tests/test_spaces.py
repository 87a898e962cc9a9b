import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from superreflex.errors import DimensionMismatch, PreconditionError
from superreflex.spaces import (
    INF, L2Sum, Lp, conjugate, dual_norm, dual_space, format_space, make_l2sum,
    make_lp, norm, norming_functional, parse_space, row_norms, sample_unit_ball,
    to_unit_ball,
)

SPACES = [
    make_lp(1, 3), make_lp(2, 3), make_lp(3, 3), make_lp(Fraction(3, 2), 3),
    make_lp(INF, 3), make_lp(10, 3), make_l2sum(make_lp(1, 2), 2),
    make_l2sum(make_lp(INF, 1), 3), make_l2sum(make_l2sum(make_lp(3, 1), 1), 3),
]


def _oracle_norm(space, v):
    # direct formulas, written independently of the library
    v = np.asarray(v, dtype=float)
    if isinstance(space, L2Sum):
        k = space.inner.dim
        return math.sqrt(sum(_oracle_norm(space.inner, v[i * k:(i + 1) * k]) ** 2
                             for i in range(space.copies)))
    if space.p is INF:
        return max(abs(x) for x in v)
    p = float(space.p)
    return sum(abs(x) ** p for x in v) ** (1 / p)


vec3 = arrays(np.float64, 3, elements=st.floats(-1e3, 1e3, allow_nan=False))


class TestConstructors:
    def test_make_lp(self):
        assert make_lp(2, 3) == Lp(Fraction(2), 3)
        assert make_lp(math.inf, 5).p is INF
        assert make_lp("inf", 5) == make_lp(INF, 5)

    @pytest.mark.parametrize("p,dim", [(0.5, 2), (-1, 2), (2, 0), (2, 1.5), (-math.inf, 2)])
    def test_make_lp_rejects(self, p, dim):
        with pytest.raises(PreconditionError):
            make_lp(p, dim)

    def test_l2sum_dim(self):
        assert make_l2sum(make_lp(1, 2), 2).dim == 4
        with pytest.raises(PreconditionError):
            make_l2sum(make_lp(1, 2), 0)

    def test_conjugate_round_trip(self):
        for p in [Fraction(1), Fraction(3, 2), Fraction(2), Fraction(7), INF]:
            assert conjugate(conjugate(p)) == p
        assert conjugate(Fraction(3)) == Fraction(3, 2)

    @pytest.mark.parametrize("space", SPACES)
    def test_parse_format_round_trip(self, space):
        assert parse_space(format_space(space)) == space

    @pytest.mark.parametrize("text", ["", "lp:2", "lp:0.5:3", "l2sum:2:lp:1:2", "foo"])
    def test_parse_rejects(self, text):
        with pytest.raises(PreconditionError):
            parse_space(text)


class TestNorms:
    def test_hand_values(self):
        assert norm(make_lp(2, 2), [3, 4]) == 5
        assert norm(make_lp(INF, 3), [1, -2, 0.5]) == 2
        assert norm(make_l2sum(make_lp(1, 2), 2), [1, 1, 0, 3]) == pytest.approx(math.sqrt(13), abs=1e-15)
        assert norm(make_l2sum(make_lp(1, 2), 2), [1, 0, 1, 0]) == pytest.approx(math.sqrt(2))

    def test_dual_hand_values(self):
        assert dual_norm(make_lp(1, 3), [1, -2, 3]) == 3
        assert dual_norm(make_lp(2, 2), [3, 4]) == 5
        assert dual_norm(make_lp(INF, 2), [1, -1]) == 2

    def test_wrong_length(self):
        with pytest.raises(DimensionMismatch):
            norm(make_lp(2, 3), [1, 2])
        with pytest.raises(PreconditionError):
            norm(make_lp(2, 2), [1, np.nan])

    def test_large_p_no_overflow(self):
        assert norm(make_lp(500, 2), [1e3, 1e3]) == pytest.approx(1e3 * 2 ** (1 / 500))

    @pytest.mark.parametrize("space", SPACES)
    @settings(max_examples=60, deadline=None)
    @given(data=st.data())
    def test_matches_oracle_and_axioms(self, space, data):
        el = st.floats(-1e3, 1e3, allow_nan=False)
        v = data.draw(arrays(np.float64, space.dim, elements=el))
        w = data.draw(arrays(np.float64, space.dim, elements=el))
        a = data.draw(st.floats(-10, 10))
        nv = norm(space, v)
        assert nv == pytest.approx(_oracle_norm(space, v), rel=1e-9, abs=1e-9)
        assert norm(space, v + w) <= nv + norm(space, w) + 1e-9 * (1 + nv)
        assert norm(space, a * v) == pytest.approx(abs(a) * nv, rel=1e-9, abs=1e-9)
        assert abs(v @ w) <= nv * dual_norm(space, w) * (1 + 1e-9) + 1e-9

    @pytest.mark.parametrize("space", SPACES)
    def test_row_norms_match(self, space):
        M = np.random.default_rng(1).standard_normal((50, space.dim))
        assert np.allclose(row_norms(space, M), [norm(space, r) for r in M], rtol=1e-12)

    def test_single_copy_isometric(self):
        rng = np.random.default_rng(0)
        for inner in [make_lp(1, 3), make_lp(3, 3), make_lp(INF, 3)]:
            X = make_l2sum(inner, 1)
            for _ in range(100):
                v = rng.standard_normal(3)
                assert norm(X, v) == pytest.approx(norm(inner, v), abs=1e-12)


class TestNorming:
    def test_hand_values(self):
        assert np.array_equal(norming_functional(make_lp(1, 2), [2, -1]), [1, -1])
        assert np.allclose(norming_functional(make_lp(2, 2), [3, 4]), [0.6, 0.8])
        assert np.array_equal(norming_functional(make_lp(INF, 3), [1, -5, 2]), [0, -1, 0])

    def test_tie_break_lowest_index(self):
        assert np.array_equal(norming_functional(make_lp(INF, 3), [2, -2, 2]), [1, 0, 0])

    def test_zero_coordinates_l1(self):
        assert np.array_equal(norming_functional(make_lp(1, 3), [0, 2, -1]), [0, 1, -1])

    def test_zero_vector(self):
        with pytest.raises(PreconditionError):
            norming_functional(make_lp(2, 2), [0, 0])

    @pytest.mark.parametrize("space", SPACES)
    def test_norming_property(self, space):
        rng = np.random.default_rng(7)
        for _ in range(200):
            v = rng.standard_normal(space.dim) * rng.exponential(3)
            y = norming_functional(space, v)
            assert dual_norm(space, y) == pytest.approx(1.0, abs=1e-9)
            assert v @ y >= norm(space, v) - 1e-9 * (1 + norm(space, v))

    def test_dual_space_of_sum(self):
        X = make_l2sum(make_lp(1, 2), 3)
        assert dual_space(X) == make_l2sum(make_lp(INF, 2), 3)
        assert dual_space(dual_space(X)) == X


class TestSampling:
    @pytest.mark.parametrize("space", SPACES)
    def test_in_ball_and_deterministic(self, space):
        for seed in range(50):
            v = sample_unit_ball(space, seed)
            assert norm(space, v) <= 1 + 1e-12
            assert np.array_equal(v, sample_unit_ball(space, seed))

    def test_linf_square(self):
        for s in range(100):
            assert np.all(np.abs(sample_unit_ball(make_lp(INF, 2), s)) <= 1)

    def test_full_support_reaches_boundary_region(self):
        X = make_lp(2, 2)
        radii = [norm(X, sample_unit_ball(X, s)) for s in range(2000)]
        assert max(radii) > 0.99 and min(radii) < 0.1

    def test_to_unit_ball(self):
        X = make_lp(1, 2)
        assert np.allclose(to_unit_ball(X, [3, 1]), [0.75, 0.25])
        assert np.array_equal(to_unit_ball(X, [0.2, 0.1]), [0.2, 0.1])
