import itertools
import json
import math

import numpy as np
import pytest

from oracles import minnorm_lp
from superreflex.errors import CheckFailed, PreconditionError
from superreflex.extraction import (
    BucketScheme, ConstrainedMinProblem, ExtractionContext, bucket_index, build_patterns,
    coloring_f, coloring_g, extract_witness, feasible_point, report_to_json, xF_minimize,
)
from superreflex.jconvexity import j_margin
from superreflex.minnorm import MinNormSolver
from superreflex.operators import LinOperator, trivial_factorization, verify_factorization
from superreflex.ramsey import IntervalFamily, enumerate_interval_families
from superreflex.spaces import INF, make_lp, norm


def S(n):
    return np.tril(np.ones((n, n)))


def _canonical(p, N):
    """``(space, A, B)`` of the trivial factorization on ``l_p^N``."""
    f = trivial_factorization(make_lp(p, N))
    return f.space, np.array(f.A.matrix), np.array(f.B.matrix)


def _problem(p, N, fam):
    X, A, B = _canonical(p, N)
    return ConstrainedMinProblem(X, A, B, fam)


class TestFeasiblePoint:
    def test_single_interval(self):
        fam = IntervalFamily(tuple(range(1, 10)), ((3, 5),))
        prob = _problem(INF, 9, fam)
        xi = feasible_point(prob)
        assert np.array_equal(xi, -np.eye(9)[2])
        assert np.allclose(prob.pairing[2:5] @ xi, -1)

    @pytest.mark.parametrize("p", [1, INF])
    def test_canonical_all_families(self, p):
        for fam in enumerate_interval_families(range(1, 10), 2):
            prob = _problem(p, 9, fam)
            xi = feasible_point(prob, tol=0.0)
            assert np.abs(xi).max() <= 2
            assert norm(prob.space, prob.x_vectors @ xi) <= 2 * fam.m - 1

    def test_non_triangular_rejected(self):
        X = make_lp(INF, 3)
        fam = IntervalFamily((1, 2, 3), ((1, 3),))
        with pytest.raises(CheckFailed):
            feasible_point(ConstrainedMinProblem(X, np.eye(3), np.eye(3), fam))


class TestMinimize:
    @pytest.mark.parametrize("p", [1, INF])
    def test_matches_lp_oracle(self, p):
        X, A, B = _canonical(p, 9)
        solver = MinNormSolver(X, A, B @ A)
        for m in (1, 2):
            for fam in enumerate_interval_families(range(1, 10), m):
                prob = ConstrainedMinProblem(X, A, B, fam)
                res = xF_minimize(prob, solver=solver)
                want = minnorm_lp(A, B @ A, fam.intervals, math.inf if p is INF else 1)
                assert res.value == pytest.approx(want, abs=1e-7)
                assert res.lower <= res.value and res.gap <= 1e-6
                if p is INF:
                    assert res.value == pytest.approx(1.0, abs=1e-9)
                else:
                    assert res.value == pytest.approx(2 * m - 1, abs=1e-9)

    def test_size_bounds_generic_factorization(self):
        rng = np.random.default_rng(3)
        N = 8
        X = make_lp(INF, N)
        # a generic factorization: any invertible A with B = S_N A^{-1}
        A = np.eye(N) + rng.uniform(-0.3, 0.3, (N, N))
        B = S(N) @ np.linalg.inv(A)
        f = verify_factorization(LinOperator(A, make_lp(1, N), X),
                                 LinOperator(B, X, make_lp(INF, N)), N, 1e-10)
        a = np.abs(A).max()
        sigma = f.sigma
        solver = MinNormSolver(X, A / a, (B * a) @ (A / a))
        for fam in enumerate_interval_families(range(1, N + 1), 2):
            res = solver.solve(fam.intervals)
            assert 1 / sigma - 1e-9 <= res.value <= 2 * fam.m - 1 + 1e-9

    def test_l2_closed_form(self):
        # x_h = e_h in l_2, y_k = e_1 + .. + e_k: minimal norm spreads each
        # required jump of the partial sums evenly over its free coordinates
        N = 7
        X = make_lp(2, N)
        A, B = np.eye(N), S(N)
        solver = MinNormSolver(X, A, B @ A)
        for fam in itertools.chain(enumerate_interval_families(range(1, N + 1), 1),
                                   enumerate_interval_families(range(1, N + 1), 2)):
            ivs = fam.intervals
            want = 1 / ivs[0][0]
            for (_, r), (l, _) in zip(ivs, ivs[1:]):
                want += 4 / (l - r)
            res = xF_minimize(ConstrainedMinProblem(X, A, B, fam), solver=solver)
            assert res.value == pytest.approx(math.sqrt(want), abs=1e-6)

    def test_prefix_monotone(self):
        X, A, B = _canonical(1, 9)
        solver = MinNormSolver(X, A, B @ A)
        for fam in enumerate_interval_families(range(1, 10), 3):
            vals = [solver.solve(fam.intervals[:j]).value for j in (1, 2, 3)]
            assert vals[0] <= vals[1] + 1e-6 <= vals[2] + 2e-6


class TestBuckets:
    def test_examples(self):
        s = BucketScheme(1.0, 0.5, 5)
        assert bucket_index(1.5, s) == 1
        assert bucket_index(1.0, s) == 1
        assert bucket_index(2.0, s) == 2
        assert bucket_index(10.0, s) == 4
        assert s.edges() == [1, 2, 4, 8, 16]

    def test_out_of_range(self):
        s = BucketScheme(1.0, 0.5, 5)
        with pytest.raises(PreconditionError):
            bucket_index(0.5, s)
        with pytest.raises(PreconditionError):
            bucket_index(10.5, s)

    def test_scheme_requires_cover(self):
        with pytest.raises(PreconditionError):
            BucketScheme(1.0, 0.5, 4)

    def test_sigma_scaling(self):
        s = BucketScheme(2.0, 0.5, 6)
        assert bucket_index(0.5, s) == 1
        assert bucket_index(1.0, s) == 2
        assert bucket_index(0.999, s) == 1


class _FakeCtx:
    """Buckets given directly per prefix length."""

    def __init__(self, buckets):
        self.buckets = buckets

    def bucket(self, endpoints):
        return self.buckets[len(endpoints) // 2 - 1]


class TestColorings:
    FAM = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)

    def test_f_rules(self):
        assert coloring_f(self.FAM, _FakeCtx([1, 1, 1, 1, 1])) == 2
        assert coloring_f(self.FAM, _FakeCtx([1, 2, 3, 4, 4])) == 5
        assert coloring_f(self.FAM, _FakeCtx([1, 2, 2, 3, 4])) == 3
        with pytest.raises(CheckFailed):
            coloring_f(self.FAM, _FakeCtx([1, 2, 3, 4, 5]))

    def test_g_rules(self):
        assert coloring_g(self.FAM, 3, _FakeCtx([1, 1, 2, 4, 4])) == 2
        fam = IntervalFamily(tuple(range(1, 11)), ((1, 2), (3, 4), (5, 6), (7, 8), (9, 10)))
        assert coloring_g(fam, 1, _FakeCtx([3, 1, 1, 1, 1])) == 3

    def test_canonical_linf_is_constant(self):
        X, A, B = _canonical(INF, 11)
        ctx = ExtractionContext(MinNormSolver(X, A, B @ A), BucketScheme(1.0, 0.5, 5))
        for fam in itertools.islice(enumerate_interval_families(range(1, 12), 5), 20):
            assert coloring_f(fam, ctx) == 2
            assert coloring_g(fam, 2, ctx) == 1

    def test_guard_rejects_values_at_edges(self):
        # l_1 canonical prefix values are 1, 3, 5, ..; the edges here are
        # 0.75, 1.5, 3, 6, 12, so the two-interval value 3 sits on an edge
        X, A, B = _canonical(1, 9)
        ctx = ExtractionContext(MinNormSolver(X, A, B @ A), BucketScheme(4 / 3, 0.5, 5))
        assert ctx.bucket((1, 2)) == 1
        with pytest.raises(CheckFailed):
            ctx.bucket((1, 2, 3, 4))


class TestPatterns:
    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_intersection_identity(self, n, m):
        M = [3 * i + 1 for i in range(1, 2 * n * m + 2)]
        F, E = build_patterns(M, n, m)
        assert len(F) == n and len(E) == n
        for fam in F + E:
            assert fam.m == m and fam.ground == tuple(M)
        for k in range(1, n + 1):
            for j in range(1, m):
                sets = [set(F[h - 1].interval(j + 1)) for h in range(1, k + 1)]
                sets += [set(F[h - 1].interval(j)) for h in range(k + 1, n + 1)]
                assert set.intersection(*sets) == set(E[k - 1].interval(j))
            assert E[k - 1].intervals[-1] == (M[2 * n * m - 1], M[2 * n * m])

    def test_example_n3_m4(self):
        M = list(range(1, 26))
        F, E = build_patterns(M, 3, 4)
        assert set(F[0].interval(2)) == set(range(5, 11))
        assert set(E[0].interval(1)) == {5, 6}

    def test_cardinality(self):
        with pytest.raises(PreconditionError):
            build_patterns(range(1, 9), 2, 2)
        with pytest.raises(PreconditionError):
            build_patterns(range(1, 4), 1, 1)


class TestExtract:
    def test_linf_end_to_end(self):
        fact = trivial_factorization(make_lp(INF, 21))
        rep = extract_witness(fact, 2, 0.5)
        assert rep.m == 5 and rep.N == 21 and len(rep.M) == 21
        assert rep.j0 == 2 and rep.i0 == 1
        assert all(v == pytest.approx(1.0, abs=1e-9) for v in rep.F_values + rep.E_values)
        assert max(norm(fact.space, z) for z in rep.witness.z) <= 1 + 1e-8
        assert rep.witness.margin >= 0.5 - 1e-4
        assert j_margin(fact.space, rep.witness.z) == rep.witness.margin
        doc = json.loads(json.dumps(report_to_json(rep)))
        assert doc["j0"] == 2 and "R_10" in doc["N_bound"]

    def test_ground_set_too_small(self):
        with pytest.raises(PreconditionError, match="ground set too small"):
            extract_witness(trivial_factorization(make_lp(INF, 20)), 2, 0.5)

    def test_rejects_n_one(self):
        with pytest.raises(PreconditionError):
            extract_witness(trivial_factorization(make_lp(INF, 21)), 1, 0.5)

    def test_rejects_invalid_factorization(self):
        X = make_lp(INF, 21)
        f = verify_factorization(LinOperator(np.eye(21), make_lp(1, 21), X),
                                 LinOperator(np.eye(21), X, make_lp(INF, 21)), 21)
        with pytest.raises(PreconditionError):
            extract_witness(f, 2, 0.5)
