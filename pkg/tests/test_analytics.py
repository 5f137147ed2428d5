import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from carlemanlab.analytics import (amplitude_encode, decay_bound_constants, find_exponential_window,
                                   lyapunov_estimate, overlap, overlap_from_norms, overlap_report,
                                   perturbation, query_lower_bound, trace_distance_pure)
from carlemanlab.errors import DomainError, GeometryError, UndefinedEncodingError
from carlemanlab.quadratic_ode import QuadraticSystem

vectors = st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: np.linalg.norm(v) > 1e-3)


class TestEncoding:
    def test_three_four(self):
        enc = amplitude_encode([3, 4])
        np.testing.assert_allclose(enc.components, [0.6, 0.8])
        assert enc.norm == 5

    def test_unit(self):
        enc = amplitude_encode([0, 1, 0])
        np.testing.assert_array_equal(enc.components, [0, 1, 0])
        assert enc.norm == 1

    def test_negative(self):
        enc = amplitude_encode([-2, 0])
        np.testing.assert_array_equal(enc.components, [-1, 0])
        assert enc.norm == 2

    def test_zero(self):
        with pytest.raises(UndefinedEncodingError):
            amplitude_encode([0, 0])

    @given(vectors)
    def test_unit_norm(self, v):
        assert np.linalg.norm(amplitude_encode(v).components) == pytest.approx(1, abs=1e-12)


class TestOverlap:
    @pytest.mark.parametrize("a, b, expect", [([1, 0], [1, 0], 1), ([1, 0], [0, 1], 0),
                                              ([1, 0], [1, 1], 1 / math.sqrt(2))])
    def test_values(self, a, b, expect):
        assert overlap(a, b) == pytest.approx(expect, abs=1e-15)

    @pytest.mark.parametrize("na, nb, sep, expect", [(1, 1, math.sqrt(2), 0), (1, 1, 0, 1),
                                                     (1, 1, 2, -1)])
    def test_from_norms(self, na, nb, sep, expect):
        assert overlap_from_norms(na, nb, sep) == pytest.approx(expect, abs=1e-15)

    def test_from_norms_impossible(self):
        with pytest.raises(GeometryError):
            overlap_from_norms(1, 1, 3)
        with pytest.raises(GeometryError):
            overlap_from_norms(0, 1, 1)

    @settings(max_examples=200)
    @given(vectors, vectors)
    def test_law_of_cosines(self, a, b):
        # cancellation in |a|^2 + |b|^2 - |a-b|^2 grows with the norm ratio
        a, b = np.array(a), np.array(b)
        ratio = np.linalg.norm(a) / np.linalg.norm(b)
        assume(0.1 <= ratio <= 10)
        got = overlap_from_norms(np.linalg.norm(a), np.linalg.norm(b), np.linalg.norm(a - b))
        assert got == pytest.approx(overlap(a, b), abs=1e-12)

    @given(vectors, vectors)
    def test_unit_separation_identity(self, a, b):
        a = amplitude_encode(a).components
        b = amplitude_encode(b).components
        assert np.sum((a - b) ** 2) == pytest.approx(2 - 2 * overlap(a, b), abs=1e-12)

    def test_report(self):
        t = np.linspace(0, 1, 5)
        a = np.c_[np.ones(5), np.zeros(5)]
        b = np.c_[np.ones(5), t]
        rep = overlap_report(t, a, b, copies=3)
        np.testing.assert_allclose(rep.overlaps, 1 / np.sqrt(1 + t**2))
        np.testing.assert_allclose(rep.trace_distances, np.sqrt(1 - rep.overlaps**6))
        assert np.all((rep.trace_distances >= 0) & (rep.trace_distances <= 1))
        assert rep.epsilon == 0 and rep.k_min is None


class TestTraceDistance:
    def test_values(self):
        assert trace_distance_pure(0.99, 1) == pytest.approx(math.sqrt(0.0199), rel=1e-12)
        assert trace_distance_pure(0.99, 1) == pytest.approx(0.141067, abs=1e-6)
        assert trace_distance_pure(1.0, 37) == 0
        assert trace_distance_pure(0.0, 1) == 1

    def test_helstrom_bound_grid(self):
        for eps in np.logspace(-4, -1, 13):
            for k in np.unique(np.logspace(0, 4, 41).astype(int)):
                assert trace_distance_pure(1 - eps, int(k)) <= math.sqrt(2 * k * eps)

    def test_domain(self):
        with pytest.raises(DomainError):
            trace_distance_pure(1.1)
        with pytest.raises(DomainError):
            trace_distance_pure(0.5, 0)


class TestQueryBound:
    @pytest.mark.parametrize("eps, k", [(0.01, 11), (0.004, 26), (0.03, 4), (0.001, 101)])
    def test_values(self, eps, k):
        assert query_lower_bound(eps) == k

    @given(st.floats(1e-6, 0.999))
    def test_strict_inequality(self, eps):
        k = query_lower_bound(eps)
        assert k > 1 / (10 * eps) * (1 - 1e-9)
        assert k - 1 <= 1 / (10 * eps) * (1 + 1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            query_lower_bound(0.0)


def linear(rate):
    return QuadraticSystem(1, [], [], [], [[rate]], [0.0])


class TestLyapunov:
    def test_growth(self):
        est = lyapunov_estimate(linear(1.0), [1.0], 1e-8, 4, 0, t_end=10.0)
        assert est.lambda_t == pytest.approx(1.0, abs=0.01)
        assert est.chaotic
        assert est.fit_window[0] < est.fit_window[1]
        assert 0 <= est.r_squared <= 1

    def test_decay(self):
        est = lyapunov_estimate(linear(-1.0), [1.0], 1e-8, 4, 0, t_end=10.0)
        assert est.lambda_t == pytest.approx(-1.0, abs=0.01)
        assert not est.chaotic

    def test_explicit_window(self):
        est = lyapunov_estimate(linear(0.5), [1.0], 1e-6, 2, 0, t_end=5.0, window=(1.0, 3.0))
        assert est.fit_window == pytest.approx((1.0, 3.0))
        assert est.lambda_t == pytest.approx(0.5, abs=1e-6)

    def test_perturbation_seeded(self):
        a = perturbation(7, 3, 5, 1e-8)
        np.testing.assert_array_equal(a, perturbation(7, 3, 5, 1e-8))
        assert np.linalg.norm(a) == pytest.approx(1e-8, rel=1e-12)
        assert not np.array_equal(a, perturbation(7, 4, 5, 1e-8))

    def test_deterministic_across_workers(self):
        sys = QuadraticSystem(2, [0], [1], [0.5], [[0.1, 1.0], [-1.0, -0.2]], [0.0, 0.0])
        kw = dict(perturbation_norm=1e-8, n_samples=4, seed=11, t_end=5.0, keep_samples=True)
        one = lyapunov_estimate(sys, [0.3, 0.1], workers=1, **kw)
        two = lyapunov_estimate(sys, [0.3, 0.1], workers=2, **kw)
        np.testing.assert_array_equal(one.sample_separations, two.sample_separations)
        assert one.lambda_t == two.lambda_t

    def test_window_finder_piecewise(self):
        # flat, then exponential at rate 0.2, then saturated; the longest
        # admissible window covers the growth phase and may borrow some of
        # the flat prefix, but never crosses the ceiling
        t = np.arange(0, 300, 0.1)
        logs = np.where(t < 100, -18.0, np.minimum(-18.0 + 0.2 * (t - 100), 0.0))
        i, j, found = find_exponential_window(t, np.exp(logs), ceiling=0.1)
        assert found
        assert 60 <= t[i] <= 105
        assert 160 <= t[j] < 100 + (18 + math.log(0.1)) / 0.2

    def test_window_finder_respects_ceiling(self):
        t = np.arange(0, 50, 0.1)
        i, j, _ = find_exponential_window(t, 1e-6 * np.exp(t), ceiling=1.0)
        assert 1e-6 * math.exp(t[j]) < 1.0


class TestDecayBound:
    def test_closed_forms(self):
        d = decay_bound_constants(0.5, 0.1, 1e-8)
        assert d.t_max == pytest.approx(25.0)
        assert d.t_c == pytest.approx(100.0)

    def test_r_max_scaling(self):
        a = decay_bound_constants(0.5, 0.1, 1e-6)
        b = decay_bound_constants(0.5, 0.1, 1e-8)
        assert a.r_max * 1e-6 == pytest.approx(b.r_max * 1e-8, rel=1e-12)

    def test_r_max_is_peak(self):
        d = decay_bound_constants(0.5, 0.1, 1e-8)
        t = np.linspace(0.01, 200, 20001)
        assert d.ratio_bound(t).max() <= d.r_max * (1 + 1e-9)
        assert d.ratio_bound(d.t_max) == pytest.approx(d.r_max, rel=1e-12)

    @pytest.mark.parametrize("alpha, lam", [(0.5, 0.1), (0.3, 0.5), (0.8, 0.05)])
    def test_bound_dominates(self, alpha, lam):
        d = decay_bound_constants(alpha, lam, 1e-8)
        t = np.linspace(2 * d.t_c, 10 * d.t_c, 500)
        assert np.all(d.bound(t) >= d.ratio_bound(t) * (1 - 1e-12))

    def test_domain(self):
        with pytest.raises(DomainError):
            decay_bound_constants(1.0, 0.1, 1e-8)
        with pytest.raises(DomainError):
            decay_bound_constants(0.5, -0.1, 1e-8)
