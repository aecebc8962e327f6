import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pass_covert.covertness import (detection_stats, detection_threshold, error_lower_bound,
                                    kl_divergence, lambda_pair, total_error)
from pass_covert.errors import DegenerateTestError, DomainError

positive = st.floats(1e-12, 1e6, allow_nan=False, allow_infinity=False)


def crandn(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


class TestLambdaPair:
    def test_no_signal(self):
        rng = np.random.default_rng(0)
        h, q = crandn(rng, 3), crandn(rng, 3)
        l0, l1 = lambda_pair(h, np.zeros(3), q, 1e-3)
        assert l0 == l1
        assert lambda_pair(h, np.zeros(3), np.zeros(3), 1e-3) == (1e-3, 1e-3)

    def test_scalar_oracle(self):
        rng = np.random.default_rng(1)
        h, w, q = crandn(rng, 3), crandn(rng, 3), crandn(rng, 3)

        def power(a, b):
            s = sum(a[i].conjugate() * b[i] for i in range(3))
            return s.real**2 + s.imag**2

        l0, l1 = lambda_pair(h, w, q, 0.5)
        assert l0 == pytest.approx(power(h, q) + 0.5, rel=1e-13)
        assert l1 == pytest.approx(power(h, q) + 0.5 + power(h, w), rel=1e-13)

    def test_bad_inputs(self):
        with pytest.raises(DomainError):
            lambda_pair(np.ones(3), np.ones(3), np.ones(3), 0.0)
        with pytest.raises(ValueError):
            lambda_pair(np.ones(3), np.ones(2), np.ones(3), 1.0)


class TestKL:
    def test_equal_means(self):
        assert kl_divergence(3.7, 3.7) == 0.0

    def test_doubling(self):
        assert kl_divergence(1.0, 2.0) == pytest.approx(math.log(2) - 0.5, rel=1e-14)
        assert kl_divergence(5e-17, 1e-16) == pytest.approx(math.log(2) - 0.5, rel=1e-12)

    def test_monotone_in_lambda1(self):
        grid = 1.0 + np.logspace(-8, 3, 400)
        vals = [kl_divergence(1.0, l1) for l1 in grid]
        assert np.all(np.diff(vals) > 0)

    def test_series_branch_continuous(self):
        # the small-gap series must agree with a high-precision closed form
        for gap in (1e-3, 1e-4 * 0.999, 1e-4 * 1.001, 1e-6, 1e-9):
            x = 1.0 / (1.0 + gap)
            exact = -math.log(x) + x - 1.0 if gap > 1e-5 else None
            d = 1.0 - x
            series = sum(d**k / k for k in range(2, 12))
            got = kl_divergence(1.0, 1.0 + gap)
            assert got == pytest.approx(series, rel=1e-9)
            if exact is not None:
                assert got == pytest.approx(exact, rel=1e-6)

    @given(positive, positive)
    def test_nonnegative(self, a, b):
        assert kl_divergence(a, b) >= 0.0

    def test_nonnegative_random(self):
        rng = np.random.default_rng(2)
        pairs = 10.0 ** rng.uniform(-18, 3, (10_000, 2))
        assert min(kl_divergence(a, b) for a, b in pairs) >= 0.0

    @pytest.mark.parametrize("pair", [(0.0, 1.0), (1.0, -1.0), (-1.0, -1.0)])
    def test_domain(self, pair):
        with pytest.raises(DomainError):
            kl_divergence(*pair)


class TestPinsker:
    @pytest.mark.parametrize("kl,expected", [(0.0, 1.0), (2.0, 0.0), (0.08, 0.8), (10.0, 0.0)])
    def test_values(self, kl, expected):
        assert error_lower_bound(kl) == pytest.approx(expected, abs=1e-15)

    @given(st.floats(0, 100))
    def test_range(self, kl):
        assert 0.0 <= error_lower_bound(kl) <= 1.0

    def test_negative(self):
        with pytest.raises(DomainError):
            error_lower_bound(-1e-3)


class TestThreshold:
    def test_unit_pair(self):
        assert detection_threshold(1.0, 2.0) == pytest.approx(2 * math.log(2), rel=1e-15)

    def test_between_means(self):
        for l0 in np.logspace(-17, 2, 12):
            for r in 1.0 + np.logspace(-6, 4, 25):
                tau = detection_threshold(l0, l0 * r)
                assert l0 < tau < l0 * r

    def test_limit(self):
        assert detection_threshold(1.0, 1.0 + 1e-8) == pytest.approx(1.0, abs=1e-6)

    def test_degenerate(self):
        with pytest.raises(DegenerateTestError):
            detection_threshold(2.0, 2.0)
        with pytest.raises(DomainError):
            detection_threshold(0.0, 1.0)

    def test_is_likelihood_ratio_crossing(self):
        l0, l1 = 0.7, 3.1
        tau = detection_threshold(l0, l1)
        # densities (1/l) exp(-x/l) intersect at the threshold
        assert math.exp(-tau / l0) / l0 == pytest.approx(math.exp(-tau / l1) / l1, rel=1e-12)


class TestMonteCarlo:
    @pytest.mark.parametrize("l1", [1.05, 1.5, 2.0, 5.0])
    def test_empirical_error_above_bound(self, l1):
        rng = np.random.default_rng(3)
        l0, n = 1.0, 100_000
        tau = detection_threshold(l0, l1)
        false_alarm = np.mean(rng.exponential(l0, n) > tau)
        miss = np.mean(rng.exponential(l1, n) <= tau)
        bound = error_lower_bound(kl_divergence(l0, l1))
        assert false_alarm + miss >= bound - 0.01
        assert false_alarm + miss == pytest.approx(total_error(l0, l1), abs=0.01)


class TestDetectionStats:
    def test_null_space_signal_is_covert(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            h, w, q = crandn(rng, 3), crandn(rng, 3), crandn(rng, 3)
            w -= h * np.vdot(h, w) / np.vdot(h, h)
            scale = 10.0 ** rng.uniform(-8, 0)
            assert abs(np.vdot(h, w)) ** 2 <= 1e-18 * np.vdot(w, w).real * np.vdot(h, h).real
            st_ = detection_stats(scale * h, w, q, 4e-17)
            assert st_.kl <= 1e-12
            assert st_.lambda1 >= st_.lambda0 >= 4e-17
            assert 0.0 <= st_.error_lower_bound <= 1.0
