import math

import numpy as np
import pytest

from valuecont import systems, value
from valuecont.bounds import LinearModulus
from valuecont.systems import ClippedLinear, DomainError, Logistic, NoisyMap, PowerMap, RngStream
from valuecont.value import RewardSpec

R = RewardSpec.linear(1.0)


def simpson(f, a, b, n=20000):
    t = np.linspace(a, b, n + 1)
    y = f(t)
    h = (b - a) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


class TestTruncation:
    @pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9, 0.99])
    @pytest.mark.parametrize("eps", [1e-4, 1e-10])
    def test_tail_below_eps_and_minimal(self, gamma, eps):
        N = value.truncation_horizon(gamma, eps, 2.0)
        assert 2.0 * gamma ** (N + 1) / (1 - gamma) <= eps
        if N > 0:
            assert 2.0 * gamma**N / (1 - gamma) > eps * gamma

    def test_zero_reward(self):
        assert value.truncation_horizon(0.9, 1e-8, 0.0) == 0

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.5, 1.5])
    def test_gamma_range(self, gamma):
        with pytest.raises(ValueError):
            value.truncation_horizon(gamma, 1e-8, 1.0)


class TestValueDiscrete:
    def test_power_at_one(self):
        est = value.value_discrete(PowerMap(1.7), R, 0.9, 1.0)
        assert est.value == pytest.approx(10.0, abs=1e-9)
        assert est.truncation_error <= 1e-10
        assert est.statistical_error == 0.0

    @pytest.mark.parametrize("gamma", [0.3, 0.9, 0.99])
    def test_power_at_zero(self, gamma):
        assert value.value_discrete(PowerMap(1.5), R, gamma, 0.0).value == 0.0

    def test_logistic_at_zero(self):
        assert value.value_discrete(Logistic(), R, 0.8, 0.0).value == 0.0

    def test_logistic_quarter_long_double_oracle(self):
        x, total, disc = np.longdouble(0.25), np.longdouble(0), np.longdouble(1)
        for _ in range(501):
            total += disc * x
            x = 4 * x * (1 - x)
            disc *= np.longdouble(0.8)
        est = value.value_discrete(Logistic(), R, 0.8, 0.25, eps=1e-12)
        assert abs(est.value - float(total)) <= 1e-12
        assert est.value == pytest.approx(3.25, abs=1e-12)

    def test_vectorized_matches_scalar(self):
        xs = np.array([0.1, 0.4, 0.7])
        vec = value.value_discrete(Logistic(), R, 0.7, xs).value
        for x, v in zip(xs, vec):
            assert value.value_discrete(Logistic(), R, 0.7, x).value == v

    def test_constant_reward_noisy(self):
        est = value.value_discrete(NoisyMap(Logistic(), 0.1), RewardSpec.constant(2.0), 0.5, 0.3, samples=10, rng=RngStream(0))
        assert est.value == pytest.approx(4.0, abs=1e-9)
        assert est.statistical_error == 0.0

    def test_noisy_reports_standard_error(self):
        est = value.value_discrete(NoisyMap(Logistic(), 0.05), R, 0.8, [0.2, 0.3], samples=400, rng=RngStream(5))
        assert np.all(est.statistical_error > 0)
        assert np.all(np.abs(est.value) <= 1 / 0.2 + est.truncation_error)

    def test_noisy_reproducible(self):
        sys_ = NoisyMap(Logistic(), 0.05)
        a = value.value_discrete(sys_, R, 0.8, 0.3, samples=200, rng=RngStream(9))
        b = value.value_discrete(sys_, R, 0.8, 0.3, samples=200, rng=RngStream(9))
        assert a.value == b.value

    def test_noisy_with_small_noise_near_undisturbed(self):
        # 0.25 -> 0.75 is a repelling fixed point, so use a short horizon
        v0 = value.value_discrete(Logistic(), R, 0.3, 0.25, eps=1e-8).value
        v1 = value.value_discrete(NoisyMap(Logistic(), 1e-9), R, 0.3, 0.25, eps=1e-8, samples=50, rng=RngStream(1)).value
        assert v1 == pytest.approx(v0, abs=1e-6)

    def test_errors(self):
        with pytest.raises(ValueError):
            value.value_discrete(Logistic(), R, 1.0, 0.2)
        with pytest.raises(DomainError):
            value.value_discrete(Logistic(), R, 0.5, 1.5)
        with pytest.raises(ValueError):
            value.value_discrete(ClippedLinear(2.0), R, 0.5, 0.5)
        with pytest.raises(ValueError):
            value.value_discrete(NoisyMap(Logistic(), 0.1), R, 0.5, 0.5, samples=0, rng=RngStream(0))


class TestClippedLinearClosedForm:
    def test_zero(self):
        assert value.value_clipped_linear_closed_form(1.0, 2.0, 0.5, 1.0, 0.0) == 0.0

    def test_at_diameter(self):
        D, A, g = 2.5, 3.0, 0.7
        assert value.value_clipped_linear_closed_form(A, 1.8, g, D, D) == pytest.approx(A * D / math.log(1 / g), rel=1e-14)

    def test_quadrature_oracle(self):
        # delta = 1: int_0^1 0.5^t 2^t 0.5 dt + int_1^T 0.5^t dt, tail beyond T below 1e-14
        head = simpson(lambda t: 0.5**t * np.minimum(1.0, 2.0**t * 0.5), 0.0, 1.0)
        T = 60.0
        tail = simpson(lambda t: 0.5**t, 1.0, T, n=200000)
        got = value.value_clipped_linear_closed_form(1.0, 2.0, 0.5, 1.0, 0.5)
        assert got == pytest.approx(head + tail, abs=1e-10)
        assert got == pytest.approx(0.5 + 0.5 / math.log(2.0), abs=1e-14)

    @pytest.mark.parametrize("L,g", [(1.5, 0.5), (2.0, 0.5), (1.5, 0.9)])
    def test_matches_adaptive_quadrature(self, L, g):
        x = np.linspace(0.0, 1.0, 9)
        quad = value.value_continuous_quadrature(ClippedLinear(L, 1.0), R, g, x, eps=1e-12)
        np.testing.assert_allclose(value.value_clipped_linear_closed_form(1.0, L, g, 1.0, x), quad, atol=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            value.value_clipped_linear_closed_form(1.0, 2.0, 0.5, 1.0, 1.1)


class TestFromDiscrete:
    def test_zero(self):
        assert value.value_continuous_from_discrete(0.0, 0.3) == 0.0

    def test_constant(self):
        assert value.value_continuous_from_discrete(10.0, 0.9) == pytest.approx(1.0 / math.log(10 / 9), rel=1e-14)

    def test_factor_tends_to_one(self):
        assert value.value_continuous_from_discrete(1.0, 0.999) == pytest.approx(1.0, abs=1e-3)

    @pytest.mark.parametrize("system", [PowerMap(1.5), Logistic(), PowerMap(3.0)])
    def test_floor_lift_quadrature(self, system):
        x = np.linspace(0.0, 1.0, 20)
        disc = value.value_discrete(system, R, 0.9, x, eps=1e-13).value
        quad = value.value_continuous_quadrature(system, R, 0.9, x, eps=1e-13)
        np.testing.assert_allclose(quad, value.value_continuous_from_discrete(disc, 0.9), rtol=0, atol=1e-8)

    def test_quadrature_rejects_noisy(self):
        with pytest.raises(ValueError):
            value.value_continuous_quadrature(NoisyMap(Logistic(), 0.1), R, 0.9, 0.5)


class TestPowerSeries:
    @pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99])
    def test_anchors(self, gamma):
        assert value.value_power_closed_series(1.5, gamma, 0.0) == 0.0
        assert value.value_power_closed_series(1.5, gamma, 1.0) == pytest.approx(1 / (1 - gamma), abs=1e-9)

    def test_matches_discrete(self):
        s = value.value_power_closed_series(1.5, 0.9, 0.5, eps=1e-10)
        d = value.value_discrete(PowerMap(1.5), R, 0.9, 0.5, eps=1e-10).value
        assert abs(s - d) <= 2e-10

    def test_direct_sum_oracle(self):
        x = 0.97
        ref = math.fsum(0.9**n * x ** (1.5**n) for n in range(400))
        assert value.value_power_closed_series(1.5, 0.9, x, eps=1e-14) == pytest.approx(ref, abs=1e-13)

    def test_monotone_and_convex(self):
        v = value.value_power_closed_series(1.5, 0.9, np.linspace(0, 1, 1000))
        assert np.all(np.diff(v) >= 0)
        assert np.all(np.diff(v, 2) >= -1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            value.value_power_closed_series(1.5, 0.9, -0.1)
        with pytest.raises(ValueError):
            value.value_power_closed_series(1.0, 0.9, 0.5)


class TestRewardSpec:
    def test_linear(self):
        r = RewardSpec.linear(2.0)
        assert r(0.5) == 1.0 and r.sup_abs == 2.0 and r.modulus == LinearModulus(2.0)
        np.testing.assert_array_equal(r.derivative(np.zeros(3)), [2.0, 2.0, 2.0])

    def test_lipschitz_on_grid(self):
        r = RewardSpec.linear(-1.5)
        x = np.linspace(0, 1, 501)
        assert np.max(np.abs(np.diff(r(x))) / np.diff(x)) <= r.modulus.C + 1e-12

    def test_rejects_bad_sup(self):
        with pytest.raises(ValueError):
            RewardSpec(lambda x: x, -1.0, LinearModulus(1.0))


def test_sup_bound_every_builtin_system():
    x = np.linspace(0, 1, 21)
    for k, system in enumerate([Logistic(), PowerMap(2.0), NoisyMap(Logistic(), 0.01)]):
        est = value.value_discrete(system, R, 0.8, x, eps=1e-8, samples=300, rng=RngStream(0, k))
        assert np.all(np.abs(est.value) <= R.sup_abs / 0.2 + 1e-8)
