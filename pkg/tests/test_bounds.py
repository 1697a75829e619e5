import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robpca.bounds import (
    BoundParams,
    b_star,
    bound_B,
    choose_sigma,
    constant_c,
    estimate_kappa,
    estimate_s4,
    grid_size_K,
    standing_assumption_holds,
    zeta,
)
from robpca.errors import ValidationError


def mp_c():
    with mp.workdps(50):
        s2 = mp.sqrt(2)
        return 15 / (8 * mp.log(2) * (s2 - 1)) * mp.exp((1 + 2 * s2) / 2)


def mp_zeta(t, kappa, s4_sq, eps, a, K):
    with mp.workdps(50):
        c = mp_c()
        t, kappa, s4_sq, eps, a = map(mp.mpf, (t, kappa, s4_sq, eps, a))
        first = mp.sqrt(2 * (kappa - 1) * ((2 + 3 * c) * s4_sq / (4 * (2 + c) * mp.sqrt(kappa) * t)
                                           + mp.log(K / eps))) * mp.cosh(a / 4)
        second = mp.sqrt(2 * (2 + c) * mp.sqrt(kappa) * s4_sq / t) * mp.cosh(a / 2)
        return first + second


def params(**kw):
    base = dict(n=100_000, kappa=3.0, s4_sq=1.0, sigma=1.0, epsilon=0.1, a=1.0)
    base.update(kw)
    return BoundParams(**base)


class TestConstants:
    def test_c_matches_high_precision_oracle_to_12_digits(self):
        assert mp.almosteq(constant_c(), mp_c(), rel_eps=mp.mpf("5e-13"))
        assert f"{constant_c():.12g}" == mp.nstr(mp_c(), 12)

    def test_c_bracket(self):
        assert 44 < constant_c() < 45
        # the quoted 4-decimal figure is truncated; oracle value is 44.28778
        assert constant_c() == pytest.approx(44.2876, abs=3e-4)

    def test_K_example(self):
        # 72(2+c)sqrt(3) ~ 5772.4 (quoted loosely as 5772.7), log ratio ~ 2.852
        scale = 72 * (2 + constant_c()) * math.sqrt(3)
        assert scale == pytest.approx(5772.7, rel=1e-4)
        assert math.log(100_000 / scale) == pytest.approx(2.852, abs=1e-3)
        assert grid_size_K(params()) == 4

    def test_K_clamped_for_tiny_n(self):
        assert grid_size_K(params(n=10, sigma=1.0)) == 1

    def test_K_large_a(self):
        assert grid_size_K(params(a=1e9)) == 2


class TestZeta:
    def test_example_against_oracle(self):
        p = params()
        assert grid_size_K(p) == 4
        z = zeta(1.0, p)
        assert z == pytest.approx(18.46, abs=0.01)
        assert z == pytest.approx(float(mp_zeta(1, 3, 1, 0.1, 1, 4)), rel=1e-13)

    def test_limit_at_infinity(self):
        p = params()
        lim = math.sqrt(2 * 2 * math.log(4 / 0.1)) * math.cosh(0.25)
        assert zeta(1e30, p) == pytest.approx(lim, rel=1e-9)

    def test_domain(self):
        with pytest.raises(ValidationError):
            zeta(0.0, params())

    def test_kappa_below_three_halves_rejected(self):
        with pytest.raises(ValidationError):
            zeta(1.0, params(kappa=1.2))

    @settings(max_examples=50, deadline=None)
    @given(kappa=st.floats(1.5, 50), s4=st.floats(1e-3, 1e3), eps=st.floats(1e-3, 0.49),
           a=st.floats(0.05, 5), n=st.integers(1, 10**9))
    def test_strictly_decreasing(self, kappa, s4, eps, a, n):
        p = BoundParams(n=n, kappa=kappa, s4_sq=s4, sigma=s4, epsilon=eps, a=a)
        ts = np.geomspace(1e-6, 1e6, 100) * s4
        z = [zeta(t, p) for t in ts]
        assert all(x > y for x, y in zip(z, z[1:]))


class TestBStar:
    def test_gate_violated(self):
        p = params(n=4)
        assert b_star(1.0, p) == math.inf
        assert bound_B(1.0, p) == math.inf

    def test_quarter_under_standing_assumption(self):
        p = params(n=10**7, s4_sq=1.0)
        sigma = choose_sigma(p.n, p.kappa, p.s4_sq, p.epsilon, p.a)
        p = p.replace(sigma=sigma)
        assert standing_assumption_holds(p)
        assert b_star(sigma, p) <= 0.25 + 1e-12
        assert max(b_star(t, p) for t in np.geomspace(1e-9, 1e9, 200)) <= 0.25 + 1e-12

    def test_non_increasing(self):
        p = params(n=10**6, sigma=0.01)
        ts = np.geomspace(1e-4, 1e4, 400)
        b = [b_star(t, p) for t in ts]
        assert all(x >= y for x, y in zip(b, b[1:]))

    def test_finite_region_is_upper_interval(self):
        p = params(n=30_000, sigma=1e-6, s4_sq=1e3)
        fin = [math.isfinite(b_star(t, p)) for t in np.geomspace(1e-6, 1e3, 300)]
        first = fin.index(True)
        assert all(fin[first:])


class TestBoundB:
    def test_t_zero(self):
        p = params(n=10**7, sigma=0.1, delta=0.01, gram_frobenius=2.0)
        expected = 2 * 0.1 * b_star(0.1, p) + 7 * 0.01 * 2.0 + 0.1
        assert bound_B(0.0, p) == pytest.approx(expected, rel=1e-15)
        assert b_star(0.0, p) == b_star(0.1, p)

    def test_monotone_and_half_slope(self):
        rng = np.random.default_rng(0)
        p = params(n=10**7, sigma=0.05, s4_sq=2.0, delta=0.01, gram_frobenius=1.0)
        ts = rng.uniform(0, 10, 10_000)
        hs = rng.uniform(0, 5, 10_000)
        for t, h in zip(ts, hs):
            lo, hi = bound_B(t, p), bound_B(t + h, p)
            assert hi >= lo - 1e-12
            assert hi <= lo + h / 2 + 1e-12

    def test_relative_envelope_monotone(self):
        p = params(n=10**7, sigma=0.05, s4_sq=2.0)
        ts = np.linspace(0, 10, 2000)
        lower = [max(t, p.sigma) * (1 - 2 * b_star(min(t, p.s4_sq), p)) for t in ts]
        upper = [max(t, p.sigma) * (1 + 2 * b_star(min(t, p.s4_sq), p)) for t in ts]
        assert all(y >= x - 1e-12 for x, y in zip(lower, lower[1:]))
        assert all(y >= x - 1e-12 for x, y in zip(upper, upper[1:]))


class TestParams:
    @pytest.mark.parametrize("kw", [
        dict(n=0), dict(sigma=0.0), dict(sigma=2.0), dict(epsilon=0.5),
        dict(epsilon=0.0), dict(delta=-1.0), dict(a=0.0), dict(n=1.5),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            params(**kw)

    def test_roundtrip(self):
        p = params(delta=0.1)
        assert BoundParams(**p.to_dict()) == p

    def test_choose_sigma_satisfies_assumption(self):
        s = choose_sigma(10**6, 3.0, 10.0)
        p = BoundParams(n=10**6, kappa=3.0, s4_sq=10.0, sigma=s)
        assert 0 < s <= 10.0
        assert standing_assumption_holds(p)

    def test_choose_sigma_fallback(self):
        assert choose_sigma(10, 3.0, 2.0) == 2.0


class TestMoments:
    def test_kappa_two_point(self):
        v = np.array([0.6, 0.8])
        assert estimate_kappa(np.array([v, -v]), v[None, :]) == 1.5

    def test_kappa_gaussian(self):
        x = np.random.default_rng(1).standard_normal((100_000, 3))
        dirs = np.eye(3)
        assert estimate_kappa(x, dirs) == pytest.approx(3.0, abs=0.3)

    def test_kappa_clamped(self):
        x = np.random.default_rng(2).uniform(-1, 1, (1000, 2))
        assert estimate_kappa(x, np.eye(2)) >= 1.5

    def test_s4_unit_sphere(self):
        x = np.random.default_rng(3).standard_normal((50, 4))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        assert estimate_s4(x) == pytest.approx(1.0, rel=1e-12)

    def test_s4_single_point(self):
        assert estimate_s4(np.array([[2.0, 0.0]])) == pytest.approx(4.0)

    def test_s4_two_points(self):
        assert estimate_s4(np.array([[1.0, 0.0], [0.0, 3.0]])) == pytest.approx(math.sqrt(41))
