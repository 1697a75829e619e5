import math

import numpy as np
import pytest

from conftest import haar, random_symmetric
from robpca.bounds import BoundParams, b_star, bound_B
from robpca.errors import NumericalError, ValidationError
from robpca.gram_estimator import RobustGramEstimate, build_delta_net, estimate_gram
from robpca.robust_pca import (
    cutoff_estimate,
    eigenvalue_halfwidth,
    eigenvalue_report,
    frobenius_certificate,
    residual_diagnostics,
    operator_norm_certificate,
    projector_error_bound,
    shrink_eigenvalues,
    top_projector,
    worst_case_certificate,
)
from robpca.spectral import eigendecompose

FINITE = BoundParams(n=10**7, kappa=3.0, s4_sq=50.0, sigma=0.5, delta=0.01, gram_frobenius=5.0)


def fake_estimate(g_hat, params=FINITE):
    d = g_hat.shape[0]
    net = build_delta_net(d, None, "randomized", size=1)
    return RobustGramEstimate(g_hat, g_hat, net, np.zeros(1), params)


def brute_operator(lam, b, L):
    best = math.inf
    for r in range(1, len(lam) + 1):
        tail = sum(v * v for v in lam[r:])
        best = min(best, (b + math.sqrt(4 * r * b * b + 2 * tail)) / L)
    return best


def brute_frobenius(lam, b, L):
    return min(math.sqrt(13 * r * b * b + 2 * sum(v * v for v in lam[r:])) / L
               for r in range(1, len(lam) + 1))


class TestEigenvalueReport:
    def test_zero_estimate(self):
        rep = eigenvalue_report(fake_estimate(np.zeros((3, 3))))
        p = FINITE
        expected = 2 * p.sigma * b_star(0.0, p) + 5 * p.delta * p.gram_frobenius + p.sigma
        assert np.all(rep.lambda_hat == 0)
        assert rep.interval_halfwidth == pytest.approx(expected)

    def test_halfwidth_shared_and_sorted(self, rng):
        a = rng.standard_normal((4, 4))
        rep = eigenvalue_report(fake_estimate(a @ a.T))
        assert np.all(np.diff(rep.lambda_hat) <= 0)
        iv = np.asarray(rep.intervals())
        lo, hi = iv[:, 0], iv[:, 1]
        assert np.allclose(hi - lo, 2 * rep.interval_halfwidth)

    def test_five_delta(self):
        p0 = FINITE.replace(delta=0.0)
        assert eigenvalue_halfwidth(3.0, FINITE) - eigenvalue_halfwidth(3.0, p0) == pytest.approx(
            5 * 0.01 * 5.0)
        assert bound_B(3.0, FINITE) - bound_B(3.0, p0) == pytest.approx(7 * 0.01 * 5.0)


class TestProjectors:
    def test_full_rank_identity(self, rng):
        es = eigendecompose(random_symmetric(rng, 4))
        assert np.allclose(top_projector(es, 4), np.eye(4))

    def test_diag(self):
        es = eigendecompose(np.diag([3.0, 2.0, 1.0]))
        assert np.allclose(top_projector(es, 1), np.diag([1.0, 0.0, 0.0]))

    def test_projector_properties(self, rng):
        for _ in range(50):
            d = int(rng.integers(2, 8))
            r = int(rng.integers(1, d + 1))
            p = top_projector(eigendecompose(random_symmetric(rng, d)), r)
            assert np.allclose(p @ p, p, atol=1e-10)
            assert np.array_equal(p, p.T)
            assert np.trace(p) == pytest.approx(r, abs=1e-10)

    def test_range(self):
        with pytest.raises(ValidationError):
            top_projector(eigendecompose(np.eye(2)), 3)

    def test_zero_gap(self):
        assert projector_error_bound(1, [2.0, 2.0, 1.0], FINITE) == math.inf

    def test_formula_and_linearity(self):
        lam = [4.0, 3.0, 1.0]
        b1 = bound_B(4.0, FINITE)
        assert projector_error_bound(2, lam, FINITE) == pytest.approx(math.sqrt(4) * b1 / 2.0)
        # doubling B(l1) through sigma-free scaling of all terms: compare ratio
        p2 = FINITE.replace(delta=FINITE.delta * 2)
        ratio = projector_error_bound(2, lam, p2) / projector_error_bound(2, lam, FINITE)
        assert ratio == pytest.approx(bound_B(4.0, p2) / b1)

    def test_estimated_mode_widens(self):
        lam = [10.0, 3.0, 1.0]
        hw = eigenvalue_halfwidth(10.0, FINITE)
        est = projector_error_bound(1, lam, FINITE, "estimated")
        expected = math.sqrt(2) * bound_B(10.0 + hw, FINITE) / (7.0 - 2 * hw)
        assert est == pytest.approx(expected)
        assert est >= projector_error_bound(1, lam, FINITE)
        assert projector_error_bound(1, lam, FINITE, "estimated", halfwidth=4.0) == math.inf

    def test_gate_violation(self):
        p = BoundParams(n=10, kappa=3.0, s4_sq=1.0, sigma=1.0)
        assert projector_error_bound(1, [2.0, 1.0], p) == math.inf


class TestCutoff:
    def test_zero_bound_returns_g_hat(self, rng):
        a = rng.standard_normal((3, 3))
        g = a @ a.T
        assert np.allclose(cutoff_estimate(fake_estimate(g), bound=lambda t: 0.0).g_tilde, g)

    def test_arithmetic(self):
        table = {10.0: 2.0, 1.0: 1.0}
        assert np.allclose(shrink_eigenvalues([10.0, 1.0], table.__getitem__), [8.0, 0.0])
        cut = cutoff_estimate(fake_estimate(np.diag([10.0, 1.0])), bound=table.__getitem__)
        assert np.allclose(cut.lambda_tilde, [8.0, 0.0])
        assert np.allclose(cut.g_tilde, np.diag([8.0, 0.0]))

    def test_ordering_inside_gate(self, rng):
        for _ in range(20):
            lam = np.sort(rng.uniform(0, 20, 5))[::-1]
            cut = cutoff_estimate(fake_estimate(np.diag(lam)))
            lt = cut.lambda_tilde
            assert np.all(lt >= 0) and np.all(lt <= np.sort(lam)[::-1] + 1e-12)
            assert np.all(np.diff(lt) <= 1e-12)

    def test_infinite_bound_raises(self):
        p = BoundParams(n=10, kappa=3.0, s4_sq=1.0, sigma=1.0)
        with pytest.raises(NumericalError):
            cutoff_estimate(fake_estimate(np.eye(2), p))


class TestCertificates:
    def test_operator_d1(self):
        val, r = operator_norm_certificate([2.0], 2.0, b1=0.3)
        assert val == pytest.approx(3 * 0.3 / 2.0) and r == 1

    def test_operator_flat_tail(self):
        assert operator_norm_certificate([5.0, 0.0, 0.0, 0.0], 1.0, b1=0.1)[1] == 1

    def test_frobenius_zero_spectrum(self):
        val, r = frobenius_certificate(np.zeros(4), b1=0.7)
        assert val == pytest.approx(math.sqrt(13) * 0.7) and r == 1

    def test_frobenius_zero_b(self):
        val, r = frobenius_certificate([3.0, 2.0, 1.0], b1=0.0)
        assert val == 0.0 and r == 3

    def test_worst_case_examples(self):
        assert worst_case_certificate(0.0, 1.5) == (1, pytest.approx(math.sqrt(13) * 1.5))
        assert worst_case_certificate(13.0, math.sqrt(2))[0] == 4

    def test_match_brute_force(self, rng):
        for _ in range(1000):
            d = int(rng.integers(1, 9))
            lam = np.sort(rng.exponential(1.0, d))[::-1]
            b = float(rng.exponential(0.3)) + 1e-6
            L = float(rng.uniform(0.1, 3))
            assert operator_norm_certificate(lam, L, b1=b)[0] == pytest.approx(
                brute_operator(list(lam), b, L), rel=1e-14)
            assert frobenius_certificate(lam, L=L, b1=b)[0] == pytest.approx(
                brute_frobenius(list(lam), b, L), rel=1e-14)

    def test_worst_case_majorizes(self, rng):
        for _ in range(1000):
            d = int(rng.integers(1, 12))
            lam = np.sort(rng.pareto(1.5, d))[::-1]
            b = float(rng.exponential(0.5)) + 1e-9
            fro = frobenius_certificate(lam, b1=b)[0]
            assert fro <= worst_case_certificate(float(lam.sum()), b)[1] * (1 + 1e-12)

    def test_monotone_in_b_and_tail(self):
        lam = np.array([5.0, 2.0, 1.0, 0.5])
        for cert in (lambda l, b: operator_norm_certificate(l, 1.0, b1=b)[0],
                     lambda l, b: frobenius_certificate(l, b1=b)[0]):
            vals = [cert(lam, b) for b in np.linspace(0.01, 3, 50)]
            assert all(y >= x for x, y in zip(vals, vals[1:]))
            bumped = lam.copy()
            bumped[3] += 0.3
            assert cert(bumped, 0.4) >= cert(lam, 0.4)

    def test_infinite_b(self):
        p = BoundParams(n=10, kappa=3.0, s4_sq=1.0, sigma=1.0)
        assert operator_norm_certificate([1.0, 0.5], 1.0, p)[0] == math.inf
        assert frobenius_certificate([1.0, 0.5], p)[0] == math.inf
        assert worst_case_certificate(1.0, math.inf)[1] == math.inf


class TestResidual:
    def test_exact_estimate(self, rng):
        a = rng.standard_normal((4, 4))
        g = a @ a.T
        rep = residual_diagnostics(g, g, FINITE)
        assert np.max(rep.lhs_true) < 1e-18
        assert np.max(rep.lhs_hat) < 1e-18
        assert rep.all_pass

    def test_hat_equals_residual_norm(self, rng):
        for _ in range(50):
            g = random_symmetric(rng, 5)
            gh = g + 0.1 * random_symmetric(rng, 5)
            rep = residual_diagnostics(g, gh, FINITE)
            q = eigendecompose(gh).vectors
            direct = np.sum((g @ q - gh @ q) ** 2, axis=0)
            assert np.allclose(rep.lhs_hat, direct, rtol=1e-9, atol=1e-12)

    def test_thresholds(self):
        rep = residual_diagnostics(np.diag([2.0, 1.0]), np.diag([2.0, 1.0]), FINITE)
        b = bound_B(2.0, FINITE)
        assert rep.threshold_true == pytest.approx(2 * b * b)
        assert rep.threshold_hat == pytest.approx(b * b)

    def test_needs_params_for_bare_matrix(self):
        with pytest.raises(ValidationError):
            residual_diagnostics(np.eye(2), np.eye(2))


class TestZeroPadding:
    def test_certificates_dimension_free(self, rng):
        for _ in range(100):
            d = int(rng.integers(1, 7))
            lam = np.sort(rng.exponential(2.0, d))[::-1]
            padded = np.concatenate([lam, np.zeros(2 * d)])
            for L in (0.5, 1.0, 2.0):
                assert operator_norm_certificate(padded, L, FINITE)[0] == pytest.approx(
                    operator_norm_certificate(lam, L, FINITE)[0], rel=1e-12)
                assert frobenius_certificate(padded, FINITE, L)[0] == pytest.approx(
                    frobenius_certificate(lam, FINITE, L)[0], rel=1e-12)


def test_real_pipeline_smoke(rng):
    u = haar(rng, 3)
    g = (u * [4.0, 2.0, 1.0]) @ u.T
    x = rng.standard_normal((3000, 3)) @ np.linalg.cholesky(g).T
    rep = eigenvalue_report(estimate_gram(x))
    assert rep.lambda_hat[0] == pytest.approx(4.0, rel=0.3)
