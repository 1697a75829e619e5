"""Certified PCA estimators built on a robust Gram estimate.

* eigenvalue intervals valid uniformly over the spectrum;
* the top-``r`` eigenprojector with a gap-based error bound;
* the shrunk estimator ``G_tilde`` (eigenvalues ``[l - B(l)]_+``) and the
  operator/Frobenius certificates for smooth spectral cut-offs.

Certificates are advisory: when ``B`` is infinite they return ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from robpca._arrays import as_symmetric
from robpca.bounds import BoundParams, b_star, bound_B
from robpca.errors import NumericalError, ValidationError
from robpca.gram_estimator import RobustGramEstimate
from robpca.spectral import EigenSystem, eigendecompose


@dataclass(frozen=True, eq=False)
class EigenvalueReport:
    lambda_hat: np.ndarray
    interval_halfwidth: float
    eigensystem: EigenSystem
    params: BoundParams

    def intervals(self) -> np.ndarray:
        """Rows ``(lower, upper)`` around each estimated eigenvalue."""
        hw = self.interval_halfwidth
        return np.column_stack([self.lambda_hat - hw, self.lambda_hat + hw])

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat.tolist(),
            "interval_halfwidth": self.interval_halfwidth,
            "params": self.params.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class CutoffEstimate:
    g_tilde: np.ndarray
    lambda_tilde: np.ndarray
    source: RobustGramEstimate | None = None


def _spectrum(spectrum) -> np.ndarray:
    lam = np.asarray(spectrum, dtype=float).ravel()
    if lam.size == 0:
        raise ValidationError("empty spectrum")
    if np.any(np.diff(lam) > 1e-12 * max(1.0, float(np.max(np.abs(lam))))):
        raise ValidationError("spectrum must be non-increasing")
    return lam


def _tail_sq_sums(lam: np.ndarray) -> np.ndarray:
    # entry r-1 holds sum_{i > r} lam_i^2 for r = 1..d
    sq = lam**2
    rev = np.cumsum(sq[::-1])[::-1]
    return np.append(rev[1:], 0.0)


# -- eigenvalues --------------------------------------------------------------


def eigenvalue_halfwidth(lambda1_hat: float, params: BoundParams) -> float:
    """``2 max(l1, sigma) B_*(min(l1, s4_sq)) + 5 delta ||G||_F + sigma``."""
    bs = b_star(min(lambda1_hat, params.s4_sq), params)
    if math.isinf(bs):
        return math.inf
    return (
        2.0 * max(lambda1_hat, params.sigma) * bs
        + 5.0 * params.delta * params.gram_frobenius
        + params.sigma
    )


def eigenvalue_halfwidth_true(lambda1: float, params: BoundParams) -> float:
    """Same interval expressed with the true top eigenvalue."""
    bs = b_star(lambda1, params)
    if math.isinf(bs):
        return math.inf
    return (
        2.0 * max(lambda1, params.sigma) * bs
        + 5.0 * params.delta * params.gram_frobenius
        + params.sigma
    )


def eigenvalue_report(est: RobustGramEstimate) -> EigenvalueReport:
    """Eigenvalues of ``G_hat`` with a common certified halfwidth."""
    es = eigendecompose(est.g_hat)
    lam = np.maximum(es.values, 0.0)
    hw = eigenvalue_halfwidth(float(lam[0]), est.params)
    return EigenvalueReport(lam, hw, es, est.params)


# -- projectors ---------------------------------------------------------------


def top_projector(es: EigenSystem, r: int) -> np.ndarray:
    """Orthogonal projector on the ``r`` leading eigenvectors."""
    if not 1 <= r <= es.dim:
        raise ValidationError(f"r must lie in [1, {es.dim}], got {r}")
    p = es.vectors[:, :r]
    return as_symmetric(p @ p.T, check=False)


def projector_error_bound(
    r: int,
    spectrum,
    params: BoundParams,
    gap_source: str = "true",
    halfwidth: float | None = None,
) -> float:
    """Bound on ``||Pi_r - Pi_hat_r||_op``: ``sqrt(2r) B(l1) / (l_r - l_{r+1})``.

    Parameters
    ----------
    r : int
        Rank, ``1 <= r < d``.
    spectrum : array_like
        Non-increasing eigenvalues: the true ones when ``gap_source="true"``,
        those of ``G_hat`` when ``gap_source="estimated"``.
    gap_source : {"true", "estimated"}
        In estimated mode the gap is shrunk to
        ``[l_r - l_{r+1} - 2 halfwidth]_+`` and ``B`` is evaluated at
        ``l1 + halfwidth``, both valid on the eigenvalue-interval event.
    halfwidth : float, optional
        Interval halfwidth for estimated mode; computed from ``spectrum[0]``
        when omitted.

    Returns
    -------
    float
        ``inf`` when the (shrunk) gap is not positive or ``B`` is infinite.
    """
    lam = _spectrum(spectrum)
    if not 1 <= r < lam.size:
        raise ValidationError(f"r must lie in [1, {lam.size - 1}], got {r}")
    if gap_source == "true":
        gap = lam[r - 1] - lam[r]
        b1 = bound_B(max(float(lam[0]), 0.0), params)
    elif gap_source == "estimated":
        if halfwidth is None:
            halfwidth = eigenvalue_halfwidth(float(lam[0]), params)
        gap = lam[r - 1] - lam[r] - 2.0 * halfwidth
        b1 = bound_B(max(float(lam[0]), 0.0) + halfwidth, params)
    else:
        raise ValidationError(f"unknown gap source {gap_source!r}")
    if not gap > 0 or math.isinf(b1):
        return math.inf
    return math.sqrt(2.0 * r) * b1 / gap


# -- smooth cut-off -----------------------------------------------------------


def shrink_eigenvalues(lambda_hat, bound: Callable[[float], float]) -> np.ndarray:
    """``[l - bound(l)]_+`` elementwise."""
    lam = np.asarray(lambda_hat, dtype=float)
    out = np.array([max(l - bound(max(l, 0.0)), 0.0) for l in lam])
    return out


def cutoff_estimate(
    est: RobustGramEstimate,
    bound: Callable[[float], float] | None = None,
) -> CutoffEstimate:
    """Shrunk estimator ``G_tilde = sum [l_i - B(l_i)]_+ q_i q_i^T``.

    ``bound`` replaces ``B`` (built from ``est.params``) when given.

    Raises
    ------
    NumericalError
        If ``B`` is infinite, i.e. the certified regime is unavailable.
    """
    if bound is None:
        params = est.params
        bound = lambda t: bound_B(t, params)  # noqa: E731
    es = eigendecompose(est.g_hat)
    lam = np.maximum(es.values, 0.0)
    if any(math.isinf(bound(float(l))) for l in lam):
        raise NumericalError("B is infinite: the cut-off estimator is unavailable")
    lt = shrink_eigenvalues(lam, bound)
    u = es.vectors
    g_tilde = as_symmetric((u * lt) @ u.T, check=False)
    return CutoffEstimate(g_tilde, lt, est)


def _resolve_b1(spectrum: np.ndarray, params: BoundParams | None, b1: float | None) -> float:
    if b1 is not None:
        return float(b1)
    if params is None:
        raise ValidationError("either params or b1 is required")
    return bound_B(max(float(spectrum[0]), 0.0), params)


def operator_norm_certificate(
    spectrum,
    L: float,
    params: BoundParams | None = None,
    b1: float | None = None,
) -> tuple[float, int]:
    """``min_r L^-1 (B(l1) + sqrt(4 r B(l1)^2 + 2 sum_{i>r} l_i^2))``.

    Returns the bound and the minimising ``r`` (smallest on ties).
    ``b1`` overrides ``B(l1)``.
    """
    lam = _spectrum(spectrum)
    if not L > 0:
        raise ValidationError("L must be positive")
    b = _resolve_b1(lam, params, b1)
    if math.isinf(b):
        return math.inf, 1
    rs = np.arange(1, lam.size + 1)
    vals = (b + np.sqrt(4.0 * rs * b * b + 2.0 * _tail_sq_sums(lam))) / L
    k = int(np.argmin(vals))
    return float(vals[k]), k + 1


def frobenius_certificate(
    spectrum,
    params: BoundParams | None = None,
    L: float = 1.0,
    b1: float | None = None,
) -> tuple[float, int]:
    """``min_r L^-1 sqrt(13 r B(l1)^2 + 2 sum_{i>r} l_i^2)`` and its argmin.

    With ``L = 1`` this bounds ``||G - G_tilde||_F``; with the Lipschitz
    scale of ``f`` it bounds ``||f(G) - f(G_tilde)||_F``.
    """
    lam = _spectrum(spectrum)
    if not L > 0:
        raise ValidationError("L must be positive")
    b = _resolve_b1(lam, params, b1)
    if math.isinf(b):
        return math.inf, 1
    rs = np.arange(1, lam.size + 1)
    vals = np.sqrt(13.0 * rs * b * b + 2.0 * _tail_sq_sums(lam)) / L
    k = int(np.argmin(vals))
    return float(vals[k]), k + 1


def worst_case_certificate(
    trace_G: float, B1: float, L: float = 1.0, d: int | None = None
) -> tuple[int, float]:
    """Spectrum-free Frobenius certificate ``L^-1 sqrt(11 Tr B + 13 B^2)``.

    Returns ``(r, bound)`` with ``r = ceil(sqrt(2/13) Tr / B)`` clamped to
    ``[1, d]`` (upper clamp only when ``d`` is given).
    """
    if trace_G < 0 or not B1 > 0 or not L > 0:
        raise ValidationError("need trace_G >= 0, B1 > 0, L > 0")
    if math.isinf(B1):
        return 1, math.inf
    r = max(1, math.ceil(math.sqrt(2.0 / 13.0) * trace_G / B1))
    if d is not None:
        r = min(r, d)
    bound = math.sqrt(11.0 * trace_G * B1 + 13.0 * B1 * B1) / L
    return r, bound


# -- diagnostics --------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    """Per-eigenvector residuals of the estimate against the truth.

    ``lhs_true[k] = sum_i (l_i - l_k)^2 <q_k, p_i>^2`` is compared with
    ``2 B(l1)^2`` and ``lhs_hat[k] = sum_i (l_i - l_hat_k)^2 <q_k, p_i>^2``
    (which equals ``||G q_k - G_hat q_k||^2``) with ``B(l1)^2``.
    """

    lhs_true: np.ndarray
    lhs_hat: np.ndarray
    threshold_true: float
    threshold_hat: float

    @property
    def pass_true(self) -> np.ndarray:
        return self.lhs_true <= self.threshold_true

    @property
    def pass_hat(self) -> np.ndarray:
        return self.lhs_hat <= self.threshold_hat

    @property
    def all_pass(self) -> bool:
        return bool(np.all(self.pass_true) and np.all(self.pass_hat))


def residual_diagnostics(g_true, est: RobustGramEstimate | np.ndarray,
                        params: BoundParams | None = None) -> ResidualReport:
    """Residual inequalities of the estimated eigenvectors against ``G``."""
    g = as_symmetric(g_true)
    g_hat = est.g_hat if isinstance(est, RobustGramEstimate) else as_symmetric(est)
    if params is None:
        if not isinstance(est, RobustGramEstimate):
            raise ValidationError("params required when est is a bare matrix")
        params = est.params
    true_es = eigendecompose(g)
    hat_es = eigendecompose(g_hat)
    lam, p = true_es.values, true_es.vectors
    lam_hat, q = hat_es.values, hat_es.vectors
    overlap_sq = (q.T @ p) ** 2  # [k, i] = <q_k, p_i>^2
    lhs_true = np.sum((lam[None, :] - lam[:, None]) ** 2 * overlap_sq, axis=1)
    lhs_hat = np.sum((lam[None, :] - lam_hat[:, None]) ** 2 * overlap_sq, axis=1)
    b1 = bound_B(max(float(lam[0]), 0.0), params)
    return ResidualReport(lhs_true, lhs_hat, 2.0 * b1 * b1, b1 * b1)
