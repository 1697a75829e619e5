"""Closed-form constants and bound functions of the PAC-Bayesian calculus.

Everything here is a pure scalar computation in double precision.  Bounds
that are unavailable (the confidence gate fails) are returned as ``math.inf``
rather than raised.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from robpca._arrays import as_sample
from robpca.errors import ValidationError

#: smallest kurtosis ratio for which the bounds are stated
KAPPA_MIN = 1.5


@dataclass(frozen=True)
class BoundParams:
    """Scalar inputs of the bound calculus.

    Parameters
    ----------
    n : int
        Sample size.
    kappa : float
        Kurtosis ratio, ``sup E<θ,X>^4 / (E<θ,X>^2)^2``.
    s4_sq : float
        ``E(||X||^4)^(1/2)``.
    sigma : float
        Threshold, ``0 < sigma <= s4_sq``.
    delta : float
        Resolution of the direction net.
    epsilon : float
        Confidence parameter in ``(0, 1/2)``; events hold with probability
        at least ``1 - 2 epsilon``.
    a : float
        Grid parameter, ``a > 0``.
    gram_frobenius : float
        ``||G||_F`` or a plug-in proxy for it.
    """

    n: int
    kappa: float
    s4_sq: float
    sigma: float
    delta: float = 0.0
    epsilon: float = 0.05
    a: float = 1.0
    gram_frobenius: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if not self.kappa >= 1.0:
            raise ValidationError(f"kappa must be >= 1, got {self.kappa}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        # relative slack so that sigma = s4_sq survives a round trip through JSON
        if self.sigma > self.s4_sq * (1 + 1e-12):
            raise ValidationError(
                f"sigma ({self.sigma}) must not exceed s4_sq ({self.s4_sq})"
            )
        if not 0 < self.epsilon < 0.5:
            raise ValidationError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if not self.delta >= 0:
            raise ValidationError(f"delta must be >= 0, got {self.delta}")
        if not self.a > 0:
            raise ValidationError(f"a must be positive, got {self.a}")
        if not self.gram_frobenius >= 0:
            raise ValidationError("gram_frobenius must be >= 0")

    def replace(self, **changes) -> "BoundParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def constant_c() -> float:
    """The constant ``15 / (8 log 2 (sqrt 2 - 1)) * exp((1 + 2 sqrt 2) / 2)``."""
    sqrt2 = math.sqrt(2.0)
    return 15.0 / (8.0 * math.log(2.0) * (sqrt2 - 1.0)) * math.exp((1.0 + 2.0 * sqrt2) / 2.0)


def grid_size_K(params: BoundParams) -> int:
    """Number of grid points ``K``, clamped below at 1."""
    c = constant_c()
    arg = params.n / (72.0 * (2.0 + c) * math.sqrt(params.kappa))
    k = 1 + math.ceil(math.log(arg) / params.a)
    return max(1, k)


def _check_kappa(params: BoundParams) -> None:
    if params.kappa < KAPPA_MIN:
        raise ValidationError(
            f"bounds require kappa >= {KAPPA_MIN}, got {params.kappa}"
        )


def zeta(t: float, params: BoundParams) -> float:
    """Deviation scale ``zeta(t)``; strictly decreasing in ``t > 0``."""
    if not t > 0:
        raise ValidationError(f"zeta is defined for t > 0, got {t}")
    _check_kappa(params)
    c = constant_c()
    kappa, s4_sq, a = params.kappa, params.s4_sq, params.a
    sqrt_kappa = math.sqrt(kappa)
    log_term = math.log(grid_size_K(params) / params.epsilon)
    first = math.sqrt(
        2.0 * (kappa - 1.0)
        * ((2.0 + 3.0 * c) * s4_sq / (4.0 * (2.0 + c) * sqrt_kappa * t) + log_term)
    ) * math.cosh(a / 4.0)
    second = math.sqrt(2.0 * (2.0 + c) * sqrt_kappa * s4_sq / t) * math.cosh(a / 2.0)
    return first + second


def b_star(t: float, params: BoundParams) -> float:
    """Relative deviation bound ``B_*(t)``, or ``inf`` outside the gate.

    The gate is ``[6 + 1/(kappa - 1)] zeta(max(t, sigma)) <= sqrt(n)``.
    """
    _check_kappa(params)
    z = zeta(max(t, params.sigma), params)
    sqrt_n = math.sqrt(params.n)
    if (6.0 + 1.0 / (params.kappa - 1.0)) * z > sqrt_n:
        return math.inf
    u = z / sqrt_n
    return u / (1.0 - 4.0 * u)


def bound_B(t: float, params: BoundParams) -> float:
    """``B(t) = 2 max(t, sigma) B_*(min(t, s4_sq)) + 7 delta ||G||_F + sigma``."""
    if t < 0:
        raise ValidationError(f"B(t) is defined for t >= 0, got {t}")
    bs = b_star(min(t, params.s4_sq), params)
    if math.isinf(bs):
        return math.inf
    return (
        2.0 * max(t, params.sigma) * bs
        + 7.0 * params.delta * params.gram_frobenius
        + params.sigma
    )


def standing_assumption_holds(params: BoundParams) -> bool:
    """Whether ``8 zeta(sigma) <= sqrt(n)``, the regime in which bounds are finite."""
    return 8.0 * zeta(params.sigma, params) <= math.sqrt(params.n)


def choose_sigma(
    n: int,
    kappa: float,
    s4_sq: float,
    epsilon: float = 0.05,
    a: float = 1.0,
    num: int = 241,
    decades: float = 12.0,
) -> float:
    """Smallest sigma on a log grid below ``s4_sq`` with ``8 zeta(sigma) <= sqrt(n)``.

    Falls back to ``s4_sq`` when no grid point qualifies; the bounds are then
    infinite but well defined.
    """
    if not s4_sq > 0:
        raise ValidationError("s4_sq must be positive to choose sigma")
    grid = s4_sq * np.logspace(-decades, 0.0, num)
    grid[-1] = s4_sq
    for sigma in grid:
        p = BoundParams(n=n, kappa=kappa, s4_sq=s4_sq, sigma=float(sigma),
                        epsilon=epsilon, a=a)
        if standing_assumption_holds(p):
            return float(sigma)
    return float(s4_sq)


def estimate_kappa(sample, directions) -> float:
    """Largest empirical kurtosis ratio over ``directions``, clamped at 3/2.

    Parameters
    ----------
    sample : array_like, shape (n, d)
    directions : array_like of shape (m, d), or an object with a
        ``directions`` attribute (such as :class:`robpca.gram_estimator.DeltaNet`).
    """
    x = as_sample(sample)
    dirs = getattr(directions, "directions", directions)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    proj_sq = (x @ dirs.T) ** 2
    m2 = proj_sq.mean(axis=0)
    m4 = (proj_sq**2).mean(axis=0)
    ok = m2 > 0
    if not ok.any():
        raise ValidationError("every direction has zero empirical second moment")
    ratio = float(np.max(m4[ok] / m2[ok] ** 2))
    return max(ratio, KAPPA_MIN)


def estimate_s4(sample) -> float:
    """``((1/n) sum ||X_i||^4)^(1/2)``."""
    x = as_sample(sample)
    sq_norms = np.einsum("ij,ij->i", x, x)
    return float(math.sqrt(np.mean(sq_norms**2)))
