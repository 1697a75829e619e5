"""Robust Gram-matrix estimation on a net of directions.

The estimate is built in four steps:

1. a finite net of unit directions (:func:`build_delta_net`);
2. a robust location estimate of ``<theta, X_i>^2`` for every direction
   (:func:`robust_quadratic_forms`);
3. the symmetric matrix whose quadratic form best matches those values in
   least squares (:func:`fit_symmetric_matrix`);
4. its positive part (:func:`positive_part`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from robpca._arrays import as_sample, as_symmetric
from robpca.bounds import BoundParams, choose_sigma, estimate_kappa, estimate_s4
from robpca.errors import NumericalError, ValidationError
from robpca.spectral import eigendecompose

logger = logging.getLogger(__name__)

STRATEGIES = ("exhaustive", "randomized", "eigen-augmented")
METHODS = ("mom", "truncated")

_UNIT_TOL = 1e-12
_BISECTION_STEPS = 200


@dataclass(frozen=True, eq=False)
class DeltaNet:
    """Finite set of unit directions.

    ``delta`` is a guaranteed covering radius for exhaustive nets and a
    nominal value for the randomized strategies.
    """

    dim: int
    delta: float
    directions: np.ndarray
    strategy: str
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.directions.shape[0]

    def to_dict(self, with_directions: bool = False) -> dict:
        out = {
            "dim": self.dim,
            "delta": self.delta,
            "size": len(self),
            "strategy": self.strategy,
            "seed": self.seed,
            **self.meta,
        }
        if with_directions:
            out["directions"] = self.directions.tolist()
        return out


@dataclass(frozen=True)
class NetConfig:
    strategy: str = "randomized"
    size: int = 500
    delta: float | None = None
    seed: int = 0
    probes: int = 2000


@dataclass(frozen=True)
class MethodConfig:
    """Robust scalar estimator settings.

    ``blocks`` defaults to ``ceil(8 log(1/epsilon))`` for median-of-means;
    ``width`` is the truncation scale of the soft-truncated mean and
    defaults to a per-direction value (see :func:`truncated_mean`).
    """

    method: str = "mom"
    blocks: int | None = None
    width: float | None = None
    seed: int = 0


@dataclass(frozen=True, eq=False)
class RobustGramEstimate:
    q_matrix: np.ndarray
    g_hat: np.ndarray
    net: DeltaNet
    scalar_estimates: np.ndarray
    params: BoundParams
    method: MethodConfig = MethodConfig()

    @property
    def dim(self) -> int:
        return self.g_hat.shape[0]

    def to_dict(self) -> dict:
        return {
            "q": self.q_matrix.tolist(),
            "g_hat": self.g_hat.tolist(),
            "net_meta": self.net.to_dict(),
            "params": self.params.to_dict(),
            "method": {
                "method": self.method.method,
                "blocks": self.method.blocks,
                "width": self.method.width,
                "seed": self.method.seed,
            },
            "per_direction": [
                {"theta": th.tolist(), "estimate": float(v)}
                for th, v in zip(self.net.directions, self.scalar_estimates)
            ],
        }


def empirical_gram(sample) -> np.ndarray:
    """``(1/n) sum X_i X_i^T``."""
    x = as_sample(sample)
    return as_symmetric(x.T @ x / x.shape[0], check=False)


# -- nets ---------------------------------------------------------------------


def _unit_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValidationError("zero vector cannot be normalised to a direction")
    return v / norms


def _dedupe(directions: np.ndarray, decimals: int = 12) -> np.ndarray:
    # first occurrence wins; order is preserved
    _, first = np.unique(np.round(directions, decimals), axis=0, return_index=True)
    return directions[np.sort(first)]


def _circle_net(delta: float) -> np.ndarray:
    # neighbours at chord distance <= delta
    half = min(delta / 2.0, 1.0)
    m = max(2, math.ceil(2.0 * math.pi / (2.0 * math.asin(half))))
    angles = 2.0 * math.pi * np.arange(m) / m
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _sphere_net(delta: float) -> np.ndarray:
    # Rings of constant polar angle spaced by at most delta (so any point is
    # within geodesic delta/2 of a ring), each ring fine enough that the
    # chord to the nearest ring point is at most delta/2.
    n_rings = math.ceil(math.pi / delta)
    points = []
    for j in range(n_rings + 1):
        phi = math.pi * j / n_rings
        rho = math.sin(phi)
        if j == 0 or j == n_rings or rho < 1e-15:
            points.append([0.0, 0.0, math.cos(phi)])
            continue
        ratio = delta / (4.0 * rho)
        if ratio >= 1.0:
            m = 1
        else:
            m = max(1, math.ceil(2.0 * math.pi / (4.0 * math.asin(ratio))))
        lam = 2.0 * math.pi * np.arange(m) / m
        for t in lam:
            points.append([rho * math.cos(t), rho * math.sin(t), math.cos(phi)])
    return np.array(points)


def build_delta_net(
    d: int,
    delta: float | None = None,
    strategy: str = "randomized",
    seed: int = 0,
    extra_directions=None,
    size: int = 500,
) -> DeltaNet:
    """Build a finite net of unit directions in ``R^d``.

    Parameters
    ----------
    d : int
        Ambient dimension.
    delta : float, optional
        Covering radius (Euclidean).  Required and guaranteed for
        ``strategy="exhaustive"``; recorded as nominal otherwise.
    strategy : {"exhaustive", "randomized", "eigen-augmented"}
        Exhaustive nets are constructed deterministically and exist for
        ``d <= 3`` only.  Randomized nets draw ``size`` uniform directions;
        eigen-augmented nets add ``extra_directions`` to a randomized net.
    seed : int
        Seed of the randomized draw.
    extra_directions : array_like of shape (k, d), optional
        Additional directions (normalised before use).
    size : int
        Number of random directions.
    """
    if d < 1:
        raise ValidationError(f"dimension must be >= 1, got {d}")
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown net strategy {strategy!r}")

    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
        return DeltaNet(1, 0.0 if delta is None else float(delta), dirs, strategy, seed)

    if strategy == "exhaustive":
        if d > 3:
            raise ValidationError("exhaustive nets are only available for d <= 3")
        if delta is None or not delta > 0:
            raise ValidationError("exhaustive nets need delta > 0")
        dirs = _circle_net(delta) if d == 2 else _sphere_net(delta)
    else:
        rng = np.random.default_rng(seed)
        dirs = _unit_rows(rng.standard_normal((size, d)))
        if strategy == "eigen-augmented" and extra_directions is None:
            raise ValidationError("eigen-augmented nets need extra_directions")
    if extra_directions is not None:
        extra = _unit_rows(np.atleast_2d(np.asarray(extra_directions, dtype=float)))
        if extra.shape[1] != d:
            raise ValidationError("extra directions have the wrong dimension")
        dirs = np.vstack([dirs, extra])
    dirs = _dedupe(dirs)
    nominal = float("nan") if delta is None else float(delta)
    return DeltaNet(d, nominal, dirs, strategy, seed)


def _uniform_sphere(rng, count: int, d: int) -> np.ndarray:
    if d == 1:
        return rng.choice([-1.0, 1.0], size=(count, 1))
    return _unit_rows(rng.standard_normal((count, d)))


def net_coverage_check(net: DeltaNet, probes: int = 10_000, seed: int = 0) -> float:
    """Largest distance from a random probe on the sphere to its nearest net point.

    This is a lower estimate of the true covering radius.
    """
    if probes < 1:
        raise ValidationError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    chunk = max(1, 2_000_000 // max(1, len(net)))
    remaining = probes
    while remaining > 0:
        k = min(chunk, remaining)
        pts = _uniform_sphere(rng, k, net.dim)
        best = np.max(pts @ net.directions.T, axis=1)
        dist = np.sqrt(np.maximum(0.0, 2.0 - 2.0 * best))
        worst = max(worst, float(dist.max()))
        remaining -= k
    return worst


# -- robust scalars -----------------------------------------------------------


def default_blocks(epsilon: float) -> int:
    return math.ceil(8.0 * math.log(1.0 / epsilon))


def median_of_means(values, blocks: int, seed: int = 0) -> np.ndarray:
    """Median of block means, column by column.

    Rows are shuffled with ``default_rng(seed).permutation(n)`` and split into
    ``min(blocks, n)`` contiguous blocks by :func:`numpy.array_split`; the
    result is :func:`numpy.median` of the block means (the average of the two
    middle blocks when their number is even).
    """
    y = np.asarray(values, dtype=float)
    squeeze = y.ndim == 1
    y = y.reshape(y.shape[0], -1)
    n = y.shape[0]
    k = max(1, min(int(blocks), n))
    perm = np.random.default_rng(seed).permutation(n)
    means = np.array([y[idx].mean(axis=0) for idx in np.array_split(perm, k)])
    out = np.median(means, axis=0)
    return out[0] if squeeze else out


def _psi(x):
    return np.sign(x) * np.log1p(np.abs(x) + 0.5 * x * x)


def truncated_mean(values, width=None, epsilon: float = 0.05) -> np.ndarray:
    """Soft-truncated M-estimate of location, column by column.

    Solves ``sum_i psi(width * (y_i - mu)) = 0`` with
    ``psi(x) = sign(x) log(1 + |x| + x^2/2)`` by 200 bisection steps on
    ``[min y, max y]``.  The default width is
    ``sqrt(2 log(1/epsilon) / (n v))`` with ``v`` the median-of-means
    (``ceil(8 log(1/epsilon))`` blocks, seed 0) estimate of ``E y^2``.
    """
    y = np.asarray(values, dtype=float)
    squeeze = y.ndim == 1
    y = y.reshape(y.shape[0], -1)
    n = y.shape[0]
    if width is None:
        v = median_of_means(y**2, default_blocks(epsilon), seed=0)
        v = np.where(v > 0, v, 1.0)
        lam = np.sqrt(2.0 * math.log(1.0 / epsilon) / (n * v))
    else:
        if not width > 0:
            raise ValidationError("width must be positive")
        lam = np.full(y.shape[1], float(width))
    lo = y.min(axis=0)
    hi = y.max(axis=0)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        s = _psi(lam * (y - mid)).sum(axis=0)
        go_up = s > 0
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    out = 0.5 * (lo + hi)
    return out[0] if squeeze else out


def robust_quadratic_forms(
    sample,
    directions,
    method: MethodConfig = MethodConfig(),
    epsilon: float = 0.05,
) -> np.ndarray:
    """Robust estimates of ``theta^T G theta`` for every row ``theta`` of ``directions``."""
    x = as_sample(sample)
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[1] != x.shape[1]:
        raise ValidationError("directions and sample differ in dimension")
    if np.any(np.abs(np.linalg.norm(dirs, axis=1) - 1.0) > _UNIT_TOL * 10):
        raise ValidationError("directions must have unit norm")
    y = (x @ dirs.T) ** 2
    if method.method == "mom":
        k = method.blocks if method.blocks is not None else default_blocks(epsilon)
        return median_of_means(y, k, seed=method.seed)
    if method.method == "truncated":
        return truncated_mean(y, method.width, epsilon)
    raise ValidationError(f"unknown robust method {method.method!r}")


def robust_quadratic_form(sample, theta, method: MethodConfig = MethodConfig(),
                          epsilon: float = 0.05) -> float:
    """Robust estimate of ``theta^T G theta`` for one unit direction."""
    theta = np.asarray(theta, dtype=float).ravel()
    return float(robust_quadratic_forms(sample, theta[None, :], method, epsilon)[0])


# -- fitting ------------------------------------------------------------------


def _design(directions: np.ndarray) -> tuple[np.ndarray, tuple, np.ndarray]:
    d = directions.shape[1]
    iu = np.triu_indices(d)
    factor = np.where(iu[0] == iu[1], 1.0, 2.0)
    a = directions[:, iu[0]] * directions[:, iu[1]] * factor
    return a, iu, factor


def fit_symmetric_matrix(net, estimates, cond_max: float = 1e10) -> np.ndarray:
    """Symmetric ``Q`` minimising ``sum_theta (theta^T Q theta - r(theta))^2``.

    A ridge term ``rho ||Q||_F^2`` with ``rho = 1e-10 * mean|r|`` is added
    when the design has fewer rows than ``d(d+1)/2`` or is ill-conditioned.
    """
    dirs = getattr(net, "directions", net)
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    r = np.asarray(estimates, dtype=float).ravel()
    if r.shape[0] != dirs.shape[0]:
        raise ValidationError(
            f"{r.shape[0]} estimates for {dirs.shape[0]} directions"
        )
    d = dirs.shape[1]
    a, iu, factor = _design(dirs)
    n_free = a.shape[1]

    sv = np.linalg.svd(a, compute_uv=False)
    well_posed = (
        a.shape[0] >= n_free and sv[-1] > 0 and sv[0] / sv[-1] <= cond_max
    )
    if well_posed:
        coef = np.linalg.lstsq(a, r, rcond=None)[0]
    else:
        rho = 1e-10 * float(np.mean(np.abs(r)))
        if rho == 0.0:
            coef = np.zeros(n_free)
        else:
            # off-diagonal entries appear twice in ||Q||_F^2
            normal = a.T @ a + rho * np.diag(factor)
            try:
                coef = np.linalg.solve(normal, a.T @ r)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"normal system singular: {exc}") from exc
        logger.debug("ridge-regularised fit (rows=%d, free=%d)", a.shape[0], n_free)
    q = np.zeros((d, d))
    q[iu] = coef
    q[(iu[1], iu[0])] = coef
    return q


def positive_part(m) -> np.ndarray:
    """Zero the negative eigenvalues of a symmetric matrix."""
    es = eigendecompose(m)
    w = np.maximum(es.values, 0.0)
    u = es.vectors
    return as_symmetric((u * w) @ u.T, check=False)


# -- pipeline -----------------------------------------------------------------


def estimate_gram(
    sample,
    params: BoundParams | None = None,
    net: NetConfig | DeltaNet = NetConfig(),
    method: MethodConfig = MethodConfig(),
    *,
    epsilon: float | None = None,
    a: float = 1.0,
    sigma: float | None = None,
    gram_frobenius: float | None = None,
) -> RobustGramEstimate:
    """Robust Gram estimate ``G_hat = Q_+`` with its bound parameters.

    When ``params`` is omitted, plug-in values are used: ``kappa`` is the
    largest empirical kurtosis ratio over the net and the top empirical
    eigenvectors, ``s4_sq`` its empirical counterpart, ``sigma`` from
    :func:`~robpca.bounds.choose_sigma`, ``||G||_F`` the Frobenius norm of
    the estimate, and ``delta`` the net's radius (measured by
    :func:`net_coverage_check` for randomized nets without a nominal value).
    """
    x = as_sample(sample)
    n, d = x.shape
    if epsilon is None:
        epsilon = params.epsilon if params is not None else 0.05

    if isinstance(net, DeltaNet):
        delta_net = net
    else:
        extra = None
        if net.strategy == "eigen-augmented":
            extra = eigendecompose(empirical_gram(x)).vectors.T
        delta_net = build_delta_net(d, net.delta, net.strategy, net.seed, extra, net.size)
        if net.strategy != "exhaustive" and d > 1:
            logger.info(
                "randomized net: the 1-2 epsilon guarantee transfers only heuristically"
            )
    if delta_net.dim != d:
        raise ValidationError("net dimension does not match the sample")

    estimates = robust_quadratic_forms(x, delta_net.directions, method, epsilon)
    q = fit_symmetric_matrix(delta_net, estimates)
    g_hat = positive_part(q)

    if params is None:
        delta = delta_net.delta
        if not math.isfinite(delta):
            probes = net.probes if isinstance(net, NetConfig) else 2000
            delta = net_coverage_check(delta_net, probes, seed=delta_net.seed + 1)
            delta_net.meta["measured_radius"] = delta
        top = eigendecompose(empirical_gram(x)).vectors.T
        kappa = estimate_kappa(x, np.vstack([delta_net.directions, top]))
        s4_sq = estimate_s4(x)
        if s4_sq == 0:
            raise ValidationError("sample is identically zero")
        if sigma is None:
            sigma = choose_sigma(n, kappa, s4_sq, epsilon, a)
        if gram_frobenius is None:
            gram_frobenius = float(np.linalg.norm(g_hat, "fro"))
        params = BoundParams(
            n=n, kappa=kappa, s4_sq=s4_sq, sigma=min(sigma, s4_sq), delta=delta,
            epsilon=epsilon, a=a, gram_frobenius=gram_frobenius,
        )
    return RobustGramEstimate(q, g_hat, delta_net, estimates, params, method)
