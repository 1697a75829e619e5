"""Symmetric eigendecomposition and Lipschitz spectral functional calculus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from robpca._arrays import as_symmetric
from robpca.errors import NumericalError, ValidationError

# relative gap below which two eigenvalues are treated as one eigenspace
_CLUSTER_RTOL = 1e-10


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues in non-increasing order with matched orthonormal eigenvectors.

    ``vectors[:, i]`` is the eigenvector for ``values[i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def matrix(self) -> np.ndarray:
        """Reassemble ``U diag(values) U^T``."""
        u = self.vectors
        return as_symmetric((u * self.values) @ u.T, check=False)


@dataclass(frozen=True)
class SpectralFunction:
    """A scalar map applied to spectra, with its Lipschitz constant.

    ``evaluate`` must accept and return numpy arrays elementwise.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    lipschitz_constant: float
    description: str = ""

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))


def _canonical_block(v: np.ndarray) -> np.ndarray:
    # Basis of span(v) whose top k x k block is lower triangular with a
    # non-negative diagonal; a function of the subspace only.
    k = v.shape[1]
    if k == 1:
        return v
    q, r = np.linalg.qr(v[:k, :].T)
    b = v @ q
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return b * signs


def _fix_signs(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    u = u.copy()
    for j in range(u.shape[1]):
        nz = np.flatnonzero(np.abs(u[:, j]) > tol)
        if nz.size and u[nz[0], j] < 0:
            u[:, j] = -u[:, j]
    return u


def eigendecompose(m) -> EigenSystem:
    """Eigendecomposition of a symmetric matrix with deterministic bases.

    Eigenvalues are sorted non-increasing.  Inside a cluster of numerically
    equal eigenvalues the basis is canonicalised (lower-triangular leading
    block), then every eigenvector is signed so that its first non-zero
    component is positive.
    """
    a = as_symmetric(m)
    try:
        w, u = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(-w, kind="stable")
    w, u = w[order], u[:, order]

    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    start = 0
    d = w.shape[0]
    while start < d:
        stop = start + 1
        while stop < d and w[start] - w[stop] <= _CLUSTER_RTOL * scale:
            stop += 1
        if stop - start > 1:
            u[:, start:stop] = _canonical_block(u[:, start:stop])
        start = stop
    u = _fix_signs(u)
    return EigenSystem(values=w, vectors=u)


def apply_spectral_function(m, f) -> np.ndarray:
    """``f(M) = U diag(f(lambda_i)) U^T``.

    ``f`` may be a :class:`SpectralFunction` or any vectorised callable.
    ``m`` may also be an :class:`EigenSystem`, which skips the decomposition.
    """
    es = m if isinstance(m, EigenSystem) else eigendecompose(m)
    fx = np.asarray(f(es.values), dtype=float)
    if fx.shape == ():
        fx = np.full_like(es.values, float(fx))
    u = es.vectors
    return as_symmetric((u * fx) @ u.T, check=False)


def frobenius_cross_distance_sq(a: EigenSystem, b: EigenSystem) -> float:
    """``sum_{i,k} (mu_i - mu'_k)^2 <p_i, q_k>^2``, which equals ``||M - M'||_F^2``."""
    if a.dim != b.dim:
        raise ValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    overlap_sq = (a.vectors.T @ b.vectors) ** 2
    diff_sq = (a.values[:, None] - b.values[None, :]) ** 2
    return float(np.sum(diff_sq * overlap_sq))


def make_ramp(b: float, a: float) -> SpectralFunction:
    """Piecewise-linear cut-off: 0 below ``b``, 1 above ``a``, linear between."""
    if not a > b:
        raise ValidationError(f"ramp needs a > b, got a={a}, b={b}")
    width = a - b

    def ramp(x):
        return np.clip((np.asarray(x, dtype=float) - b) / width, 0.0, 1.0)

    return SpectralFunction(ramp, 1.0 / width, f"ramp({b:g}, {a:g})")


def identity_function() -> SpectralFunction:
    return SpectralFunction(lambda x: np.asarray(x, dtype=float), 1.0, "identity")


def operator_norm(m) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    a = as_symmetric(m)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(a))))


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(np.asarray(m, dtype=float), "fro"))
