"""Input coercion helpers."""

from __future__ import annotations

import numpy as np

from robpca.errors import ValidationError

SYMMETRY_RTOL = 1e-12


def as_sample(sample) -> np.ndarray:
    """Return ``sample`` as a float array of shape (n, d).

    A 1-D input is read as a single observation.
    """
    x = np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ValidationError(f"sample must be 2-D (n, d), got shape {x.shape}")
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise ValidationError("sample is empty")
    if not np.all(np.isfinite(x)):
        raise ValidationError("sample contains non-finite values")
    return x


def as_symmetric(m, rtol: float = SYMMETRY_RTOL, check: bool = True) -> np.ndarray:
    """Return the symmetric part of a square matrix.

    With ``check=True`` the input must already be symmetric up to ``rtol``
    relative to its largest entry; the returned copy is exactly symmetric.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix contains non-finite values")
    if check:
        scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
        if np.max(np.abs(a - a.T), initial=0.0) > rtol * scale:
            raise ValidationError("matrix is not symmetric")
    return 0.5 * (a + a.T)
