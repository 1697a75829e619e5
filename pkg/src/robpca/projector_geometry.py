"""Joint geometry of two orthogonal projectors.

For projectors ``P`` and ``Q`` the eigenvectors of ``P + Q`` split ``R^d``
into blocks:

* eigenvalues in ``(1, 2)`` paired with ``2 - lambda`` through
  ``x -> (P - Q) x / ||(P - Q) x||``;
* eigenvalue 1, split into ``Im P ∩ ker Q`` and ``ker P ∩ Im Q``;
* eigenvalue 2, ``Im P ∩ Im Q``;
* eigenvalue 0, ``ker P ∩ ker Q``.

:func:`analyze_pair` returns an orthonormal basis in exactly that order
together with the block boundaries ``2m <= p <= q <= s <= d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from robpca._arrays import as_symmetric
from robpca.errors import NumericalError, ValidationError

DEFAULT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ProjectorPairAnalysis:
    dim: int
    m: int
    p: int
    q: int
    s: int
    basis: np.ndarray
    sum_eigenvalues: np.ndarray
    tol: float = DEFAULT_TOL

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "m": self.m,
            "p": self.p,
            "q": self.q,
            "s": self.s,
            "sum_eigenvalues": self.sum_eigenvalues.tolist(),
            "basis": self.basis.tolist(),
            "ranks_equal": ranks_equal(self),
        }


def projector_rank(p: np.ndarray) -> int:
    return int(round(float(np.trace(p))))


def check_projector(p, tol: float = DEFAULT_TOL, name: str = "P") -> np.ndarray:
    """Validate an orthogonal projector and return its symmetrised copy."""
    a = np.asarray(p, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square")
    if np.max(np.abs(a - a.T), initial=0.0) > tol:
        raise ValidationError(f"{name} is not symmetric")
    a = as_symmetric(a, check=False)
    if np.max(np.abs(a @ a - a), initial=0.0) > tol:
        raise ValidationError(f"{name} is not idempotent")
    return a


def _image_basis(p: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(p)
    return u[:, w > 0.5]


def analyze_pair(P, Q, tol: float = DEFAULT_TOL) -> ProjectorPairAnalysis:
    """Canonical joint eigenbasis of ``P + Q``.

    Raises
    ------
    ValidationError
        If ``P`` or ``Q`` is not an orthogonal projector within ``tol``.
    NumericalError
        If the block classification is ambiguous at ``tol``: the eigenvalues
        in ``(0, 1)`` and ``(1, 2)`` do not pair up, or the eigenvalue-1
        space does not split cleanly between ``P`` and ``Q``.
    """
    if not 0 < tol < 0.25:
        raise ValidationError(f"tol must lie in (0, 1/4) so the bands stay disjoint, got {tol}")
    P = check_projector(P, tol, "P")
    Q = check_projector(Q, tol, "Q")
    if P.shape != Q.shape:
        raise ValidationError("P and Q differ in dimension")
    d = P.shape[0]
    w, u = np.linalg.eigh(P + Q)
    order = np.argsort(-w, kind="stable")
    w, u = w[order], u[:, order]

    is0 = np.abs(w) <= tol
    is1 = np.abs(w - 1.0) <= tol
    is2 = np.abs(w - 2.0) <= tol
    upper = (w > 1.0 + tol) & (w < 2.0 - tol)
    lower = (w > tol) & (w < 1.0 - tol)
    if np.any(~(is0 | is1 | is2 | upper | lower)):
        raise NumericalError("eigenvalue of P + Q outside [0, 2] beyond tolerance")
    m = int(upper.sum())
    if int(lower.sum()) != m:
        raise NumericalError(
            f"ambiguous classification: {m} eigenvalues in (1,2) "
            f"but {int(lower.sum())} in (0,1)"
        )

    diff = P - Q
    x_upper = u[:, upper]
    lam_upper = w[upper]
    paired = diff @ x_upper
    norms = np.linalg.norm(paired, axis=0)
    expected = np.sqrt(lam_upper * (2.0 - lam_upper))
    if m and np.any(np.abs(norms - expected) > np.sqrt(tol)):
        raise NumericalError("pairing (P - Q) x failed to reproduce lambda (2 - lambda)")
    x_paired = paired / norms if m else paired

    # split the eigenvalue-1 space with P restricted to it
    v1 = u[:, is1]
    if v1.shape[1]:
        wp, up = np.linalg.eigh(v1.T @ P @ v1)
        if np.any((np.abs(wp) > tol) & (np.abs(wp - 1.0) > tol)):
            raise NumericalError("eigenvalue-1 space does not split between P and Q")
        in_p = wp > 0.5
        rot = up[:, np.argsort(~in_p, kind="stable")]
        v1 = v1 @ rot
        n_p = int(in_p.sum())
    else:
        n_p = 0

    basis = np.hstack([x_upper, x_paired, v1, u[:, is2], u[:, is0]])
    sum_vals = np.einsum("ij,ij->j", basis, (P + Q) @ basis)
    p_idx = 2 * m + n_p
    q_idx = 2 * m + v1.shape[1]
    s_idx = q_idx + int(is2.sum())
    if basis.shape[1] != d:
        raise NumericalError("basis construction lost vectors")
    return ProjectorPairAnalysis(d, m, p_idx, q_idx, s_idx, basis, sum_vals, tol)


def canonical_bases(analysis: ProjectorPairAnalysis, P, Q) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal bases of ``Im P`` and ``Im Q`` read off the joint basis.

    ``Im P``: ``P x_1..P x_m``, ``x_{2m+1}..x_p``, ``x_{q+1}..x_s``;
    ``Im Q``: ``Q x_1..Q x_m``, ``x_{p+1}..x_q``, ``x_{q+1}..x_s``.
    Columns are not normalised.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    a = analysis
    x = a.basis
    top = x[:, : a.m]
    both = x[:, a.q: a.s]
    fam_p = np.hstack([P @ top, x[:, 2 * a.m: a.p], both])
    fam_q = np.hstack([Q @ top, x[:, a.p: a.q], both])
    tol = max(a.tol, 1e-9)
    for fam, proj, name in ((fam_p, P, "P"), (fam_q, Q, "Q")):
        if fam.shape[1] != projector_rank(proj):
            raise NumericalError(f"family for Im {name} has the wrong size")
        gram = fam.T @ fam
        if np.max(np.abs(gram - np.diag(np.diag(gram))), initial=0.0) > tol:
            raise NumericalError(f"family for Im {name} is not orthogonal")
        if np.max(np.abs(proj @ fam - fam), initial=0.0) > tol:
            raise NumericalError(f"family for Im {name} leaves the image")
    return fam_p, fam_q


def ranks_equal(analysis: ProjectorPairAnalysis) -> bool:
    """``rank P == rank Q`` read off the block sizes: ``p - 2m == q - p``."""
    return analysis.p - 2 * analysis.m == analysis.q - analysis.p


def projector_distance(P, Q) -> float:
    """``||P - Q||_op``."""
    diff = np.asarray(P, dtype=float) - np.asarray(Q, dtype=float)
    w = np.linalg.eigvalsh(as_symmetric(diff @ diff, check=False))
    return float(np.sqrt(max(w[-1], 0.0))) if w.size else 0.0


def restricted_distance(P, Q) -> float:
    """``sup ||(P - Q) theta||`` over unit ``theta`` in ``Im Q``.

    Requires ``rank P == rank Q``; then it equals :func:`projector_distance`.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if projector_rank(P) != projector_rank(Q):
        raise ValidationError("restricted distance needs projectors of equal rank")
    w_q = _image_basis(Q)
    if w_q.shape[1] == 0:
        return 0.0
    diff = P - Q
    m = w_q.T @ diff @ diff @ w_q
    w = np.linalg.eigvalsh(as_symmetric(m, check=False))
    return float(np.sqrt(max(w[-1], 0.0)))


def paired_block_residuals(analysis: ProjectorPairAnalysis, P, Q) -> dict:
    """Largest violations of the eigen-relations on the ``(0,1) ∪ (1,2)`` blocks.

    For every such basis vector ``x`` with ``(P+Q) x = lambda x``:
    ``(P-Q)^2 x = lambda (2-lambda) x``, ``(P+Q)(P-Q) x = (2-lambda)(P-Q) x``,
    ``||Px|| = ||Qx||`` with ``0 < ||Px|| < 1``, and ``<x, (P-Q) x> = 0``.
    Also reports the pairing ``lambda_{m+i} = 2 - lambda_i``.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    a = analysis
    idx = np.arange(2 * a.m)
    out = {"square": 0.0, "swap": 0.0, "norms": 0.0, "orth": 0.0, "pairing": 0.0,
           "norm_in_open_unit": True}
    if a.m == 0:
        return out
    x = a.basis[:, idx]
    lam = a.sum_eigenvalues[idx]
    diff = P - Q
    dx = diff @ x
    out["square"] = float(np.max(np.abs(diff @ dx - x * (lam * (2 - lam)))))
    out["swap"] = float(np.max(np.abs((P + Q) @ dx - dx * (2 - lam))))
    px = np.linalg.norm(P @ x, axis=0)
    qx = np.linalg.norm(Q @ x, axis=0)
    out["norms"] = float(np.max(np.abs(px - qx)))
    out["norm_in_open_unit"] = bool(np.all((px > 0) & (px < 1)))
    out["orth"] = float(np.max(np.abs(np.einsum("ij,ij->j", x, dx))))
    lam_top = a.sum_eigenvalues[: a.m]
    lam_pair = a.sum_eigenvalues[a.m: 2 * a.m]
    out["pairing"] = float(np.max(np.abs(lam_pair - (2 - lam_top))))
    return out
