"""Dense symmetric-matrix primitives.

Eigendecompositions go through LAPACK's symmetric solver (``numpy.linalg.eigh``)
and are re-sorted into descending order. The batched variants operate on
stacks of matrices with shape ``(..., k, k)`` and are what the bootstrap uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NotPSD, SingularMatrix
from .rng import RngStream

DEFAULT_REL_TOL = 1e-10
PSD_CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues in descending order; ``vectors[:, k]`` pairs with ``values[k]``."""

    values: np.ndarray
    vectors: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def as_symmetric(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a float array, symmetrized, after validating it.

    Asymmetry up to a few ulps of the largest entry (typical after a matrix
    product) is averaged away; anything larger is rejected.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInput(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} has non-finite entries")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > 1e-8 * scale:
        raise InvalidInput(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def sym_eig(a) -> EigenPairs:
    """Full eigendecomposition of a symmetric matrix, values descending."""
    a = as_symmetric(a)
    w, v = np.linalg.eigh(a)
    return EigenPairs(w[::-1].copy(), v[:, ::-1].copy())


def sym_eig_batch(a: np.ndarray, vectors: bool = True):
    """Descending eigendecomposition of a stack ``(..., k, k)``.

    No validation; callers pass matrices they built themselves.
    Returns ``values`` of shape ``(..., k)`` and, when requested,
    ``vectors`` of shape ``(..., k, k)``.
    """
    if not vectors:
        return np.linalg.eigvalsh(a)[..., ::-1]
    w, v = np.linalg.eigh(a)
    return w[..., ::-1], v[..., ::-1]


def inv_sqrt_psd(a, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Symmetric inverse square root ``a^{-1/2}`` of a positive definite matrix.

    Raises
    ------
    SingularMatrix
        If the smallest eigenvalue is not above ``rel_tol`` times the largest.
    """
    eig = sym_eig(a)
    lo, hi = eig.values[-1], eig.values[0]
    if not hi > 0 or lo <= rel_tol * hi:
        raise SingularMatrix(
            f"matrix is not positive definite at rel_tol={rel_tol:g} "
            f"(eigenvalue range [{lo:.3e}, {hi:.3e}])"
        )
    b = (eig.vectors / np.sqrt(eig.values)) @ eig.vectors.T
    return 0.5 * (b + b.T)


def inv_sqrt_psd_batch(a: np.ndarray, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Batched :func:`inv_sqrt_psd` over a stack ``(..., k, k)``."""
    w, v = np.linalg.eigh(a)
    lo, hi = w[..., 0], w[..., -1]
    if np.any(~(hi > 0)) or np.any(lo <= rel_tol * hi):
        raise SingularMatrix(f"a matrix in the batch is not positive definite at rel_tol={rel_tol:g}")
    b = (v / np.sqrt(w)[..., None, :]) @ np.swapaxes(v, -1, -2)
    return 0.5 * (b + np.swapaxes(b, -1, -2))


def sqrt_psd(a) -> np.ndarray:
    """Symmetric square root ``S`` with ``S @ S.T == a`` for PSD ``a``.

    Eigenvalues down to ``-1e-10 * max`` are treated as rounding noise and
    clamped to zero.
    """
    eig = sym_eig(a)
    hi = max(eig.values[0], 0.0)
    if eig.values[-1] < -PSD_CLAMP_TOL * hi or (hi == 0.0 and eig.values[-1] < 0):
        raise NotPSD(f"matrix has negative eigenvalue {eig.values[-1]:.3e}")
    root = np.sqrt(np.clip(eig.values, 0.0, None))
    s = (eig.vectors * root) @ eig.vectors.T
    return 0.5 * (s + s.T)


def is_psd(a, tol: float = PSD_CLAMP_TOL) -> bool:
    w = np.linalg.eigvalsh(as_symmetric(a))
    return bool(w[0] >= -tol * max(w[-1], 1.0))


def random_orthogonal(order: int, rng: RngStream) -> np.ndarray:
    """Haar-distributed orthogonal matrix.

    QR of an i.i.d. Gaussian matrix, with the columns of Q multiplied by the
    signs of R's diagonal so the result does not depend on LAPACK's sign
    convention.
    """
    if order < 1:
        raise InvalidInput(f"order must be >= 1, got {order}")
    z = rng.standard_normal((order, order))
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def sample_gaussian(cov, m: int, rng: RngStream) -> np.ndarray:
    """Draw ``m`` zero-mean Gaussian columns with covariance ``cov``.

    Returns an ``(order, m)`` array.
    """
    if m < 1:
        raise InvalidInput(f"m must be >= 1, got {m}")
    s = sqrt_psd(cov)
    z = rng.standard_normal((s.shape[0], m))
    return s @ z
