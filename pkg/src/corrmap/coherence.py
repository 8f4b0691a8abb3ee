"""Composite coherence matrices and their eigenstructure.

The coherence of ``P`` stacked data sets is ``C = R_D^{-1/2} R R_D^{-1/2}``
where ``R`` is the composite covariance and ``R_D`` its block diagonal.
Covariances are normalized by ``1/M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import InvalidInput
from .model import CorrelationProfile, composite_signal_cov
from .numerics import DEFAULT_REL_TOL, EigenPairs, inv_sqrt_psd, inv_sqrt_psd_batch, sym_eig
from .synth import MultiDataset


@dataclass(frozen=True)
class CoherenceDecomposition:
    matrix: np.ndarray
    eigen: EigenPairs
    p_sets: int
    dim: int
    source: str  # "sample" or "population"

    @property
    def order(self) -> int:
        return self.p_sets * self.dim

    @property
    def values(self) -> np.ndarray:
        return self.eigen.values

    @property
    def vectors(self) -> np.ndarray:
        return self.eigen.vectors


@dataclass(frozen=True)
class EigvecPartition:
    component_index: int
    subvectors: list

    @property
    def sq_norms(self) -> np.ndarray:
        return np.array([float(v @ v) for v in self.subvectors])


def _coherence(r: np.ndarray, p_sets: int, dim: int, rel_tol: float) -> np.ndarray:
    whiten = block_diag(
        *[inv_sqrt_psd(r[p * dim:(p + 1) * dim, p * dim:(p + 1) * dim], rel_tol) for p in range(p_sets)]
    )
    c = whiten @ r @ whiten
    return 0.5 * (c + c.T)


def coherence_from_stacked(x: np.ndarray, p_sets: int, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Sample coherence of a composite ``(nP, M)`` data matrix."""
    m = x.shape[1]
    r = (x @ x.T) / m
    return _coherence(r, p_sets, x.shape[0] // p_sets, rel_tol)


def coherence_batch(xb: np.ndarray, p_sets: int, rel_tol: float = DEFAULT_REL_TOL) -> np.ndarray:
    """Sample coherences of a stack of composite matrices ``(B, nP, M)``."""
    nb, order, m = xb.shape
    dim = order // p_sets
    r = (xb @ np.swapaxes(xb, 1, 2)) / m
    blocks = np.stack([r[:, p * dim:(p + 1) * dim, p * dim:(p + 1) * dim] for p in range(p_sets)], axis=1)
    w = inv_sqrt_psd_batch(blocks, rel_tol)  # (B, P, n, n)
    # scale block (p, q) of r by w_p on the left and w_q on the right
    r5 = r.reshape(nb, p_sets, dim, p_sets, dim)
    c5 = np.einsum("bpij,bpjqk,bqkl->bpiql", w, r5, w, optimize=True)
    c = c5.reshape(nb, order, order)
    return 0.5 * (c + np.swapaxes(c, 1, 2))


def sample_coherence(
    data: MultiDataset, rel_tol: float = DEFAULT_REL_TOL, center: bool = False
) -> CoherenceDecomposition:
    """Coherence of observed data, with its descending eigendecomposition.

    Data is used as given (assumed zero-mean) unless ``center`` is set.

    Raises
    ------
    SingularMatrix
        If any per-set covariance is not positive definite at ``rel_tol``.
    """
    x = data.stacked()
    if not np.all(np.isfinite(x)):
        raise InvalidInput("data has non-finite entries")
    if center:
        x = x - x.mean(axis=1, keepdims=True)
    c = coherence_from_stacked(x, data.p_sets, rel_tol)
    return CoherenceDecomposition(c, sym_eig(c), data.p_sets, data.dim, "sample")


def population_coherence(
    profile: CorrelationProfile, mixing=None, rel_tol: float = DEFAULT_REL_TOL
) -> CoherenceDecomposition:
    """Exact coherence ``C = F R_ss F^T`` with ``F_p = (A_p A_p^T)^{-1/2} A_p``.

    ``mixing`` defaults to identity matrices.

    Raises
    ------
    SingularMatrix
        If some ``A_p`` is rank deficient.
    """
    n, p_sets = profile.n_components, profile.p_sets
    if mixing is None:
        mixing = [np.eye(n)] * p_sets
    if len(mixing) != p_sets:
        raise InvalidInput(f"need {p_sets} mixing matrices, got {len(mixing)}")
    f_blocks = []
    for a in mixing:
        a = np.asarray(a, dtype=float)
        if a.shape != (n, n):
            raise InvalidInput(f"mixing matrices must be {n}x{n}")
        f_blocks.append(inv_sqrt_psd(a @ a.T, rel_tol) @ a)
    f = block_diag(*f_blocks)
    r_ss, _ = composite_signal_cov(profile)
    c = f @ r_ss @ f.T
    c = 0.5 * (c + c.T)
    return CoherenceDecomposition(c, sym_eig(c), p_sets, n, "population")


def partition_eigvec(dec: CoherenceDecomposition, i: int) -> EigvecPartition:
    """Split eigenvector ``i`` (0-based, descending order) into P length-n slices."""
    if not 0 <= i < dec.order:
        raise InvalidInput(f"eigenvector index {i} out of range [0, {dec.order})")
    u = dec.vectors[:, i]
    subs = [u[p * dec.dim:(p + 1) * dec.dim].copy() for p in range(dec.p_sets)]
    return EigvecPartition(i, subs)


def subvector_sq_norms(vectors: np.ndarray, p_sets: int) -> np.ndarray:
    """Squared norms of per-set slices of eigenvector columns.

    ``vectors`` has shape ``(..., nP, k)``; the result has shape ``(..., k, P)``.
    """
    *lead, order, k = vectors.shape
    dim = order // p_sets
    v = vectors.reshape(*lead, p_sets, dim, k)
    return np.swapaxes(np.sum(v * v, axis=-2), -1, -2)
