"""Bootstrap tests on the sample coherence matrix.

:func:`corr_dim` estimates how many components are correlated across at
least one pair of data sets by sequentially testing whether the ``P``
eigenvalues following the ``s`` largest equal one. :func:`corr_struct` then
tests, for each of the top ``d_hat`` eigenvectors, which per-set slices are
zero, and turns the result into a binary correlation map.

Each bootstrap replicate ``b`` draws its resampling indices from its own
child stream, so results do not depend on evaluation order or chunking.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coherence import coherence_batch, sample_coherence, subvector_sq_norms
from .errors import InvalidInput
from .model import pair_index, pair_list
from .numerics import DEFAULT_REL_TOL, sym_eig_batch
from .rng import DEFAULT_SEED, RngStream
from .synth import MultiDataset

DEFAULT_BOOTSTRAPS = 1000
DEFAULT_PFA = 0.05


@dataclass(frozen=True)
class DetectConfig:
    """Parameters of the bootstrap tests.

    ``shared_resamples`` makes both tests use one set of resamples, which is
    how the pipeline runs by default; set it to False to give the structure
    test an independent stream.
    """

    bootstraps: int = DEFAULT_BOOTSTRAPS
    pfa: float = DEFAULT_PFA
    seed: int = DEFAULT_SEED
    eig_tol: float = 1e-6
    rel_tol: float = DEFAULT_REL_TOL
    shared_resamples: bool = True
    chunk: int = 100

    def __post_init__(self):
        if self.bootstraps < 1:
            raise InvalidInput("bootstraps must be >= 1")
        if not 0.0 < self.pfa < 1.0:
            raise InvalidInput("pfa must lie in (0, 1)")
        if self.chunk < 1:
            raise InvalidInput("chunk must be >= 1")

    def with_seed(self, seed: int) -> "DetectConfig":
        return replace(self, seed=int(seed))

    def dim_stream(self) -> RngStream:
        return RngStream(self.seed, (0,))

    def struct_stream(self) -> RngStream:
        return self.dim_stream() if self.shared_resamples else RngStream(self.seed, (1,))


@dataclass
class BootstrapSpectra:
    """Descending spectra ``(B, nP)`` and leading eigenvectors ``(B, nP, k)``."""

    values: np.ndarray
    vectors: np.ndarray


@dataclass
class DetectionReport:
    d_hat: int
    pvalues_dim: np.ndarray
    map: np.ndarray
    pvalues_struct: np.ndarray
    diagnostics: list = field(default_factory=list)
    eigenvalues: np.ndarray | None = None
    p_sets: int = 0
    config: DetectConfig | None = None

    def to_dict(self) -> dict:
        cols = len(pair_list(self.p_sets))
        doc = {
            "d_hat": int(self.d_hat),
            "pvalues_dim": [float(v) for v in self.pvalues_dim],
            "map": {
                "rows": int(self.map.shape[0]),
                "cols": cols,
                "pairs": [[p + 1, q + 1] for p, q in pair_list(self.p_sets)],
                "entries": self.map.astype(int).tolist(),
            },
            "pvalues_struct": np.asarray(self.pvalues_struct, dtype=float).tolist(),
            "diagnostics": list(self.diagnostics),
        }
        if self.eigenvalues is not None:
            doc["eigenvalues"] = [float(v) for v in self.eigenvalues]
        if self.config is not None:
            c = self.config
            doc["config"] = {"bootstraps": c.bootstraps, "pfa": c.pfa, "seed": c.seed,
                             "eig_tol": c.eig_tol, "shared_resamples": c.shared_resamples}
        return doc


# resampling


def resample_indices(m: int, rng: RngStream) -> np.ndarray:
    """``m`` sample indices drawn uniformly with replacement."""
    if m < 1:
        raise InvalidInput("need at least one sample")
    return rng.integers(0, m, size=m)


def bootstrap_resample(data: MultiDataset, rng: RngStream) -> MultiDataset:
    """Resample joint columns: one index vector applied to every data set."""
    idx = resample_indices(data.samples, rng)
    return MultiDataset([x[:, idx] for x in data.x_blocks], truth=data.truth, mixing=data.mixing,
                        meta=dict(data.meta))


def bootstrap_spectra(
    data: MultiDataset,
    stream: RngStream,
    bootstraps: int,
    n_vectors: int = 0,
    rel_tol: float = DEFAULT_REL_TOL,
    chunk: int = 100,
) -> BootstrapSpectra:
    """Eigen-spectra of ``bootstraps`` resampled coherence matrices.

    Replicate ``b`` uses indices from ``stream.child(b)``. Only the leading
    ``n_vectors`` eigenvectors are kept.
    """
    x = data.stacked()
    m, order = data.samples, x.shape[0]
    values = np.empty((bootstraps, order))
    vectors = np.empty((bootstraps, order, n_vectors))
    for start in range(0, bootstraps, chunk):
        stop = min(start + chunk, bootstraps)
        idx = np.stack([resample_indices(m, stream.child(b)) for b in range(start, stop)])
        part = spectra_at_indices(x, idx, data.p_sets, n_vectors, rel_tol)
        values[start:stop] = part.values
        vectors[start:stop] = part.vectors
    return BootstrapSpectra(values, vectors)


def spectra_at_indices(
    x: np.ndarray, idx: np.ndarray, p_sets: int, n_vectors: int = 0, rel_tol: float = DEFAULT_REL_TOL
) -> BootstrapSpectra:
    """Coherence spectra of the composite ``(nP, M)`` matrix ``x`` at column index rows ``idx`` ``(B, M)``."""
    xb = np.moveaxis(x[:, idx], 1, 0)  # (B, nP, M)
    cb = coherence_batch(xb, p_sets, rel_tol)
    if n_vectors:
        w, v = sym_eig_batch(cb)
        return BootstrapSpectra(w, v[..., :n_vectors])
    w = sym_eig_batch(cb, vectors=False)
    return BootstrapSpectra(w, np.empty((len(idx), x.shape[0], 0)))


# statistics


def stat_dim(eigs, s: int, p_sets: int) -> float:
    """Sum of ``(lambda - 1)**2`` over the ``P`` eigenvalues following rank ``s``."""
    eigs = np.asarray(eigs, dtype=float)
    if s < 0 or s + p_sets > eigs.shape[-1]:
        raise InvalidInput(f"need 0 <= s and s + P <= {eigs.shape[-1]}, got s={s}, P={p_sets}")
    return np.sum((eigs[..., s:s + p_sets] - 1.0) ** 2, axis=-1)


def pvalue(t_obs: float, t_boot) -> float:
    """Fraction of bootstrap statistics with ``|t_b - t_obs| >= t_obs``."""
    t_boot = np.asarray(t_boot, dtype=float)
    if t_boot.size < 1:
        raise InvalidInput("need at least one bootstrap statistic")
    return float(np.mean(t_obs <= np.abs(t_boot - t_obs)))


def dim_pvalues(eigs: np.ndarray, boot_values: np.ndarray, p_sets: int, dim: int) -> np.ndarray:
    """P-values of the null ``d = s`` for ``s = 0 .. dim-1``."""
    return np.array([
        pvalue(stat_dim(eigs, s, p_sets), stat_dim(boot_values, s, p_sets)) for s in range(dim)
    ])


def select_dim(pvalues: np.ndarray, pfa: float) -> int:
    """Smallest ``s`` whose null is retained; ``len(pvalues) - 1`` if all are rejected."""
    retained = np.flatnonzero(np.asarray(pvalues) >= pfa)
    return int(retained[0]) if retained.size else len(pvalues) - 1


def struct_pvalues(obs_vectors: np.ndarray, boot_vectors: np.ndarray, p_sets: int) -> np.ndarray:
    """P-values of ``u_p^(i) = 0`` for every leading eigenvector ``i`` and set ``p``.

    ``obs_vectors`` is ``(nP, d)``, ``boot_vectors`` is ``(B, nP, d)``;
    bootstrap eigenvectors are matched to observed ones by rank.
    """
    d = obs_vectors.shape[1]
    t_obs = subvector_sq_norms(obs_vectors, p_sets)  # (d, P)
    t_boot = subvector_sq_norms(boot_vectors[..., :d], p_sets)  # (B, d, P)
    out = np.empty((d, p_sets))
    for i in range(d):
        for p in range(p_sets):
            out[i, p] = pvalue(t_obs[i, p], t_boot[:, i, p])
    return out


def build_map(pvalues_struct: np.ndarray, p_sets: int, pfa: float) -> np.ndarray:
    """Correlation map: start from all ones, clear every pair touching a retained null."""
    d = pvalues_struct.shape[0]
    zmap = np.ones((d, len(pair_list(p_sets))), dtype=np.int8)
    for i in range(d):
        for p in range(p_sets):
            if pvalues_struct[i, p] >= pfa:
                for q in range(p_sets):
                    if q != p:
                        zmap[i, pair_index(p, q, p_sets)] = 0
    return zmap


# the two tests


def _check_data(data: MultiDataset):
    if data.p_sets < 2:
        raise InvalidInput("need at least two data sets")
    if data.samples <= data.dim:
        raise InvalidInput(f"need more samples than dimensions (M={data.samples}, n={data.dim})")


def corr_dim(data: MultiDataset, cfg: DetectConfig = DetectConfig(), boot: BootstrapSpectra | None = None):
    """Estimate the number of correlated components.

    Returns ``(d_hat, pvalues)`` with one p-value per ``s = 0 .. n-1``.
    """
    _check_data(data)
    obs = sample_coherence(data, cfg.rel_tol)
    if boot is None:
        boot = bootstrap_spectra(data, cfg.dim_stream(), cfg.bootstraps, 0, cfg.rel_tol, cfg.chunk)
    pv = dim_pvalues(obs.values, boot.values, data.p_sets, data.dim)
    return select_dim(pv, cfg.pfa), pv


def corr_struct(
    data: MultiDataset, d_hat: int, cfg: DetectConfig = DetectConfig(), boot: BootstrapSpectra | None = None
):
    """Estimate the correlation map of the ``d_hat`` leading components.

    Returns ``(map, pvalues)``: a binary ``d_hat x C(P,2)`` array and the
    ``d_hat x P`` p-values of the zero-slice tests.
    """
    _check_data(data)
    if not 0 <= d_hat <= data.dim - 1:
        raise InvalidInput(f"d_hat must lie in [0, {data.dim - 1}], got {d_hat}")
    if d_hat == 0:
        return np.zeros((0, len(pair_list(data.p_sets))), dtype=np.int8), np.zeros((0, data.p_sets))
    obs = sample_coherence(data, cfg.rel_tol)
    if boot is None or boot.vectors.shape[-1] < d_hat:
        boot = bootstrap_spectra(data, cfg.struct_stream(), cfg.bootstraps, d_hat, cfg.rel_tol, cfg.chunk)
    pv = struct_pvalues(obs.vectors[:, :d_hat], boot.vectors, data.p_sets)
    return build_map(pv, data.p_sets, cfg.pfa), pv


def _diagnostics(eigs, boot: BootstrapSpectra, pv_dim, d_hat: int, dim: int, pfa: float, tol: float) -> list:
    diags = []
    if np.all(pv_dim < pfa):
        diags.append({"kind": "d_hat_capped",
                      "message": f"every null was rejected; d_hat capped at n-1={dim - 1}"})
    if d_hat >= 2:
        gaps = -np.diff(eigs[:d_hat])
        close = np.flatnonzero(gaps <= tol)
        if close.size:
            diags.append({"kind": "observed_degeneracy",
                          "ranks": [[int(i) + 1, int(i) + 2] for i in close],
                          "message": "leading sample eigenvalues nearly coincide; structure may be ambiguous"})
        bgaps = -np.diff(boot.values[:, :d_hat], axis=1)
        unstable = int(np.sum(np.any(bgaps <= tol, axis=1)))
        if unstable:
            diags.append({"kind": "bootstrap_rank_instability", "resamples": unstable,
                          "message": f"{unstable} resamples have near-equal leading eigenvalues"})
    return diags


def detect(data: MultiDataset, cfg: DetectConfig = DetectConfig()) -> DetectionReport:
    """Run the dimension test followed by the structure test."""
    _check_data(data)
    obs = sample_coherence(data, cfg.rel_tol)
    n_vec = data.dim - 1 if cfg.shared_resamples else 0
    boot = bootstrap_spectra(data, cfg.dim_stream(), cfg.bootstraps, n_vec, cfg.rel_tol, cfg.chunk)
    pv_dim = dim_pvalues(obs.values, boot.values, data.p_sets, data.dim)
    d_hat = select_dim(pv_dim, cfg.pfa)
    zmap, pv_struct = corr_struct(data, d_hat, cfg, boot if cfg.shared_resamples else None)
    return DetectionReport(
        d_hat=d_hat,
        pvalues_dim=pv_dim,
        map=zmap,
        pvalues_struct=pv_struct,
        diagnostics=_diagnostics(obs.values, boot, pv_dim, d_hat, data.dim, cfg.pfa, cfg.eig_tol),
        eigenvalues=obs.values,
        p_sets=data.p_sets,
        config=cfg,
    )
