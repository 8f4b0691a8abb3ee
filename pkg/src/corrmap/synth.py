"""Synthetic multi-set data under the linear mixing model plus white noise."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .model import CorrelationProfile, composite_signal_cov, profile_from_dict, profile_to_dict
from .numerics import random_orthogonal, sample_gaussian
from .rng import RngStream

MIXING_KINDS = ("orthogonal", "gaussian")


@dataclass
class MultiDataset:
    """``P`` observation matrices of shape ``(n, M)`` sharing sample columns."""

    x_blocks: list
    truth: CorrelationProfile | None = None
    mixing: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        blocks = [np.asarray(x, dtype=float) for x in self.x_blocks]
        if len(blocks) < 2:
            raise InvalidInput("need at least two data sets")
        shape = blocks[0].shape
        if len(shape) != 2 or any(b.shape != shape for b in blocks):
            raise InvalidInput("all data sets must be 2-D with identical shape (n, M)")
        self.x_blocks = blocks

    @property
    def p_sets(self) -> int:
        return len(self.x_blocks)

    @property
    def dim(self) -> int:
        return self.x_blocks[0].shape[0]

    @property
    def samples(self) -> int:
        return self.x_blocks[0].shape[1]

    def stacked(self) -> np.ndarray:
        """Composite ``(nP, M)`` matrix, data set 1 on top."""
        return np.vstack(self.x_blocks)

    @classmethod
    def from_stacked(cls, x: np.ndarray, p_sets: int, **kw) -> "MultiDataset":
        n = x.shape[0] // p_sets
        return cls([x[p * n:(p + 1) * n] for p in range(p_sets)], **kw)


@dataclass(frozen=True)
class GenConfig:
    profile: CorrelationProfile
    snr_db: float
    samples: int
    seed: int = 0
    mixing: str = "orthogonal"

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidInput(f"samples must be >= 1, got {self.samples}")
        if self.mixing not in MIXING_KINDS:
            raise InvalidInput(f"mixing must be one of {MIXING_KINDS}")


def snr_to_noise_var(snr_db: float, signal_var: float = 1.0) -> float:
    """Noise variance giving ``snr_db`` per component; ``+inf`` dB means no noise."""
    if not signal_var > 0:
        raise InvalidInput("signal_var must be positive")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_var / 10.0 ** (snr_db / 10.0)


def generate(cfg: GenConfig, rng: RngStream | None = None) -> MultiDataset:
    """Draw ``x_p = A_p s_p + n_p`` for every data set.

    Signals are jointly Gaussian with the profile's composite covariance and
    unit variance; ``A_p`` are Haar orthogonal (or i.i.d. Gaussian when
    ``cfg.mixing == "gaussian"``); noise is white with the same variance in
    every set. Signals, mixing and noise use separate child streams.
    """
    rng = rng if rng is not None else RngStream(cfg.seed)
    profile = cfg.profile
    n, p_sets, m = profile.n_components, profile.p_sets, cfg.samples

    r_ss, _ = composite_signal_cov(profile)
    s = sample_gaussian(r_ss, m, rng.child(0))

    mix_rng = rng.child(1)
    if cfg.mixing == "orthogonal":
        mixing = [random_orthogonal(n, mix_rng) for _ in range(p_sets)]
    else:
        mixing = [mix_rng.standard_normal((n, n)) for _ in range(p_sets)]

    noise_sd = math.sqrt(snr_to_noise_var(cfg.snr_db))
    noise = rng.child(2).standard_normal((n * p_sets, m))
    blocks = []
    for p in range(p_sets):
        x = mixing[p] @ s[p * n:(p + 1) * n]
        if noise_sd > 0:
            x = x + noise_sd * noise[p * n:(p + 1) * n]
        blocks.append(x)
    meta = {"snr_db": cfg.snr_db, "seed": cfg.seed, "mixing": cfg.mixing}
    return MultiDataset(blocks, truth=profile, mixing=mixing, meta=meta)


# dataset directories


def save_dataset(data: MultiDataset, out_dir, seed=None, snr_db=None) -> Path:
    """Write ``manifest.json`` plus one CSV per set (M rows, n columns, no header)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for p, x in enumerate(data.x_blocks):
        name = f"x_{p + 1}.csv"
        np.savetxt(out / name, x.T, delimiter=",", fmt="%.17g")
        files.append(name)
    snr = snr_db if snr_db is not None else data.meta.get("snr_db")
    manifest = {
        "P": data.p_sets,
        "n": data.dim,
        "M": data.samples,
        "snr_db": None if snr is None or math.isinf(snr) else snr,
        "seed": seed if seed is not None else data.meta.get("seed"),
        "files": files,
        "truth_profile": profile_to_dict(data.truth) if data.truth is not None else None,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return out


def load_dataset(path) -> MultiDataset:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    blocks = []
    for name in manifest["files"]:
        x = np.loadtxt(root / name, delimiter=",", ndmin=2)
        blocks.append(x.T)
    truth = manifest.get("truth_profile")
    data = MultiDataset(blocks, truth=profile_from_dict(truth) if truth else None, meta=manifest)
    if (data.p_sets, data.dim, data.samples) != (manifest["P"], manifest["n"], manifest["M"]):
        raise InvalidInput("dataset files disagree with manifest dimensions")
    return data
