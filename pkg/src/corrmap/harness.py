"""Monte Carlo experiments: sweeps over SNR (and optionally rho), scoring, output files.

A trial is generate -> corr_dim -> corr_struct -> score. Trial ``t`` draws its
data from ``RngStream(seed, (t, 0))`` and its bootstrap seed from
``RngStream(seed, (t, 1))``; the same trial streams are reused at every sweep
point, so neighbouring points differ only through the swept parameter.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import permutations
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import profiles
from .detect import DetectConfig, detect
from .errors import InvalidInput
from .model import CorrelationProfile, derived_orders, pair_list, profile_from_dict, profile_to_dict, truth_map
from .rng import DEFAULT_SEED, RngStream
from .synth import GenConfig, generate

log = logging.getLogger(__name__)

METRICS = ("acc_d", "acc_dall", "precision", "recall", "cellwise_heatmap")
CSV_HEADER = ["sweep", "acc_d", "acc_dall", "precision", "recall", "snr_db", "rho", "mean_d_hat"]

DESK_TRIALS = 50
DESK_BOOTSTRAPS = 500
FULL_TRIALS = 500
FULL_BOOTSTRAPS = 1000
FULL_SNR_GRID = [-10.0, -7.0, -4.0, -1.0, 2.0, 5.0, 8.0, 11.0, 14.0]


@dataclass
class ScoreResult:
    precision: float
    recall: float
    cell_hits: np.ndarray  # estimated map aligned to truth rows
    tp: int
    fp: int
    fn: int


def _overlap(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    return est.astype(int) @ truth.astype(int).T


def score_map(estimated, truth) -> ScoreResult:
    """Precision and recall of an estimated correlation map.

    Estimated rows are ordered by eigenvalue, truth rows by component index,
    so rows are first paired by an assignment maximizing the number of
    shared ones. Unpaired estimated rows count all their ones as false
    positives; unpaired truth rows count all theirs as false negatives.
    With no detections precision is 1; with no true correlations recall is 1.

    ``cell_hits`` is the estimated map rearranged onto the truth rows (zeros
    where no estimated row was assigned).
    """
    truth = np.asarray(truth, dtype=int)
    est = np.asarray(estimated, dtype=int)
    if est.size == 0 and truth.ndim == 2:
        est = est.reshape(0, truth.shape[1])
    if truth.ndim != 2 or est.ndim != 2 or est.shape[1] != truth.shape[1]:
        raise InvalidInput("estimated and true maps must have the same columns")
    hits = np.zeros_like(truth)
    tp = 0
    if est.shape[0] and truth.shape[0]:
        gain = _overlap(est, truth)
        rows, cols = linear_sum_assignment(gain, maximize=True)
        for r, c in zip(rows, cols):
            hits[c] = est[r]
            tp += int(gain[r, c])
    fp = int(est.sum()) - tp
    fn = int(truth.sum()) - tp
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return ScoreResult(precision, recall, hits, tp, fp, fn)


def score_map_exhaustive(estimated, truth) -> tuple[float, float]:
    """Brute-force reference for :func:`score_map` over all row pairings."""
    est = np.asarray(estimated, dtype=int)
    truth = np.asarray(truth, dtype=int)
    ne, nt = est.shape[0], truth.shape[0]
    best = 0
    if ne and nt:
        if ne <= nt:
            for perm in permutations(range(nt), ne):
                best = max(best, sum(int(est[i] @ truth[perm[i]]) for i in range(ne)))
        else:
            for perm in permutations(range(ne), nt):
                best = max(best, sum(int(est[perm[j]] @ truth[j]) for j in range(nt)))
    fp, fn = int(est.sum()) - best, int(truth.sum()) - best
    return (best / (best + fp) if best + fp else 1.0, best / (best + fn) if best + fn else 1.0)


def estimate_dall(zmap) -> int:
    """Number of rows of a correlation map that are all ones."""
    zmap = np.asarray(zmap)
    if zmap.size == 0:
        return 0
    return int(np.sum(np.all(zmap == 1, axis=1)))


@dataclass
class ScenarioConfig:
    """One Monte Carlo experiment.

    ``rho_entries`` lists the ``(component, p, q)`` coefficients (0-based)
    that take each value of ``rho_grid``; the sweep is the product of
    ``snr_grid`` and ``rho_grid``.
    """

    profile: CorrelationProfile
    snr_grid: list
    samples: int
    trials: int = DESK_TRIALS
    detect: DetectConfig = field(default_factory=lambda: DetectConfig(bootstraps=DESK_BOOTSTRAPS))
    rho_grid: list | None = None
    rho_entries: list = field(default_factory=list)
    metrics: tuple = METRICS
    mixing: str = "orthogonal"
    name: str = "scenario"

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidInput("trials must be >= 1")
        if not self.snr_grid:
            raise InvalidInput("snr_grid must not be empty")
        if self.rho_grid is not None and (not self.rho_grid or not self.rho_entries):
            raise InvalidInput("rho_grid needs values and rho_entries")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise InvalidInput(f"unknown metrics {sorted(unknown)}")

    def points(self) -> list[tuple[float, float | None]]:
        rhos = self.rho_grid if self.rho_grid is not None else [None]
        return [(float(s), None if r is None else float(r)) for s in self.snr_grid for r in rhos]

    def profile_at(self, rho: float | None) -> CorrelationProfile:
        if rho is None:
            return self.profile
        return self.profile.with_values({tuple(e): rho for e in self.rho_entries})

    def full_scale(self) -> "ScenarioConfig":
        """Same experiment at full size: 500 trials, 1000 resamples, SNR -10 to 14 dB."""
        snr = FULL_SNR_GRID if self.rho_grid is None else self.snr_grid
        return replace(self, trials=FULL_TRIALS, snr_grid=list(snr),
                       detect=replace(self.detect, bootstraps=FULL_BOOTSTRAPS))

    def to_dict(self) -> dict:
        d = self.detect
        return {
            "name": self.name,
            "profile": profile_to_dict(self.profile),
            "snr_grid": list(self.snr_grid),
            "rho_grid": self.rho_grid,
            "rho_entries": [[i + 1, p + 1, q + 1] for i, p, q in self.rho_entries],
            "samples": self.samples,
            "trials": self.trials,
            "mixing": self.mixing,
            "metrics": list(self.metrics),
            "detect": {"bootstraps": d.bootstraps, "pfa": d.pfa, "seed": d.seed,
                       "shared_resamples": d.shared_resamples},
        }


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Parse a scenario document (1-based indices in ``rho_entries``)."""
    try:
        det = doc.get("detect", {})
        det_cfg = DetectConfig(
            bootstraps=int(det.get("bootstraps", DESK_BOOTSTRAPS)),
            pfa=float(det.get("pfa", 0.05)),
            seed=int(det.get("seed", DEFAULT_SEED)),
            shared_resamples=bool(det.get("shared_resamples", True)),
        )
        return ScenarioConfig(
            profile=profile_from_dict(doc["profile"]),
            snr_grid=[float(s) for s in doc["snr_grid"]],
            samples=int(doc["samples"]),
            trials=int(doc.get("trials", DESK_TRIALS)),
            detect=det_cfg,
            rho_grid=doc.get("rho_grid"),
            rho_entries=[(int(i) - 1, int(p) - 1, int(q) - 1) for i, p, q in doc.get("rho_entries", [])],
            metrics=tuple(doc.get("metrics", METRICS)),
            mixing=doc.get("mixing", "orthogonal"),
            name=doc.get("name", "scenario"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"malformed scenario document: {exc!r}") from exc


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))


@dataclass
class MetricsRecord:
    snr_db: float
    rho: float | None
    acc_d: float
    acc_dall: float
    precision: float
    recall: float
    cell_accuracy: np.ndarray
    mean_d_hat: float
    trials: int

    @property
    def sweep_point(self):
        return self.snr_db if self.rho is None else (self.snr_db, self.rho)

    @property
    def label(self) -> str:
        s = f"snr{_fmt(self.snr_db)}dB"
        return s if self.rho is None else f"{s}_rho{_fmt(self.rho)}"


@dataclass
class TrialOutcome:
    d_hat: int
    d_all_hat: int
    precision: float
    recall: float
    cell_hits: np.ndarray


def trial_seeds(master_seed: int, trial: int) -> tuple[RngStream, int]:
    data_stream = RngStream(master_seed, (trial, 0))
    boot_seed = int(RngStream(master_seed, (trial, 1)).integers(0, 2**63 - 1))
    return data_stream, boot_seed


def run_trial(profile: CorrelationProfile, snr_db: float, samples: int, detect_cfg: DetectConfig,
              master_seed: int, trial: int, mixing: str = "orthogonal") -> TrialOutcome:
    data_stream, boot_seed = trial_seeds(master_seed, trial)
    data = generate(GenConfig(profile, snr_db, samples, seed=master_seed, mixing=mixing), data_stream)
    rep = detect(data, detect_cfg.with_seed(boot_seed))
    sc = score_map(rep.map, truth_map(profile))
    return TrialOutcome(rep.d_hat, estimate_dall(rep.map), sc.precision, sc.recall, sc.cell_hits)


def _run_point(args) -> list[TrialOutcome]:
    profile, snr, samples, detect_cfg, seed, trials, mixing = args
    return [run_trial(profile, snr, samples, detect_cfg, seed, t, mixing) for t in trials]


def run_scenario(cfg: ScenarioConfig, seed: int | None = None, workers: int = 1,
                 progress=None) -> list[MetricsRecord]:
    """Run every sweep point for ``cfg.trials`` trials and average the scores.

    ``seed`` defaults to ``cfg.detect.seed``. Results are identical for any
    ``workers``: each trial's randomness comes from its index, and
    aggregation follows trial order.
    """
    seed = cfg.detect.seed if seed is None else seed
    records = []
    jobs = []
    for snr, rho in cfg.points():
        prof = cfg.profile_at(rho)
        jobs.append((prof, snr, cfg.samples, cfg.detect, seed, list(range(cfg.trials)), cfg.mixing))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_point, jobs))
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_run_point(job))
            if progress:
                progress(job[1], len(outcomes), len(jobs))
    for (snr, rho), outs, job in zip(cfg.points(), outcomes, jobs):
        d, d_all, _ = derived_orders(job[0])
        records.append(MetricsRecord(
            snr_db=snr,
            rho=rho,
            acc_d=float(np.mean([o.d_hat == d for o in outs])),
            acc_dall=float(np.mean([o.d_all_hat == d_all for o in outs])),
            precision=float(np.mean([o.precision for o in outs])),
            recall=float(np.mean([o.recall for o in outs])),
            cell_accuracy=np.mean([o.cell_hits for o in outs], axis=0),
            mean_d_hat=float(np.mean([o.d_hat for o in outs])),
            trials=len(outs),
        ))
        log.info("snr=%s rho=%s acc_d=%.3f acc_dall=%.3f precision=%.3f recall=%.3f",
                 snr, rho, records[-1].acc_d, records[-1].acc_dall, records[-1].precision,
                 records[-1].recall)
    return records


# output


def _fmt(x) -> str:
    if x is None:
        return ""
    return f"{x:.6g}"


def records_csv(records: list[MetricsRecord]) -> str:
    """CSV text, one row per sweep point, floats to 6 significant digits.

    ``sweep`` is the SNR for SNR-only sweeps and rho when rho is swept.
    """
    if not records:
        raise InvalidInput("no records to write")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        sweep = r.snr_db if r.rho is None else r.rho
        w.writerow([_fmt(sweep), _fmt(r.acc_d), _fmt(r.acc_dall), _fmt(r.precision), _fmt(r.recall),
                    _fmt(r.snr_db), _fmt(r.rho), _fmt(r.mean_d_hat)])
    return buf.getvalue()


def emit_csv(records: list[MetricsRecord], path) -> Path:
    path = Path(path)
    path.write_text(records_csv(records), encoding="utf-8")
    return path


def heatmap_svg(values, row_labels=None, col_labels=None, cell: int = 40, title: str | None = None) -> str:
    """SVG grid of grayscale cells: 0 is black, 1 is white, linear in between."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.size == 0:
        raise InvalidInput("heat map needs at least one cell")
    if np.any(~np.isfinite(values)) or values.min() < 0 or values.max() > 1:
        raise InvalidInput("heat map values must lie in [0, 1]")
    rows, cols = values.shape
    row_labels = row_labels or [f"i={i + 1}" for i in range(rows)]
    col_labels = col_labels or [str(j + 1) for j in range(cols)]
    left, top = 50, 30 if title else 10
    width = left + cols * cell + 10
    height = top + rows * cell + 30
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#808080" fill-opacity="0.15"/>',
    ]
    if title:
        out.append(f'<text x="{left}" y="18" font-family="sans-serif" font-size="13">{title}</text>')
    for i in range(rows):
        y = top + i * cell
        out.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4:g}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{row_labels[i]}</text>')
        for j in range(cols):
            g = int(round(255 * values[i, j]))
            out.append(
                f'<rect class="cell" data-row="{i}" data-col="{j}" data-value="{values[i, j]:.6g}" '
                f'x="{left + j * cell}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="rgb({g},{g},{g})" stroke="#404040" stroke-width="1"/>'
            )
    for j in range(cols):
        out.append(f'<text x="{left + j * cell + cell / 2:g}" y="{top + rows * cell + 18}" '
                   f'text-anchor="middle" font-family="sans-serif" font-size="11">{col_labels[j]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def pair_labels(p_sets: int) -> list[str]:
    return [f"{p + 1}{q + 1}" if p_sets < 10 else f"{p + 1}-{q + 1}" for p, q in pair_list(p_sets)]


def emit_heatmap(cell_accuracy, path, title: str | None = None) -> Path:
    """Write a cell-accuracy matrix (rows x C(P,2)) as an SVG heat map."""
    cell_accuracy = np.atleast_2d(np.asarray(cell_accuracy, dtype=float))
    cols = cell_accuracy.shape[1]
    p_sets = int(round((1 + math.sqrt(1 + 8 * cols)) / 2))
    labels = pair_labels(p_sets) if p_sets * (p_sets - 1) // 2 == cols else None
    path = Path(path)
    path.write_text(heatmap_svg(cell_accuracy, col_labels=labels, title=title), encoding="utf-8")
    return path


def emit_outputs(cfg: ScenarioConfig, records: list[MetricsRecord], out_dir, seed: int) -> Path:
    """``metrics.csv``, one heat map (SVG + CSV matrix) per sweep point, ``run-manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out / "metrics.csv")
    heatmaps = []
    if "cellwise_heatmap" in cfg.metrics:
        for r in records:
            svg = out / f"heatmap_{r.label}.svg"
            emit_heatmap(r.cell_accuracy, svg, title=f"{cfg.name} {r.label}")
            np.savetxt(out / f"cells_{r.label}.csv", r.cell_accuracy, delimiter=",", fmt="%.6g")
            heatmaps.append(svg.name)
    manifest = {"seed": seed, "scenario": cfg.to_dict(), "outputs": ["metrics.csv", *heatmaps]}
    (out / "run-manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return out


# built-in experiments

SCENARIO_III_RHOS = [0.88, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1]


def builtin_scenario(name: str, trials: int = DESK_TRIALS, bootstraps: int = DESK_BOOTSTRAPS) -> ScenarioConfig:
    """Desk-scale versions of the four reference setups plus an all-null control.

    ``name`` is one of ``i``, ``ii``, ``iii``, ``iv``, ``null``.
    """
    det = DetectConfig(bootstraps=bootstraps)
    if name == "i":
        return ScenarioConfig(profiles.scenario_i(), [5.0, 14.0], profiles.SCENARIO_I_SAMPLES,
                              trials, det, name="scenario-i")
    if name == "ii":
        return ScenarioConfig(profiles.scenario_ii(), [5.0, 14.0], profiles.SCENARIO_I_SAMPLES,
                              trials, det, name="scenario-ii")
    if name == "iii":
        return ScenarioConfig(profiles.scenario_iii(0.7), [0.0, -2.5], profiles.SCENARIO_I_SAMPLES,
                              trials, det, rho_grid=list(SCENARIO_III_RHOS),
                              rho_entries=profiles.scenario_iii_varied_entries(), name="scenario-iii")
    if name == "iv":
        return ScenarioConfig(profiles.scenario_iv(), [2.0, 14.0], profiles.SCENARIO_IV_SAMPLES,
                              trials, det, name="scenario-iv")
    if name == "null":
        return ScenarioConfig(profiles.uncorrelated(3, 5), [30.0], 1000, trials, det, name="null")
    raise InvalidInput(f"unknown scenario {name!r}")
