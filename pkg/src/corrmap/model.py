"""Ground-truth correlation structures.

A :class:`CorrelationProfile` stores, for every signal component ``i``, the
``P x P`` correlation matrix of the ``i``-th components across the data sets.
Indices are 0-based in the Python API and 1-based in profile files.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import InvalidInput, NotPSD
from .numerics import is_psd
from .rng import RngStream

log = logging.getLogger(__name__)


def pair_list(p_sets: int) -> list[tuple[int, int]]:
    """Data-set pairs in lexicographic order: (0,1), (0,2), ..., (P-2,P-1)."""
    return list(combinations(range(p_sets), 2))


def pair_index(p: int, q: int, p_sets: int) -> int:
    """Column of pair ``{p, q}`` in the lexicographic ordering."""
    if p == q:
        raise InvalidInput("pair needs two distinct data sets")
    if p > q:
        p, q = q, p
    return p * p_sets - p * (p + 1) // 2 + (q - p - 1)


def epsilon_threshold(k: int) -> float:
    """Element-wise correlation bound ``((k-1)/k)**2`` for a clique of size k."""
    if k < 2:
        raise InvalidInput(f"clique size must be >= 2, got {k}")
    return ((k - 1) / k) ** 2


@dataclass(frozen=True, eq=False)
class CorrelationProfile:
    """Per-component cross-set correlation matrices ``R^(i)``.

    ``r_blocks`` has shape ``(n, P, P)``. Each block is symmetric with unit
    diagonal and off-diagonal entries in ``[0, 1]``; PSD-ness and the clique
    structure are checked by :func:`validate_profile`, not here.
    """

    r_blocks: np.ndarray

    def __post_init__(self):
        r = np.array(self.r_blocks, dtype=float)
        if r.ndim != 3 or r.shape[1] != r.shape[2]:
            raise InvalidInput(f"r_blocks must have shape (n, P, P), got {r.shape}")
        if r.shape[0] < 1 or r.shape[1] < 2:
            raise InvalidInput("need n >= 1 components and P >= 2 data sets")
        if not np.all(np.isfinite(r)):
            raise InvalidInput("r_blocks has non-finite entries")
        if not np.array_equal(r, np.swapaxes(r, 1, 2)):
            raise InvalidInput("every R^(i) must be symmetric")
        if not np.all(np.diagonal(r, axis1=1, axis2=2) == 1.0):
            raise InvalidInput("every R^(i) must have unit diagonal")
        if r.min() < 0.0 or r.max() > 1.0:
            raise InvalidInput("correlation coefficients must lie in [0, 1]")
        r.setflags(write=False)
        object.__setattr__(self, "r_blocks", r)

    @property
    def n_components(self) -> int:
        return self.r_blocks.shape[0]

    @property
    def p_sets(self) -> int:
        return self.r_blocks.shape[1]

    @classmethod
    def identity(cls, p_sets: int, n_components: int) -> "CorrelationProfile":
        return cls(np.broadcast_to(np.eye(p_sets), (n_components, p_sets, p_sets)))

    @classmethod
    def from_pairs(cls, p_sets: int, n_components: int, components) -> "CorrelationProfile":
        """Build from ``{component: [(p, q, rho), ...]}`` with 0-based indices."""
        r = np.tile(np.eye(p_sets), (n_components, 1, 1))
        for i, pairs in dict(components).items():
            if not 0 <= i < n_components:
                raise InvalidInput(f"component index {i} out of range")
            for p, q, rho in pairs:
                if not (0 <= p < p_sets and 0 <= q < p_sets) or p == q:
                    raise InvalidInput(f"bad data-set pair ({p}, {q})")
                r[i, p, q] = r[i, q, p] = float(rho)
        return cls(r)

    @classmethod
    def from_table(cls, p_sets: int, rows) -> "CorrelationProfile":
        """Build from rows of coefficients in lexicographic pair order.

        One row per component, one column per pair (12, 13, ..., (P-1)P).
        """
        pairs = pair_list(p_sets)
        comps = {}
        for i, row in enumerate(rows):
            if len(row) != len(pairs):
                raise InvalidInput(f"row {i} has {len(row)} entries, expected {len(pairs)}")
            comps[i] = [(p, q, rho) for (p, q), rho in zip(pairs, row) if rho != 0]
        return cls.from_pairs(p_sets, len(rows), comps)

    def pairs(self, i: int) -> list[tuple[int, int, float]]:
        """Nonzero correlations of component ``i`` as ``(p, q, rho)``, p < q."""
        r = self.r_blocks[i]
        return [(p, q, float(r[p, q])) for p, q in pair_list(self.p_sets) if r[p, q] > 0]

    def with_values(self, updates) -> "CorrelationProfile":
        """Copy with ``{(i, p, q): rho}`` entries replaced."""
        r = np.array(self.r_blocks)
        for (i, p, q), rho in dict(updates).items():
            r[i, p, q] = r[i, q, p] = rho
        return CorrelationProfile(r)

    def cliques(self, i: int) -> list[frozenset[int]]:
        """Connected groups (size >= 2) of the nonzero-correlation graph of component ``i``."""
        adj = self.r_blocks[i] > 0
        np.fill_diagonal(adj, False)
        _, labels = connected_components(adj, directed=False)
        groups = {}
        for p, lab in enumerate(labels):
            groups.setdefault(lab, []).append(p)
        return [frozenset(g) for g in groups.values() if len(g) >= 2]

    def is_correlated(self, i: int) -> bool:
        r = self.r_blocks[i]
        return bool(np.any(r[~np.eye(self.p_sets, dtype=bool)] > 0))

    def __eq__(self, other):
        if not isinstance(other, CorrelationProfile):
            return NotImplemented
        return np.array_equal(self.r_blocks, other.r_blocks)

    def __repr__(self):
        return f"CorrelationProfile(P={self.p_sets}, n={self.n_components})"


@dataclass
class ComponentCheck:
    index: int
    cliques: list[list[int]]
    k: int
    psd: bool
    transitive: bool
    threshold_ok: bool
    violations: list[str] = field(default_factory=list)


@dataclass
class ValidationReport:
    components: list[ComponentCheck]
    theorem_assumptions_met: bool
    warnings: list[str]

    @property
    def ok(self) -> bool:
        return self.theorem_assumptions_met


def _component_check(profile: CorrelationProfile, i: int) -> ComponentCheck:
    r = profile.r_blocks[i]
    cliques = profile.cliques(i)
    violations = []
    transitive = True
    threshold_ok = True
    for c in cliques:
        members = sorted(c)
        sub = r[np.ix_(members, members)]
        off = sub[~np.eye(len(members), dtype=bool)]
        if np.any(off == 0):
            transitive = False
            violations.append(f"correlations among data sets {[m + 1 for m in members]} are not transitive")
            continue
        k = len(members)
        if k >= 4:
            eps = epsilon_threshold(k)
            if not np.all(off > eps):
                threshold_ok = False
                violations.append(
                    f"clique {[m + 1 for m in members]} (k={k}) has correlation "
                    f"{off.min():.4g} <= epsilon={eps:.4g}"
                )
    psd = is_psd(r)
    if not psd:
        violations.append("R^(i) is not positive semidefinite")
    if len(cliques) > 1:
        violations.append(f"{len(cliques)} disjoint correlated groups in one component")
    k = max((len(c) for c in cliques), default=1)
    return ComponentCheck(
        index=i,
        cliques=[sorted(c) for c in cliques],
        k=k,
        psd=psd,
        transitive=transitive,
        threshold_ok=threshold_ok,
        violations=violations,
    )


def validate_profile(profile: CorrelationProfile) -> ValidationReport:
    """Check a profile against the assumptions that make the eigen-analysis exact.

    Violations are reported, never repaired. ``theorem_assumptions_met`` needs
    every component to be PSD, transitive (disjoint cliques) and, for cliques
    of four or more data sets, every nonzero coefficient above
    :func:`epsilon_threshold`.
    """
    checks = [_component_check(profile, i) for i in range(profile.n_components)]
    warnings = []
    for c in checks:
        for v in c.violations:
            warnings.append(f"component {c.index + 1}: {v}")
    d, _, _ = derived_orders(profile)
    if d > profile.n_components - 1:
        warnings.append(
            f"d={d} exceeds n-1={profile.n_components - 1}; the dimension test cannot return d"
        )
    met = all(c.psd and c.transitive and c.threshold_ok for c in checks)
    for w in warnings:
        log.warning(w)
    return ValidationReport(checks, met, warnings)


def derived_orders(profile: CorrelationProfile) -> tuple[int, int, np.ndarray]:
    """Return ``(d, d_all, d_pq)``.

    ``d`` counts components with any nonzero cross-set correlation, ``d_all``
    those correlated between every pair, and ``d_pq[p, q]`` those correlated
    between sets ``p`` and ``q`` (zero diagonal).
    """
    p_sets = profile.p_sets
    nz = profile.r_blocks > 0
    off = ~np.eye(p_sets, dtype=bool)
    nz = nz & off
    d = int(np.sum(nz.any(axis=(1, 2))))
    d_all = int(np.sum(nz[:, off].all(axis=1)))
    d_pq = nz.sum(axis=0).astype(int)
    return d, d_all, d_pq


def composite_signal_cov(profile: CorrelationProfile) -> tuple[np.ndarray, np.ndarray]:
    """Covariance of the stacked signal ``s = [s_1; ...; s_P]``.

    Entry ``(p*n + i, q*n + i)`` is ``R^(i)[p, q]``; all other cross terms are
    zero. ``perm`` satisfies ``r_ss[np.ix_(perm, perm)] == blkdiag(R^(1), ...,
    R^(n))``, i.e. ``perm[i*P + p] = p*n + i``.

    Raises
    ------
    NotPSD
        If any ``R^(i)`` is not positive semidefinite.
    """
    n, p_sets = profile.n_components, profile.p_sets
    for i in range(n):
        if not is_psd(profile.r_blocks[i]):
            raise NotPSD(f"R^({i + 1}) is not positive semidefinite")
    perm = np.array([p * n + i for i in range(n) for p in range(p_sets)])
    r_ss = np.zeros((n * p_sets, n * p_sets))
    for i in range(n):
        idx = perm[i * p_sets:(i + 1) * p_sets]
        r_ss[np.ix_(idx, idx)] = profile.r_blocks[i]
    return r_ss, perm


def block_diagonal(profile: CorrelationProfile) -> np.ndarray:
    """``blkdiag(R^(1), ..., R^(n))`` in component-major order."""
    from scipy.linalg import block_diag

    return block_diag(*profile.r_blocks)


# ground-truth maps


def truth_map(profile: CorrelationProfile) -> np.ndarray:
    """Binary ``n x C(P,2)`` map, 1 where ``rho_pq^(i) > 0``."""
    pairs = pair_list(profile.p_sets)
    r = profile.r_blocks
    return np.array([[int(r[i, p, q] > 0) for p, q in pairs] for i in range(profile.n_components)],
                    dtype=np.int8).reshape(profile.n_components, len(pairs))


def support_from_map(zmap: np.ndarray, p_sets: int) -> list[set[tuple[int, int]]]:
    """Per-row sets of correlated pairs encoded by a binary map."""
    pairs = pair_list(p_sets)
    zmap = np.asarray(zmap)
    if zmap.ndim != 2 or zmap.shape[1] != len(pairs):
        raise InvalidInput(f"map must have {len(pairs)} columns for P={p_sets}")
    return [{pairs[j] for j in np.flatnonzero(row)} for row in zmap]


def support(profile: CorrelationProfile) -> list[set[tuple[int, int]]]:
    return [{(p, q) for p, q, _ in profile.pairs(i)} for i in range(profile.n_components)]


# profile files


def profile_to_dict(profile: CorrelationProfile) -> dict:
    comps = []
    for i in range(profile.n_components):
        pairs = profile.pairs(i)
        if pairs:
            comps.append({"index": i + 1, "pairs": [[p + 1, q + 1, rho] for p, q, rho in pairs]})
    return {"P": profile.p_sets, "n": profile.n_components, "components": comps}


def profile_from_dict(doc: dict) -> CorrelationProfile:
    try:
        p_sets, n = int(doc["P"]), int(doc["n"])
        comps = {}
        for c in doc.get("components", []):
            i = int(c["index"]) - 1
            plist = comps.setdefault(i, [])
            for p, q, rho in c["pairs"]:
                p, q = int(p), int(q)
                if not p < q:
                    raise InvalidInput(f"pairs must satisfy p < q, got ({p}, {q})")
                plist.append((p - 1, q - 1, float(rho)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"malformed profile document: {exc!r}") from exc
    return CorrelationProfile.from_pairs(p_sets, n, comps)


def load_profile(path) -> CorrelationProfile:
    with open(path, encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))


def save_profile(profile: CorrelationProfile, path) -> None:
    Path(path).write_text(json.dumps(profile_to_dict(profile), indent=2) + "\n", encoding="utf-8")


# random valid profiles (property tests, acceptance)


def random_valid_profile(
    rng: RngStream,
    p_sets: int,
    n_components: int,
    p_correlated: float = 0.6,
    rho_min: float = 0.05,
    max_tries: int = 200,
) -> CorrelationProfile:
    """Draw a profile meeting every assumption checked by :func:`validate_profile`.

    Each component is, with probability ``p_correlated``, a single clique on a
    random subset of 2..P data sets; coefficients are uniform on
    ``(rho_min, 1)`` for cliques of two or three sets and on
    ``(epsilon(k), 1)`` for larger ones. Blocks that are not PSD are redrawn;
    after ``max_tries`` failures a one-factor block ``l_p l_q`` with loadings
    on ``(sqrt(lo), 1)`` is used instead, which is PSD by construction.
    """
    r = np.tile(np.eye(p_sets), (n_components, 1, 1))
    for i in range(n_components):
        if rng.uniform() >= p_correlated:
            continue
        k = int(rng.integers(2, p_sets + 1))
        members = np.sort(rng.gen.choice(p_sets, size=k, replace=False))
        lo = max(rho_min, epsilon_threshold(k)) if k >= 4 else rho_min
        for _ in range(max_tries):
            b = np.eye(k)
            iu = np.triu_indices(k, 1)
            b[iu] = rng.uniform(lo, 1.0, size=len(iu[0]))
            b = b + np.triu(b, 1).T
            if np.linalg.eigvalsh(b)[0] >= 1e-6:
                break
        else:
            load = rng.uniform(np.sqrt(lo), 1.0, size=k)
            b = np.outer(load, load)
            np.fill_diagonal(b, 1.0)
        r[i][np.ix_(members, members)] = b
    return CorrelationProfile(r)
