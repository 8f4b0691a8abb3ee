"""Detect which latent components are correlated across which of several data sets."""

from .coherence import (
    CoherenceDecomposition,
    EigvecPartition,
    partition_eigvec,
    population_coherence,
    sample_coherence,
)
from .detect import (
    DetectConfig,
    DetectionReport,
    bootstrap_resample,
    corr_dim,
    corr_struct,
    detect,
    pvalue,
    stat_dim,
)
from .errors import CorrmapError, DegenerateSpectrum, InvalidInput, NotPSD, NumericalError, SingularMatrix
from .harness import MetricsRecord, ScenarioConfig, emit_csv, emit_heatmap, estimate_dall, run_scenario, score_map
from .model import (
    CorrelationProfile,
    composite_signal_cov,
    derived_orders,
    epsilon_threshold,
    truth_map,
    validate_profile,
)
from .numerics import EigenPairs, inv_sqrt_psd, random_orthogonal, sample_gaussian, sqrt_psd, sym_eig
from .oracle import (
    TheoremReport,
    check_corollary1,
    check_theorem1,
    check_theorem2_pattern,
    count_eigs_above_one,
    degeneracy_check,
    hollow_signature,
)
from .rng import RngStream
from .synth import GenConfig, MultiDataset, generate, snr_to_noise_var

__version__ = "0.1.0"
