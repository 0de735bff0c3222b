"""Blind source separation with jointly-diagonalizable spatial
covariances under a multivariate complex sub-Gaussian source model."""

__version__ = "0.1.0"

from .audio import StftConfig, Waveform, istft, read_wav, stft, write_wav
from .metrics import MetricsReport, sdr_improvement, si_sdr
from .model import (
    Hyperparams,
    SeparationState,
    SourceModel,
    SpatialModel,
    compute_source_psd,
    full_rank_scm,
    init_state,
    load_state,
    mixture_gain,
    save_state,
)
from .objective import (
    CostTrace,
    cost_gaussian_jd,
    cost_ggd_fullrank,
    cost_ggd_jd,
    equality_aux,
    surrogate_tvzg,
)
from .optimizer import (
    IterationReport,
    normalize_and_rescale,
    run,
    update_q_gaussian,
    update_q_subgaussian,
    update_tvzg,
    update_tvzg_gaussian,
)
from .separate import SeparatedSources, wiener_separate, wiener_separate_fullrank
from .simulate import MixtureBundle, RoomSpec, gen_subgaussian_source, mix, synth_rir

__all__ = [
    "StftConfig",
    "Waveform",
    "istft",
    "read_wav",
    "stft",
    "write_wav",
    "MetricsReport",
    "sdr_improvement",
    "si_sdr",
    "Hyperparams",
    "SeparationState",
    "SourceModel",
    "SpatialModel",
    "compute_source_psd",
    "full_rank_scm",
    "init_state",
    "load_state",
    "mixture_gain",
    "save_state",
    "CostTrace",
    "cost_gaussian_jd",
    "cost_ggd_fullrank",
    "cost_ggd_jd",
    "equality_aux",
    "surrogate_tvzg",
    "IterationReport",
    "normalize_and_rescale",
    "run",
    "update_q_gaussian",
    "update_q_subgaussian",
    "update_tvzg",
    "update_tvzg_gaussian",
    "SeparatedSources",
    "wiener_separate",
    "wiener_separate_fullrank",
    "MixtureBundle",
    "RoomSpec",
    "gen_subgaussian_source",
    "mix",
    "synth_rir",
]
