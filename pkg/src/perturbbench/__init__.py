"""Multi-scale speech perturbation synthesis, input-sparsity statistics,
and a word-error-rate evaluation harness for external ASR bridges."""

from .cochlear import (
    Cochleagram,
    EnvTfsPair,
    chimerize,
    envelope_tfs,
    erb_filterbank,
    mosaicize,
    reverse_envelopes,
    speech_noise_chimera,
)
from .harness import (
    AxesSpec,
    ExperimentGrid,
    ManifestEntry,
    ResultRow,
    build_grid,
    emit_curves,
    load_manifest,
    run_experiment,
)
from .perturb import (
    PerturbationSpec,
    apply,
    interrupt,
    parse_spec,
    repackage,
    reverse_local,
    shuffle_local,
)
from .scoring import WerCounts, aggregate, align, normalize_text, wer
from .signal_core import AudioSignal, WindowPlan, join_with_fades, load_wav, save_wav, segment
from .spectral import Spectrogram, StftConfig, griffin_lim, istft, stft, time_warp
from .stats import SparsityPoint, gini, sparsity_point, windowed_gini

__version__ = "0.1.0"

__all__ = [
    "AudioSignal", "WindowPlan", "load_wav", "save_wav", "segment", "join_with_fades",
    "StftConfig", "Spectrogram", "stft", "istft", "griffin_lim", "time_warp",
    "Cochleagram", "EnvTfsPair", "erb_filterbank", "envelope_tfs", "chimerize",
    "reverse_envelopes", "mosaicize", "speech_noise_chimera",
    "PerturbationSpec", "parse_spec", "apply", "reverse_local", "shuffle_local",
    "interrupt", "repackage",
    "gini", "windowed_gini", "sparsity_point", "SparsityPoint",
    "WerCounts", "normalize_text", "align", "wer", "aggregate",
    "ManifestEntry", "ExperimentGrid", "ResultRow", "load_manifest", "build_grid",
    "run_experiment", "emit_curves", "AxesSpec",
]
