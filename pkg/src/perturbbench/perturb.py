"""Time-domain perturbations and the unified perturbation dispatcher.

A :class:`PerturbationSpec` names one perturbation kind plus a validated,
default-filled parameter record. Its canonical text form (kind plus sorted
key=value pairs) is used verbatim as CLI input, result-CSV key, and cache
key, e.g. ``reverse:fade_ms=2;window_ms=150``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cochlear, spectral
from .errors import ParameterError
from .signal_core import AudioSignal, join_with_fades, ms_to_samples, segment

DEFAULT_FADE_MS = 2.0

_REQUIRED = object()

# name -> (type, default, choices); _REQUIRED marks mandatory params and
# None marks optional ones omitted from the canonical form when unset.
KIND_SCHEMAS: dict[str, dict[str, tuple[type, object, tuple | None]]] = {
    "none": {},
    "reverse": {
        "window_ms": (float, _REQUIRED, None),
        "fade_ms": (float, DEFAULT_FADE_MS, None),
    },
    "shuffle": {
        "window_ms": (float, _REQUIRED, None),
        "fade_ms": (float, DEFAULT_FADE_MS, None),
        "seed": (int, 0, None),
    },
    "warp": {
        "factor": (float, _REQUIRED, None),
    },
    "chimera": {
        "n_bands": (int, 30, None),
        "selection": (str, "envelope", ("envelope", "fine_structure")),
        "seed": (int, 0, None),
        "window_ms": (float, None, None),
    },
    "mosaic": {
        "n_bands": (int, 60, None),
        "freq_win_bands": (int, 6, None),
        "window_ms": (float, _REQUIRED, None),
        "seed": (int, 0, None),
    },
    "interrupt": {
        "window_ms": (float, _REQUIRED, None),
        "fraction": (float, 0.5, None),
        "mode": (str, "mask", ("mask", "silence")),
        "snr_db": (float, -9.0, None),
        "selection": (str, "periodic", ("periodic", "random")),
        "seed": (int, 0, None),
    },
    "repackage": {
        "window_ms": (float, 250.0, None),
        "factor": (float, 2.0, None),
        "silence_ms": (float, _REQUIRED, None),
    },
    "envelope_reverse": {
        "n_bands": (int, 30, None),
        "window_ms": (float, _REQUIRED, None),
    },
}


def _coerce(kind: str, name: str, value, target: type):
    try:
        if target is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if target is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ParameterError(f"{kind}: parameter {name}={value!r} is not a valid {target.__name__}")


def _format_value(value) -> str:
    if isinstance(value, float) and value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return str(value)


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation kind with a complete, validated parameter record."""

    kind: str
    params: dict

    @classmethod
    def create(cls, kind: str, **params) -> "PerturbationSpec":
        if kind not in KIND_SCHEMAS:
            raise ParameterError(f"unknown perturbation kind {kind!r}")
        schema = KIND_SCHEMAS[kind]
        unknown = set(params) - set(schema)
        if unknown:
            raise ParameterError(f"{kind}: unexpected parameters {sorted(unknown)}")
        filled = {}
        for name, (target, default, choices) in schema.items():
            if name in params and params[name] is not None:
                value = _coerce(kind, name, params[name], target)
            elif default is _REQUIRED:
                raise ParameterError(f"{kind}: missing required parameter {name!r}")
            else:
                value = default
            if value is not None and choices is not None and value not in choices:
                raise ParameterError(f"{kind}: {name} must be one of {choices}, got {value!r}")
            if name == "seed" and value is not None and value < 0:
                raise ParameterError(f"{kind}: seed must be non-negative, got {value}")
            filled[name] = value
        return cls(kind, filled)

    def canonical(self) -> str:
        pairs = ";".join(
            f"{name}={_format_value(value)}"
            for name, value in sorted(self.params.items())
            if value is not None
        )
        return f"{self.kind}:{pairs}" if pairs else self.kind

    def with_params(self, **updates) -> "PerturbationSpec":
        merged = {k: v for k, v in self.params.items() if v is not None}
        merged.update(updates)
        return PerturbationSpec.create(self.kind, **merged)

    def __hash__(self):
        return hash(self.canonical())

    def __str__(self):
        return self.canonical()


def parse_spec(text: str) -> PerturbationSpec:
    """Parse the canonical textual form back into a spec."""
    kind, _, rest = text.strip().partition(":")
    params = {}
    if rest:
        for pair in rest.split(";"):
            name, sep, value = pair.partition("=")
            if not sep or not name:
                raise ParameterError(f"malformed spec fragment {pair!r} in {text!r}")
            params[name.strip()] = value.strip()
    return PerturbationSpec.create(kind, **params)


def reverse_local(signal: AudioSignal, window_ms: float, fade_ms: float = DEFAULT_FADE_MS) -> AudioSignal:
    """Reverse the samples within each consecutive window; length preserved."""
    frames = [frame[::-1] for frame in segment(signal, window_ms)]
    return join_with_fades(frames, fade_ms, signal.sample_rate)


def shuffle_local(
    signal: AudioSignal, window_ms: float, seed: int = 0, fade_ms: float = DEFAULT_FADE_MS
) -> AudioSignal:
    """Permute the samples within each window; one seeded draw per frame."""
    rng = np.random.default_rng(seed)
    frames = [frame[rng.permutation(frame.size)] for frame in segment(signal, window_ms)]
    return join_with_fades(frames, fade_ms, signal.sample_rate)


def _select_frames(n_frames: int, count: int, selection: str, rng: np.random.Generator) -> np.ndarray:
    if selection == "periodic":
        return (np.arange(count) * n_frames // count).astype(int)
    return np.sort(rng.choice(n_frames, size=count, replace=False))


def interrupt(
    signal: AudioSignal,
    window_ms: float,
    fraction: float,
    mode: str = "mask",
    snr_db: float = -9.0,
    selection: str = "periodic",
    seed: int = 0,
) -> AudioSignal:
    """Corrupt a fraction of the windows with noise or silence.

    ``silence`` zeroes the selected windows. ``mask`` adds Gaussian noise
    scaled so that 10*log10(P_signal / P_noise) = snr_db, where P_signal is
    the whole-utterance mean power and P_noise is measured over the masked
    samples. Window selection is an evenly spaced deterministic pattern
    (``periodic``) or a seeded draw without replacement (``random``).
    """
    if not 0.0 <= fraction <= 1.0:
        raise ParameterError(f"fraction must be in [0, 1], got {fraction}")
    if mode not in ("mask", "silence"):
        raise ParameterError(f"mode must be 'mask' or 'silence', got {mode!r}")
    if selection not in ("periodic", "random"):
        raise ParameterError(f"selection must be 'periodic' or 'random', got {selection!r}")
    frames = segment(signal, window_ms)
    count = int(round(fraction * len(frames)))
    if count == 0:
        return AudioSignal(np.concatenate(frames), signal.sample_rate)
    rng = np.random.default_rng(seed)
    chosen = _select_frames(len(frames), count, selection, rng)
    if mode == "silence":
        for idx in chosen:
            frames[idx][:] = 0.0
    else:
        signal_power = float(np.mean(signal.samples ** 2))
        target_power = signal_power * 10.0 ** (-snr_db / 10.0)
        noise = [rng.standard_normal(frames[idx].size) for idx in chosen]
        flat = np.concatenate(noise)
        measured = float(np.mean(flat ** 2))
        scale = np.sqrt(target_power / measured) if measured > 0 else 0.0
        for idx, chunk in zip(chosen, noise):
            frames[idx] += scale * chunk
    return AudioSignal(np.concatenate(frames), signal.sample_rate)


def repackage(
    signal: AudioSignal,
    window_ms: float,
    compression: float,
    silence_ms: float,
    fade_ms: float = DEFAULT_FADE_MS,
    iterations: int = spectral.DEFAULT_GRIFFIN_LIM_ITERATIONS,
) -> AudioSignal:
    """Compress each window in time (pitch preserved) and append silence.

    With silence equal to window * (1 - 1/compression) the speech is
    locally redistributed while the overall duration stays intact. A
    shorter final window receives proportionally shorter silence so that
    property holds for any signal length.
    """
    if compression <= 1.0:
        raise ParameterError(f"compression must be > 1, got {compression}")
    if silence_ms < 0:
        raise ParameterError(f"silence_ms must be >= 0, got {silence_ms}")
    sr = signal.sample_rate
    win_n = ms_to_samples(window_ms, sr)
    silence_n = silence_ms * sr / 1000.0
    pieces = []
    for frame in segment(signal, window_ms):
        warped = spectral.time_warp(AudioSignal(frame, sr), compression, iterations=iterations)
        n_sil = int(round(silence_n * frame.size / win_n))
        pieces.append(np.concatenate([warped.samples, np.zeros(n_sil)]))
    return join_with_fades(pieces, fade_ms, sr)


def apply(spec: PerturbationSpec, signal: AudioSignal) -> AudioSignal:
    """Dispatch a spec to its implementation; kind ``none`` is the identity."""
    if not isinstance(spec, PerturbationSpec) or spec.kind not in KIND_SCHEMAS:
        raise ParameterError(f"malformed perturbation spec: {spec!r}")
    p = spec.params
    if spec.kind == "none":
        return signal
    if spec.kind == "reverse":
        return reverse_local(signal, p["window_ms"], p["fade_ms"])
    if spec.kind == "shuffle":
        return shuffle_local(signal, p["window_ms"], p["seed"], p["fade_ms"])
    if spec.kind == "warp":
        return spectral.time_warp(signal, p["factor"])
    if spec.kind == "chimera":
        return cochlear.speech_noise_chimera(
            signal, p["n_bands"], p["selection"], p["seed"], p["window_ms"]
        )
    if spec.kind == "mosaic":
        return cochlear.mosaicize(
            signal, p["n_bands"], p["freq_win_bands"], p["window_ms"], p["seed"]
        )
    if spec.kind == "interrupt":
        return interrupt(
            signal, p["window_ms"], p["fraction"], p["mode"], p["snr_db"],
            p["selection"], p["seed"],
        )
    if spec.kind == "repackage":
        return repackage(signal, p["window_ms"], p["factor"], p["silence_ms"])
    if spec.kind == "envelope_reverse":
        return cochlear.reverse_envelopes(signal, p["n_bands"], p["window_ms"])
    raise ParameterError(f"unhandled perturbation kind {spec.kind!r}")
