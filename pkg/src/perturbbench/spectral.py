"""Short-time Fourier analysis/synthesis, iterative phase reconstruction,
and pitch-preserving time warping.

Analysis uses a periodic Hann window with zero padding on both ends so
that weighted overlap-add synthesis reconstructs every input sample
exactly. Warping interpolates magnitude frames along time, seeds the
phase from the input's per-bin phase gradient, and refines it with
Griffin-Lim iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, StftConfigError
from .signal_core import AudioSignal, ms_to_samples

DEFAULT_WIN_MS = 32.0
DEFAULT_GRIFFIN_LIM_ITERATIONS = 60


@dataclass(frozen=True)
class StftConfig:
    """Analysis geometry: window, hop, and FFT length, all in samples."""

    win_samples: int
    hop_samples: int
    fft_size: int

    def __post_init__(self):
        if not (0 < self.hop_samples <= self.win_samples <= self.fft_size):
            raise StftConfigError(
                f"need 0 < hop <= win <= fft_size, got hop={self.hop_samples} "
                f"win={self.win_samples} fft={self.fft_size}"
            )
        # Weighted overlap-add with a periodic Hann window needs at least
        # 2x overlap for the squared-window sum to stay positive.
        if self.hop_samples > self.win_samples // 2:
            raise StftConfigError(
                f"hop={self.hop_samples} violates constant overlap-add for "
                f"win={self.win_samples}; need hop <= win/2"
            )

    @classmethod
    def for_rate(cls, sample_rate: int, win_ms: float = DEFAULT_WIN_MS) -> "StftConfig":
        """Standard speech geometry: Hann window, 1/4 hop, pow2 FFT."""
        win = ms_to_samples(win_ms, sample_rate)
        win = max(win, 4)
        fft_size = 1 << (win - 1).bit_length()
        return cls(win_samples=win, hop_samples=max(1, win // 4), fft_size=fft_size)

    @property
    def pad(self) -> int:
        return self.win_samples // 2

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        """Frame count for a signal of ``n_samples`` under this geometry."""
        span = n_samples + 2 * self.pad - self.win_samples
        return 1 + max(0, -(-span // self.hop_samples))

    def frames_to_samples(self, n_frames: int) -> int:
        """Longest signal length analysed into exactly ``n_frames`` frames."""
        return (n_frames - 1) * self.hop_samples + self.win_samples - 2 * self.pad


@dataclass(frozen=True)
class Spectrogram:
    """Complex short-time spectrum with its analysis geometry."""

    frames: np.ndarray  # (n_frames, n_bins) complex
    config: StftConfig
    sample_rate: int
    original_len: int

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.complex128)
        if frames.ndim != 2 or frames.shape[1] != self.config.n_bins:
            raise StftConfigError(
                f"frames shape {frames.shape} inconsistent with fft_size={self.config.fft_size}"
            )
        if frames.size and not np.all(np.isfinite(frames)):
            raise ParameterError("spectrogram entries must be finite")
        object.__setattr__(self, "frames", frames)

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.frames)


def _window(config: StftConfig) -> np.ndarray:
    # Periodic Hann; zero only at the first sample.
    n = config.win_samples
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def stft(signal: AudioSignal, config: StftConfig | None = None) -> Spectrogram:
    """Windowed, zero-padded short-time transform.

    The input length is recorded so inversion restores it exactly.
    """
    if len(signal) == 0:
        raise ParameterError("stft expects a non-empty signal")
    if config is None:
        config = StftConfig.for_rate(signal.sample_rate)
    win, hop, pad = config.win_samples, config.hop_samples, config.pad
    n_frames = config.n_frames(len(signal))
    total = (n_frames - 1) * hop + win
    padded = np.zeros(total)
    padded[pad:pad + len(signal)] = signal.samples
    frames = np.lib.stride_tricks.sliding_window_view(padded, win)[::hop]
    spectra = np.fft.rfft(frames * _window(config), n=config.fft_size, axis=1)
    return Spectrogram(spectra, config, signal.sample_rate, len(signal))


def _overlap_add(frames_time: np.ndarray, config: StftConfig, out_len: int) -> AudioSignal:
    win, hop, pad = config.win_samples, config.hop_samples, config.pad
    window = _window(config)
    n_frames = frames_time.shape[0]
    total = (n_frames - 1) * hop + win
    acc = np.zeros(total)
    denom = np.zeros(total)
    wsq = window * window
    for m in range(n_frames):
        start = m * hop
        acc[start:start + win] += frames_time[m] * window
        denom[start:start + win] += wsq
    denom[denom < 1e-12] = 1.0
    out = acc / denom
    return out[pad:pad + out_len]


def istft(spec: Spectrogram) -> AudioSignal:
    """Weighted overlap-add inversion, truncated to the recorded input length."""
    win = spec.config.win_samples
    frames_time = np.fft.irfft(spec.frames, n=spec.config.fft_size, axis=1)[:, :win]
    out = _overlap_add(frames_time, spec.config, spec.original_len)
    return AudioSignal(out, spec.sample_rate)


def griffin_lim(
    magnitude: np.ndarray,
    config: StftConfig,
    sample_rate: int,
    init_phase: np.ndarray | None = None,
    iterations: int = DEFAULT_GRIFFIN_LIM_ITERATIONS,
    length: int | None = None,
) -> AudioSignal:
    """Iterative signal estimation from a target STFT magnitude.

    Alternates between synthesis and re-analysis, keeping the analysis
    phase and restoring the target magnitude each round; the consistency
    residual || |STFT(x)| - magnitude || is non-increasing. With the true
    phase supplied, zero iterations already reproduce the source signal.
    """
    signal, _ = griffin_lim_trace(
        magnitude, config, sample_rate, init_phase, iterations, length, track_residuals=False
    )
    return signal


def griffin_lim_trace(
    magnitude: np.ndarray,
    config: StftConfig,
    sample_rate: int,
    init_phase: np.ndarray | None = None,
    iterations: int = DEFAULT_GRIFFIN_LIM_ITERATIONS,
    length: int | None = None,
    track_residuals: bool = True,
) -> tuple[AudioSignal, list[float]]:
    """Like :func:`griffin_lim` but also returns the per-iteration residuals."""
    if iterations < 0:
        raise ParameterError(f"iterations must be >= 0, got {iterations}")
    magnitude = np.asarray(magnitude, dtype=np.float64)
    if magnitude.ndim != 2 or magnitude.shape[1] != config.n_bins:
        raise ParameterError(f"magnitude shape {magnitude.shape} inconsistent with config")
    if np.any(magnitude < 0) or not np.all(np.isfinite(magnitude)):
        raise ParameterError("magnitude must be non-negative and finite")
    if length is None:
        length = config.frames_to_samples(magnitude.shape[0])
    if init_phase is None:
        init_phase = np.zeros_like(magnitude)

    def synthesize(phase: np.ndarray) -> AudioSignal:
        spec = Spectrogram(magnitude * np.exp(1j * phase), config, sample_rate, length)
        return istft(spec)

    residuals: list[float] = []
    x = synthesize(init_phase)
    for _ in range(iterations):
        analysis = stft(x, config)
        if track_residuals:
            residuals.append(float(np.linalg.norm(np.abs(analysis.frames) - magnitude)))
        x = synthesize(np.angle(analysis.frames))
    return x, residuals


def _principal_angle(x: np.ndarray) -> np.ndarray:
    return np.mod(x + np.pi, 2.0 * np.pi) - np.pi


def time_warp(
    signal: AudioSignal,
    factor: float,
    config: StftConfig | None = None,
    iterations: int = DEFAULT_GRIFFIN_LIM_ITERATIONS,
) -> AudioSignal:
    """Compress (factor > 1) or stretch (factor < 1) duration without
    shifting pitch.

    Magnitude frames are linearly resampled along time; the initial phase
    accumulates the input's per-bin, per-hop phase advance at the source
    position (preserving the local phase gradient) and is then refined by
    Griffin-Lim. ``factor = 1.0`` bypasses processing entirely.
    """
    if factor <= 0:
        raise ParameterError(f"warp factor must be > 0, got {factor}")
    if factor == 1.0:
        return signal
    if config is None:
        config = StftConfig.for_rate(signal.sample_rate)
    out_len = max(1, int(round(len(signal) / factor)))

    spec = stft(signal, config)
    mag = np.abs(spec.frames)
    phase = np.angle(spec.frames)
    n_in = mag.shape[0]
    n_out = config.n_frames(out_len)

    positions = np.minimum(np.arange(n_out) * factor, n_in - 1.0)
    lo = np.floor(positions).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = (positions - lo)[:, None]
    mag_out = (1.0 - frac) * mag[lo] + frac * mag[hi]

    # Per-hop phase advance at each input frame, unwrapped around the bin
    # center frequency; accumulated along the output time axis.
    omega = 2.0 * np.pi * np.arange(config.n_bins) * config.hop_samples / config.fft_size
    if n_in > 1:
        advance = _principal_angle(np.diff(phase, axis=0) - omega) + omega
        adv_out = advance[np.minimum(lo, n_in - 2)]
    else:
        adv_out = np.broadcast_to(omega, (n_out, config.n_bins))
    phase_out = np.empty_like(mag_out)
    phase_out[0] = phase[0]
    np.cumsum(adv_out[1:], axis=0, out=phase_out[1:])
    phase_out[1:] += phase[0]

    return griffin_lim(
        mag_out, config, signal.sample_rate,
        init_phase=phase_out, iterations=iterations, length=out_len,
    )
