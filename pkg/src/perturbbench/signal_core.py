"""Audio representation, WAV I/O, multiscale windowing, and boundary fading.

Every transform in the toolkit consumes and produces :class:`AudioSignal`
values. Signals are mono, stored as 64-bit floats in a nominal [-1, 1]
range, and treated as immutable after construction so they can be shared
freely between concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io.wavfile

from .errors import AudioFormatError, ChannelCountError, ParameterError

PCM16_SCALE = 32768.0


@dataclass(frozen=True)
class AudioSignal:
    """A mono sample sequence with its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ChannelCountError(f"expected a mono 1-D sample array, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ParameterError("samples contain NaN or Inf")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return 1000.0 * len(self.samples) / self.sample_rate

    def replace_samples(self, samples: np.ndarray) -> "AudioSignal":
        """New signal at the same rate."""
        return AudioSignal(samples, self.sample_rate)


@dataclass(frozen=True)
class WindowPlan:
    """Rectangular cutting window plus the fade applied at frame boundaries."""

    window_ms: float
    fade_ms: float = 0.0

    def __post_init__(self):
        if self.window_ms <= 0:
            raise ParameterError(f"window_ms must be > 0, got {self.window_ms}")
        if self.fade_ms < 0:
            raise ParameterError(f"fade_ms must be >= 0, got {self.fade_ms}")
        if self.fade_ms > self.window_ms / 2:
            raise ParameterError(
                f"fade_ms must be <= window_ms/2 ({self.window_ms / 2}), got {self.fade_ms}"
            )

    def window_samples(self, sample_rate: int) -> int:
        return ms_to_samples(self.window_ms, sample_rate)

    def fade_samples(self, sample_rate: int) -> int:
        return int(round(self.fade_ms * sample_rate / 1000.0))


def ms_to_samples(ms: float, sample_rate: int) -> int:
    """Milliseconds to a sample count, rounded to nearest, clamped to >= 1."""
    return max(1, int(round(ms * sample_rate / 1000.0)))


def load_wav(path) -> AudioSignal:
    """Read a mono RIFF/WAV file (PCM16 or IEEE float32).

    PCM16 samples are decoded to [-1, 1] by division by 32768. Any other
    encoding raises :class:`AudioFormatError`; multichannel files raise
    :class:`ChannelCountError`.
    """
    sample_rate, data = scipy.io.wavfile.read(path)
    if data.ndim > 1:
        raise ChannelCountError(f"{path}: expected mono, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(f"{path}: unsupported sample encoding {data.dtype}")
    return AudioSignal(samples, int(sample_rate))


def save_wav(signal: AudioSignal, path, encoding: str = "float32") -> None:
    """Write a signal as mono WAV.

    ``float32`` round-trips bit-exactly through :func:`load_wav`; ``pcm16``
    round-trips within one quantization step (1/32768) per sample.
    """
    if encoding == "float32":
        scipy.io.wavfile.write(path, signal.sample_rate, signal.samples.astype(np.float32))
    elif encoding == "pcm16":
        scaled = np.round(signal.samples * PCM16_SCALE)
        clipped = np.clip(scaled, -PCM16_SCALE, PCM16_SCALE - 1).astype(np.int16)
        scipy.io.wavfile.write(path, signal.sample_rate, clipped)
    else:
        raise ParameterError(f"unknown encoding {encoding!r}; use 'float32' or 'pcm16'")


def segment(signal: AudioSignal, window_ms: float) -> list[np.ndarray]:
    """Cut a signal into consecutive non-overlapping frames of ``window_ms``.

    All frames are full length except a possibly shorter final frame;
    concatenating the frames reproduces the input exactly. A window longer
    than the signal yields a single frame.
    """
    if window_ms <= 0:
        raise ParameterError(f"window_ms must be > 0, got {window_ms}")
    n = len(signal.samples)
    win = ms_to_samples(window_ms, signal.sample_rate)
    if n == 0:
        return [signal.samples.copy()]
    return [signal.samples[start:start + win].copy() for start in range(0, n, win)]


def _fade_ramp(n: int) -> np.ndarray:
    # Raised cosine rising from near 0 to near 1 over n samples; every
    # sample is strictly attenuated (no endpoint equal to 1).
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(np.pi * (k + 0.5) / n))


def join_with_fades(frames: list[np.ndarray], fade_ms: float, sample_rate: int) -> AudioSignal:
    """Concatenate frames, applying in-place raised-cosine ramps at each
    frame's head and tail (not crossfades, so total length is preserved).

    ``fade_ms = 0`` is an exact concatenation.
    """
    if not frames:
        raise ParameterError("frames must be non-empty")
    if fade_ms < 0:
        raise ParameterError(f"fade_ms must be >= 0, got {fade_ms}")
    fade_n = int(round(fade_ms * sample_rate / 1000.0))
    if fade_n == 0:
        return AudioSignal(np.concatenate(frames), sample_rate)
    out = []
    for frame in frames:
        frame = np.asarray(frame, dtype=np.float64).copy()
        n = min(fade_n, len(frame) // 2)
        if n > 0:
            ramp = _fade_ramp(n)
            frame[:n] *= ramp
            frame[-n:] *= ramp[::-1]
        out.append(frame)
    return AudioSignal(np.concatenate(out), sample_rate)
