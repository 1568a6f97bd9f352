"""Sparsity characterization of natural and perturbed signals.

The Gini coefficient of an encoding of the signal (absolute sample values
in time, FFT magnitudes in frequency) serves as the sparsity measure. A
signal is summarized by a windowed Gini: the mean of per-slice coefficients
at a given timescale, yielding one time-sparsity and one frequency-sparsity
value per utterance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .perturb import PerturbationSpec
from .signal_core import AudioSignal, segment

DEFAULT_SPARSITY_WINDOW_MS = 220.0


@dataclass(frozen=True)
class SparsityPoint:
    """One utterance's location in (time, frequency) sparsity space."""

    g_time: float
    g_freq: float
    window_ms: float
    utterance_id: str
    spec: PerturbationSpec


def gini(x: np.ndarray) -> float:
    """Gini coefficient of a non-negative vector.

    Equals sum_ij |x_i - x_j| / (2 n^2 mean(x)), computed via the sorted
    O(n log n) formulation. Scale- and permutation-invariant; 0 for a
    constant vector, (n-1)/n for a one-hot vector. Returns 0.0 by
    convention when the mean is zero.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("gini expects a non-empty 1-D vector")
    if np.any(x < 0):
        raise ParameterError("gini expects non-negative entries; pass magnitudes")
    n = x.size
    xs = np.sort(x)  # all arithmetic runs on the sorted array so the result
    # is exactly permutation-invariant
    total = float(xs.sum())
    if total <= 0:
        return 0.0
    if xs[0] == xs[-1]:
        return 0.0
    # sum_ij |x_i - x_j| = 2 * sum_i (2i - n - 1) x_(i) with 1-based ranks.
    ranks = np.arange(1, n + 1, dtype=np.float64)
    return max(0.0, float(np.dot(2.0 * ranks - n - 1.0, xs) / (n * total)))


def gini_pairwise(x: np.ndarray) -> float:
    """Direct double-loop evaluation of the Gini definition (O(n^2)).

    Reference oracle for :func:`gini`; kept independent of the sorted path.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    mean = x.mean()
    if mean <= 0:
        return 0.0
    acc = 0.0
    for i in range(n):
        acc += float(np.abs(x[i] - x).sum())
    return acc / (2.0 * n * n * mean)


def _slice_encoding(sl: np.ndarray, domain: str) -> np.ndarray:
    if domain == "time":
        return np.abs(sl)
    if domain == "freq":
        return np.abs(np.fft.rfft(sl))
    raise ParameterError(f"unknown domain {domain!r}; use 'time' or 'freq'")


def windowed_gini(signal: AudioSignal, window_ms: float, domain: str, reducer: str = "mean") -> float:
    """Mean per-slice Gini at a given timescale.

    Slices the signal at ``window_ms`` (final partial slice included), takes
    the Gini of each slice's encoding (|samples| for ``time``, FFT magnitude
    for ``freq``), and reduces across the slices on which the coefficient is
    defined. All-zero slices (e.g. silenced windows) carry no distribution
    to measure and are left out rather than entering as the degenerate 0.
    """
    if reducer != "mean":
        raise ParameterError(f"unsupported reducer {reducer!r}; only 'mean' is implemented")
    values = []
    for sl in segment(signal, window_ms):
        encoding = _slice_encoding(sl, domain) if sl.size else sl
        if encoding.size and encoding.sum() > 0:
            values.append(gini(encoding))
    if not values:
        return 0.0
    return float(np.mean(values))


def sparsity_point(
    signal: AudioSignal,
    utterance_id: str,
    spec: PerturbationSpec,
    window_ms: float = DEFAULT_SPARSITY_WINDOW_MS,
) -> SparsityPoint:
    """Time and frequency sparsity of one utterance at one timescale."""
    return SparsityPoint(
        g_time=windowed_gini(signal, window_ms, "time"),
        g_freq=windowed_gini(signal, window_ms, "freq"),
        window_ms=window_ms,
        utterance_id=utterance_id,
        spec=spec,
    )
