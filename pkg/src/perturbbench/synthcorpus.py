"""Deterministic formant-synthesized utterances with known transcripts.

A stand-in corpus for harness runs and tests when no recorded speech is
available: glottal-pulse excitation through cascaded formant resonators,
fricative and stop consonants from shaped noise, syllabic amplitude
contours, word gaps, and f0 declination. Each utterance's transcript is
the letter sequence of its synthesized syllables, so oracle bridges can
score against it.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.signal

from .signal_core import AudioSignal, save_wav

SAMPLE_RATE = 16000

VOWELS = {
    "A": (730, 1090, 2440),
    "E": (530, 1840, 2480),
    "I": (390, 1990, 2550),
    "O": (570, 840, 2410),
    "U": (440, 1020, 2240),
}

FRICATIVES = {"S": (4500, 7400), "F": (2200, 6000), "H": (900, 3800)}
STOPS = {"T": (3000, 6500), "K": (1400, 3800), "P": (700, 2400)}
NASALS = {"N": (270, 1200, 2400), "M": (250, 990, 2200), "L": (360, 1300, 2700)}


def _resonator(x: np.ndarray, freq: float, bw: float, sr: int) -> np.ndarray:
    r = np.exp(-np.pi * bw / sr)
    theta = 2.0 * np.pi * freq / sr
    a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
    b = np.array([1.0 - r])
    return scipy.signal.lfilter(b, a, x)


def _glottal_source(f0: np.ndarray, sr: int, rng: np.random.Generator) -> np.ndarray:
    # Impulse train by phase accumulation, smoothed to a -12 dB/oct source.
    phase = np.cumsum(f0 / sr)
    pulses = np.zeros_like(phase)
    pulses[np.flatnonzero(np.diff(np.floor(phase)) >= 1) + 1] = 1.0
    pulses *= 1.0 + 0.08 * rng.standard_normal(pulses.size)  # shimmer
    alpha = np.exp(-2.0 * np.pi * 120.0 / sr)
    source = scipy.signal.lfilter([1.0 - alpha], [1.0, -alpha], pulses)
    return scipy.signal.lfilter([1.0 - alpha], [1.0, -alpha], source)


def _voiced(formants, dur_s: float, f0_start: float, f0_end: float,
            sr: int, rng: np.random.Generator) -> np.ndarray:
    n = max(8, int(round(dur_s * sr)))
    f0 = np.linspace(f0_start, f0_end, n) * (1.0 + 0.01 * rng.standard_normal(n)).clip(0.9, 1.1)
    x = _glottal_source(f0, sr, rng)
    for freq, bw in zip(formants, (90.0, 110.0, 170.0)):
        x = _resonator(x, freq, bw, sr)
    x = np.diff(x, prepend=0.0)  # radiation
    env = np.minimum(1.0, np.minimum(np.arange(n) / (0.015 * sr), (n - np.arange(n)) / (0.030 * sr)))
    x *= np.maximum(env, 0.0)
    rms = np.sqrt(np.mean(x * x))
    return x / rms if rms > 0 else x


def _noise_band(lo: float, hi: float, dur_s: float, sr: int, rng: np.random.Generator) -> np.ndarray:
    n = max(16, int(round(dur_s * sr)))
    sos = scipy.signal.butter(2, [lo, min(hi, 0.98 * sr / 2)], btype="bandpass", fs=sr, output="sos")
    x = scipy.signal.sosfilt(sos, rng.standard_normal(n))
    env = np.minimum(1.0, np.minimum(np.arange(n) / (0.008 * sr), (n - np.arange(n)) / (0.012 * sr)))
    x *= np.maximum(env, 0.0)
    rms = np.sqrt(np.mean(x * x))
    return x / rms if rms > 0 else x


def _syllable(rng: np.random.Generator, f0_start: float, f0_end: float, sr: int) -> tuple[np.ndarray, str]:
    pieces = []
    letters = []
    kind = rng.choice(["fricative", "stop", "nasal", "bare"], p=[0.3, 0.3, 0.25, 0.15])
    if kind == "fricative":
        letter = str(rng.choice(list(FRICATIVES)))
        lo, hi = FRICATIVES[letter]
        pieces.append(0.30 * _noise_band(lo, hi, rng.uniform(0.05, 0.10), sr, rng))
        letters.append(letter)
    elif kind == "stop":
        letter = str(rng.choice(list(STOPS)))
        lo, hi = STOPS[letter]
        pieces.append(np.zeros(int(rng.uniform(0.020, 0.045) * sr)))
        pieces.append(0.40 * _noise_band(lo, hi, rng.uniform(0.010, 0.022), sr, rng))
        letters.append(letter)
    elif kind == "nasal":
        letter = str(rng.choice(list(NASALS)))
        pieces.append(0.45 * _voiced(NASALS[letter], rng.uniform(0.045, 0.08), f0_start, f0_start, sr, rng))
        letters.append(letter)
    vowel = str(rng.choice(list(VOWELS)))
    pieces.append(_voiced(VOWELS[vowel], rng.uniform(0.09, 0.20), f0_start, f0_end, sr, rng))
    letters.append(vowel)
    return np.concatenate(pieces), "".join(letters)


def synth_utterance(seed: int, sample_rate: int = SAMPLE_RATE,
                    n_words: tuple[int, int] = (4, 7)) -> tuple[AudioSignal, str]:
    """One deterministic utterance; returns (signal, reference text)."""
    rng = np.random.default_rng([1009, seed])
    sr = sample_rate
    words = []
    chunks = [np.zeros(int(rng.uniform(0.04, 0.09) * sr))]
    f0_base = rng.uniform(105.0, 190.0)
    total_words = int(rng.integers(n_words[0], n_words[1] + 1))
    for w in range(total_words):
        declination = 1.0 - 0.12 * w / max(1, total_words - 1)
        syllables = []
        word_chunks = []
        for _ in range(int(rng.integers(1, 4))):
            accent = rng.uniform(0.95, 1.1)
            f0 = f0_base * declination * accent
            audio, text = _syllable(rng, f0, f0 * rng.uniform(0.88, 0.98), sr)
            word_chunks.append(audio)
            syllables.append(text)
        words.append("".join(syllables))
        chunks.append(np.concatenate(word_chunks) * rng.uniform(0.8, 1.0))
        chunks.append(np.zeros(int(rng.uniform(0.04, 0.15) * sr)))
    chunks.append(np.zeros(int(rng.uniform(0.03, 0.08) * sr)))
    samples = np.concatenate(chunks)
    samples *= 0.5 / np.max(np.abs(samples))
    return AudioSignal(samples, sr), " ".join(words)


def build_corpus(out_dir, n_utterances: int, seed: int = 0,
                 sample_rate: int = SAMPLE_RATE) -> Path:
    """Write WAVs plus a JSON-lines manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.jsonl"
    with open(manifest_path, "w") as fh:
        for k in range(n_utterances):
            signal, text = synth_utterance(seed + k, sample_rate)
            utterance_id = f"synth-{seed + k:05d}"
            wav_path = out_dir / f"{utterance_id}.wav"
            save_wav(signal, wav_path)
            fh.write(json.dumps({"id": utterance_id, "audio": str(wav_path), "text": text}) + "\n")
    return manifest_path
