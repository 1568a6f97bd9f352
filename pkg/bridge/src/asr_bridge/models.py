"""Model adapters: WAV decoding, resampling, and transcription callables.

``load_model`` returns a ``transcriber(wav_path) -> text`` plus the model
name reported in the handshake. The real backend wraps a pretrained
wav2vec2-style CTC checkpoint (greedy decoding by default, optional prefix
beam search); the ``dummy`` backend is a dependency-free deterministic
recognizer for protocol tests and plumbing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.io.wavfile
import scipy.signal


@dataclass(frozen=True)
class BridgeConfig:
    model_id: str = "facebook/wav2vec2-base-960h"
    device: str = "cpu"
    sample_rate_expected: int = 16000
    beam_size: int = 1


_INT_SCALES = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def load_audio(path: str, target_rate: int | None) -> np.ndarray:
    """Mono float32 samples at the model's expected rate."""
    rate, data = scipy.io.wavfile.read(path)
    if data.ndim > 1:
        data = data.mean(axis=1)
    if data.dtype in _INT_SCALES:
        samples = data.astype(np.float32) / _INT_SCALES[data.dtype]
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float32) - 128.0) / 128.0
    else:
        samples = data.astype(np.float32)
    if target_rate and rate != target_rate:
        ratio = Fraction(target_rate, int(rate)).limit_denominator(10_000)
        samples = scipy.signal.resample_poly(samples, ratio.numerator, ratio.denominator)
        samples = samples.astype(np.float32)
    return samples


_DUMMY_WORDS = ("ALPHA", "BRAVO", "CHARLIE", "DELTA", "ECHO", "FOXTROT", "GOLF", "HOTEL")


def _dummy_transcriber(config: BridgeConfig):
    chunk_s = 0.4

    def transcribe(path: str) -> str:
        samples = load_audio(path, None)
        rate = config.sample_rate_expected
        step = max(1, int(chunk_s * rate))
        words = []
        for start in range(0, len(samples), step):
            chunk = samples[start:start + step]
            rms = float(np.sqrt(np.mean(chunk.astype(np.float64) ** 2)))
            if rms > 1e-4:
                words.append(_DUMMY_WORDS[int(rms * 1e6) % len(_DUMMY_WORDS)])
        return " ".join(words)

    return transcribe, "dummy"


def ctc_prefix_beam_search(log_probs: np.ndarray, blank_id: int, beam_size: int,
                           candidates_per_step: int = 25) -> tuple[int, ...]:
    """Vanilla CTC prefix beam search (no language model) over a (T, V)
    log-probability matrix; returns the best label prefix."""
    neg_inf = -math.inf

    def logadd(a: float, b: float) -> float:
        if a == neg_inf:
            return b
        if b == neg_inf:
            return a
        hi, lo = (a, b) if a > b else (b, a)
        return hi + math.log1p(math.exp(lo - hi))

    # prefix -> (logp ending in blank, logp ending in its last label)
    beams: dict[tuple[int, ...], tuple[float, float]] = {(): (0.0, neg_inf)}
    for t in range(log_probs.shape[0]):
        frame = log_probs[t]
        tokens = np.argsort(frame)[::-1][:candidates_per_step]
        next_beams: dict[tuple[int, ...], tuple[float, float]] = {}

        def bump(prefix, blank_part, label_part):
            old_b, old_nb = next_beams.get(prefix, (neg_inf, neg_inf))
            next_beams[prefix] = (logadd(old_b, blank_part), logadd(old_nb, label_part))

        for prefix, (p_b, p_nb) in beams.items():
            total = logadd(p_b, p_nb)
            for token in tokens:
                lp = float(frame[token])
                if token == blank_id:
                    bump(prefix, total + lp, neg_inf)
                elif prefix and token == prefix[-1]:
                    # repeated label: extends only the blank-ending mass
                    bump(prefix, neg_inf, p_nb + lp)
                    bump(prefix + (int(token),), neg_inf, p_b + lp)
                else:
                    bump(prefix + (int(token),), neg_inf, total + lp)
        ranked = sorted(next_beams.items(), key=lambda kv: logadd(*kv[1]), reverse=True)
        beams = dict(ranked[:beam_size])
    return max(beams.items(), key=lambda kv: logadd(*kv[1]))[0]


def _wav2vec2_transcriber(config: BridgeConfig):
    import torch
    from transformers import Wav2Vec2ForCTC, Wav2Vec2Processor

    processor = Wav2Vec2Processor.from_pretrained(config.model_id)
    model = Wav2Vec2ForCTC.from_pretrained(config.model_id).to(config.device)
    model.eval()
    blank_id = model.config.pad_token_id

    def transcribe(path: str) -> str:
        samples = load_audio(path, config.sample_rate_expected)
        if len(samples) < 400:  # below the conv front end's receptive field
            return ""
        inputs = processor(
            samples, sampling_rate=config.sample_rate_expected, return_tensors="pt"
        )
        with torch.no_grad():
            logits = model(inputs.input_values.to(config.device)).logits[0]
        if config.beam_size <= 1:
            ids = torch.argmax(logits, dim=-1)
            return processor.decode(ids)
        log_probs = torch.log_softmax(logits, dim=-1).cpu().numpy()
        prefix = ctc_prefix_beam_search(log_probs, blank_id, config.beam_size)
        tokens = processor.tokenizer.convert_ids_to_tokens(list(prefix))
        text = "".join(tokens).replace(processor.tokenizer.word_delimiter_token, " ")
        return " ".join(text.split())

    return transcribe, config.model_id


def load_model(config: BridgeConfig):
    """Load once; raises on failure (callers exit nonzero before handshake)."""
    if config.model_id == "dummy":
        return _dummy_transcriber(config)
    return _wav2vec2_transcriber(config)
