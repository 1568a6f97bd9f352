"""Transcript normalization, edit alignment, and word-error-rate computation.

WER = (S + D + I) / (S + D + C) over a minimum-edit-cost alignment with
unit costs. The denominator is the reference length, so WER can exceed 1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EmptyReferenceError

_DISALLOWED = re.compile(r"[^A-Z' ]+")

# Backtrace preference when several moves lie on a minimum-cost path.
# Fixing this makes the counts (not just the distance) deterministic.
_CORRECT, _SUB, _DEL, _INS = range(4)


@dataclass(frozen=True)
class WerCounts:
    """Substitution/deletion/insertion/correct tallies from one alignment."""

    s: int
    d: int
    i: int
    c: int

    @property
    def ref_len(self) -> int:
        return self.s + self.d + self.c

    @property
    def hyp_len(self) -> int:
        return self.s + self.i + self.c

    def __add__(self, other: "WerCounts") -> "WerCounts":
        return WerCounts(self.s + other.s, self.d + other.d, self.i + other.i, self.c + other.c)


def normalize_text(text: str) -> list[str]:
    """Uppercase, keep only [A-Z' ] (whitespace becomes space), split on spaces."""
    text = re.sub(r"\s+", " ", text.upper())
    text = _DISALLOWED.sub("", text)
    return text.split()


def align(ref: list[str], hyp: list[str]) -> WerCounts:
    """Counts from a minimum-edit-cost alignment of two token lists.

    Ties during backtrace are broken preferring correct > substitution >
    deletion > insertion, so counts are deterministic across
    implementations.
    """
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        ri = ref[i - 1]
        for j in range(1, m + 1):
            diag = cost[i - 1, j - 1] + (0 if ri == hyp[j - 1] else 1)
            cost[i, j] = min(diag, cost[i - 1, j] + 1, cost[i, j - 1] + 1)

    s = d = ins = c = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and cost[i, j] == cost[i - 1, j - 1]:
            c += 1
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and ref[i - 1] != hyp[j - 1] and cost[i, j] == cost[i - 1, j - 1] + 1:
            s += 1
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            d += 1
            i = i - 1
        else:
            ins += 1
            j = j - 1
    return WerCounts(s=s, d=d, i=ins, c=c)


def wer(counts: WerCounts) -> float:
    """Word error rate from alignment counts; undefined for an empty reference."""
    ref_len = counts.ref_len
    if ref_len == 0:
        raise EmptyReferenceError("WER is undefined: reference has no tokens")
    return (counts.s + counts.d + counts.i) / ref_len


def aggregate(per_utterance: list[WerCounts]) -> tuple[float, float]:
    """(mean per-utterance WER, pooled WER over summed counts).

    The mean is the plotted quantity; the pooled value weighs utterances by
    reference length and is reported alongside.
    """
    if not per_utterance:
        raise EmptyReferenceError("aggregate expects at least one utterance")
    mean_wer = float(np.mean([wer(counts) for counts in per_utterance]))
    total = WerCounts(0, 0, 0, 0)
    for counts in per_utterance:
        total = total + counts
    return mean_wer, wer(total)
