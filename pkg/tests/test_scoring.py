import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perturbbench.errors import EmptyReferenceError
from perturbbench.scoring import WerCounts, aggregate, align, normalize_text, wer

from .oracles import exhaustive_align, levenshtein_quadratic

tokens = st.lists(st.sampled_from("abcde"), min_size=0, max_size=8)


class TestNormalize:
    def test_basic(self):
        assert normalize_text("Hello, world!") == ["HELLO", "WORLD"]

    def test_empty(self):
        assert normalize_text("") == []

    def test_apostrophe_kept_whitespace_collapsed(self):
        assert normalize_text("don't  stop") == ["DON'T", "STOP"]

    def test_digits_and_punctuation_dropped(self):
        assert normalize_text("route 66 is well-known...") == ["ROUTE", "IS", "WELLKNOWN"]

    def test_newlines_separate_words(self):
        assert normalize_text("one\ntwo\tthree") == ["ONE", "TWO", "THREE"]


class TestAlign:
    def test_identity(self):
        assert align(["a", "b", "c"], ["a", "b", "c"]) == WerCounts(0, 0, 0, 3)

    def test_spec_example(self):
        # frozen from the exhaustive-alignment oracle
        assert exhaustive_align(["a", "b", "c"], ["a", "x", "c", "d"]) == WerCounts(1, 0, 1, 2)
        assert align(["a", "b", "c"], ["a", "x", "c", "d"]) == WerCounts(1, 0, 1, 2)

    def test_empty_hypothesis(self):
        assert align(["a", "b"], []) == WerCounts(0, 2, 0, 0)

    def test_empty_reference(self):
        assert align([], ["a", "b"]) == WerCounts(0, 0, 2, 0)

    def test_matches_exhaustive_oracle(self):
        rng = random.Random(7)
        for _ in range(150):
            alphabet = "abcde"[: rng.randint(1, 5)]
            ref = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
            hyp = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
            assert align(ref, hyp) == exhaustive_align(ref, hyp)

    @given(ref=tokens, hyp=tokens)
    @settings(max_examples=150, deadline=None)
    def test_token_balance_and_cost(self, ref, hyp):
        counts = align(ref, hyp)
        assert counts.s + counts.d + counts.c == len(ref)
        assert counts.s + counts.i + counts.c == len(hyp)
        assert counts.s + counts.d + counts.i == levenshtein_quadratic(ref, hyp)

    def test_relabeling_invariance(self):
        ref = ["a", "b", "a", "c"]
        hyp = ["b", "b", "c"]
        mapping = {"a": "x", "b": "y", "c": "z"}
        counts = align(ref, hyp)
        relabeled = align([mapping[t] for t in ref], [mapping[t] for t in hyp])
        assert counts == relabeled


class TestWer:
    def test_identity_zero(self):
        assert wer(WerCounts(0, 0, 0, 5)) == 0.0

    def test_spec_example_two_thirds(self):
        assert wer(WerCounts(1, 0, 1, 2)) == pytest.approx(2 / 3)

    def test_can_exceed_one(self):
        counts = align(["a"], ["x", "y", "z"])
        assert counts == WerCounts(1, 0, 2, 0)
        assert wer(counts) == 3.0

    def test_empty_reference_rejected(self):
        with pytest.raises(EmptyReferenceError):
            wer(WerCounts(0, 0, 3, 0))

    def test_zero_iff_equal_tokens(self):
        ref = normalize_text("The cat sat")
        assert wer(align(ref, normalize_text("the CAT sat!"))) == 0.0
        assert wer(align(ref, normalize_text("the cat"))) > 0.0


class TestAggregate:
    def test_all_identity(self):
        assert aggregate([WerCounts(0, 0, 0, 3)] * 4) == (0.0, 0.0)

    def test_equal_lengths_mean_equals_pooled(self):
        per = [WerCounts(0, 0, 0, 4), WerCounts(4, 0, 0, 0)]
        mean_wer, pooled = aggregate(per)
        assert mean_wer == 0.5 and pooled == 0.5

    def test_unequal_lengths_diverge(self):
        # WER 0 with 1 reference token, WER 1 with 9 reference tokens
        per = [WerCounts(0, 0, 0, 1), WerCounts(9, 0, 0, 0)]
        mean_wer, pooled = aggregate(per)
        assert mean_wer == 0.5 and pooled == 0.9

    def test_empty_rejected(self):
        with pytest.raises(EmptyReferenceError):
            aggregate([])
