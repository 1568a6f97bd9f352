"""Acceptance suite: one test per criterion, each printing a PASS line at
its stated tolerance (run with ``pytest tests/test_acceptance.py -v -s``).

The pretrained-model criteria need assets this environment cannot fetch
(checkpoint hub and a recorded-speech corpus); that test is gated on
PERTURBBENCH_SECONDARY_MANIFEST and skips with instructions otherwise.
"""

import os
import random
import shlex
import sys
import time

import numpy as np
import pytest

from perturbbench import synthcorpus
from perturbbench.cochlear import ENVELOPE_GUARD, chimerize, envelope_tfs, erb_filterbank
from perturbbench.harness import (
    ExperimentGrid,
    GridPoint,
    build_grid,
    load_manifest,
    run_experiment,
)
from perturbbench.perturb import PerturbationSpec, interrupt, repackage, reverse_local, shuffle_local
from perturbbench.scoring import align
from perturbbench.signal_core import ms_to_samples
from perturbbench.spectral import StftConfig, time_warp
from perturbbench.stats import gini, gini_pairwise, windowed_gini

from .conftest import bridge_cmd
from .oracles import exhaustive_align


def report(name: str):
    print(f"\nACCEPTANCE {name}: PASS")


@pytest.fixture(scope="module")
def utterances():
    return [synthcorpus.synth_utterance(200 + k)[0] for k in range(5)]


@pytest.fixture(scope="module")
def short_utterances():
    return [synthcorpus.synth_utterance(300 + k, n_words=(3, 4))[0] for k in range(5)]


@pytest.fixture(scope="module")
def corpus20(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance-corpus")
    return synthcorpus.build_corpus(out, n_utterances=20, seed=500)


def frames_as_matrix(x: np.ndarray, win: int):
    """(full frames stacked as rows, tail frame) for vectorized checks."""
    n_full = len(x) // win
    full = x[: n_full * win].reshape(n_full, win)
    return full, x[n_full * win :]


def test_identity_pipeline(corpus20, tmp_path):
    started = time.monotonic()
    results = run_experiment(
        corpus20, build_grid("none"), bridge_cmd("oracle", corpus20), tmp_path / "out",
    )
    lines = results.read_text().splitlines()
    assert len(lines) == 21  # header + 20 utterances
    wers = [float(line.split(",")[2]) for line in lines[1:]]
    assert len(wers) == 20
    mean_wer = sum(wers) / len(wers)
    assert mean_wer == 0.0
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"identity pipeline took {elapsed:.1f}s"
    report(f"identity pipeline (mean WER = {mean_wer}, {elapsed:.1f}s)")


def test_wer_oracle_equivalence():
    rng = random.Random(1234)
    for _ in range(1000):
        alphabet = "abcde"[: rng.randint(1, 5)]
        ref = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
        hyp = [rng.choice(alphabet) for _ in range(rng.randint(0, 8))]
        got = align(ref, hyp)
        want = exhaustive_align(ref, hyp)
        assert got == want, f"mismatch on ref={ref} hyp={hyp}: {got} != {want}"
    report("WER oracle equivalence (1000 random pairs, exact)")


def test_gini_criteria():
    rng = np.random.default_rng(99)
    sizes = list(rng.integers(1, 10_001, size=98)) + [10_000, 10_000]
    for n in sizes:
        x = rng.random(int(n)) * rng.uniform(0.5, 50.0)
        assert abs(gini(x) - gini_pairwise(x)) < 1e-12
    # closed forms, exact
    assert gini(np.full(100, 7.3)) == 0.0
    for n in (2, 4, 100):
        one_hot = np.zeros(n)
        one_hot[n // 2] = 1.0
        assert gini(one_hot) == (n - 1) / n
    # permutation invariance, exact
    x = rng.random(777)
    for _ in range(5):
        assert gini(rng.permutation(x)) == gini(x)
    # scale invariance: exact under lossless (power-of-two) scaling, which is
    # the strongest statement floating point admits; to 1e-14 otherwise
    g = gini(x)
    for k in (-8, -1, 3, 12):
        assert gini(x * 2.0**k) == g
    for a in (3.0, 0.017, 9999.5):
        assert abs(gini(a * x) - g) < 1e-14
    report("Gini (sorted == Eq-2 double loop @1e-12, closed forms/invariances exact)")


def test_reversal_properties(utterances):
    grid = build_grid("reverse")
    assert len(grid.values) == 58
    for signal in utterances:
        x = signal.samples
        for window_ms in grid.values:
            once = reverse_local(signal, window_ms, fade_ms=0)
            twice = reverse_local(once, window_ms, fade_ms=0)
            assert np.array_equal(twice.samples, x)
            win = ms_to_samples(window_ms, signal.sample_rate)
            full_in, tail_in = frames_as_matrix(x, win)
            full_out, tail_out = frames_as_matrix(once.samples, win)
            if full_in.size:
                mag_in = np.abs(np.fft.rfft(full_in, axis=1))
                mag_out = np.abs(np.fft.rfft(full_out, axis=1))
                norms = np.linalg.norm(mag_in, axis=1)
                errs = np.linalg.norm(mag_out - mag_in, axis=1)
                ok = norms > 0
                assert np.all(errs[ok] / norms[ok] <= 1e-6)
            if tail_in.size:
                mag_in = np.abs(np.fft.rfft(tail_in))
                mag_out = np.abs(np.fft.rfft(tail_out))
                norm = np.linalg.norm(mag_in)
                if norm > 0:
                    assert np.linalg.norm(mag_out - mag_in) / norm <= 1e-6
    report("reversal properties (58 timescales x 5 utterances)")


def test_shuffle_properties(utterances):
    grid = build_grid("shuffle")
    assert len(grid.values) == 58
    for u, signal in enumerate(utterances):
        for window_ms in grid.values:
            out = shuffle_local(signal, window_ms, seed=u, fade_ms=0)
            win = ms_to_samples(window_ms, signal.sample_rate)
            full_in, tail_in = frames_as_matrix(signal.samples, win)
            full_out, tail_out = frames_as_matrix(out.samples, win)
            assert np.array_equal(np.sort(full_in, axis=1), np.sort(full_out, axis=1))
            assert np.array_equal(np.sort(tail_in), np.sort(tail_out))
            again = shuffle_local(signal, window_ms, seed=u, fade_ms=0)
            assert np.array_equal(out.samples, again.samples)
    report("shuffle properties (58 timescales x 5 utterances)")


def test_warp_duration_law(short_utterances):
    grid = build_grid("warp")
    assert len(grid.values) == 40
    # duration is fixed by the recorded-length inversion, independent of the
    # phase-refinement iteration count; a reduced count keeps this sweep fast
    for signal in short_utterances:
        cfg = StftConfig.for_rate(signal.sample_rate)
        for factor in grid.values:
            out = time_warp(signal, factor, iterations=6)
            assert abs(len(out) - len(signal) / factor) <= 2 * cfg.hop_samples
        assert time_warp(signal, 1.0) is signal
    report("warp duration law (40 factors x 5 utterances, +-2 hops; factor 1 bit-exact)")


def test_repackage_duration_compensation(utterances):
    for signal in utterances:
        out = repackage(signal, window_ms=250.0, compression=2.0, silence_ms=125.0, iterations=8)
        drift = abs(len(out) - len(signal)) / len(signal)
        assert drift <= 0.01, f"duration drift {drift:.4f}"
    report("repackage duration compensation (compression 2, 250 ms, 125 ms silence, <=1%)")


def test_filterbank_chimera_fidelity(utterances):
    signal = utterances[0]
    for n_bands in (1, 8, 30):
        coch = erb_filterbank(signal, n_bands)
        corr = np.corrcoef(coch.sum_signal().samples, signal.samples)[0, 1]
        assert corr >= 0.9, f"n_bands={n_bands}: corr {corr:.3f}"
    identity = chimerize(signal, signal, 30)
    corr = np.corrcoef(identity.samples, signal.samples)[0, 1]
    assert corr >= 0.9
    coch = erb_filterbank(signal, 30)
    for band in range(0, 30, 7):
        pair = envelope_tfs(coch.subbands[band])
        mask = pair.envelope > ENVELOPE_GUARD * pair.envelope.max()
        assert np.allclose(pair.product()[mask], coch.subbands[band][mask], atol=1e-12)
    report("filterbank/chimera fidelity (reconstruction, identity chimera, env*tfs)")


def test_sparsity_directional_effects():
    started = time.monotonic()
    n = 50
    raised, lowered = 0, 0
    for k in range(n):
        signal, _ = synthcorpus.synth_utterance(700 + k)
        g_time_natural = windowed_gini(signal, 220, "time")
        g_freq_natural = windowed_gini(signal, 220, "freq")
        silenced = interrupt(signal, 300.0, 0.5, mode="silence")
        masked = interrupt(signal, 300.0, 0.5, mode="mask", snr_db=-9.0, seed=k)
        raised += windowed_gini(silenced, 220, "time") > g_time_natural
        lowered += windowed_gini(masked, 220, "freq") < g_freq_natural
    elapsed = time.monotonic() - started
    assert raised >= 0.95 * n, f"g_time rose for only {raised}/{n}"
    assert lowered >= 0.95 * n, f"g_freq fell for only {lowered}/{n}"
    assert elapsed < 600.0, f"directional effects took {elapsed:.0f}s"
    report(
        f"sparsity directional effects (g_time up {raised}/{n}, g_freq down {lowered}/{n}, {elapsed:.0f}s)"
    )


def test_run_determinism_across_worker_counts(corpus20, tmp_path):
    entries = load_manifest(corpus20)[:4]
    values = (30.0, 300.0, 1500.0)
    grid = ExperimentGrid("interrupt", "window_ms", [
        GridPoint(v, PerturbationSpec.create("interrupt", window_ms=v)) for v in values
    ])
    cmd = bridge_cmd("noisy-oracle", corpus20, p=0.3)
    a = run_experiment(entries, grid, cmd, tmp_path / "w1", corpus_seed=11, workers=1)
    b = run_experiment(entries, grid, cmd, tmp_path / "w4", corpus_seed=11, workers=4)
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "w1" / "summary.csv").read_bytes() == (tmp_path / "w4" / "summary.csv").read_bytes()
    report("pipeline determinism (workers 1 vs 4, byte-identical CSVs)")


SECONDARY_ENV = "PERTURBBENCH_SECONDARY_MANIFEST"
SECONDARY_MODEL_ENV = "PERTURBBENCH_SECONDARY_MODEL"


@pytest.mark.skipif(
    SECONDARY_ENV not in os.environ,
    reason=(
        "needs a pretrained waveform-transformer checkpoint and >=100 recorded "
        f"utterances; set {SECONDARY_ENV} to a manifest of clean test speech "
        f"(and optionally {SECONDARY_MODEL_ENV}) on a machine with the model available"
    ),
)
def test_secondary_pretrained_model_curves(tmp_path):
    import scipy.stats

    manifest_path = os.environ[SECONDARY_ENV]
    model = os.environ.get(SECONDARY_MODEL_ENV, "facebook/wav2vec2-base-960h")
    entries = load_manifest(manifest_path)
    assert len(entries) >= 100, "secondary criterion requires >=100 utterances"
    cmd = f"{shlex.quote(sys.executable)} -m asr_bridge --model {shlex.quote(model)}"

    def mean_wer_of(results_path, spec_text):
        rows = [line.split(",") for line in results_path.read_text().splitlines()[1:]]
        wers = [float(r[2]) for r in rows if r[1] == spec_text]
        return sum(wers) / len(wers)

    # (a) unperturbed
    none_grid = build_grid("none")
    res = run_experiment(entries, none_grid, cmd, tmp_path / "clean", workers=2)
    clean = mean_wer_of(res, "none")
    assert clean <= 0.25, f"unperturbed mean WER {clean:.3f}"

    # (b) reversal at 20 ms and 300 ms
    grid = ExperimentGrid("reverse", "window_ms", [
        GridPoint(v, PerturbationSpec.create("reverse", window_ms=v)) for v in (20.0, 300.0)
    ])
    res = run_experiment(entries, grid, cmd, tmp_path / "reverse", workers=2)
    at20 = mean_wer_of(res, grid.points[0].spec.canonical())
    at300 = mean_wer_of(res, grid.points[1].spec.canonical())
    assert abs(at20 - clean) <= 0.1
    assert at300 >= 0.8

    # (c) repackaging: no U-shaped recovery
    rep = build_grid("repackage")
    res = run_experiment(entries, rep, cmd, tmp_path / "repackage", workers=2)
    silences, wers = [], []
    for point in rep.points:
        silences.append(point.spec.params["silence_ms"])
        wers.append(mean_wer_of(res, point.spec.canonical()))
    order = np.argsort(silences)
    by_silence = np.array(wers)[order]
    assert np.all(np.diff(by_silence) >= -1e-9), "WER recovered with silence insertion"
    rho = scipy.stats.spearmanr(np.array(silences)[order], by_silence).statistic
    assert rho >= 0.8
    report("secondary pretrained-model curves")
