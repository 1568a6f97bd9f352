import shlex
import sys

import pytest

from perturbbench import synthcorpus


@pytest.fixture(scope="session")
def speech():
    """One ~3 s synthesized utterance."""
    signal, _ = synthcorpus.synth_utterance(2)
    return signal


@pytest.fixture(scope="session")
def short_speech():
    signal, _ = synthcorpus.synth_utterance(3, n_words=(3, 4))
    return signal


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Small on-disk corpus: (manifest path, entries)."""
    from perturbbench import harness

    out = tmp_path_factory.mktemp("corpus")
    manifest = synthcorpus.build_corpus(out, n_utterances=3, seed=40)
    return manifest, harness.load_manifest(manifest)


def bridge_cmd(mode: str, manifest=None, **flags) -> str:
    parts = [shlex.quote(sys.executable), "-m", "perturbbench.bridges", mode]
    if manifest is not None:
        parts += ["--manifest", shlex.quote(str(manifest))]
    for key, value in flags.items():
        parts += [f"--{key}", str(value)]
    return " ".join(parts)
