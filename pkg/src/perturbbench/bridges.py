"""Built-in transcription bridges for plumbing tests and worst-case baselines.

Each mode is a process speaking the harness wire protocol on stdin/stdout:

* ``oracle`` echoes the manifest reference for the requested utterance.
* ``empty`` returns an empty transcript (all deletions, WER 1.0).
* ``noisy-oracle`` drops each reference word with probability ``--p``,
  deterministically per (utterance, spec) so reruns and different worker
  counts agree.

Request ids arriving from the harness look like ``<attempt>#<utterance>::
<spec-hash>``; these bridges key off the part after the first ``#`` so
retries are indistinguishable from first attempts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from .harness import HANDSHAKE_ID, load_manifest


def _stable_part(request_id: str) -> str:
    return request_id.split("#", 1)[1] if "#" in request_id else request_id


def _utterance_of(request_id: str) -> str:
    return _stable_part(request_id).rsplit("::", 1)[0]


def serve(transcriber, model_name: str, stdin=None, stdout=None) -> None:
    """Answer protocol requests until stdin closes; never exits on a
    per-request failure."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def reply(obj: dict):
        stdout.write(json.dumps(obj) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            request_id = request["id"]
        except (json.JSONDecodeError, TypeError, KeyError):
            reply({"id": "", "error": f"malformed request line: {line[:200]}"})
            continue
        if request_id == HANDSHAKE_ID:
            reply({"id": request_id, "text": model_name})
            continue
        try:
            reply({"id": request_id, "text": transcriber(request_id, request.get("wav"))})
        except Exception as exc:  # per-request failures must not kill the loop
            reply({"id": request_id, "error": str(exc)})


def _reference_map(manifest_path: str) -> dict[str, str]:
    return {entry.utterance_id: entry.reference for entry in load_manifest(manifest_path)}


def make_oracle(manifest_path: str):
    references = _reference_map(manifest_path)

    def transcribe(request_id: str, wav: str | None) -> str:
        utterance = _utterance_of(request_id)
        if utterance not in references:
            raise KeyError(f"utterance {utterance!r} not in manifest")
        return references[utterance]

    return transcribe


def make_noisy_oracle(manifest_path: str, p: float, seed: int):
    references = _reference_map(manifest_path)

    def transcribe(request_id: str, wav: str | None) -> str:
        utterance = _utterance_of(request_id)
        if utterance not in references:
            raise KeyError(f"utterance {utterance!r} not in manifest")
        digest = hashlib.sha256(f"{_stable_part(request_id)}\x1f{seed}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        words = references[utterance].split()
        kept = [w for w in words if rng.random() >= p]
        return " ".join(kept)

    return transcribe


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="built-in perturbbench test bridges")
    parser.add_argument("mode", choices=["oracle", "empty", "noisy-oracle"])
    parser.add_argument("--manifest", help="corpus manifest (oracle modes)")
    parser.add_argument("--p", type=float, default=0.2, help="word drop probability (noisy-oracle)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if args.mode == "empty":
        serve(lambda request_id, wav: "", "empty")
        return 0
    if not args.manifest:
        parser.error(f"--manifest is required for mode {args.mode}")
    if args.mode == "oracle":
        serve(make_oracle(args.manifest), "oracle")
    else:
        serve(make_noisy_oracle(args.manifest, args.p, args.seed), f"noisy-oracle(p={args.p})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
