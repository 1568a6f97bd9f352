"""Process entry point: load the model, then serve the stdio protocol."""

from __future__ import annotations

import argparse
import sys

from .models import BridgeConfig, load_model
from .protocol import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="asr-bridge")
    parser.add_argument("--model", default="facebook/wav2vec2-base-960h",
                        help="pretrained checkpoint id, or 'dummy' for the test recognizer")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--beam-size", type=int, default=1,
                        help="1 = greedy CTC decoding (default, deterministic)")
    parser.add_argument("--expected-rate", type=int, default=16000,
                        help="sample rate the model consumes; inputs are resampled to it")
    args = parser.parse_args(argv)

    config = BridgeConfig(
        model_id=args.model, device=args.device,
        sample_rate_expected=args.expected_rate, beam_size=args.beam_size,
    )
    try:
        transcriber, model_name = load_model(config)
    except Exception as exc:
        # No handshake has been answered yet; a nonzero exit tells the
        # harness the endpoint is unusable.
        print(f"asr-bridge: failed to load model {config.model_id!r}: {exc}", file=sys.stderr)
        return 2
    print(f"asr-bridge: serving {model_name}", file=sys.stderr)
    serve(transcriber, model_name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
