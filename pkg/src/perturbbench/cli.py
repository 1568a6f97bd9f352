"""Command-line entry point.

Subcommands: ``perturb`` (transform one WAV), ``sparsity`` (emit sparsity
rows for a manifest), ``run`` (full perturb-transcribe-score experiment),
``plot`` (summary CSV to SVG), ``grid`` (print a parameter grid), and
``synth-corpus`` (build a synthetic demo corpus).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from . import harness, perturb, stats, synthcorpus
from .signal_core import load_wav, save_wav

_SPEC_FLAGS = [
    ("--window-ms", "window_ms", float),
    ("--fade-ms", "fade_ms", float),
    ("--factor", "factor", float),
    ("--n-bands", "n_bands", int),
    ("--freq-win-bands", "freq_win_bands", int),
    ("--fraction", "fraction", float),
    ("--mode", "mode", str),
    ("--snr-db", "snr_db", float),
    ("--silence-ms", "silence_ms", float),
    ("--seed", "seed", int),
    ("--selection", "selection", str),
]


def _add_spec_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--spec", help="canonical spec text, e.g. 'reverse:window_ms=150'")
    parser.add_argument("--kind", choices=sorted(perturb.KIND_SCHEMAS))
    for flag, dest, typ in _SPEC_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None)


def _spec_from_args(args) -> perturb.PerturbationSpec:
    if args.spec:
        return perturb.parse_spec(args.spec)
    if not args.kind:
        raise SystemExit("either --spec or --kind is required")
    params = {dest: getattr(args, dest) for _, dest, _ in _SPEC_FLAGS if getattr(args, dest) is not None}
    return perturb.PerturbationSpec.create(args.kind, **params)


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep:
            raise SystemExit(f"override {pair!r} is not key=value")
        overrides[key] = value
    return overrides


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="perturbbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p_perturb = sub.add_parser("perturb", help="apply one perturbation to a WAV file")
    p_perturb.add_argument("input")
    p_perturb.add_argument("output")
    p_perturb.add_argument("--encoding", choices=["float32", "pcm16"], default="float32")
    _add_spec_flags(p_perturb)

    p_sparsity = sub.add_parser("sparsity", help="emit sparsity points for a manifest")
    p_sparsity.add_argument("--manifest", required=True)
    p_sparsity.add_argument("--out", help="output CSV (default: stdout)")
    p_sparsity.add_argument("--sparsity-window-ms", type=float,
                            default=stats.DEFAULT_SPARSITY_WINDOW_MS)
    p_sparsity.add_argument("--corpus-seed", type=int, default=0)
    _add_spec_flags(p_sparsity)

    p_run = sub.add_parser("run", help="run a full experiment grid through a bridge")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--experiment", required=True,
                       help="perturbation kind, e.g. reverse, interrupt, repackage, none")
    p_run.add_argument("--bridge-cmd", required=True,
                       help="command line of a bridge process speaking the wire protocol")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--timeout", type=float, default=120.0)
    p_run.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="replace a non-swept grid default (repeatable)")

    p_plot = sub.add_parser("plot", help="render performance curves from a summary CSV")
    p_plot.add_argument("summary")
    p_plot.add_argument("output", help="SVG path")
    p_plot.add_argument("--log-x", choices=["auto", "on", "off"], default="auto")
    p_plot.add_argument("--invert-y", action="store_true",
                        help="reversed y axis (repackaging convention)")
    p_plot.add_argument("--title")
    p_plot.add_argument("--x-label")

    p_grid = sub.add_parser("grid", help="print an experiment grid")
    p_grid.add_argument("kind")
    p_grid.add_argument("--override", action="append", metavar="KEY=VALUE")

    p_corpus = sub.add_parser("synth-corpus", help="synthesize a demo corpus with manifest")
    p_corpus.add_argument("--out", required=True)
    p_corpus.add_argument("--n", type=int, default=20)
    p_corpus.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "perturb":
        spec = _spec_from_args(args)
        signal = load_wav(args.input)
        save_wav(perturb.apply(spec, signal), args.output, encoding=args.encoding)
        print(f"{spec.canonical()} -> {args.output}")
        return 0

    if args.command == "sparsity":
        spec = _spec_from_args(args) if (args.spec or args.kind) else perturb.PerturbationSpec.create("none")
        entries = harness.load_manifest(args.manifest)
        out = open(args.out, "w", newline="") if args.out else sys.stdout
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["utterance_id", "spec", "window_ms", "g_time", "g_freq"])
        for entry in entries:
            signal = load_wav(entry.audio_path)
            effective = spec
            if "seed" in perturb.KIND_SCHEMAS[spec.kind]:
                effective = spec.with_params(seed=harness.derive_seed(
                    args.corpus_seed, entry.utterance_id, spec.canonical()))
            point = stats.sparsity_point(
                perturb.apply(effective, signal), entry.utterance_id, spec,
                args.sparsity_window_ms,
            )
            writer.writerow([entry.utterance_id, spec.canonical(), point.window_ms,
                             repr(point.g_time), repr(point.g_freq)])
        if args.out:
            out.close()
            print(f"wrote {args.out}")
        return 0

    if args.command == "run":
        grid = harness.build_grid(args.experiment, **_parse_overrides(args.override))
        results = harness.run_experiment(
            args.manifest, grid, args.bridge_cmd, args.out,
            corpus_seed=args.seed, workers=args.workers, request_timeout=args.timeout,
        )
        print(f"results: {results}")
        print(f"summary: {results.parent / 'summary.csv'}")
        return 0

    if args.command == "plot":
        log_x = {"auto": None, "on": True, "off": False}[args.log_x]
        axes = harness.AxesSpec(x_label=args.x_label, title=args.title,
                                log_x=log_x, invert_y=args.invert_y)
        harness.emit_curves(args.summary, args.output, axes)
        print(f"wrote {args.output}")
        return 0

    if args.command == "grid":
        grid = harness.build_grid(args.kind, **_parse_overrides(args.override))
        for point in grid.points:
            print(f"{grid.param_name}={point.value:g}\t{point.spec.canonical()}")
        return 0

    if args.command == "synth-corpus":
        manifest = synthcorpus.build_corpus(args.out, args.n, args.seed)
        print(f"manifest: {manifest}")
        return 0

    raise SystemExit(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
