"""Experiment orchestration: manifests, parameter grids, perturb-transcribe-
score pipelines over the bridge protocol, result caching, CSV emission, and
performance-curve rendering.

Bridges are external processes speaking line-delimited JSON on their
standard streams: request ``{"id": ..., "wav": ...}``, response
``{"id": ..., "text": ...}`` or ``{"id": ..., "error": ...}``, one response
line per request line, order-preserving. The handshake request
``{"id": "__hello__"}`` must be answered with the model name before any
transcription is attempted.

Every random choice in a run is derived from (corpus_seed, utterance_id,
canonical spec text), so results are byte-identical regardless of worker
count or scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import queue
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import perturb
from .errors import BridgeError, BridgeReplyError, ManifestError, ParameterError
from .perturb import KIND_SCHEMAS, PerturbationSpec
from .scoring import WerCounts, align, normalize_text, wer
from .signal_core import load_wav, save_wav
from .stats import DEFAULT_SPARSITY_WINDOW_MS, sparsity_point

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["utterance_id", "spec", "wer", "s", "d", "i", "c", "g_time", "g_freq", "transcript"]
SUMMARY_COLUMNS = ["spec", "param_value", "mean_wer", "ci_low", "ci_high",
                   "mean_g_time", "mean_g_freq", "n", "failures"]
TMPDIR_ENV = "PERTURBBENCH_TMPDIR"
HANDSHAKE_ID = "__hello__"


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    audio_path: str
    reference: str


@dataclass(frozen=True)
class GridPoint:
    value: float
    spec: PerturbationSpec


@dataclass(frozen=True)
class ExperimentGrid:
    kind: str
    param_name: str
    points: list[GridPoint]

    @property
    def values(self) -> list[float]:
        return [p.value for p in self.points]

    @property
    def specs(self) -> list[PerturbationSpec]:
        return [p.spec for p in self.points]


@dataclass(frozen=True)
class ResultRow:
    utterance_id: str
    spec: str
    wer: float
    counts: WerCounts
    g_time: float
    g_freq: float
    transcript: str

    def as_record(self) -> dict:
        return {
            "utterance_id": self.utterance_id, "spec": self.spec, "wer": self.wer,
            "s": self.counts.s, "d": self.counts.d, "i": self.counts.i, "c": self.counts.c,
            "g_time": self.g_time, "g_freq": self.g_freq, "transcript": self.transcript,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ResultRow":
        return cls(
            utterance_id=rec["utterance_id"], spec=rec["spec"], wer=float(rec["wer"]),
            counts=WerCounts(int(rec["s"]), int(rec["d"]), int(rec["i"]), int(rec["c"])),
            g_time=float(rec["g_time"]), g_freq=float(rec["g_freq"]),
            transcript=rec["transcript"],
        )


def load_manifest(path) -> list[ManifestEntry]:
    """Read a corpus manifest: JSON-lines {"id","audio","text"} or 3-column
    TSV (id, audio path, reference), auto-detected from the first line."""
    path = Path(path)
    entries: list[ManifestEntry] = []
    seen: dict[str, int] = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    jsonl = None
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        if jsonl is None:
            jsonl = raw.lstrip().startswith("{")
        if jsonl:
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            missing = [k for k in ("id", "audio", "text") if k not in rec]
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing fields {missing}")
            entry = ManifestEntry(str(rec["id"]), str(rec["audio"]), str(rec["text"]))
        else:
            parts = raw.split("\t")
            if len(parts) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            entry = ManifestEntry(parts[0], parts[1], parts[2])
        if not entry.utterance_id:
            raise ManifestError(f"{path}:{lineno}: empty utterance id")
        if entry.utterance_id in seen:
            raise ManifestError(
                f"{path}:{lineno}: duplicate utterance id {entry.utterance_id!r} "
                f"(first seen on line {seen[entry.utterance_id]})"
            )
        if not normalize_text(entry.reference):
            raise ManifestError(f"{path}:{lineno}: reference normalizes to no tokens")
        seen[entry.utterance_id] = lineno
        entries.append(entry)
    return entries


def _log_spaced(lo: float, hi: float, n: int) -> list[float]:
    return [float(f"{v:.6g}") for v in np.geomspace(lo, hi, n)]


def build_grid(kind: str, **overrides) -> ExperimentGrid:
    """The per-experiment parameter grid.

    Reversal and shuffling sweep 58 log-spaced timescales over 0.125-1200 ms;
    chimera envelope reversal and mosaic time windows sweep 32 over
    10-1200 ms; interruptions sweep 30 over 2-2000 ms; warping sweeps 40
    factors over 0.25-4; repackaging sweeps 10 audio:silence ratios over
    0.5-2.0 at compression 2 and 250 ms windows; chimeras sweep band counts.
    ``overrides`` replace the non-swept defaults (e.g. mode="silence").
    """
    def points(param, values, base=None):
        pts = []
        for v in values:
            params = dict(base or {})
            params.update(overrides)
            params[param] = v
            pts.append(GridPoint(float(v), PerturbationSpec.create(kind, **params)))
        return ExperimentGrid(kind, param, pts)

    if kind == "none":
        if overrides:
            raise ParameterError("kind 'none' takes no parameters")
        return ExperimentGrid("none", "none", [GridPoint(0.0, PerturbationSpec.create("none"))])
    if kind in ("reverse", "shuffle"):
        return points("window_ms", _log_spaced(0.125, 1200.0, 58))
    if kind == "warp":
        return points("factor", _log_spaced(0.25, 4.0, 40))
    if kind == "envelope_reverse":
        return points("window_ms", _log_spaced(10.0, 1200.0, 32))
    if kind == "mosaic":
        return points("window_ms", _log_spaced(10.0, 1200.0, 32))
    if kind == "interrupt":
        return points("window_ms", _log_spaced(2.0, 2000.0, 30))
    if kind == "chimera":
        return points("n_bands", [1, 2, 4, 8, 16, 30])
    if kind == "repackage":
        window_ms = float(overrides.pop("window_ms", 250.0))
        factor = float(overrides.pop("factor", 2.0))
        ratios = _log_spaced(0.5, 2.0, 10)
        pts = []
        for ratio in ratios:
            silence_ms = float(f"{(window_ms / factor) / ratio:.6g}")
            spec = PerturbationSpec.create(
                "repackage", window_ms=window_ms, factor=factor, silence_ms=silence_ms, **overrides
            )
            pts.append(GridPoint(ratio, spec))
        return ExperimentGrid("repackage", "ratio", pts)
    raise ParameterError(f"unknown experiment kind {kind!r}")


def derive_seed(corpus_seed: int, utterance_id: str, spec_text: str) -> int:
    """Stable non-negative 64-bit seed for one (utterance, spec) task."""
    payload = f"{corpus_seed}\x1f{utterance_id}\x1f{spec_text}".encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def stable_key(utterance_id: str, spec_text: str) -> str:
    return f"{utterance_id}::{hashlib.sha1(spec_text.encode()).hexdigest()[:12]}"


class BridgeProcess:
    """One bridge subprocess; requests are serialized per process."""

    def __init__(self, cmd: str, timeout: float):
        self.cmd = cmd
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                shlex.split(cmd), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1,
            )
        except OSError as exc:
            raise BridgeError(f"cannot launch bridge {cmd!r}: {exc}") from None
        self._lines: queue.Queue = queue.Queue()
        threading.Thread(target=self._read_loop, daemon=True).start()
        try:
            self.model_name = self._handshake()
        except BaseException:
            self.close()
            raise

    def _read_loop(self):
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _roundtrip(self, payload: dict) -> dict:
        try:
            self.proc.stdin.write(json.dumps(payload) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise BridgeError("bridge process closed its input") from None
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise BridgeError(f"bridge did not answer within {self.timeout}s") from None
        if line is None:
            raise BridgeError("bridge process exited mid-conversation")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise BridgeError(f"bridge sent a non-JSON line: {line!r}") from None
        if reply.get("id") != payload["id"]:
            raise BridgeError(f"bridge reply id {reply.get('id')!r} != request id {payload['id']!r}")
        return reply

    def _handshake(self) -> str:
        reply = self._roundtrip({"id": HANDSHAKE_ID})
        if "text" not in reply:
            raise BridgeError(f"handshake reply lacked 'text': {reply!r}")
        return str(reply["text"])

    def transcribe(self, request_id: str, wav_path: str) -> str:
        reply = self._roundtrip({"id": request_id, "wav": str(wav_path)})
        if "error" in reply:
            raise BridgeReplyError(f"bridge error for {request_id}: {reply['error']}")
        if "text" not in reply:
            raise BridgeError(f"bridge reply lacked 'text': {reply!r}")
        return str(reply["text"])

    def close(self):
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except Exception:
            try:
                self.proc.kill()
            except Exception:
                pass


class BridgePool:
    """Lazily spawned pool of bridge processes, one borrower at a time each."""

    def __init__(self, cmd: str, size: int, timeout: float):
        self.cmd = cmd
        self.timeout = timeout
        self._slots: queue.LifoQueue = queue.LifoQueue()
        for _ in range(max(1, size)):
            self._slots.put(None)
        self._spawned: list[BridgeProcess] = []
        self._lock = threading.Lock()

    def borrow(self) -> BridgeProcess:
        slot = self._slots.get()
        if slot is None:
            try:
                slot = BridgeProcess(self.cmd, self.timeout)
            except BaseException:
                self._slots.put(None)
                raise
            with self._lock:
                self._spawned.append(slot)
        return slot

    def release(self, bridge: BridgeProcess):
        self._slots.put(bridge)

    def discard(self, bridge: BridgeProcess):
        bridge.close()
        with self._lock:
            if bridge in self._spawned:
                self._spawned.remove(bridge)
        self._slots.put(None)

    def close(self):
        with self._lock:
            for bridge in self._spawned:
                bridge.close()
            self._spawned.clear()


@dataclass
class _TaskFailure:
    utterance_id: str
    spec: str
    error: str


class _ResultCache:
    """Append-only JSONL cache keyed by (utterance_id, spec); the header line
    pins the run configuration so stale caches fail loudly."""

    def __init__(self, path: Path, corpus_seed: int, bridge_cmd: str):
        self.path = path
        self.header = {"corpus_seed": corpus_seed, "bridge_cmd": bridge_cmd}
        self.rows: dict[tuple[str, str], ResultRow] = {}
        self._lock = threading.Lock()
        if path.exists():
            self._load()
        else:
            with open(path, "w") as fh:
                fh.write(json.dumps(self.header) + "\n")

    def _load(self):
        with open(self.path) as fh:
            lines = fh.read().splitlines()
        if not lines:
            with open(self.path, "w") as fh:
                fh.write(json.dumps(self.header) + "\n")
            return
        header = json.loads(lines[0])
        if header != self.header:
            raise ParameterError(
                f"cache {self.path} was produced with a different configuration "
                f"({header}); use a fresh --out directory or delete the cache"
            )
        for raw in lines[1:]:
            if raw.strip():
                row = ResultRow.from_record(json.loads(raw))
                self.rows[(row.spec, row.utterance_id)] = row

    def add(self, row: ResultRow):
        with self._lock:
            self.rows[(row.spec, row.utterance_id)] = row
            with open(self.path, "a") as fh:
                fh.write(json.dumps(row.as_record()) + "\n")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # full precision; plain repr even for np.float64
    return str(value)


def _write_csv(path: Path, columns: list[str], records: list[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_format_cell(rec[c]) for c in columns])


def _confidence_interval(values: np.ndarray) -> tuple[float, float]:
    # Normal-approximation 95% interval over per-utterance scores.
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, mean
    half = 1.96 * float(np.std(values, ddof=1)) / float(np.sqrt(values.size))
    return mean - half, mean + half


def write_summary(path: Path, grid: ExperimentGrid, rows: dict, failures: list[_TaskFailure]):
    failure_counts: dict[str, int] = {}
    for failure in failures:
        failure_counts[failure.spec] = failure_counts.get(failure.spec, 0) + 1
    records = []
    for point in grid.points:
        spec_text = point.spec.canonical()
        group = [row for (spec, _), row in rows.items() if spec == spec_text]
        group.sort(key=lambda r: r.utterance_id)
        rec = {"spec": spec_text, "param_value": point.value,
               "failures": failure_counts.get(spec_text, 0), "n": len(group)}
        if group:
            wers = np.array([r.wer for r in group])
            lo, hi = _confidence_interval(wers)
            rec.update(mean_wer=float(np.mean(wers)), ci_low=lo, ci_high=hi,
                       mean_g_time=float(np.mean([r.g_time for r in group])),
                       mean_g_freq=float(np.mean([r.g_freq for r in group])))
        else:
            rec.update(mean_wer="", ci_low="", ci_high="", mean_g_time="", mean_g_freq="")
        records.append(rec)
    _write_csv(path, SUMMARY_COLUMNS, records)


def _temp_wav_dir(out_dir: Path) -> Path:
    base = os.environ.get(TMPDIR_ENV)
    tmp = Path(base) if base else out_dir / "tmp-wav"
    tmp.mkdir(parents=True, exist_ok=True)
    return tmp


def run_experiment(
    manifest,
    grid: ExperimentGrid,
    bridge_cmd: str,
    out_dir,
    corpus_seed: int = 0,
    workers: int = 1,
    sparsity_window_ms: float = DEFAULT_SPARSITY_WINDOW_MS,
    request_timeout: float = 120.0,
    max_attempts: int = 3,
) -> Path:
    """Run (entry x grid point) perturb-transcribe-score tasks and emit CSVs.

    Completed rows are cached in the output directory and skipped on rerun.
    Returns the result CSV path; a summary CSV with per-grid-point means and
    95% CIs lands next to it. Bridge failures are retried up to twice, then
    recorded in failures.csv while the run continues.
    """
    if isinstance(manifest, (str, Path)):
        manifest = load_manifest(manifest)
    if not manifest:
        raise ManifestError("manifest has no entries")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = _ResultCache(out_dir / "cache.jsonl", corpus_seed, bridge_cmd)
    tmp_dir = _temp_wav_dir(out_dir)

    tasks = [
        (entry, point.spec)
        for point in grid.points
        for entry in manifest
        if (point.spec.canonical(), entry.utterance_id) not in cache.rows
    ]
    failures: list[_TaskFailure] = []
    failures_lock = threading.Lock()

    if tasks:
        pool = BridgePool(bridge_cmd, size=workers, timeout=request_timeout)
        probe = pool.borrow()  # handshake probe: fail fast on a broken bridge
        log.info("bridge answered handshake: %s", probe.model_name)
        pool.release(probe)
        counter = threading.Lock()
        done = [0]

        def run_task(entry: ManifestEntry, spec: PerturbationSpec):
            spec_text = spec.canonical()
            signal = load_wav(entry.audio_path)
            effective = spec
            if "seed" in KIND_SCHEMAS[spec.kind]:
                effective = spec.with_params(
                    seed=derive_seed(corpus_seed, entry.utterance_id, spec_text)
                )
            perturbed = perturb.apply(effective, signal)
            key = stable_key(entry.utterance_id, spec_text)
            wav_path = tmp_dir / f"{key}.wav"
            save_wav(perturbed, wav_path)
            try:
                transcript = None
                last_error = "unknown"
                for attempt in range(max_attempts):
                    bridge = pool.borrow()
                    try:
                        transcript = bridge.transcribe(f"{attempt}#{key}", wav_path)
                    except BridgeReplyError as exc:
                        # Orderly per-request error; the process itself is fine.
                        last_error = str(exc)
                        log.warning("bridge rejected %s (attempt %d): %s", key, attempt + 1, exc)
                        pool.release(bridge)
                    except BridgeError as exc:
                        last_error = str(exc)
                        log.warning("bridge failure (%s, attempt %d): %s", key, attempt + 1, exc)
                        pool.discard(bridge)
                    else:
                        pool.release(bridge)
                        break
                if transcript is None:
                    with failures_lock:
                        failures.append(_TaskFailure(entry.utterance_id, spec_text, last_error))
                    return
            finally:
                wav_path.unlink(missing_ok=True)
            counts = align(normalize_text(entry.reference), normalize_text(transcript))
            point = sparsity_point(perturbed, entry.utterance_id, spec, sparsity_window_ms)
            cache.add(ResultRow(
                utterance_id=entry.utterance_id, spec=spec_text, wer=wer(counts),
                counts=counts, g_time=point.g_time, g_freq=point.g_freq,
                transcript=transcript,
            ))
            with counter:
                done[0] += 1
                if done[0] % 50 == 0:
                    log.info("completed %d/%d tasks", done[0], len(tasks))

        try:
            with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
                futures = [executor.submit(run_task, entry, spec) for entry, spec in tasks]
                for future in futures:
                    future.result()
        finally:
            pool.close()

    rows = dict(sorted(cache.rows.items()))
    results_path = out_dir / "results.csv"
    _write_csv(results_path, RESULT_COLUMNS, [
        row.as_record() for row in rows.values()
    ])
    write_summary(out_dir / "summary.csv", grid, rows, failures)
    if failures:
        failures.sort(key=lambda f: (f.spec, f.utterance_id))
        _write_csv(out_dir / "failures.csv", ["utterance_id", "spec", "error"], [
            {"utterance_id": f.utterance_id, "spec": f.spec, "error": f.error} for f in failures
        ])
        log.warning("%d task(s) failed after %d attempts; see failures.csv", len(failures), max_attempts)
    return results_path


@dataclass(frozen=True)
class AxesSpec:
    """Axis configuration for performance-curve plots."""

    x_label: str | None = None
    y_label: str = "mean WER"
    title: str | None = None
    log_x: bool | None = None  # None = auto-detect from grid spacing
    invert_y: bool = False


def _looks_log_spaced(values: list[float]) -> bool:
    vals = [v for v in values if v > 0]
    if len(vals) < 3 or len(vals) != len(values):
        return False
    ratios = np.diff(np.log(np.array(vals)))
    return bool(np.all(ratios > 1e-9) and np.ptp(ratios) < 0.05 * np.mean(ratios))


def emit_curves(summary_csv, out_svg, axes: AxesSpec = AxesSpec()) -> None:
    """Render mean-WER-vs-parameter curves with CI bands to SVG.

    Output bytes are deterministic for identical input. One series per
    perturbation kind found in the summary.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(summary_csv, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(SUMMARY_COLUMNS) <= set(reader.fieldnames):
            raise ParameterError(f"{summary_csv}: not a summary CSV (columns {reader.fieldnames})")
        rows = list(reader)
    series: dict[str, list[tuple[float, float, float, float]]] = {}
    for rec in rows:
        if rec["mean_wer"] == "":
            continue
        kind = rec["spec"].split(":", 1)[0]
        series.setdefault(kind, []).append(
            (float(rec["param_value"]), float(rec["mean_wer"]),
             float(rec["ci_low"]), float(rec["ci_high"]))
        )
    if not series:
        raise ParameterError(f"{summary_csv}: no plottable rows")

    plt.rcParams["svg.hashsalt"] = "perturbbench"
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    all_values: list[float] = []
    for kind, pts in sorted(series.items()):
        pts.sort()
        x, y, lo, hi = (np.array(col) for col in zip(*pts))
        all_values.extend(x.tolist())
        ax.plot(x, y, marker="o", markersize=3.5, linewidth=1.2, label=kind)
        ax.fill_between(x, lo, hi, alpha=0.25, linewidth=0)
    log_x = axes.log_x if axes.log_x is not None else _looks_log_spaced(sorted(all_values))
    if log_x:
        ax.set_xscale("log")
    if axes.invert_y:
        ax.invert_yaxis()
    ax.set_xlabel(axes.x_label or "perturbation parameter")
    ax.set_ylabel(axes.y_label)
    if axes.title:
        ax.set_title(axes.title)
    if len(series) > 1:
        ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_svg, format="svg", metadata={"Date": None})
    plt.close(fig)
