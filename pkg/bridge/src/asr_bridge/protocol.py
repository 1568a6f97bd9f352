"""Line-delimited JSON request loop on the process's standard streams.

Requests: ``{"id": <string>, "wav": <absolute path>}``. Replies:
``{"id": ..., "text": ...}`` on success, ``{"id": ..., "error": ...}`` on a
per-request failure. Exactly one reply line per request line, in order.
The handshake request ``{"id": "__hello__"}`` is answered with the model
name; it is only ever seen after the model has finished loading, because
the loop starts post-load.
"""

from __future__ import annotations

import json
import sys

HANDSHAKE_ID = "__hello__"


def serve(transcriber, model_name: str, stdin=None, stdout=None) -> None:
    """Answer requests until stdin closes. Per-request failures are reported
    as error objects; the loop itself never dies on one."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    def reply(obj: dict) -> None:
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
        wav = request.get("wav")
        if not wav:
            reply({"id": request_id, "error": "request lacks a 'wav' path"})
            continue
        try:
            reply({"id": request_id, "text": transcriber(wav)})
        except Exception as exc:
            reply({"id": request_id, "error": f"{type(exc).__name__}: {exc}"})
