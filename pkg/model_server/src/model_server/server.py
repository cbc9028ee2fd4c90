"""Line-delimited JSON evaluation server over stdin/stdout.

Protocol (one object per line, UTF-8):

* ``{"type":"hello","q":int,"n":int}`` -> ``{"type":"hello_ok","q":int,"n":int}``
  where the reply carries the *server's* configured dimensions (the client
  compares and decides);
* ``{"type":"eval","id":int,"sequences":[[int,...],...]}`` ->
  ``{"type":"result","id":int,"values":[float,...]}`` in request order
  within a batch;
* anything unparseable or invalid -> ``{"type":"error","id":int,"message":str}``
  with the request's id when one could be read, else 0 — and the loop keeps
  serving.

The loop is single-threaded and answers in arrival order; every response is
flushed immediately so pipelined clients never stall.  A closed stdout
(client went away) ends the process cleanly.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class ServerConfig:
    """What the server declares and how it scores."""

    q: int
    n: int
    scorer: Callable
    log_batches: bool = False

    def __post_init__(self) -> None:
        if self.q < 2 or self.n < 1:
            raise ValueError(f"invalid dimensions q={self.q}, n={self.n}")


def _error(req_id, message: str) -> dict:
    return {"type": "error", "id": req_id if isinstance(req_id, int) else 0, "message": message}


def _handle(config: ServerConfig, msg: dict) -> dict:
    mtype = msg.get("type")
    if mtype == "hello":
        return {"type": "hello_ok", "q": config.q, "n": config.n}
    if mtype == "eval":
        req_id = msg.get("id")
        if not isinstance(req_id, int) or req_id < 0:
            return _error(req_id, "eval request needs a nonnegative integer id")
        sequences = msg.get("sequences")
        if not isinstance(sequences, list):
            return _error(req_id, "eval request needs a sequences list")
        values = []
        for row, seq in enumerate(sequences):
            if (
                not isinstance(seq, list)
                or len(seq) != config.n
                or any(not isinstance(v, int) or not 0 <= v < config.q for v in seq)
            ):
                return _error(
                    req_id,
                    f"sequence {row} must hold {config.n} integers in [0, {config.q})",
                )
            values.append(float(config.scorer(seq)))
        if config.log_batches:
            print(f"batch id={req_id} size={len(values)}", file=sys.stderr, flush=True)
        return {"type": "result", "id": req_id, "values": values}
    return _error(msg.get("id"), f"unknown message type {mtype!r}")


def serve(config: ServerConfig, stdin=None, stdout=None) -> None:
    """Serve until stdin closes; never die on a bad line."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict):
                raise ValueError("top-level JSON value must be an object")
            response = _handle(config, msg)
        except (ValueError, TypeError) as exc:
            req_id = 0
            try:
                parsed = json.loads(line)
                if isinstance(parsed, dict) and isinstance(parsed.get("id"), int):
                    req_id = parsed["id"]
            except ValueError:
                pass
            response = _error(req_id, f"malformed request: {exc}")
        try:
            stdout.write(json.dumps(response) + "\n")
            stdout.flush()
        except (BrokenPipeError, ValueError):
            return  # client hung up; exit quietly
