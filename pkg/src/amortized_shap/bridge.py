"""Client for the external model bridge.

The bridge speaks newline-delimited JSON over a child process's stdin/stdout:

* handshake: ``{"type":"hello","q":q,"n":n}`` answered by
  ``{"type":"hello_ok","q":q,"n":n}``;
* ``{"type":"eval","id":k,"sequences":[[...],...]}`` answered by
  ``{"type":"result","id":k,"values":[...]}`` (any order, matched by id) or
  ``{"type":"error","id":k,"message":...}``.

Requests may be pipelined; a background reader thread collects responses so
out-of-order completion is handled transparently.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading

import numpy as np

from .errors import BridgeIOError, ConfigurationError, ProtocolError
from .models import DEFAULT_BATCH_SIZE, ModelHandle

log = logging.getLogger(__name__)

HANDSHAKE_TIMEOUT = 30.0


class BridgeClient:
    """Owns one child process and serializes batched evaluations over it."""

    def __init__(
        self,
        command,
        q: int,
        n: int,
        timeout: float = 60.0,
        chunk_size: int = DEFAULT_BATCH_SIZE,
    ) -> None:
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.q = q
        self.n = n
        self.timeout = timeout
        self.chunk_size = max(1, chunk_size)
        self._next_id = 1
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BridgeIOError(f"could not start model process {self.command}: {exc}") from exc
        self._responses: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()
        self._handshake()

    def _read_loop(self) -> None:
        try:
            for line in self._proc.stdout:
                line = line.strip()
                if not line:
                    continue
                try:
                    self._responses.put(json.loads(line))
                except json.JSONDecodeError:
                    self._responses.put({"type": "_unparseable", "raw": line})
        except ValueError:
            pass  # stdout closed mid-read during shutdown
        self._responses.put(None)  # EOF sentinel

    def _send(self, obj: dict) -> None:
        try:
            self._proc.stdin.write(json.dumps(obj) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeIOError(f"model process pipe broke: {exc}") from exc

    def _next_message(self, timeout: float) -> dict:
        try:
            msg = self._responses.get(timeout=timeout)
        except queue.Empty:
            raise BridgeIOError(
                f"model process did not answer within {timeout:.1f}s"
            ) from None
        if msg is None:
            raise BridgeIOError("model process closed its output stream")
        if msg.get("type") == "_unparseable":
            raise ProtocolError(f"model process emitted non-JSON output: {msg['raw']!r}")
        return msg

    def _handshake(self) -> None:
        self._send({"type": "hello", "q": self.q, "n": self.n})
        reply = self._next_message(HANDSHAKE_TIMEOUT)
        if reply.get("type") != "hello_ok":
            raise ProtocolError(f"expected hello_ok, got {reply!r}")
        if reply.get("q") != self.q or reply.get("n") != self.n:
            self.close()
            raise ConfigurationError(
                f"model declares q={reply.get('q')}, n={reply.get('n')}; "
                f"client expects q={self.q}, n={self.n}"
            )
        log.debug("bridge handshake ok against %s", self.command)

    def evaluate(self, batch: np.ndarray) -> np.ndarray:
        """Evaluate a batch: pipeline its chunks, then match responses by id."""
        with self._lock:
            chunks: dict[int, tuple[int, int]] = {}
            order: list[int] = []
            for lo in range(0, batch.shape[0], self.chunk_size):
                hi = min(lo + self.chunk_size, batch.shape[0])
                req_id = self._next_id
                self._next_id += 1
                self._send(
                    {
                        "type": "eval",
                        "id": req_id,
                        "sequences": [[int(e) for e in row] for row in batch[lo:hi]],
                    }
                )
                chunks[req_id] = (lo, hi)
                order.append(req_id)
            out = np.empty(batch.shape[0], dtype=np.float64)
            received = 0
            pending = set(order)
            while pending:
                msg = self._next_message(self.timeout)
                mtype = msg.get("type")
                if mtype == "error":
                    raise ProtocolError(f"model reported an error: {msg.get('message')!r}")
                if mtype != "result":
                    raise ProtocolError(f"unexpected message type {mtype!r}")
                req_id = msg.get("id")
                if req_id not in pending:
                    log.warning("dropping stale response id=%s", req_id)
                    continue
                lo, hi = chunks[req_id]
                values = msg.get("values")
                if not isinstance(values, list) or len(values) != hi - lo:
                    raise ProtocolError(
                        f"result {req_id} carries "
                        f"{len(values) if isinstance(values, list) else 'no'} values "
                        f"for a chunk of {hi - lo}"
                    )
                out[lo:hi] = values
                pending.discard(req_id)
                received += 1
            if not np.all(np.isfinite(out)):
                raise ProtocolError("result contains non-finite values")
            return out

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.terminate()
                try:
                    proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    proc.kill()


def bridge_connect(
    command,
    q: int,
    n: int,
    batch_size: int = DEFAULT_BATCH_SIZE,
    timeout: float = 60.0,
) -> ModelHandle:
    """Spawn the external model process and wrap it as a :class:`ModelHandle`.

    The handshake validates that both sides agree on ``(q, n)``; evaluation
    then flows through the shared caching/accounting layer like any other
    model.  ``batch_size`` bounds the per-request chunk on the wire; chunks
    of one batch are pipelined.  Close the handle (or use it as a context
    manager) to terminate the child process.
    """
    client = BridgeClient(command, q, n, timeout=timeout, chunk_size=batch_size)
    # chunking happens on the wire; hand the client whole miss batches
    return ModelHandle(
        q, n, client.evaluate, batch_size=1 << 30, close=client.close
    )
