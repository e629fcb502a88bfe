"""Client side of the newline-delimited JSON worker protocol.

A worker speaks UTF-8 JSON frames, one per line: it sends a hello frame on
startup, then answers each predict_batch request with a prediction frame
carrying the same id (or an error frame). Floats on the wire are written
with 17 significant digits so any client recovers them exactly.

Three transports are provided: a spawned subprocess on stdio, a local TCP
socket, and an in-process loopback for tests. A WorkerConnection satisfies
the ModelBackend protocol, so schedulers can decode against a remote model
with no special casing.
"""

from __future__ import annotations

import itertools
import json
import queue
import shlex
import socket
import subprocess
import threading
from collections import deque
from collections.abc import Sequence
from typing import Protocol

from .errors import BackendError, ProtocolError, WorkerTimeout
from .state import DecodeState, PredictionMatrix, TokenDistribution, Vocabulary

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


def _encode_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".16e")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_encode_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_encode_value(x)}" for k, x in v.items()) + "}"
    raise TypeError(f"cannot encode {type(v).__name__} in a frame")


def encode_frame(obj: dict) -> str:
    """One frame as a single line (no newline). Floats use exponent form."""
    if not isinstance(obj, dict):
        raise TypeError("a frame must be a JSON object")
    return _encode_value(obj)


def decode_frame(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"frame is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("frame is not a JSON object")
    return obj


class Transport(Protocol):
    """Line-oriented duplex channel to a worker."""

    def send_line(self, line: str) -> None: ...

    def recv_line(self, timeout: float) -> str: ...

    def close(self) -> None: ...


_EOF = object()


class _LineReader:
    """Background reader so blocking pipes and sockets honor timeouts."""

    def __init__(self, fileobj) -> None:
        self._q: queue.Queue = queue.Queue()
        self._eof = False
        self._thread = threading.Thread(target=self._pump, args=(fileobj,), daemon=True)
        self._thread.start()

    def wait(self, timeout: float) -> None:
        self._thread.join(timeout)

    def _pump(self, fileobj) -> None:
        try:
            for line in fileobj:
                self._q.put(line)
        except (OSError, ValueError):
            pass
        self._q.put(_EOF)

    def readline(self, timeout: float) -> str:
        if self._eof:
            raise ProtocolError("worker closed the connection")
        try:
            item = self._q.get(timeout=timeout)
        except queue.Empty:
            raise WorkerTimeout(f"no frame from worker within {timeout} s") from None
        if item is _EOF:
            self._eof = True
            raise ProtocolError("worker closed the connection")
        return item


class SpawnTransport:
    """Worker as a child process speaking frames on stdin/stdout."""

    def __init__(self, cmd: str | Sequence[str]) -> None:
        argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._reader = _LineReader(self._proc.stdout)

    def send_line(self, line: str) -> None:
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise ProtocolError(f"cannot write to worker: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        return self._reader.readline(timeout)

    def close(self) -> None:
        if self._proc.stdin and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class SocketTransport:
    """Worker behind a local TCP port."""

    def __init__(self, port: int, host: str = "127.0.0.1") -> None:
        self._sock = socket.create_connection((host, port))
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")
        self._reader = _LineReader(self._file)

    def send_line(self, line: str) -> None:
        try:
            self._file.write(line + "\n")
            self._file.flush()
        except OSError as exc:
            raise ProtocolError(f"cannot write to worker: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        return self._reader.readline(timeout)

    def close(self) -> None:
        # close() alone would not send FIN while the makefile keeps the fd
        # referenced from the reader thread; the worker would never see EOF
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._reader.wait(1.0)
        try:
            self._file.close()
        except (OSError, ValueError):
            pass
        try:
            self._sock.close()
        except OSError:
            pass


class LoopbackTransport:
    """Synchronous in-process transport driving a worker object.

    The worker object supplies ``hello_frame() -> str`` and
    ``respond(line) -> str | None``; a None response leaves nothing queued,
    which surfaces as a timeout on the next read.
    """

    def __init__(self, worker) -> None:
        self._worker = worker
        self._pending: deque[str] = deque([worker.hello_frame()])

    def send_line(self, line: str) -> None:
        resp = self._worker.respond(line)
        if resp is not None:
            self._pending.append(resp)

    def recv_line(self, timeout: float) -> str:
        if not self._pending:
            raise WorkerTimeout("no frame pending on loopback transport")
        return self._pending.popleft()

    def close(self) -> None:
        self._pending.clear()


def _parse_hello(frame: dict) -> Vocabulary:
    if frame.get("type") != "hello":
        raise ProtocolError(f"expected hello frame, got {frame.get('type')!r}")
    if frame.get("protocol_version") != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol_version {frame.get('protocol_version')!r}")
    try:
        return Vocabulary(size=int(frame["vocab_size"]), mask_id=int(frame["mask_id"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad hello frame: {exc}") from exc


def _parse_result(entry, state: DecodeState) -> PredictionMatrix:
    if not isinstance(entry, dict):
        raise ProtocolError("result entry is not an object")
    try:
        positions = [int(p) for p in entry["positions"]]
        top_tokens = entry["top_tokens"]
        top_probs = entry["top_probs"]
        other_mass = entry["other_mass"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad result entry: {exc}") from exc
    if positions != list(state.masked):
        raise ProtocolError(
            f"result positions {positions} do not match requested masked {list(state.masked)}"
        )
    if not (len(top_tokens) == len(top_probs) == len(other_mass) == len(positions)):
        raise ProtocolError("result arrays are not aligned with positions")
    entries = {}
    for p, toks, probs, other in zip(positions, top_tokens, top_probs, other_mass):
        try:
            dist = TokenDistribution(
                top_tokens=tuple(int(t) for t in toks),
                top_probs=tuple(float(x) for x in probs),
                other_mass=float(other),
            )
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"invalid distribution at position {p}: {exc}") from exc
        entries[p] = dist
    return PredictionMatrix(entries=entries)


def remote_predict_batch(
    conn: WorkerConnection, states: Sequence[DecodeState], topk: int
) -> list[PredictionMatrix]:
    """One request/response round trip, validated back into matrices."""
    if topk < 2:
        raise ValueError("topk must be >= 2")
    rid = conn.next_id()
    frame = {
        "type": "predict_batch",
        "id": rid,
        "topk": topk,
        "sequences": [
            {"tokens": list(s.tokens), "masked": list(s.masked)} for s in states
        ],
    }
    conn.transport.send_line(encode_frame(frame))
    reply = decode_frame(conn.transport.recv_line(conn.timeout))
    if reply.get("id") != rid:
        raise ProtocolError(f"response id {reply.get('id')!r} does not match request {rid}")
    kind = reply.get("type")
    if kind == "error":
        raise BackendError(str(reply.get("message", "worker error")))
    if kind != "prediction":
        raise ProtocolError(f"unexpected frame type {kind!r}")
    results = reply.get("results")
    if not isinstance(results, list) or len(results) != len(states):
        raise ProtocolError(
            f"expected {len(states)} results, got "
            f"{len(results) if isinstance(results, list) else type(results).__name__}"
        )
    return [_parse_result(entry, state) for entry, state in zip(results, states)]


class WorkerConnection:
    """Handshaken channel to one worker; usable directly as a ModelBackend."""

    def __init__(self, transport: Transport, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.transport = transport
        self.timeout = timeout
        self._ids = itertools.count(1)
        self._vocab = _parse_hello(decode_frame(transport.recv_line(timeout)))

    def next_id(self) -> int:
        return next(self._ids)

    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def predict_batch(self, states: Sequence[DecodeState], topk: int) -> list[PredictionMatrix]:
        return remote_predict_batch(self, states, topk)

    def close(self) -> None:
        self.transport.close()

    def __enter__(self) -> WorkerConnection:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def spawn_worker(cmd: str | Sequence[str], timeout: float = DEFAULT_TIMEOUT) -> WorkerConnection:
    return WorkerConnection(SpawnTransport(cmd), timeout)


def connect_worker(port: int, host: str = "127.0.0.1", timeout: float = DEFAULT_TIMEOUT) -> WorkerConnection:
    return WorkerConnection(SocketTransport(port, host), timeout)


def loopback_connection(worker, timeout: float = DEFAULT_TIMEOUT) -> WorkerConnection:
    return WorkerConnection(LoopbackTransport(worker), timeout)
