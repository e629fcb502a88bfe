"""Single-threaded request loop behind stdio or a local socket.

The worker greets with a hello frame, then answers every request line
with exactly one response frame, in order. Malformed input earns an
error frame carrying the request id (null when the id itself is
unreadable); nothing a client sends can crash the loop.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from collections.abc import Sequence
from dataclasses import dataclass

from .checkpoint import CheckpointModel, load_checkpoint
from .frames import PROTOCOL_VERSION, encode_frame
from .stub import DEFAULT_MASK_ID, DEFAULT_VOCAB_SIZE, stub_predict


@dataclass(frozen=True)
class WorkerConfig:
    model: str = "stub"
    topk_cap: int = 64
    transport: str = "stdio"
    vocab_size: int = DEFAULT_VOCAB_SIZE
    mask_id: int = DEFAULT_MASK_ID
    seed: int = 0

    def __post_init__(self) -> None:
        if self.topk_cap < 2:
            raise ValueError("topk_cap must be >= 2")
        if self.transport != "stdio":
            kind, _, port = self.transport.partition(":")
            if kind != "socket" or not port.isdigit():
                raise ValueError(f"transport must be 'stdio' or 'socket:PORT', got {self.transport!r}")
        if self.vocab_size < 2 or not 0 <= self.mask_id < self.vocab_size:
            raise ValueError("need vocab_size >= 2 and mask_id within it")


class StubModel(CheckpointModel):
    """The built-in seeded model, behind the same interface as a checkpoint."""

    def __init__(self, vocab_size: int, mask_id: int, seed: int) -> None:
        self.vocab_size = vocab_size
        self.mask_id = mask_id
        self.seed = seed

    def vocab(self) -> tuple[int, int]:
        return self.vocab_size, self.mask_id

    def predict(
        self, tokens: Sequence[int], masked: Sequence[int], topk: int
    ) -> list[tuple[int, list[int], list[float], float]]:
        return stub_predict(tokens, masked, topk, self.vocab_size, self.mask_id, self.seed)


def build_model(config: WorkerConfig) -> CheckpointModel:
    if config.model == "stub":
        return StubModel(config.vocab_size, config.mask_id, config.seed)
    return load_checkpoint(config.model)


def _error(rid, message: str) -> str:
    return encode_frame({"type": "error", "id": rid, "message": message})


def handle_request(model: CheckpointModel, topk_cap: int, line: str) -> str:
    """One response frame for one request line, whatever the line holds."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return _error(None, "request is not valid JSON")
    if not isinstance(obj, dict):
        return _error(None, "request is not a JSON object")
    rid = obj.get("id")
    if obj.get("type") != "predict_batch":
        return _error(rid, f"unsupported frame type {obj.get('type')!r}")
    topk = obj.get("topk")
    sequences = obj.get("sequences")
    if not isinstance(topk, int) or isinstance(topk, bool) or topk < 2:
        return _error(rid, "topk must be an integer >= 2")
    if not isinstance(sequences, list):
        return _error(rid, "sequences must be a list")
    k = min(topk, topk_cap)
    results = []
    try:
        for seq in sequences:
            tokens = [int(t) for t in seq["tokens"]]
            masked = [int(p) for p in seq["masked"]]
            for p in masked:
                if not 0 <= p < len(tokens):
                    raise ValueError(f"masked position {p} outside the token buffer")
            rows = model.predict(tokens, masked, k)
            results.append(
                {
                    "positions": [p for p, _, _, _ in rows],
                    "top_tokens": [toks for _, toks, _, _ in rows],
                    "top_probs": [probs for _, _, probs, _ in rows],
                    "other_mass": [other for _, _, _, other in rows],
                }
            )
    except (KeyError, TypeError, ValueError) as exc:
        return _error(rid, f"bad sequence entry: {exc}")
    return encode_frame({"type": "prediction", "id": rid, "results": results})


def _serve_lines(model: CheckpointModel, topk_cap: int, reader, writer) -> None:
    vocab_size, mask_id = model.vocab()
    hello = encode_frame(
        {
            "type": "hello",
            "vocab_size": vocab_size,
            "mask_id": mask_id,
            "protocol_version": PROTOCOL_VERSION,
        }
    )
    try:
        writer.write(hello + "\n")
        writer.flush()
        for line in reader:
            if not line.strip():
                continue
            try:
                response = handle_request(model, topk_cap, line)
            except Exception as exc:  # the loop must outlive any request
                response = _error(None, f"internal error: {exc}")
            writer.write(response + "\n")
            writer.flush()
    except BrokenPipeError:
        return


def serve(config: WorkerConfig) -> None:
    """Answer requests until end-of-input on the configured transport."""
    model = build_model(config)
    if config.transport == "stdio":
        _serve_lines(model, config.topk_cap, sys.stdin, sys.stdout)
        return
    port = int(config.transport.partition(":")[2])
    with socket.create_server(("127.0.0.1", port)) as listener:
        conn, _ = listener.accept()
        with conn, conn.makefile("r", encoding="utf-8") as rd, conn.makefile(
            "w", encoding="utf-8"
        ) as wr:
            _serve_lines(model, config.topk_cap, rd, wr)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="line-protocol model worker")
    parser.add_argument("--model", default="stub", help="'stub' or a checkpoint path")
    parser.add_argument("--topk-cap", type=int, default=64)
    parser.add_argument("--transport", default="stdio", help="'stdio' or 'socket:PORT'")
    parser.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE)
    parser.add_argument("--mask-id", type=int, default=DEFAULT_MASK_ID)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    try:
        config = WorkerConfig(
            model=args.model,
            topk_cap=args.topk_cap,
            transport=args.transport,
            vocab_size=args.vocab_size,
            mask_id=args.mask_id,
            seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
    serve(config)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
