"""Reference worker for protocol tests, runnable in-process or on stdio.

The same MockWorker object backs the loopback transport and the
``python3 -m maskbeam.mockworker`` subprocess, so golden transcripts
recorded against one hold for the other byte for byte.

Modes: ``stub`` serves the hash-seeded stub model, ``uniform`` answers a
flat distribution over the whole vocabulary (confidence exactly
1/vocab_size), and the deliberately broken ``badsum`` and ``silent`` modes
exist to exercise client-side validation and timeouts.
"""

from __future__ import annotations

import argparse
import json
import sys

from .protocol import PROTOCOL_VERSION, encode_frame
from .stubmodel import DEFAULT_MASK_ID, DEFAULT_VOCAB_SIZE, stub_predict

MODES = ("stub", "uniform", "badsum", "silent")


class MockWorker:
    def __init__(
        self,
        mode: str = "stub",
        vocab_size: int = DEFAULT_VOCAB_SIZE,
        mask_id: int = DEFAULT_MASK_ID,
        seed: int = 0,
    ) -> None:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if vocab_size < 2 or not 0 <= mask_id < vocab_size:
            raise ValueError("need vocab_size >= 2 and mask_id within it")
        self.mode = mode
        self.vocab_size = vocab_size
        self.mask_id = mask_id
        self.seed = seed

    def hello_frame(self) -> str:
        return encode_frame(
            {
                "type": "hello",
                "vocab_size": self.vocab_size,
                "mask_id": self.mask_id,
                "protocol_version": PROTOCOL_VERSION,
            }
        )

    def _error(self, rid, message: str) -> str:
        return encode_frame({"type": "error", "id": rid, "message": message})

    def _result(self, tokens: list[int], masked: list[int], topk: int) -> dict:
        if self.mode == "uniform":
            k = min(topk, self.vocab_size)
            p = 1.0 / self.vocab_size
            return {
                "positions": masked,
                "top_tokens": [list(range(k)) for _ in masked],
                "top_probs": [[p] * k for _ in masked],
                "other_mass": [(self.vocab_size - k) * p for _ in masked],
            }
        if self.mode == "badsum":
            return {
                "positions": masked,
                "top_tokens": [[1, 2] for _ in masked],
                "top_probs": [[0.25, 0.25] for _ in masked],
                "other_mass": [0.0 for _ in masked],
            }
        rows = stub_predict(tokens, masked, topk, self.vocab_size, self.mask_id, self.seed)
        return {
            "positions": [p for p, _, _, _ in rows],
            "top_tokens": [toks for _, toks, _, _ in rows],
            "top_probs": [probs for _, _, probs, _ in rows],
            "other_mass": [other for _, _, _, other in rows],
        }

    def respond(self, line: str) -> str | None:
        """One response frame per request line; None means stay silent."""
        if self.mode == "silent":
            return None
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            return self._error(None, "request is not valid JSON")
        if not isinstance(obj, dict):
            return self._error(None, "request is not a JSON object")
        rid = obj.get("id")
        if obj.get("type") != "predict_batch":
            return self._error(rid, f"unsupported frame type {obj.get('type')!r}")
        topk = obj.get("topk")
        sequences = obj.get("sequences")
        if not isinstance(topk, int) or topk < 2 or not isinstance(sequences, list):
            return self._error(rid, "predict_batch needs integer topk >= 2 and a sequences list")
        results = []
        try:
            for seq in sequences:
                tokens = [int(t) for t in seq["tokens"]]
                masked = [int(p) for p in seq["masked"]]
                if any(not 0 <= p < len(tokens) for p in masked):
                    raise ValueError("masked position out of range")
                results.append(self._result(tokens, masked, topk))
        except (KeyError, TypeError, ValueError) as exc:
            return self._error(rid, f"bad sequence entry: {exc}")
        return encode_frame({"type": "prediction", "id": rid, "results": results})


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="line-protocol mock model worker")
    parser.add_argument("--mode", choices=MODES, default="stub")
    parser.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE)
    parser.add_argument("--mask-id", type=int, default=DEFAULT_MASK_ID)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    worker = MockWorker(args.mode, args.vocab_size, args.mask_id, args.seed)
    out = sys.stdout
    out.write(worker.hello_frame() + "\n")
    out.flush()
    for line in sys.stdin:
        if not line.strip():
            continue
        resp = worker.respond(line)
        if resp is not None:
            out.write(resp + "\n")
            out.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
