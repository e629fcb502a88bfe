"""Serialize decode traces to a line-oriented text format.

One JSON object per line: a header carrying the format version and the final
candidate, then one line per denoising step. Numbers are written in Python's
shortest round-trip form, so parsing an emitted file reconstructs every
deterministic field bit for bit. Wall time is measured rather than decoded
and is deliberately left out of the file; parsed traces report it as zero.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from pathlib import Path

from .state import (
    Candidate,
    CandidateRecord,
    DecodedToken,
    DecodeState,
    DecodeTrace,
    Mode,
    StepRecord,
)

TRACE_FORMAT_VERSION = 1

_UNMASK_ROW_LEN = 5
_DECODED_ROW_LEN = 7


def _candidate_obj(cand: Candidate) -> dict:
    return {
        "prompt_len": cand.state.prompt_len,
        "tokens": list(cand.state.tokens),
        "masked": list(cand.state.masked),
        "cum_score": cand.cum_score,
        "token_conf_sum": cand.token_conf_sum,
        "steps_taken": cand.steps_taken,
        "last_mode": cand.last_mode.value,
        "decoded": [
            [d.position, d.token, d.confidence, d.max_prob, d.step_index, d.mode.value, d.mask_rank]
            for d in cand.decoded
        ],
    }


def _step_obj(rec: StepRecord) -> dict:
    return {
        "step": rec.step_index,
        "forward_passes": rec.forward_passes,
        "pool_size": rec.pool_size,
        "beam_width_after": rec.beam_width_after,
        "top_child_mode": rec.top_child_mode.value,
        "candidates": [
            {
                "id": c.cand_id,
                "parent": c.parent_id,
                "mode": c.mode.value,
                "fallback": c.fallback,
                "unmasked": [list(row) for row in c.unmasked],
            }
            for c in rec.per_candidate
        ],
    }


def trace_to_lines(trace: DecodeTrace) -> list[str]:
    """The serialized form, one JSON object per list entry (no newlines)."""
    header = {
        "format_version": TRACE_FORMAT_VERSION,
        "kind": "decode_trace",
        "total_forward_passes": trace.total_forward_passes,
        "final": _candidate_obj(trace.final_candidate),
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    lines.extend(json.dumps(_step_obj(r), separators=(",", ":")) for r in trace.records)
    return lines


def emit_trace(trace: DecodeTrace, path: str | Path) -> None:
    """Write the trace to ``path``; a trace with no steps yields a header-only file."""
    Path(path).write_text("".join(line + "\n" for line in trace_to_lines(trace)), encoding="utf-8")


def _parse_candidate(obj: dict) -> Candidate:
    decoded = []
    for row in obj["decoded"]:
        if len(row) != _DECODED_ROW_LEN:
            raise ValueError(f"decoded row has {len(row)} fields, expected {_DECODED_ROW_LEN}")
        pos, tok, conf, max_prob, step, mode, rank = row
        decoded.append(
            DecodedToken(
                position=int(pos),
                token=int(tok),
                confidence=float(conf),
                max_prob=float(max_prob),
                step_index=int(step),
                mode=Mode(mode),
                mask_rank=int(rank),
            )
        )
    state = DecodeState(
        prompt_len=int(obj["prompt_len"]),
        tokens=tuple(int(t) for t in obj["tokens"]),
        masked=tuple(int(p) for p in obj["masked"]),
    )
    return Candidate(
        state=state,
        cum_score=float(obj["cum_score"]),
        token_conf_sum=float(obj["token_conf_sum"]),
        steps_taken=int(obj["steps_taken"]),
        last_mode=Mode(obj["last_mode"]),
        decoded=tuple(decoded),
    )


def _parse_unmasked(rows: Sequence) -> tuple[tuple[int, int, float, float, int], ...]:
    out = []
    for row in rows:
        if len(row) != _UNMASK_ROW_LEN:
            raise ValueError(f"unmasked row has {len(row)} fields, expected {_UNMASK_ROW_LEN}")
        pos, tok, conf, max_prob, rank = row
        out.append((int(pos), int(tok), float(conf), float(max_prob), int(rank)))
    return tuple(out)


def _parse_step(obj: dict) -> StepRecord:
    return StepRecord(
        step_index=int(obj["step"]),
        per_candidate=tuple(
            CandidateRecord(
                cand_id=int(c["id"]),
                parent_id=int(c["parent"]),
                mode=Mode(c["mode"]),
                unmasked=_parse_unmasked(c["unmasked"]),
                fallback=bool(c["fallback"]),
            )
            for c in obj["candidates"]
        ),
        forward_passes=int(obj["forward_passes"]),
        beam_width_after=int(obj["beam_width_after"]),
        pool_size=int(obj["pool_size"]),
        top_child_mode=Mode(obj["top_child_mode"]),
    )


def parse_trace_lines(lines: Iterable[str]) -> DecodeTrace:
    """Inverse of trace_to_lines. Raises ValueError on any malformed content."""
    stripped = [ln for ln in (ln.strip() for ln in lines) if ln]
    if not stripped:
        raise ValueError("trace file is empty")
    try:
        header = json.loads(stripped[0])
    except json.JSONDecodeError as exc:
        raise ValueError(f"trace header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("kind") != "decode_trace":
        raise ValueError("first line is not a decode_trace header")
    if header.get("format_version") != TRACE_FORMAT_VERSION:
        raise ValueError(f"unsupported trace format_version {header.get('format_version')!r}")
    records = []
    for i, line in enumerate(stripped[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {i} is not valid JSON: {exc}") from exc
        records.append(_parse_step(obj))
    return DecodeTrace(
        records=tuple(records),
        final_candidate=_parse_candidate(header["final"]),
        total_forward_passes=int(header["total_forward_passes"]),
        wall_time=0.0,
    )


def parse_trace(path: str | Path) -> DecodeTrace:
    return parse_trace_lines(Path(path).read_text(encoding="utf-8").splitlines())
