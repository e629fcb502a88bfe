"""What a decode trace records, step by step.

Emits a switched-search trace to disk, parses it back, and walks the step
records: which mode produced the step's best child, how wide the beam was
afterwards, and in what order positions were committed.
"""

import tempfile
from pathlib import Path

from maskbeam import (
    DecodeConfig,
    Mode,
    Strategy,
    bench_backend,
    bench_prompt,
    decode,
    emit_trace,
    global_arness,
    parse_trace,
)


def main():
    backend = bench_backend(3, 16)
    prompt = bench_prompt(3, backend.vocabulary().size)
    cfg = DecodeConfig(strategy=Strategy.SOAR, tau=0.9, beam_width=2, max_length=16)
    _, trace = decode(cfg, backend, prompt)

    path = Path(tempfile.mkdtemp()) / "demo.trace"
    emit_trace(trace, path)
    trace = parse_trace(path)  # everything below reads the file's view
    print(f"trace written to {path} ({trace.total_forward_passes} forward passes)\n")

    print("step  mode        width  pool  committed")
    for rec in trace.records:
        top = rec.per_candidate[0]
        positions = [u[0] for u in top.unmasked]
        mode = "parallel" if rec.top_child_mode is Mode.PARALLEL else "search"
        print(f"{rec.step_index:4d}  {mode:<10}  {rec.beam_width_after:5d}  "
              f"{rec.pool_size:4d}  {positions}")

    final = trace.final_candidate
    order = [d.position for d in final.decoded]
    print(f"\ncommit order: {order}")
    print(f"fraction committed among the 5 left-most masked: {global_arness(trace, 5):.3f}")
    print(f"per-token average confidence: {final.ranking_key:.4f}")


if __name__ == "__main__":
    main()
