"""Command line front end: decode one sequence, run a bench, query the oracle.

Every flag can also be supplied through a JSON config file (--config); flags
given on the command line win. The planted backend reproduces the default
bench instance and prompt for the given seed, so a decode here matches the
same seed inside a benchmark run.
"""

from __future__ import annotations

import argparse
import json
import sys
from types import SimpleNamespace

from .backends import StubBackend
from .bench import (
    DEFAULT_BENCH_CONFIGS,
    RunSpec,
    bench_backend,
    bench_prompt,
    exhaustive_order_oracle,
    planted_accuracy,
    run_benchmark,
)
from .errors import DecodingError
from .metrics import ConfidenceMetric, average_confidence, global_arness
from .protocol import spawn_worker
from .schedulers import DecodeConfig, Strategy, decode
from .trace import emit_trace

_BACKENDS = ("planted", "worker", "stub")

_DECODE_DEFAULTS = {
    "strategy": "greedy", "tau": 0.9, "beam": 1, "n": 1, "metric": "prob",
    "max_length": 32, "seed": 0, "backend": "planted", "worker_cmd": None,
    "topk": 8, "trace_out": None, "prompt": None, "arness_k": 5,
}
_BENCH_DEFAULTS = {
    "n_instances": 200, "length": 32, "arness_k": 5, "first_seed": 0,
    "backend": "planted", "worker_cmd": None, "report_out": None, "trace_dir": None,
}
_ORACLE_DEFAULTS = {
    "max_length": 4, "seed": 0, "metric": "prob", "backend": "planted",
    "worker_cmd": None, "topk": 8, "prompt": None,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskbeam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    dec = sub.add_parser("decode", help="decode one sequence and print a summary")
    dec.add_argument("--strategy", choices=[s.value for s in Strategy])
    dec.add_argument("--tau", type=float)
    dec.add_argument("--beam", type=int, help="beam width K")
    dec.add_argument("--n", type=int, help="positions committed per step")
    dec.add_argument("--metric", choices=[m.value for m in ConfidenceMetric])
    dec.add_argument("--max-length", type=int)
    dec.add_argument("--seed", type=int)
    dec.add_argument("--backend", choices=_BACKENDS)
    dec.add_argument("--worker-cmd", help="command line of a worker process")
    dec.add_argument("--topk", type=int)
    dec.add_argument("--trace-out", help="write the decode trace here")
    dec.add_argument("--prompt", help="comma-separated prompt token ids")
    dec.add_argument("--arness-k", type=int)
    dec.add_argument("--config", help="JSON file of flag defaults")

    ben = sub.add_parser("bench", help="run a benchmark and print the table")
    ben.add_argument("--n-instances", type=int)
    ben.add_argument("--length", type=int)
    ben.add_argument("--arness-k", type=int)
    ben.add_argument("--first-seed", type=int)
    ben.add_argument("--backend", choices=("planted", "worker"))
    ben.add_argument("--worker-cmd")
    ben.add_argument("--report-out", help="write the JSON report here")
    ben.add_argument("--trace-dir", help="write one trace file per run here")
    ben.add_argument("--config", help="JSON file of flag defaults")

    orc = sub.add_parser("oracle", help="exhaustive best-order search (short lengths)")
    orc.add_argument("--max-length", type=int)
    orc.add_argument("--seed", type=int)
    orc.add_argument("--metric", choices=[m.value for m in ConfidenceMetric])
    orc.add_argument("--backend", choices=_BACKENDS)
    orc.add_argument("--worker-cmd")
    orc.add_argument("--topk", type=int)
    orc.add_argument("--prompt", help="comma-separated prompt token ids")
    orc.add_argument("--config", help="JSON file of flag defaults")
    return parser


def _resolve(args: argparse.Namespace, defaults: dict) -> SimpleNamespace:
    """Merge precedence: command line flag, then config file, then default."""
    overrides = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(defaults)
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    merged = {}
    for key, hard in defaults.items():
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else overrides.get(key, hard)
    return SimpleNamespace(**merged)


def _parse_prompt(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(int(tok) for tok in text.split(","))


def _make_backend(opt: SimpleNamespace, length: int):
    if opt.backend == "worker":
        if not opt.worker_cmd:
            raise SystemExit("--backend worker requires --worker-cmd")
        return spawn_worker(opt.worker_cmd)
    if opt.backend == "stub":
        return StubBackend(seed=opt.seed)
    return bench_backend(opt.seed, length)


def _default_prompt(opt: SimpleNamespace, backend) -> tuple[int, ...]:
    if opt.prompt is not None:
        return _parse_prompt(opt.prompt)
    if opt.backend == "planted":
        return bench_prompt(opt.seed, backend.vocabulary().size)
    return ()


def _cmd_decode(args: argparse.Namespace) -> int:
    opt = _resolve(args, _DECODE_DEFAULTS)
    backend = _make_backend(opt, opt.max_length)
    try:
        config = DecodeConfig(
            strategy=Strategy(opt.strategy),
            k_per_step=opt.n,
            n_parallel=opt.n,
            tau=opt.tau,
            beam_width=opt.beam,
            metric=ConfidenceMetric(opt.metric),
            max_length=opt.max_length,
            seed=opt.seed,
            topk=opt.topk,
        )
        prompt = _default_prompt(opt, backend)
        tokens, tr = decode(config, backend, prompt)
        if opt.trace_out:
            emit_trace(tr, opt.trace_out)
        summary = {
            "tokens": list(tokens),
            "generated": list(tokens[len(prompt):]),
            "average_confidence": average_confidence(tr),
            f"global_arness_at_{opt.arness_k}": global_arness(tr, opt.arness_k),
            "forward_passes": tr.total_forward_passes,
            "steps": len(tr.records),
        }
        if opt.backend == "planted":
            summary["planted_accuracy"] = planted_accuracy(tokens, backend)
        print(json.dumps(summary, indent=2))
    finally:
        if opt.backend == "worker":
            backend.close()
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    opt = _resolve(args, _BENCH_DEFAULTS)
    if opt.backend == "worker" and not opt.worker_cmd:
        raise SystemExit("--backend worker requires --worker-cmd")
    spec = RunSpec(
        n_instances=opt.n_instances,
        length=opt.length,
        configs=DEFAULT_BENCH_CONFIGS,
        arness_k=opt.arness_k,
        first_seed=opt.first_seed,
        worker_cmd=opt.worker_cmd if opt.backend == "worker" else None,
        report_path=opt.report_out,
        trace_dir=opt.trace_dir,
    )
    report = run_benchmark(spec)
    print(report.render_table())
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    opt = _resolve(args, _ORACLE_DEFAULTS)
    opt.max_length = int(opt.max_length)
    backend = _make_backend(opt, opt.max_length)
    try:
        prompt = _default_prompt(opt, backend)
        tokens, avg = exhaustive_order_oracle(
            backend, prompt, opt.max_length, ConfidenceMetric(opt.metric), opt.topk
        )
        print(json.dumps({"tokens": list(tokens), "average_confidence": avg}, indent=2))
    finally:
        if opt.backend == "worker":
            backend.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"decode": _cmd_decode, "bench": _cmd_bench, "oracle": _cmd_oracle}[args.command]
    try:
        return handler(args)
    except DecodingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
