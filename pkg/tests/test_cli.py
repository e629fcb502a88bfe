import json
import subprocess

import pytest

from maskbeam.bench import bench_backend, bench_prompt, exhaustive_order_oracle, parse_report
from maskbeam.cli import main
from maskbeam.trace import parse_trace


def run_cli(capsys, *argv):
    rc = main(list(argv))
    out = capsys.readouterr().out
    return rc, out


def decode_json(capsys, *argv):
    rc, out = run_cli(capsys, "decode", *argv)
    assert rc == 0
    return json.loads(out)


class TestDecodeCommand:
    def test_summary_fields(self, capsys):
        summary = decode_json(capsys, "--max-length", "8", "--seed", "1")
        assert len(summary["generated"]) == 8
        assert summary["forward_passes"] == 8
        assert summary["steps"] == 8
        assert 0.0 <= summary["average_confidence"] <= 1.0
        assert 0.0 <= summary["global_arness_at_5"] <= 1.0
        assert 0.0 <= summary["planted_accuracy"] <= 1.0

    def test_deterministic(self, capsys):
        argv = ("decode", "--max-length", "8", "--seed", "1", "--strategy", "soar",
                "--tau", "0.9", "--beam", "2")
        _, first = run_cli(capsys, *argv)
        _, second = run_cli(capsys, *argv)
        assert first == second

    def test_prompt_flag_overrides_seeded_prompt(self, capsys):
        summary = decode_json(capsys, "--max-length", "6", "--prompt", "3,5")
        assert summary["tokens"][:2] == [3, 5]
        assert len(summary["generated"]) == 6

    def test_trace_out_writes_a_parsable_trace(self, capsys, tmp_path):
        path = tmp_path / "run.trace"
        summary = decode_json(
            capsys, "--max-length", "6", "--seed", "2", "--trace-out", str(path)
        )
        trace = parse_trace(path)
        assert trace.total_forward_passes == summary["forward_passes"]
        assert list(trace.final_candidate.state.tokens) == summary["tokens"]

    def test_stub_backend_has_no_planted_accuracy(self, capsys):
        summary = decode_json(capsys, "--max-length", "5", "--backend", "stub")
        assert "planted_accuracy" not in summary
        assert len(summary["tokens"]) == 5

    def test_parallel_strategy_flags(self, capsys):
        summary = decode_json(
            capsys, "--max-length", "8", "--strategy", "fixed_parallel", "--n", "2"
        )
        assert summary["forward_passes"] == 4

    def test_worker_backend_requires_command(self, capsys):
        with pytest.raises(SystemExit, match="worker-cmd"):
            main(["decode", "--backend", "worker"])

    def test_worker_backend_decodes(self, capsys):
        summary = decode_json(
            capsys,
            "--max-length", "4",
            "--backend", "worker",
            "--worker-cmd", "python3 -m maskbeam.mockworker --mode stub",
        )
        assert len(summary["generated"]) == 4
        assert "planted_accuracy" not in summary


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_win(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"max_length": 6, "seed": 2}))
        from_config = decode_json(capsys, "--config", str(cfg), "--seed", "3")
        direct = decode_json(capsys, "--max-length", "6", "--seed", "3")
        assert from_config == direct

    def test_unknown_keys_rejected(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"maks_length": 6}))
        with pytest.raises(SystemExit, match="maks_length"):
            main(["decode", "--config", str(cfg)])


class TestBenchCommand:
    def test_table_and_report(self, capsys, tmp_path):
        path = tmp_path / "report.json"
        rc, out = run_cli(
            capsys, "bench",
            "--n-instances", "1", "--length", "12", "--report-out", str(path),
        )
        assert rc == 0
        for name in ("greedy", "fixed_parallel", "pbs", "soar"):
            assert name in out
        report = parse_report(path)
        assert report.n_instances == 1
        assert report.rows[0].total_forward_passes == 12


class TestOracleCommand:
    def test_matches_direct_call(self, capsys):
        rc, out = run_cli(capsys, "oracle", "--max-length", "3", "--seed", "1")
        assert rc == 0
        got = json.loads(out)
        backend = bench_backend(1, 3)
        tokens, conf = exhaustive_order_oracle(backend, bench_prompt(1, 64), 3)
        assert got["tokens"] == list(tokens)
        assert got["average_confidence"] == conf

    def test_over_cap_length_reports_error(self, capsys):
        rc = main(["oracle", "--max-length", "7"])
        captured = capsys.readouterr()
        assert rc == 2
        assert "error:" in captured.err


class TestModuleEntry:
    def test_python_dash_m_matches_in_process(self, capsys):
        argv = ["decode", "--max-length", "6", "--seed", "4"]
        proc = subprocess.run(
            ["python3", "-m", "maskbeam", *argv], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout) == decode_json(capsys, *argv[1:])
