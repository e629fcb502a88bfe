"""Conformance gate for the worker: golden replay plus decode parity.

The worker package itself never imports the engine; this test drives it
from the client side, which is exactly how any foreign implementation
would be certified. One verdict line prints outside pytest's capture.
"""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from maskbeam import DecodeConfig, Strategy, StubBackend, decode, spawn_worker, traces_equal

GOLDEN = Path(__file__).resolve().parents[2] / "tests" / "golden" / "protocol_session.jsonl"

WORKER_CMD = [sys.executable, "-m", "dlmworker"]


@pytest.fixture
def verdict(capsys):
    def say(line):
        with capsys.disabled():
            print(line, flush=True)

    def check(tag, body):
        try:
            body()
        except BaseException as exc:
            say(f"[acceptance] {tag}: FAIL ({type(exc).__name__})")
            raise
        say(f"[acceptance] {tag}: PASS")

    return check


def replay_golden_session():
    entries = [json.loads(line) for line in GOLDEN.read_text().splitlines()]
    proc = subprocess.Popen(WORKER_CMD, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
    try:
        for entry in entries:
            if entry["dir"] == "c2w":
                proc.stdin.write(entry["frame"] + "\n")
                proc.stdin.flush()
            else:
                got = proc.stdout.readline().rstrip("\n")
                assert got == entry["frame"], f"worker frame diverged from golden:\n{got}"
    finally:
        proc.stdin.close()
        assert proc.wait(5) == 0


def decode_through_shim_matches_in_process():
    config = DecodeConfig(strategy=Strategy.SOAR, tau=0.9, beam_width=2, max_length=12)
    prompt = (3, 1)
    with spawn_worker(WORKER_CMD) as conn:
        remote_tokens, remote_trace = decode(config, conn, prompt)
    local_tokens, local_trace = decode(config, StubBackend(), prompt)
    assert remote_tokens == local_tokens
    assert traces_equal(remote_trace, local_trace)


def test_shim_conformance(verdict):
    def body():
        replay_golden_session()
        decode_through_shim_matches_in_process()

    verdict("9/9 worker shim replays goldens and matches the in-process stub", body)
