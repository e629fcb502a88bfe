"""The worker wire protocol, frame by frame, then through a real subprocess.

First an in-process loopback session with every frame printed, then the
same stub model spawned as a child process; both must produce identical
predictions because floats travel with 17 significant digits.
"""

from maskbeam import (
    DecodeConfig,
    StubBackend,
    Strategy,
    Vocabulary,
    decode,
    initial_state,
    loopback_connection,
    spawn_worker,
    traces_equal,
)
from maskbeam.mockworker import MockWorker
from maskbeam.protocol import LoopbackTransport, WorkerConnection


class PrintingTransport(LoopbackTransport):
    def send_line(self, line):
        print(f"  -> {line}")
        super().send_line(line)

    def recv_line(self, timeout):
        line = super().recv_line(timeout)
        shown = line if len(line) <= 100 else line[:97] + "..."
        print(f"  <- {shown}")
        return line


def main():
    vocab = Vocabulary(size=16, mask_id=0)

    print("loopback session:")
    conn = WorkerConnection(PrintingTransport(MockWorker(mode="stub")))
    conn.predict_batch([initial_state((3, 1), 2, vocab)], topk=3)
    conn.close()

    print("\nfull decode through a spawned worker process:")
    cfg = DecodeConfig(strategy=Strategy.SOAR, tau=0.9, beam_width=2, max_length=8, topk=4)
    _, local = decode(cfg, StubBackend())
    with spawn_worker("python3 -m maskbeam.mockworker --mode stub") as remote:
        _, remoted = decode(cfg, remote)
    print(f"  in-process and subprocess traces identical: {traces_equal(local, remoted)}")

    print("\nthe loopback transport also hosts deliberately broken workers:")
    with loopback_connection(MockWorker(mode="uniform")) as conn:
        [matrix] = conn.predict_batch([initial_state((), 1, vocab)], topk=4)
        print(f"  uniform worker confidence: {matrix.entries[0].top_probs[0]} (exactly 1/16)")


if __name__ == "__main__":
    main()
