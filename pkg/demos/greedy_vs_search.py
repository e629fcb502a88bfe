"""Decode one planted instance under three schedulers and compare.

This instance scatters trap positions whose target stays unrecoverable
until neighbours are revealed. At the start nothing has context, traps
actually look slightly MORE confident than easy positions, and greedy
commits them first, at their most poisoned. Searching over which position
to commit finds orders that build context before touching the traps.
"""

from maskbeam import (
    DecodeConfig,
    Strategy,
    bench_backend,
    bench_prompt,
    decode,
    planted_accuracy,
)

SEED = 1
LENGTH = 32

CONFIGS = {
    "greedy": DecodeConfig(strategy=Strategy.GREEDY, max_length=LENGTH),
    "pbs": DecodeConfig(strategy=Strategy.PBS, n_parallel=1, beam_width=2, max_length=LENGTH),
    "soar": DecodeConfig(strategy=Strategy.SOAR, tau=0.9, beam_width=2, max_length=LENGTH),
}


def show(name, backend, prompt):
    tokens, trace = decode(CONFIGS[name], backend, prompt)
    final = trace.final_candidate
    acc = planted_accuracy(tokens, backend)
    wrong = [
        d.position - len(prompt)
        for d in final.decoded
        if tokens[d.position] != backend.instance.target[d.position - len(prompt)]
    ]
    print(f"{name:>8}: accuracy {acc:.3f}  avg conf {final.ranking_key:.4f}  "
          f"passes {trace.total_forward_passes:3d}  {len(wrong):2d} misses at {sorted(wrong)}")


def main():
    backend = bench_backend(SEED, LENGTH)
    prompt = bench_prompt(SEED, backend.vocabulary().size)
    traps = [i for i, d in enumerate(backend.instance.difficulty) if d > 0.5]
    print(f"trap positions (0-based in the generated region): {traps}")
    print()
    for name in CONFIGS:
        show(name, backend, prompt)
    print()
    print("same model, same prompt; only the commit order differs.")


if __name__ == "__main__":
    main()
