"""A scaled-down benchmark run: 20 instances instead of the default 200.

Prints the same table the `maskbeam bench` command does. Small samples
bounce around; the accuracy and confidence orderings are only pinned down
at the default 200-instance size.
"""

from maskbeam import RunSpec, run_benchmark

report = run_benchmark(RunSpec(n_instances=20))
print(report.render_table())
print()
greedy, _, pbs, soar = report.rows
print(f"position search lifted accuracy by {pbs.mean_accuracy - greedy.mean_accuracy:+.4f}")
print(f"switched search used {soar.total_forward_passes / pbs.total_forward_passes:.2f}x "
      f"the forward passes of the always-on beam")
