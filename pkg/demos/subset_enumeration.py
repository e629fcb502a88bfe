# Best-first enumeration of top-scoring position subsets, next to the
# brute-force oracle it matches, and on a size where brute force is hopeless.

import math
import time

from maskbeam import brute_force_subsets, min_candidate_count, top_k_subsets

scores = [0.93, 0.91, 0.64, 0.40, 0.22]

print("scores:", scores)
print()
print("top 6 subsets of size 2 (heap frontier vs full enumeration):")
heap = top_k_subsets(scores, n=2, K=6)
brute = brute_force_subsets(scores, n=2, K=6)
for h, b in zip(heap, brute):
    marker = "ok" if h == b else "MISMATCH"
    print(f"  indices {h.indices}  total {h.total:.2f}   [{marker}]")
print()

# How many of the best positions even need to enter the search: the smallest
# m with C(m, n) >= K candidate subsets.
m = min_candidate_count(mask_count=len(scores), n=2, K=6)
print(f"only the top {m} positions can appear in the top 6 size-2 subsets")
print()

big = sorted((math.sin(i * 12.9898) * 0.5 + 0.5 for i in range(200)), reverse=True)
start = time.perf_counter()
best = top_k_subsets(big, n=5, K=10)
elapsed = time.perf_counter() - start
space = math.comb(len(big), 5)
print(f"200 scores, n=5: search space C(200,5) = {space:,} subsets")
print(f"best-first found the top 10 in {elapsed * 1000:.2f} ms; best total {best[0].total:.4f}")
