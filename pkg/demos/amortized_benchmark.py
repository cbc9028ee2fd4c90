"""Measure where the one-time sketch beats per-query sampling.

The Monte-Carlo baseline pays thousands of model evaluations per query;
the sketch pays once and then explains each query in milliseconds.  The
ledger locates the crossover point.

Run:  python3 demos/amortized_benchmark.py
"""

import numpy as np

from amortized_shap import (
    QaryVector,
    SketchConfig,
    SyntheticLandscapeSpec,
    make_synthetic,
    run_benchmark,
)

q, n = 3, 9
model, _ = make_synthetic(SyntheticLandscapeSpec(q=q, n=n, s=5, lmax=2, seed=21))
rng = np.random.default_rng(2)
queries = [QaryVector(tuple(int(v) for v in rng.integers(0, q, n)), q) for _ in range(4)]

ledger, spectrum, _ = run_benchmark(
    model,
    SketchConfig(b=2, lmax=2, seed=21),
    queries,
    baseline="mc",
    num_permutations=1000,
)

print(f"sketch: {ledger.sketch_wall_time:.3f}s wall, {ledger.sketch_queries} model evals")
print(f"per-query explain: {ledger.mean_explain_time() * 1e3:.2f} ms")
print(f"per-query baseline: {ledger.mean_baseline_time() * 1e3:.2f} ms")
crossover = ledger.crossover()
print(f"amortized cost undercuts the baseline from k = {crossover} queries on")
for k in sorted({1, crossover, 10 * crossover}):
    print(
        f"  k={k:5d}  total sketch-path {ledger.amortized_cost(k):8.3f}s"
        f"  vs baseline {ledger.baseline_cost(k):8.3f}s"
    )
