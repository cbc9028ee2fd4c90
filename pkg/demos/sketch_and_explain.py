"""Sketch a sparse synthetic model once, then explain several queries.

Run:  python3 demos/sketch_and_explain.py
"""

import numpy as np

from amortized_shap import (
    QaryVector,
    SketchConfig,
    SyntheticLandscapeSpec,
    explain,
    make_synthetic,
    sketch,
)

q, n = 4, 10
spec = SyntheticLandscapeSpec(q=q, n=n, s=10, lmax=3, seed=5)
model, truth = make_synthetic(spec)
print(f"synthetic model on Z_{q}^{n} with {truth.sparsity} spectral terms")

spectrum, diag = sketch(model, SketchConfig(b=3, lmax=3, seed=5))
print(f"sketched with {diag.queries_used} model evaluations "
      f"({diag.coefficients_recovered} coefficients, gave_up={diag.gave_up})")

rng = np.random.default_rng(0)
for _ in range(3):
    x = QaryVector(tuple(int(v) for v in rng.integers(0, q, n)), q)
    report = explain(spectrum, x, order=3)
    print(f"\nquery {x.elems}")
    print(f"  baseline (mean output)    {report.baseline:+.4f}")
    print(f"  prediction from sketch    {report.predicted_value():+.4f}")
    top = np.argsort(-np.abs(report.shap))[:4]
    for i in top:
        print(f"  position {i:2d} symbol {x.elems[i]}   shap {report.shap[i]:+.4f}")
    pairs = sorted(report.interactions.items(), key=lambda kv: -abs(kv[1]))[:3]
    for T, value in pairs:
        if len(T) > 1:
            print(f"  interaction {T}   {value:+.4f}")
