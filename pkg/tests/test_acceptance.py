"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every tolerance is pinned here exactly as stated; nothing is calibrated at
runtime except the explicitly-allowed constant in the sample-complexity
shape check (fitted at n=8, then asserted at larger n).
"""

import time

import numpy as np
import pytest

from amortized_shap.explain import explain, fourier_to_mobius, shift_spectrum
from amortized_shap.models import (
    SyntheticLandscapeSpec,
    make_synthetic,
)
from amortized_shap.oracles import (
    brute_force_faith_shap,
    brute_force_shap,
    run_benchmark,
)
from amortized_shap.qary import (
    DenseLandscape,
    QaryVector,
    dense_fourier,
    inverse_fourier,
    inverse_qary_mobius,
    inverse_set_mobius,
    qary_mobius_dense,
    set_mobius,
)
from amortized_shap.sketch import SketchConfig, sketch


def _report(name: str, run):
    try:
        run()
    except Exception:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


def _sweep_cases():
    """20 deterministic (q, n, s, lmax) cases inside the stated grid."""
    grid = [(2, 4), (2, 5), (2, 6), (3, 4), (3, 5), (3, 6), (4, 4), (4, 5), (4, 6)]
    cases = []
    for i in range(20):
        q, n = grid[i % len(grid)]
        lmax = 1 + i % 3
        s = min(4 + i % 9, 12)
        cases.append(SyntheticLandscapeSpec(q=q, n=n, s=s, lmax=lmax, seed=100 + i))
    return cases


def _queries(q, n, seed, count=5):
    rng = np.random.default_rng(seed)
    return [QaryVector(tuple(int(v) for v in rng.integers(0, q, n)), q) for _ in range(count)]


@pytest.fixture(scope="module")
def sweep():
    """Shared exact-mode sketches and reports for criteria 1, 2, 5, 6."""
    out = []
    for spec in _sweep_cases():
        model, truth = make_synthetic(spec)
        spectrum, diag = sketch(model, SketchConfig(exact=True, lmax=spec.lmax))
        queries = _queries(spec.q, spec.n, seed=spec.seed)
        reports = [explain(spectrum, x, spec.lmax) for x in queries]
        out.append((spec, model, spectrum, queries, reports))
    return out


class TestCriterion1OracleShap:
    def test_pipeline_shap_matches_brute_force(self, sweep):
        def run():
            start = time.perf_counter()
            worst = 0.0
            for spec, model, _spectrum, queries, reports in sweep:
                for x, report in zip(queries, reports):
                    oracle = brute_force_shap(model, x)
                    worst = max(worst, float(np.max(np.abs(report.shap - oracle))))
            assert worst < 1e-6, f"max abs error {worst}"
            assert time.perf_counter() - start < 120

        _report("1 oracle-equivalence-shap", run)


class TestCriterion2OracleFaithShap:
    def test_pipeline_interactions_match_brute_force(self, sweep):
        def run():
            worst = 0.0
            for spec, model, _spectrum, queries, reports in sweep:
                for x, report in zip(queries, reports):
                    oracle = brute_force_faith_shap(model, x, spec.lmax)
                    keys = set(oracle) | set(report.interactions)
                    for T in keys:
                        err = abs(oracle.get(T, 0.0) - report.interactions.get(T, 0.0))
                        worst = max(worst, err)
            assert worst < 1e-6, f"max abs error {worst}"

        _report("2a oracle-equivalence-faith-shap", run)

    def test_order_one_equals_shap(self, sweep):
        def run():
            for spec, _model, spectrum, queries, _reports in sweep:
                for x in queries:
                    report = explain(spectrum, x, order=1)
                    for i in range(spec.n):
                        single = report.interactions.get((i,), 0.0)
                        assert abs(single - report.shap[i]) < 1e-9

        _report("2b order-one-boundary", run)


class TestCriterion3SparseRecovery:
    def test_recovery_rate(self):
        def run():
            start = time.perf_counter()
            hits = 0
            for seed in range(100):
                spec = SyntheticLandscapeSpec(q=4, n=10, s=10, lmax=3, seed=seed)
                model, truth = make_synthetic(spec)
                spectrum, _ = sketch(model, SketchConfig(b=3, lmax=3, seed=seed))
                if set(spectrum.terms) == set(truth.terms) and all(
                    abs(spectrum.terms[y] - truth.terms[y]) < 1e-6 for y in truth.terms
                ):
                    hits += 1
            assert hits >= 95, f"only {hits}/100 instances recovered exactly"
            assert time.perf_counter() - start < 300
            print(f"  (sparse recovery: {hits}/100)")

        _report("3 sparse-recovery", run)


class TestCriterion4TransformRoundTrips:
    def test_fourier_and_mobius_roundtrips(self):
        def run():
            shapes = [(2, 8), (2, 10), (3, 5), (3, 6), (3, 7), (4, 4), (4, 5), (4, 6)]
            rng = np.random.default_rng(99)
            for i in range(50):
                q, n = shapes[i % len(shapes)]
                assert q**n <= 4096
                f = DenseLandscape(q, n, rng.normal(size=q**n))
                F = dense_fourier(f, prune_tol=0.0)
                M = qary_mobius_dense(f)
                probes = rng.integers(0, q**n, size=64)
                for idx in probes:
                    m = QaryVector.from_index(int(idx), q, n)
                    assert abs(inverse_fourier(F, m) - f.values[idx]) < 1e-9
                    assert abs(inverse_qary_mobius(M, m) - f.values[idx]) < 1e-9
                table_n = min(n, 8)
                table = {
                    frozenset(j for j in range(table_n) if mask >> j & 1): float(
                        rng.normal()
                    )
                    for mask in range(1 << table_n)
                }
                a = set_mobius(table, table_n)
                for T, value in table.items():
                    assert abs(inverse_set_mobius(a, T) - value) < 1e-9

        _report("4a transform-roundtrips", run)

    def test_qary_to_set_conversion_agrees_with_direct(self):
        def run():
            import itertools

            from amortized_shap.oracles import qary_to_set_mobius, uniform_value_table

            q, n = 3, 4
            model, truth = make_synthetic(
                SyntheticLandscapeSpec(q=q, n=n, s=7, lmax=3, seed=41)
            )
            x = QaryVector((1, 0, 2, 1), q)
            M = fourier_to_mobius(shift_spectrum(truth, x), lmax=3)
            a = set_mobius(uniform_value_table(model, x), n)
            for size in range(n + 1):
                for T in itertools.combinations(range(n), size):
                    direct = a.terms[frozenset(T)]
                    converted = qary_to_set_mobius(M, T)
                    assert abs(direct - converted) < 1e-8

        _report("4b qary-to-set-conversion", run)


class TestCriterion5PruningBound:
    def test_mobius_count_bounded(self, sweep):
        def run():
            for spec, _model, spectrum, queries, _reports in sweep:
                bound = spec.s * spec.q**spec.lmax
                for x in queries:
                    M = fourier_to_mobius(shift_spectrum(spectrum, x), spec.lmax)
                    assert len(M.terms) <= bound, (len(M.terms), bound)

        _report("5 pruning-bound", run)


class TestCriterion6Efficiency:
    def test_shap_sums_to_output_minus_baseline(self, sweep):
        def run():
            for spec, model, spectrum, queries, reports in sweep:
                zero_coeff = spectrum.terms.get((0,) * spec.n, 0j).real
                for x, report in zip(queries, reports):
                    fx = float(model.eval_batch([x])[0])
                    assert abs(report.shap.sum() - (fx - zero_coeff)) < 1e-6

        _report("6 efficiency-axiom", run)


class TestCriterion7ScalingShape:
    def test_query_count_fits_quadratic_budget(self):
        def run():
            q, s, lmax, b = 4, 8, 2, 3
            used = {}
            for n in (8, 12, 16):
                spec = SyntheticLandscapeSpec(q=q, n=n, s=s, lmax=lmax, seed=50 + n)
                model, _ = make_synthetic(spec)
                _, diag = sketch(model, SketchConfig(b=b, lmax=lmax, seed=50 + n))
                used[n] = diag.queries_used
            constant = used[8] / (s * 8**2)
            for n in (12, 16):
                assert used[n] <= constant * s * n**2, (n, used[n], constant)
            print(f"  (queries used: {used}, fitted constant {constant:.3f})")

        _report("7a sample-complexity-shape", run)

    def test_per_query_time_flat_in_n(self):
        def run():
            q, s, lmax = 4, 12, 3
            times = {}
            for n in (10, 20):
                _, truth = make_synthetic(
                    SyntheticLandscapeSpec(q=q, n=n, s=s, lmax=lmax, seed=77)
                )
                queries = _queries(q, n, seed=n, count=30)
                explain(truth, queries[0], lmax)  # warm-up
                samples = []
                for x in queries:
                    start = time.perf_counter()
                    explain(truth, x, lmax)
                    samples.append(time.perf_counter() - start)
                times[n] = float(np.median(samples))
            assert times[20] <= 2 * times[10], times
            print(f"  (median explain time: {times})")

        _report("7b per-query-time-flat", run)


class TestCriterion8BenchmarkCrossover:
    def test_crossover_exists_and_slopes_ordered(self):
        def run():
            # baseline needs >= 10^4 model evaluations per query here:
            # 1000 permutations x (n + 1) points
            q, n = 3, 9
            model, _ = make_synthetic(
                SyntheticLandscapeSpec(q=q, n=n, s=4, lmax=2, seed=60)
            )
            queries = _queries(q, n, seed=61, count=3)
            ledger, _, _ = run_benchmark(
                model,
                SketchConfig(b=2, lmax=2, seed=60),
                queries,
                baseline="mc",
                num_permutations=1000,
            )
            assert ledger.mean_explain_time() < ledger.mean_baseline_time()
            crossover = ledger.crossover()
            assert crossover is not None
            assert ledger.amortized_cost(crossover) < ledger.baseline_cost(crossover)
            print(f"  (crossover at k={crossover})")

        _report("8 benchmark-crossover", run)
