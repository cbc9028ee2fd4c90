"""Explanation pipeline against dense-transform and game-theoretic oracles.

The recurring pattern: build a small landscape where everything can be
computed densely, push it through the sparse pipeline, and compare against
an independent dense route (translated landscape, dense Moebius transform,
or explicit coalition-value averaging).
"""

import itertools

import numpy as np
import pytest

from amortized_shap.errors import ContractViolationError, NumericalConsistencyError
from amortized_shap.explain import (
    ExplanationReport,
    aggregate,
    empty_coalition_value,
    explain,
    explain_many,
    faith_shap,
    fourier_to_mobius,
    shap_values,
    shift_spectrum,
    value_function,
)
from amortized_shap.models import (
    SyntheticLandscapeSpec,
    dense_landscape_from_model,
    make_synthetic,
)
from amortized_shap.qary import (
    DenseLandscape,
    FourierSpectrum,
    MobiusTransform,
    QaryVector,
    dense_fourier,
    inverse_fourier,
    qary_mobius_dense,
    set_mobius,
)


def random_landscape(q, n, seed):
    rng = np.random.default_rng(seed)
    return DenseLandscape(q, n, rng.normal(size=q**n))


def sparse_landscape(q, n, s, lmax, seed):
    model, truth = make_synthetic(SyntheticLandscapeSpec(q=q, n=n, s=s, lmax=lmax, seed=seed))
    return dense_landscape_from_model(model), truth


def brute_value(f: DenseLandscape, x: QaryVector, T) -> float:
    """Coalition value by explicit averaging over all completions."""
    idx = tuple(x.elems[i] if i in T else slice(None) for i in range(f.n))
    return float(np.mean(f.grid()[idx]))


class TestShiftSpectrum:
    def test_zero_shift_is_identity(self):
        f = random_landscape(3, 4, seed=0)
        F = dense_fourier(f)
        shifted = shift_spectrum(F, QaryVector((0,) * 4, 3))
        assert shifted.terms == F.terms

    def test_query_lands_on_zero(self):
        f = random_landscape(4, 4, seed=1)
        F = dense_fourier(f, prune_tol=0.0)
        rng = np.random.default_rng(2)
        for _ in range(5):
            x = QaryVector(tuple(rng.integers(0, 4, 4)), 4)
            shifted = shift_spectrum(F, x)
            at_zero = inverse_fourier(shifted, QaryVector((0,) * 4, 4))
            assert at_zero == pytest.approx(f.value_at(x), abs=1e-9)

    def test_shift_reindexes_whole_landscape(self):
        f = random_landscape(3, 4, seed=3)
        F = dense_fourier(f, prune_tol=0.0)
        x = QaryVector((1, 2, 0, 1), 3)
        shifted = shift_spectrum(F, x)
        translated = f.translate(x)
        for idx in range(3**4):
            m = QaryVector.from_index(idx, 3, 4)
            assert inverse_fourier(shifted, m) == pytest.approx(
                translated.value_at(m), abs=1e-9
            )

    def test_magnitudes_preserved(self):
        f = random_landscape(4, 3, seed=4)
        F = dense_fourier(f)
        shifted = shift_spectrum(F, QaryVector((3, 1, 2), 4))
        assert set(shifted.terms) == set(F.terms)
        for y in F.terms:
            assert abs(shifted.terms[y]) == pytest.approx(abs(F.terms[y]), abs=1e-12)

    def test_dimension_mismatch(self):
        F = FourierSpectrum(4, 3, {(0, 1, 0): 1.0})
        with pytest.raises(ContractViolationError):
            shift_spectrum(F, QaryVector((0, 0), 4))


class TestFourierToMobius:
    def test_single_frequency_prunes_outside_support(self):
        # lone coefficient at (2,1,0): any k touching position 2 must vanish
        F = FourierSpectrum(4, 3, {(2, 1, 0): 1.5, (2, 3, 0): 1.5})
        M = fourier_to_mobius(F, lmax=2)
        assert all(k[2] == 0 for k in M.terms)
        assert (0, 1, 1) not in M.terms

    def test_constant_spectrum_gives_single_zero_term(self):
        F = FourierSpectrum(3, 4, {(0, 0, 0, 0): 2.5})
        M = fourier_to_mobius(F, lmax=2)
        assert set(M.terms) == {(0, 0, 0, 0)}
        assert M.terms[(0, 0, 0, 0)] == pytest.approx(2.5)

    @pytest.mark.parametrize("q,n,s,lmax,seed", [(3, 5, 8, 2, 5), (4, 5, 9, 3, 6), (2, 6, 7, 3, 7)])
    def test_matches_dense_mobius_of_shifted_landscape(self, q, n, s, lmax, seed):
        f, truth = sparse_landscape(q, n, s, lmax, seed)
        rng = np.random.default_rng(seed)
        x = QaryVector(tuple(rng.integers(0, q, n)), q)
        M = fourier_to_mobius(shift_spectrum(truth, x), lmax=lmax)
        dense = qary_mobius_dense(f.translate(x), prune_tol=1e-9)
        keys = set(M.terms) | set(dense.terms)
        worst = max(abs(M.terms.get(k, 0.0) - dense.terms.get(k, 0.0)) for k in keys)
        assert worst < 1e-8

    def test_nonzero_count_bound(self):
        q, lmax = 4, 3
        f, truth = sparse_landscape(q, 6, 10, lmax, seed=8)
        x = QaryVector((0, 1, 2, 3, 0, 1), q)
        M = fourier_to_mobius(shift_spectrum(truth, x), lmax=lmax)
        assert len(M.terms) <= truth.sparsity * q**lmax

    def test_overweight_spectrum_rejected(self):
        F = FourierSpectrum(3, 4, {(1, 1, 1, 0): 1.0, (2, 2, 2, 0): 1.0})
        with pytest.raises(ContractViolationError):
            fourier_to_mobius(F, lmax=2)

    def test_asymmetric_spectrum_raises_consistency_error(self):
        # conjugate partner missing: Moebius coefficients stop being real
        F = FourierSpectrum(3, 2, {(1, 0): 1 + 1j})
        with pytest.raises(NumericalConsistencyError):
            fourier_to_mobius(F, lmax=1)


class TestShapValues:
    def test_constant_model_all_zero(self):
        M = MobiusTransform(4, 3, {(0, 0, 0): 3.0})
        np.testing.assert_array_equal(shap_values(M), np.zeros(3))

    def test_single_term_closed_form(self):
        M = MobiusTransform(4, 3, {(2, 0, 0): 1.0})
        np.testing.assert_allclose(shap_values(M), [-1 / 4, 0.0, 0.0])

    def test_untouched_position_is_exactly_zero(self):
        M = MobiusTransform(3, 4, {(1, 0, 2, 0): 0.7, (0, 0, 1, 0): -0.2})
        values = shap_values(M)
        assert values[1] == 0.0 and values[3] == 0.0


class TestFaithShap:
    def test_order_one_equals_shap_exactly(self):
        f, truth = sparse_landscape(3, 5, 6, 1, seed=9)
        x = QaryVector((1, 0, 2, 2, 0), 3)
        M = fourier_to_mobius(shift_spectrum(truth, x), lmax=1)
        singles = faith_shap(M, 1)
        sv = shap_values(M)
        for i in range(5):
            assert singles.get((i,), 0.0) == sv[i]

    def test_constant_model_no_interactions(self):
        M = MobiusTransform(4, 3, {(0, 0, 0): 5.0})
        assert faith_shap(M, 2) == {}
        assert empty_coalition_value(M) == pytest.approx(5.0)

    def test_matches_set_mobius_of_game_by_conversion(self):
        # oracle route: value table -> set Moebius; pipeline route: Theorem-style sum
        q, n, lmax = 3, 5, 2
        f, truth = sparse_landscape(q, n, 8, lmax, seed=10)
        x = QaryVector((0, 2, 1, 0, 2), q)
        M = fourier_to_mobius(shift_spectrum(truth, x), lmax=lmax)
        interactions = faith_shap(M, lmax)
        table = {
            frozenset(T): brute_value(f, x, set(T))
            for size in range(n + 1)
            for T in itertools.combinations(range(n), size)
        }
        a = set_mobius(table, n)
        for size in (1, 2):
            for T in itertools.combinations(range(n), size):
                assert interactions.get(T, 0.0) == pytest.approx(
                    a.terms[frozenset(T)], abs=1e-6
                )


class TestValueFunction:
    def test_full_coalition_equals_model_at_query(self):
        q, n = 3, 4
        f, truth = sparse_landscape(q, n, 6, 2, seed=11)
        x = QaryVector((2, 1, 0, 1), q)
        M = fourier_to_mobius(shift_spectrum(truth, x), lmax=2)
        assert value_function(M, range(n)) == pytest.approx(f.value_at(x), abs=1e-9)

    def test_empty_coalition_equals_global_mean(self):
        q, n = 3, 4
        f, truth = sparse_landscape(q, n, 6, 2, seed=12)
        x = QaryVector((0, 0, 2, 1), q)
        M = fourier_to_mobius(shift_spectrum(truth, x), lmax=2)
        assert value_function(M, ()) == pytest.approx(float(f.values.mean()), abs=1e-9)
        assert empty_coalition_value(M) == pytest.approx(float(f.values.mean()), abs=1e-9)

    def test_matches_brute_force_averaging_on_all_subsets(self):
        q, n = 3, 4
        f, truth = sparse_landscape(q, n, 7, 2, seed=13)
        x = QaryVector((1, 2, 0, 2), q)
        M = fourier_to_mobius(shift_spectrum(truth, x), lmax=2)
        for size in range(n + 1):
            for T in itertools.combinations(range(n), size):
                assert value_function(M, T) == pytest.approx(
                    brute_value(f, x, set(T)), abs=1e-8
                )


class TestExplainPipeline:
    def test_efficiency(self):
        q, n = 4, 5
        f, truth = sparse_landscape(q, n, 8, 3, seed=14)
        rng = np.random.default_rng(14)
        for _ in range(5):
            x = QaryVector(tuple(rng.integers(0, q, n)), q)
            report = explain(truth, x, order=3)
            assert report.shap.sum() == pytest.approx(
                f.value_at(x) - report.baseline, abs=1e-6
            )

    def test_null_position_exactly_zero(self):
        # no frequency touches position 3
        F = FourierSpectrum(4, 4, {(1, 2, 0, 0): 1 + 1j, (3, 2, 0, 0): 1 - 1j})
        report = explain(F, QaryVector((0, 1, 2, 3), 4), order=2)
        assert report.shap[2] == 0.0 and report.shap[3] == 0.0

    def test_frame_consistency_translation_metamorphic(self):
        q, n = 3, 4
        f, truth = sparse_landscape(q, n, 6, 2, seed=15)
        x = QaryVector((2, 0, 1, 2), q)
        direct = explain(truth, x, order=2)
        translated = dense_fourier(f.translate(x))
        at_origin = explain(translated, QaryVector((0,) * n, q), order=2)
        np.testing.assert_allclose(direct.shap, at_origin.shap, atol=1e-8)
        keys = set(direct.interactions) | set(at_origin.interactions)
        for T in keys:
            assert direct.interactions.get(T, 0.0) == pytest.approx(
                at_origin.interactions.get(T, 0.0), abs=1e-8
            )

    def test_symbol_relabeling_invariance(self):
        q, n = 3, 4
        f, truth = sparse_landscape(q, n, 6, 2, seed=16)
        x = QaryVector((1, 0, 2, 1), q)
        perm = [2, 0, 1]  # sigma: symbol -> new symbol
        inverse = np.argsort(perm)
        relabeled_vals = np.empty_like(f.values)
        for idx in range(q**n):
            m = QaryVector.from_index(idx, q, n)
            src = QaryVector(tuple(int(inverse[e]) for e in m.elems), q)
            relabeled_vals[idx] = f.value_at(src)
        g = DenseLandscape(q, n, relabeled_vals)
        gx = QaryVector(tuple(perm[e] for e in x.elems), q)
        original = explain(dense_fourier(f), x, order=2)
        relabeled = explain(dense_fourier(g), gx, order=2)
        np.testing.assert_allclose(original.shap, relabeled.shap, atol=1e-8)

    def test_order_one_report_interactions_equal_shap(self):
        _, truth = sparse_landscape(4, 5, 8, 3, seed=17)
        report = explain(truth, QaryVector((0, 3, 1, 2, 0), 4), order=1)
        for i in range(5):
            assert report.interactions.get((i,), 0.0) == report.shap[i]

    def test_explain_many_matches_single(self):
        _, truth = sparse_landscape(3, 5, 6, 2, seed=18)
        rng = np.random.default_rng(18)
        queries = [QaryVector(tuple(rng.integers(0, 3, 5)), 3) for _ in range(6)]
        serial = [explain(truth, x, 2) for x in queries]
        parallel = explain_many(truth, queries, 2, jobs=4)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.shap, b.shap)
            assert a.interactions == b.interactions

    def test_report_json_roundtrip(self):
        _, truth = sparse_landscape(3, 4, 5, 2, seed=19)
        report = explain(truth, QaryVector((1, 1, 0, 2), 3), order=2)
        clone = ExplanationReport.from_json_dict(report.to_json_dict())
        np.testing.assert_array_equal(clone.shap, report.shap)
        assert clone.interactions == report.interactions
        assert clone.baseline == report.baseline


class TestBinaryAlphabetCrossCheck:
    def test_pipeline_matches_classic_subset_mobius_identity(self):
        # q=2: Shapley values are sum_{S containing i} a(v,S)/|S| over the
        # coalition game's subset Moebius coefficients
        q, n = 2, 5
        f, truth = sparse_landscape(q, n, 6, 3, seed=20)
        x = QaryVector((1, 0, 1, 1, 0), q)
        report = explain(truth, x, order=3)
        table = {
            frozenset(T): brute_value(f, x, set(T))
            for size in range(n + 1)
            for T in itertools.combinations(range(n), size)
        }
        a = set_mobius(table, n)
        classic = np.zeros(n)
        for S, coeff in a.terms.items():
            for i in S:
                classic[i] += coeff / len(S)
        np.testing.assert_allclose(report.shap, classic, atol=1e-8)


class TestAggregate:
    @staticmethod
    def _reports(seed, count=6):
        _, truth = sparse_landscape(4, 5, 8, 2, seed=seed)
        rng = np.random.default_rng(seed)
        return [
            explain(truth, QaryVector(tuple(rng.integers(0, 4, 5)), 4), order=2)
            for _ in range(count)
        ]

    def test_single_report_aggregate_echoes_report(self):
        report = self._reports(21, count=1)[0]
        agg = aggregate([report])
        for pos, value in enumerate(report.shap):
            if value == 0.0:
                continue
            sign = "positive" if value > 0 else "negative"
            key = (pos, report.query.elems[pos])
            assert agg.shap_mean[sign][key] == pytest.approx(value)
            assert agg.shap_count[sign][key] == 1

    def test_opposite_signs_land_in_both_tables(self):
        r1, r2 = self._reports(22, count=2)
        pos = int(np.argmax(np.abs(r1.shap)))
        flipped = ExplanationReport(
            query=r2.query,
            shap=-r1.shap,
            interactions={T: -v for T, v in r1.interactions.items()},
            baseline=r1.baseline,
            order=r1.order,
        )
        agg = aggregate([r1, flipped])
        sign = "positive" if r1.shap[pos] > 0 else "negative"
        other = "negative" if sign == "positive" else "positive"
        assert any(k[0] == pos for k in agg.shap_mean[sign])
        assert any(k[0] == pos for k in agg.shap_mean[other])

    def test_histogram_mass_conservation(self):
        reports = self._reports(23)
        agg = aggregate(reports, hist_min_order=2)
        for sign, pick in (("positive", lambda v: v > 0), ("negative", lambda v: v < 0)):
            total_mass = sum(agg.histogram[sign].values())
            direct = sum(
                abs(v)
                for r in reports
                for T, v in r.interactions.items()
                if len(T) >= 2 and pick(v)
            )
            assert total_mass == pytest.approx(direct, abs=1e-9)

    def test_mixed_dimensions_rejected(self):
        r1 = self._reports(24, count=1)[0]
        _, other = sparse_landscape(3, 5, 6, 2, seed=25)
        r2 = explain(other, QaryVector((0, 1, 2, 0, 1), 3), order=2)
        with pytest.raises(ContractViolationError):
            aggregate([r1, r2])
