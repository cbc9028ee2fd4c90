"""Per-query explanations from a sparse Fourier sketch.

Pipeline: rotate the sketch into the query's frame (so the query itself sits
at the all-zeros point), convert the rotated spectrum into a sparse Moebius
transform, then read attributions off the Moebius coefficients:

* SHAP value of position i:      -sum_{k : k_i > 0} M[k] / (|k|_0 q^|k|_0)
* interaction index of a set T:  (-1)^|T| sum_{k : k_T > 0} M[k] / q^|k|_0

Every step after the sketch touches only the s surviving terms, so the cost
per query does not grow with the sequence length.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, NumericalConsistencyError
from .qary import FourierSpectrum, MobiusTransform, QaryVector

MOBIUS_PRUNE_TOL = 1e-12

# |Im(M[k])| above this fraction of the spectrum L2 norm means the sketch
# lost conjugate symmetry, i.e. it is corrupted; better to fail loudly.
IMAG_RESIDUE_SCALE = 1e-6


def shift_spectrum(F: FourierSpectrum, x: QaryVector) -> FourierSpectrum:
    """Rotate each amplitude by ``w^<x, y>`` so the query maps to zero.

    Evaluating the shifted synthesis sum at ``m`` gives ``f(m + x mod q)``;
    magnitudes are untouched.
    """
    if x.q != F.q or x.n != F.n:
        raise ContractViolationError("query does not match spectrum dimensions")
    omega = 2j * math.pi / F.q
    shifted = {}
    for y, amp in F.terms.items():
        phase = sum(xi * yi for xi, yi in zip(x.elems, y)) % F.q
        shifted[y] = amp * complex(np.exp(omega * phase))
    return FourierSpectrum(F.q, F.n, shifted)


def fourier_to_mobius(
    Fshifted: FourierSpectrum,
    lmax: int,
    prune_tol: float = MOBIUS_PRUNE_TOL,
) -> MobiusTransform:
    """Sparse Moebius coefficients of the query-frame spectrum.

    A frequency y only feeds interaction vectors supported inside supp(y):
    the alternating inner sum factorizes into ``prod_i (w^{k_i y_i} - 1)``
    over the support of k, which vanishes whenever some ``y_i = 0`` meets
    ``k_i != 0``.  Candidates are therefore enumerated per frequency support
    (digits 1..q-1 on each subset), at most ``s * q^lmax`` of them in total.
    """
    q, n = Fshifted.q, Fshifted.n
    if Fshifted.max_weight() > lmax:
        raise ContractViolationError(
            f"spectrum carries weight-{Fshifted.max_weight()} frequencies above lmax={lmax}"
        )
    roots = np.exp(2j * np.pi / q * np.arange(q))

    freqs = list(Fshifted.terms.items())
    supports = [tuple(i for i, e in enumerate(y) if e != 0) for y, _ in freqs]

    # candidate interaction vectors: support subset of some frequency support
    candidates: set[tuple[tuple[int, ...], tuple[int, ...]]] = set()
    for supp in supports:
        for size in range(0, len(supp) + 1):
            for positions in itertools.combinations(supp, size):
                for digits in itertools.product(range(1, q), repeat=size):
                    candidates.add((positions, digits))

    scale = Fshifted.energy()
    imag_tol = IMAG_RESIDUE_SCALE * max(scale, 1.0)
    terms: dict[tuple[int, ...], float] = {}
    for positions, digits in candidates:
        total = 0j
        pos_set = set(positions)
        for (y, amp), supp in zip(freqs, supports):
            if not pos_set.issubset(supp):
                continue
            factor = amp
            for pos, digit in zip(positions, digits):
                factor *= roots[(digit * y[pos]) % q] - 1.0
            total += factor
        if abs(total.imag) > imag_tol:
            raise NumericalConsistencyError(
                f"Moebius coefficient at {positions}/{digits} has imaginary residue "
                f"{total.imag:.3g}; the sketch is not conjugate-symmetric"
            )
        if abs(total.real) > prune_tol:
            k = [0] * n
            for pos, digit in zip(positions, digits):
                k[pos] = digit
            terms[tuple(k)] = total.real
    return MobiusTransform(q, n, terms)


def shap_values(M: MobiusTransform) -> np.ndarray:
    """Per-position attributions; untouched positions are exactly zero."""
    out = np.zeros(M.n, dtype=np.float64)
    for k, coeff in M.terms.items():
        weight = sum(1 for e in k if e != 0)
        if weight == 0:
            continue
        contribution = -coeff / (weight * M.q**weight)
        for i, e in enumerate(k):
            if e != 0:
                out[i] += contribution
    return out


def faith_shap(M: MobiusTransform, order: int) -> dict[tuple[int, ...], float]:
    """Interaction indices for every touched subset T with 1 <= |T| <= order.

    Each Moebius term with support K and weight w contributes
    ``(-1)^|T| M[k] / q^w`` to every nonempty ``T subseteq K`` up to the
    order cap.  Subsets no term touches are omitted (implicit zero).
    """
    if order < 1:
        raise ContractViolationError("interaction order must be >= 1")
    out: dict[tuple[int, ...], float] = {}
    for k, coeff in M.terms.items():
        support = tuple(i for i, e in enumerate(k) if e != 0)
        weight = len(support)
        if weight == 0:
            continue
        base = coeff / M.q**weight
        for size in range(1, min(order, weight) + 1):
            signed = base if size % 2 == 0 else -base
            for T in itertools.combinations(support, size):
                out[T] = out.get(T, 0.0) + signed
    return out


def empty_coalition_value(M: MobiusTransform) -> float:
    """``v_emptyset = sum_k M[k] / q^|k|_0`` (equals the model's global mean)."""
    return float(
        sum(
            coeff / M.q ** sum(1 for e in k if e != 0)
            for k, coeff in M.terms.items()
        )
    )


def value_function(M: MobiusTransform, T) -> float:
    """Coalition value under uniform marginalization, in the query frame.

    Keeping positions T at the query and averaging the rest collapses to
    ``sum M[k] / q^|k|_0`` over the terms supported entirely outside T;
    ``T = D`` returns the model at the query, ``T = {}`` the global mean.
    """
    T = frozenset(int(i) for i in T)
    if any(i < 0 or i >= M.n for i in T):
        raise ContractViolationError(f"coalition {set(T)} outside [0, {M.n})")
    total = 0.0
    for k, coeff in M.terms.items():
        support = [i for i, e in enumerate(k) if e != 0]
        if any(i in T for i in support):
            continue
        total += coeff / M.q ** len(support)
    return float(total)


@dataclass(frozen=True)
class ExplanationReport:
    """All attributions for one query at one interaction order."""

    query: QaryVector
    shap: np.ndarray
    interactions: dict[tuple[int, ...], float]
    baseline: float
    order: int

    def predicted_value(self) -> float:
        """Model output at the query implied by the report (baseline + sum)."""
        return float(self.baseline + self.shap.sum())

    def to_json_dict(self) -> dict:
        return {
            "q": self.query.q,
            "n": self.query.n,
            "order": self.order,
            "query": list(self.query.elems),
            "baseline": self.baseline,
            "shap": [float(v) for v in self.shap],
            "interactions": [
                {"positions": list(T), "value": v}
                for T, v in sorted(self.interactions.items())
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExplanationReport":
        return cls(
            query=QaryVector(tuple(doc["query"]), int(doc["q"])),
            shap=np.asarray(doc["shap"], dtype=np.float64),
            interactions={
                tuple(item["positions"]): float(item["value"])
                for item in doc["interactions"]
            },
            baseline=float(doc["baseline"]),
            order=int(doc["order"]),
        )


def explain(Fsketch: FourierSpectrum, query: QaryVector, order: int) -> ExplanationReport:
    """Full per-query pipeline: shift, map to Moebius, read off attributions.

    Sketch terms heavier than ``order`` are dropped first, so the report is
    always the order-``order`` view of the sketched model.
    """
    if query.q != Fsketch.q or query.n != Fsketch.n:
        raise ContractViolationError("query does not match sketch dimensions")
    usable = Fsketch.filtered(order)
    shifted = shift_spectrum(usable, query)
    M = fourier_to_mobius(shifted, order)
    return ExplanationReport(
        query=query,
        shap=shap_values(M),
        interactions=faith_shap(M, order),
        baseline=empty_coalition_value(M),
        order=order,
    )


def explain_many(
    Fsketch: FourierSpectrum,
    queries,
    order: int,
    jobs: int | None = None,
) -> list[ExplanationReport]:
    """Explain a batch of queries, optionally across threads."""
    queries = list(queries)
    if jobs is None or jobs <= 1 or len(queries) < 2:
        return [explain(Fsketch, x, order) for x in queries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda x: explain(Fsketch, x, order), queries))


@dataclass
class AggregateReport:
    """Cross-query summaries, split by sign.

    ``shap_mean`` maps (position, symbol) to the mean SHAP value among
    same-signed observations; ``interaction_mean`` does the same for
    (positions, symbols) pairs.  ``histogram`` spreads each interaction's
    magnitude evenly across its member positions (orders >= ``hist_min_order``
    only) and accumulates the per-(position, symbol) mass.
    """

    q: int
    n: int
    hist_min_order: int = 2
    shap_mean: dict = field(default_factory=lambda: {"positive": {}, "negative": {}})
    shap_count: dict = field(default_factory=lambda: {"positive": {}, "negative": {}})
    interaction_mean: dict = field(default_factory=lambda: {"positive": {}, "negative": {}})
    interaction_count: dict = field(default_factory=lambda: {"positive": {}, "negative": {}})
    histogram: dict = field(default_factory=lambda: {"positive": {}, "negative": {}})


def aggregate(reports, hist_min_order: int = 2) -> AggregateReport:
    """Reduce reports into sign-split means and the interaction histogram."""
    reports = list(reports)
    if not reports:
        raise ContractViolationError("nothing to aggregate")
    q, n = reports[0].query.q, reports[0].query.n
    if any(r.query.q != q or r.query.n != n for r in reports):
        raise ContractViolationError("reports mix different (q, n) spaces")

    shap_sums: dict = {"positive": {}, "negative": {}}
    inter_sums: dict = {"positive": {}, "negative": {}}
    agg = AggregateReport(q=q, n=n, hist_min_order=hist_min_order)
    for report in reports:
        for pos, value in enumerate(report.shap):
            if value == 0.0:
                continue
            sign = "positive" if value > 0 else "negative"
            key = (pos, report.query.elems[pos])
            total, count = shap_sums[sign].get(key, (0.0, 0))
            shap_sums[sign][key] = (total + float(value), count + 1)
        for T, value in report.interactions.items():
            if value == 0.0:
                continue
            sign = "positive" if value > 0 else "negative"
            symbols = tuple(report.query.elems[i] for i in T)
            key = (T, symbols)
            total, count = inter_sums[sign].get(key, (0.0, 0))
            inter_sums[sign][key] = (total + float(value), count + 1)
            if len(T) >= hist_min_order:
                share = abs(value) / len(T)
                for pos, sym in zip(T, symbols):
                    hkey = (pos, sym)
                    agg.histogram[sign][hkey] = agg.histogram[sign].get(hkey, 0.0) + share

    for sign in ("positive", "negative"):
        for key, (total, count) in shap_sums[sign].items():
            agg.shap_mean[sign][key] = total / count
            agg.shap_count[sign][key] = count
        for key, (total, count) in inter_sums[sign].items():
            agg.interaction_mean[sign][key] = total / count
            agg.interaction_count[sign][key] = count
    return agg


def write_reports_json(reports, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json_dict() for r in reports], fh)
        fh.write("\n")


def load_reports_json(path) -> list[ExplanationReport]:
    with open(path, "r", encoding="utf-8") as fh:
        return [ExplanationReport.from_json_dict(doc) for doc in json.load(fh)]


def write_shap_csv(reports, path) -> None:
    """Per-query SHAP table: one row per (query, position).

    Positions are 1-based in CSV output (table convention); JSON and the
    Python API stay 0-based.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "position", "symbol", "shap_value"])
        for qi, report in enumerate(reports):
            for pos, value in enumerate(report.shap):
                writer.writerow([qi, pos + 1, report.query.elems[pos], repr(float(value))])


def write_interactions_csv(reports, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "positions", "symbols", "value"])
        for qi, report in enumerate(reports):
            for T, value in sorted(report.interactions.items()):
                positions = ";".join(str(i + 1) for i in T)
                symbols = ";".join(str(report.query.elems[i]) for i in T)
                writer.writerow([qi, positions, symbols, repr(float(value))])


def write_aggregate_csv(agg: AggregateReport, path) -> None:
    """Sign-split mean tables plus the distributed-interaction histogram."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["table", "sign", "positions", "symbols", "average_value", "count"])
        for sign in ("positive", "negative"):
            for (pos, sym), value in sorted(agg.shap_mean[sign].items()):
                writer.writerow(
                    ["shap", sign, pos + 1, sym, repr(value), agg.shap_count[sign][(pos, sym)]]
                )
        for sign in ("positive", "negative"):
            for (T, symbols), value in sorted(agg.interaction_mean[sign].items()):
                writer.writerow(
                    [
                        "interaction",
                        sign,
                        ";".join(str(i + 1) for i in T),
                        ";".join(str(s) for s in symbols),
                        repr(value),
                        agg.interaction_count[sign][(T, symbols)],
                    ]
                )
        for sign in ("positive", "negative"):
            for (pos, sym), mass in sorted(agg.histogram[sign].items()):
                writer.writerow(["histogram", sign, pos + 1, sym, repr(mass), ""])
