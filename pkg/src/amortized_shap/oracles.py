"""Ground-truth oracles and the amortized-cost benchmark harness.

The oracles compute Shapley quantities the expensive, unarguable way —
enumerating coalitions against the exact uniform-marginalization value
function — and exist purely to cross-check the sketch pipeline at small n.
Scale guards are hard errors: a silent exponential blowup is worse than a
refused call.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import CapacityError, ContractViolationError, UndefinedCorrelationError
from .explain import explain
from .models import ModelHandle, dense_landscape_from_model
from .qary import MobiusTransform, QaryVector, SetMobius, set_mobius
from .sketch import SketchConfig, sketch

log = logging.getLogger(__name__)

ORACLE_MAX_N = 8
ORACLE_MAX_POINTS = 65536


def _guard_oracle(model: ModelHandle) -> None:
    if model.n > ORACLE_MAX_N or model.q**model.n > ORACLE_MAX_POINTS:
        raise CapacityError(
            f"oracle path limited to n <= {ORACLE_MAX_N} and q^n <= {ORACLE_MAX_POINTS}; "
            f"got q={model.q}, n={model.n}"
        )


def uniform_value_table(model: ModelHandle, query: QaryVector) -> dict:
    """Exact coalition values for every subset: keep T at the query, average the rest."""
    _guard_oracle(model)
    if query.q != model.q or query.n != model.n:
        raise ContractViolationError("query does not match model dimensions")
    grid = dense_landscape_from_model(model).grid()
    n = model.n
    values = {}
    for mask in range(1 << n):
        idx = tuple(
            query.elems[i] if mask >> i & 1 else slice(None) for i in range(n)
        )
        subset = frozenset(i for i in range(n) if mask >> i & 1)
        values[subset] = float(np.mean(grid[idx]))
    return values


def brute_force_shap(model: ModelHandle, query: QaryVector) -> np.ndarray:
    """Exact Shapley values from the coalition-weighted marginal sums."""
    values = uniform_value_table(model, query)
    n = model.n
    fact = [math.factorial(t) for t in range(n + 1)]
    weights = [fact[t] * fact[n - t - 1] / fact[n] for t in range(n)]
    out = np.zeros(n, dtype=np.float64)
    positions = list(range(n))
    for i in positions:
        others = [j for j in positions if j != i]
        for size in range(n):
            w = weights[size]
            for T in itertools.combinations(others, size):
                base = frozenset(T)
                out[i] += w * (values[base | {i}] - values[base])
    return out


def set_mobius_of_game(model: ModelHandle, query: QaryVector) -> SetMobius:
    """Moebius coefficients of the uniform-marginalization coalition game."""
    return set_mobius(uniform_value_table(model, query), model.n)


def _tail_weight(order: int, t: int, s: int) -> float:
    """Correction weight for a superset of size s > order, in exact arithmetic."""
    sign = -1 if (order - t) % 2 else 1
    frac = (
        Fraction(t, order + t)
        * math.comb(order, t)
        * Fraction(math.comb(s - 1, order), math.comb(s + order - 1, order + t))
    )
    return float(sign * frac)


def brute_force_faith_shap(
    model: ModelHandle, query: QaryVector, order: int
) -> dict[tuple[int, ...], float]:
    """Exact interaction indices at the given cap, for all 1 <= |T| <= order.

    Unlike the sketch pipeline, this includes the correction term driven by
    set-Moebius coefficients of order above the cap, so it stays valid for
    landscapes whose true interaction order exceeds ``order``.
    """
    if order < 1 or order > model.n:
        raise ContractViolationError(f"order {order} outside [1, n={model.n}]")
    a = set_mobius_of_game(model, query)
    n = model.n
    out: dict[tuple[int, ...], float] = {}
    supersets = [S for S in a.terms if len(S) > order]
    for size in range(1, order + 1):
        for T in itertools.combinations(range(n), size):
            Tset = frozenset(T)
            value = a.terms[Tset]
            for S in supersets:
                if Tset < S:
                    value += _tail_weight(order, size, len(S)) * a.terms[S]
            out[T] = value
    return out


def qary_to_set_mobius(M: MobiusTransform, S) -> float:
    """Set-Moebius coefficient of the induced game from q-ary coefficients.

    ``a(S) = (-1)^|S| sum_{k : k_S > 0} M[k] / q^|k|_0`` with the sum over
    interaction vectors strictly positive on every position of S.
    """
    S = frozenset(int(i) for i in S)
    if any(i < 0 or i >= M.n for i in S):
        raise ContractViolationError(f"subset {set(S)} outside [0, {M.n})")
    total = 0.0
    for k, coeff in M.terms.items():
        if all(k[i] > 0 for i in S):
            total += coeff / M.q ** sum(1 for e in k if e != 0)
    return float(total if len(S) % 2 == 0 else -total)


def monte_carlo_shap(
    model: ModelHandle,
    query: QaryVector,
    num_permutations: int,
    seed: int = 0,
) -> np.ndarray:
    """Permutation-sampling Shapley estimate, unbiased in expectation.

    Each permutation draws one uniform completion and walks it toward the
    query, crediting every position with the output change when it flips to
    the query symbol (n + 1 model evaluations per permutation).
    """
    if query.q != model.q or query.n != model.n:
        raise ContractViolationError("query does not match model dimensions")
    if num_permutations < 1:
        raise ContractViolationError("need at least one permutation")
    rng = np.random.default_rng(seed)
    n, q = model.n, model.q
    acc = np.zeros(n, dtype=np.float64)
    target = np.asarray(query.elems, dtype=np.int64)
    for _ in range(num_permutations):
        perm = rng.permutation(n)
        current = rng.integers(0, q, size=n, dtype=np.int64)
        walk = np.empty((n + 1, n), dtype=np.int64)
        walk[0] = current
        for step, i in enumerate(perm, start=1):
            current[i] = target[i]
            walk[step] = current
        vals = model.eval_batch(walk)
        acc[perm] += np.diff(vals)
    return acc / num_permutations


def score_predictions(predicted, actual) -> tuple[float, float]:
    """Pearson and Spearman correlations (Spearman on average ranks)."""
    x = np.asarray(predicted, dtype=np.float64)
    y = np.asarray(actual, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ContractViolationError(
            f"need two equal-length nonempty vectors, got {x.shape} and {y.shape}"
        )
    return _pearson(x, y), _pearson(_average_ranks(x), _average_ranks(y))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc)) * math.sqrt(float(yc @ yc))
    if denom == 0.0:
        raise UndefinedCorrelationError("correlation undefined for zero-variance input")
    return float(xc @ yc) / denom


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass
class RuntimeLedger:
    """Measured costs of one sketch-then-explain workload.

    The total-cost curve at k explanations is
    ``sketch_wall_time + k * mean(per_query_explain_times)``; the crossover
    is the first k where it undercuts ``k * mean(baseline_per_query_times)``.
    """

    sketch_wall_time: float
    sketch_queries: int
    per_query_explain_times: list = field(default_factory=list)
    baseline_per_query_times: list = field(default_factory=list)
    parallel: bool = False

    def mean_explain_time(self) -> float:
        times = self.per_query_explain_times
        return float(np.mean(times)) if times else 0.0

    def mean_baseline_time(self) -> float:
        times = self.baseline_per_query_times
        return float(np.mean(times)) if times else 0.0

    def amortized_cost(self, k: int) -> float:
        return self.sketch_wall_time + k * self.mean_explain_time()

    def baseline_cost(self, k: int) -> float:
        return k * self.mean_baseline_time()

    def crossover(self) -> int | None:
        """Smallest k with amortized cost below the baseline, if any."""
        if not self.per_query_explain_times or not self.baseline_per_query_times:
            return None
        gap = self.mean_baseline_time() - self.mean_explain_time()
        if gap <= 0:
            return None
        return int(math.floor(self.sketch_wall_time / gap)) + 1

    def to_json_dict(self) -> dict:
        return {
            "sketch_wall_time": self.sketch_wall_time,
            "sketch_queries": self.sketch_queries,
            "per_query_explain_times": list(self.per_query_explain_times),
            "baseline_per_query_times": list(self.baseline_per_query_times),
            "parallel": self.parallel,
            "mean_explain_time": self.mean_explain_time(),
            "mean_baseline_time": self.mean_baseline_time(),
            "crossover": self.crossover(),
        }


def run_benchmark(
    model: ModelHandle,
    config: SketchConfig,
    queries,
    baseline: str | None = "mc",
    num_permutations: int = 1000,
    order: int | None = None,
    seed: int = 0,
):
    """Sketch once, time every explanation, time the baseline, build a ledger.

    Returns ``(ledger, spectrum, reports)``.  The first explanation is run
    twice and its warm-up timing discarded.  ``baseline=None`` skips the
    baseline sweep (the ledger then has no crossover).
    """
    queries = list(queries)
    start = time.perf_counter()
    spectrum, diag = sketch(model, config)
    ledger = RuntimeLedger(
        sketch_wall_time=time.perf_counter() - start,
        sketch_queries=diag.queries_used,
    )
    if order is None:
        order = max(1, min(config.lmax, spectrum.max_weight() or 1))

    reports = []
    for qi, query in enumerate(queries):
        if qi == 0:
            explain(spectrum, query, order)  # warm-up, discarded
        start = time.perf_counter()
        reports.append(explain(spectrum, query, order))
        ledger.per_query_explain_times.append(time.perf_counter() - start)

    if baseline == "mc":
        for qi, query in enumerate(queries):
            start = time.perf_counter()
            monte_carlo_shap(model, query, num_permutations, seed=seed + qi)
            ledger.baseline_per_query_times.append(time.perf_counter() - start)
    elif baseline is not None:
        raise ContractViolationError(f"unknown baseline {baseline!r}")
    return ledger, spectrum, reports


def write_ledger_csv(ledger: RuntimeLedger, path, max_k: int | None = None) -> None:
    """Cost curves as (k, amortized_cost, baseline_cost) rows."""
    crossover = ledger.crossover()
    if max_k is None:
        max_k = max(
            len(ledger.per_query_explain_times),
            2 * crossover if crossover is not None else 0,
            100,
        )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "amortized_cost", "baseline_cost"])
        for k in range(1, max_k + 1):
            writer.writerow(
                [k, repr(ledger.amortized_cost(k)), repr(ledger.baseline_cost(k))]
            )


def write_ledger_json(ledger: RuntimeLedger, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ledger.to_json_dict(), fh, sort_keys=True)
        fh.write("\n")
