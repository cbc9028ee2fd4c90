"""Black-box model abstraction: handles, caching, and synthetic landscapes.

A :class:`ModelHandle` is the only thing downstream code sees: a ``(q, n)``
pair plus a batched evaluator.  Evaluations are the expensive resource, so
every handle memoizes by the mixed-radix index of the input vector and counts
only cache misses in ``eval_count``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolationError
from .qary import DenseLandscape, FourierSpectrum, QaryVector, _guard_dense

DEFAULT_BATCH_SIZE = 1024

# Evaluator contract: takes an (m, n) int array of rows in [0, q), returns m floats.
Evaluator = Callable[[np.ndarray], np.ndarray]


class ModelHandle:
    """A black-box function on Z_q^n with a synchronized memoizing cache.

    ``eval_count`` increases by exactly the number of *distinct, uncached*
    vectors forwarded to the underlying evaluator; repeated vectors are free.
    """

    def __init__(
        self,
        q: int,
        n: int,
        evaluator: Evaluator,
        batch_size: int = DEFAULT_BATCH_SIZE,
        cache_cap: int | None = None,
        close: Callable[[], None] | None = None,
    ) -> None:
        if q < 2 or n < 1:
            raise ContractViolationError(f"invalid model dimensions q={q}, n={n}")
        if batch_size < 1:
            raise ContractViolationError("batch_size must be positive")
        self.q = q
        self.n = n
        self._evaluator = evaluator
        self._batch_size = batch_size
        self._cache: dict[int, float] = {}
        self._cache_cap = cache_cap
        self._close = close
        self._lock = threading.RLock()
        self.eval_count = 0

    def _indices(self, batch: np.ndarray) -> np.ndarray:
        weights = self.q ** np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return batch @ weights

    def eval_batch(self, batch) -> np.ndarray:
        """Evaluate a batch of vectors, order-preserving, cache first."""
        arr = _as_batch_array(batch, self.q, self.n)
        if arr.shape[0] == 0:
            return np.empty(0, dtype=np.float64)
        with self._lock:
            idx = self._indices(arr)
            out = np.empty(arr.shape[0], dtype=np.float64)
            miss_rows: list[int] = []
            first_miss: dict[int, int] = {}
            for row, key in enumerate(idx):
                key = int(key)
                if key in self._cache:
                    out[row] = self._cache[key]
                elif key not in first_miss:
                    first_miss[key] = row
                    miss_rows.append(row)
            if miss_rows:
                misses = arr[miss_rows]
                values = np.empty(len(miss_rows), dtype=np.float64)
                for lo in range(0, len(miss_rows), self._batch_size):
                    chunk = misses[lo : lo + self._batch_size]
                    vals = np.asarray(self._evaluator(chunk), dtype=np.float64)
                    if vals.shape != (chunk.shape[0],):
                        raise ContractViolationError(
                            f"evaluator returned {vals.shape} for a batch of {chunk.shape[0]}"
                        )
                    values[lo : lo + chunk.shape[0]] = vals
                if not np.all(np.isfinite(values)):
                    raise ContractViolationError("evaluator produced non-finite outputs")
                self.eval_count += len(miss_rows)
                for row, val in zip(miss_rows, values):
                    key = int(idx[row])
                    if self._cache_cap is None or len(self._cache) < self._cache_cap:
                        self._cache[key] = float(val)
                    first_miss[key] = row
                    out[row] = val
                # duplicate rows within the batch resolve against the batch itself
                for row, key in enumerate(idx):
                    key = int(key)
                    if key in self._cache:
                        out[row] = self._cache[key]
                    elif key in first_miss:
                        out[row] = out[first_miss[key]]
            return out

    def close(self) -> None:
        if self._close is not None:
            self._close()

    def __enter__(self) -> "ModelHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _as_batch_array(batch, q: int, n: int) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        arr = batch
    else:
        rows = []
        for item in batch:
            if isinstance(item, QaryVector):
                if item.q != q or item.n != n:
                    raise ContractViolationError(
                        f"vector in Z_{item.q}^{item.n} fed to a Z_{q}^{n} model"
                    )
                rows.append(item.elems)
            else:
                rows.append(tuple(int(e) for e in item))
        try:
            arr = np.asarray(rows, dtype=np.int64).reshape(-1, n) if rows else np.empty((0, n), int)
        except ValueError as exc:
            raise ContractViolationError(f"ragged or non-integer batch: {exc}") from exc
    arr = np.asarray(arr, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ContractViolationError(f"batch shape {arr.shape} does not match n={n}")
    if arr.size and (arr.min() < 0 or arr.max() >= q):
        raise ContractViolationError(f"batch contains symbols outside [0, {q})")
    return arr


def eval_batch(model: ModelHandle, batch) -> np.ndarray:
    """Module-level alias for :meth:`ModelHandle.eval_batch`."""
    return model.eval_batch(batch)


@dataclass(frozen=True)
class SyntheticLandscapeSpec:
    """Recipe for a random real-valued landscape that is sparse in Fourier.

    ``s`` counts total nonzero coefficients; since the landscape must be
    real, frequencies are drawn in conjugate pairs (a pair costs two slots,
    a self-conjugate frequency one).
    """

    q: int
    n: int
    s: int
    lmax: int
    amplitude_range: tuple[float, float] = (0.5, 2.0)
    seed: int = 0
    noise_sd_out: float = 0.0

    def __post_init__(self) -> None:
        if self.q < 2 or self.n < 1:
            raise ContractViolationError(f"invalid dimensions q={self.q}, n={self.n}")
        if not 1 <= self.lmax <= self.n:
            raise ContractViolationError(f"lmax={self.lmax} outside [1, n={self.n}]")
        if self.s < 1:
            raise ContractViolationError("target sparsity must be >= 1")
        lo, hi = self.amplitude_range
        if not 0 < lo <= hi:
            raise ContractViolationError(f"bad amplitude range ({lo}, {hi})")
        if self.noise_sd_out < 0:
            raise ContractViolationError("noise_sd_out must be >= 0")
        if self.s > self.frequency_budget():
            raise ContractViolationError(
                f"s={self.s} exceeds the {self.frequency_budget()} frequencies of weight <= {self.lmax}"
            )

    def frequency_budget(self) -> int:
        return sum(math.comb(self.n, w) * (self.q - 1) ** w for w in range(self.lmax + 1))


def _random_frequency(rng: np.random.Generator, q: int, n: int, lmax: int) -> tuple[int, ...]:
    w = int(rng.integers(1, lmax + 1))
    support = rng.choice(n, size=w, replace=False)
    freq = [0] * n
    for pos in support:
        freq[int(pos)] = int(rng.integers(1, q))
    return tuple(freq)


def _spectrum_evaluator(q: int, n: int, spectrum: FourierSpectrum) -> Evaluator:
    freqs = np.asarray(list(spectrum.terms.keys()), dtype=np.int64).reshape(-1, n)
    amps = np.asarray(list(spectrum.terms.values()), dtype=np.complex128)

    def evaluate(batch: np.ndarray) -> np.ndarray:
        phases = np.exp(2j * np.pi / q * (batch @ freqs.T))
        return (phases @ amps).real

    return evaluate


def make_synthetic(spec: SyntheticLandscapeSpec) -> tuple[ModelHandle, FourierSpectrum]:
    """Build a model from a random conjugate-symmetric sparse spectrum.

    Returns the handle plus the exact ground-truth spectrum for assertions.
    Reproducible: the same spec (seed included) always yields the same terms
    and the same outputs, even when ``noise_sd_out > 0`` (noise is a pure
    function of the seed and the input vector).
    """
    rng = np.random.default_rng(spec.seed)
    q, n = spec.q, spec.n
    lo, hi = spec.amplitude_range
    terms: dict[tuple[int, ...], complex] = {}

    def count() -> int:
        return len(terms)

    budget_guard = 0
    while count() < spec.s:
        budget_guard += 1
        if budget_guard > 10_000 * spec.s:
            raise ContractViolationError("could not reach the target sparsity; spec infeasible")
        remaining = spec.s - count()
        if remaining == 1:
            # need a self-conjugate slot: zero frequency, or digits in {0, q/2}
            if (0,) * n not in terms:
                y = (0,) * n
            elif q % 2 == 0:
                y = _random_frequency(rng, 2, n, spec.lmax)
                y = tuple(e * (q // 2) for e in y)
                if y in terms:
                    continue
            else:
                raise ContractViolationError(
                    f"cannot reach odd sparsity {spec.s}: no self-conjugate frequency free for q={q}"
                )
            mag = rng.uniform(lo, hi) * rng.choice([-1.0, 1.0])
            terms[y] = complex(mag)
            continue
        y = _random_frequency(rng, q, n, spec.lmax)
        neg = tuple((-e) % q for e in y)
        if y in terms or neg in terms:
            continue
        if y == neg:
            terms[y] = complex(rng.uniform(lo, hi) * rng.choice([-1.0, 1.0]))
        else:
            amp = rng.uniform(lo, hi) * np.exp(2j * np.pi * rng.uniform())
            terms[y] = complex(amp)
            terms[neg] = complex(np.conj(amp))

    spectrum = FourierSpectrum(q, n, terms)
    clean = _spectrum_evaluator(q, n, spectrum)

    if spec.noise_sd_out > 0:
        sd = spec.noise_sd_out
        noise_seed = spec.seed

        def evaluate(batch: np.ndarray) -> np.ndarray:
            vals = clean(batch)
            weights = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
            for row, idx in enumerate(batch @ weights):
                noise_rng = np.random.default_rng([noise_seed, int(idx)])
                vals[row] += sd * noise_rng.standard_normal()
            return vals

    else:
        evaluate = clean

    return ModelHandle(q, n, evaluate), spectrum


# The six-term conjugate-symmetric spectrum behind the bundled `trig3`
# fixture: three complex coefficients plus their conjugate partners, so the
# landscape is real while those three amplitudes survive verbatim.
TRIG3_Q = 4
TRIG3_N = 3
TRIG3_BASE_TERMS: dict[tuple[int, ...], complex] = {
    (0, 1, 0): 5 + 2j,
    (1, 2, 0): -(3 + 1j),
    (1, 0, 3): 1 + 1j,
}


def trig3_spectrum() -> FourierSpectrum:
    terms = dict(TRIG3_BASE_TERMS)
    for y, amp in TRIG3_BASE_TERMS.items():
        terms[tuple((-e) % TRIG3_Q for e in y)] = amp.conjugate()
    return FourierSpectrum(TRIG3_Q, TRIG3_N, terms)


def make_trig3_fixture() -> tuple[ModelHandle, FourierSpectrum]:
    """The bundled analytic fixture: a real 6-term trigonometric landscape."""
    spectrum = trig3_spectrum()
    return (
        ModelHandle(TRIG3_Q, TRIG3_N, _spectrum_evaluator(TRIG3_Q, TRIG3_N, spectrum)),
        spectrum,
    )


def model_from_spectrum(spectrum: FourierSpectrum) -> ModelHandle:
    """Wrap an explicit conjugate-symmetric spectrum as a model handle."""
    return ModelHandle(
        spectrum.q, spectrum.n, _spectrum_evaluator(spectrum.q, spectrum.n, spectrum)
    )


def dense_landscape_from_model(model: ModelHandle) -> DenseLandscape:
    """Tabulate a model on the full grid (dense capacity guarded)."""
    q, n = model.q, model.n
    _guard_dense(q, n)
    total = q**n
    vals = np.empty(total, dtype=np.float64)
    weights = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    chunk = 1 << 16
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        pts = (idx[:, None] // weights) % q
        vals[lo : lo + idx.size] = model.eval_batch(pts)
    return DenseLandscape(q, n, vals)


def all_points(q: int, n: int) -> np.ndarray:
    """All q^n points in mixed-radix order, one row per point."""
    _guard_dense(q, n)
    idx = np.arange(q**n, dtype=np.int64)
    weights = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // weights) % q
