"""One-time model sketching: subsampled queries, bin hashing, peeling.

The sketch estimates the sparse Fourier spectrum of a black-box model by
hashing its coefficients into ``q^b`` bins per subsampling matrix.  Sampling
the coset ``{M_c a + d : a in Z_q^b}`` and taking a dense transform over the
``a`` coordinates leaves each bin holding an aliased sum

    U_c[j, p] = sum_{y : M_c^T y = j} F[y] * w^<d_{c,p}, y>,

so a bin touched by exactly one surviving frequency (a singleton) exposes
that frequency digit-by-digit through the phase ratios of its delayed
observations.  Decoded terms are subtracted from every hash, which uncovers
new singletons; iterating resolves the whole spectrum when the model is
sparse enough for the bin budget.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .errors import CapacityError, ContractViolationError, FormatError
from .models import ModelHandle, all_points, dense_landscape_from_model
from .qary import FourierSpectrum, dense_fourier

log = logging.getLogger(__name__)

# Refuse plans that would allocate more than this many bins per hash.
BIN_CAPACITY = 1 << 20

# Numerical floor for the singleton/zero-ton threshold, so that noiseless
# sketches (noise_sd = 0) still classify bins instead of giving up.
THRESHOLD_FLOOR = 1e-9

FILE_VERSION = 1


@dataclass(frozen=True)
class SketchConfig:
    """Hyperparameters of the sketching step.

    ``noise_sd`` scales the singleton acceptance threshold
    ``tau = noise_sd / q^(b/2)``; at 0 a small numerical floor applies.
    ``exact=True`` bypasses subsampling entirely and takes a dense transform
    (only valid while ``q^n`` stays within the dense capacity guard).
    """

    b: int = 3
    num_subsample: int = 3
    num_repeat: int = 3
    noise_sd: float = 0.0
    lmax: int = 5
    max_peel_iters: int = 10_000
    seed: int = 0
    exact: bool = False
    prune_tol: float = 1e-10

    def __post_init__(self) -> None:
        if self.b < 1:
            raise ContractViolationError("b must be >= 1")
        if self.num_subsample < 2:
            raise ContractViolationError("need at least 2 subsampling hashes")
        if self.num_repeat < 1:
            raise ContractViolationError("num_repeat must be >= 1")
        if self.noise_sd < 0:
            raise ContractViolationError("noise_sd must be >= 0")
        if self.lmax < 1:
            raise ContractViolationError("lmax must be >= 1")
        if self.max_peel_iters < 1:
            raise ContractViolationError("max_peel_iters must be >= 1")


@dataclass
class SketchDiagnostics:
    """Telemetry from one sketch call."""

    queries_planned: int = 0
    queries_used: int = 0
    coefficients_recovered: int = 0
    coefficients_discarded: int = 0
    peel_iterations: int = 0
    residual_bin_energy: float = 0.0
    gave_up: bool = False


def _unit_rank(mat: np.ndarray, q: int) -> bool:
    """Sufficient full-rank test over Z_q: unit-pivot Gaussian elimination.

    Succeeds iff some b rows form a submatrix with unit determinant mod q,
    which makes ``a -> M a`` injective even for composite q.
    """
    work = mat.copy() % q
    n, b = work.shape
    used = np.zeros(n, dtype=bool)
    for col in range(b):
        pivot = -1
        for row in range(n):
            if not used[row] and math.gcd(int(work[row, col]), q) == 1:
                pivot = row
                break
        if pivot < 0:
            return False
        used[pivot] = True
        inv = pow(int(work[pivot, col]), -1, q)
        work[pivot] = (work[pivot] * inv) % q
        for row in range(n):
            if row != pivot and work[row, col]:
                work[row] = (work[row] - work[row, col] * work[pivot]) % q
    return True


def _sample_full_rank(rng: np.random.Generator, q: int, n: int, b: int) -> np.ndarray:
    for _ in range(1000):
        mat = rng.integers(0, q, size=(n, b), dtype=np.int64)
        if _unit_rank(mat, q):
            return mat
    raise ContractViolationError(f"could not sample a rank-{b} matrix over Z_{q}")


@dataclass(frozen=True)
class QueryPlan:
    """Subsampling matrices and delay vectors, plus the coset enumeration.

    ``delays[c]`` has ``num_repeat`` blocks of ``n + 1`` rows each: a random
    base offset followed by that offset plus every identity basis vector.
    The base row pins the singleton's phase; the identity rows read off one
    frequency digit each.
    """

    q: int
    n: int
    b: int
    matrices: list
    delays: list

    @property
    def num_hashes(self) -> int:
        return len(self.matrices)

    @property
    def delays_per_hash(self) -> int:
        return self.delays[0].shape[0]

    @property
    def total_queries(self) -> int:
        return self.num_hashes * self.delays_per_hash * self.q**self.b

    def coset(self, c: int, p: int) -> np.ndarray:
        """All q^b sample points for hash ``c``, delay ``p`` (rows in a-order)."""
        base = all_points(self.q, self.b)
        return (base @ self.matrices[c].T + self.delays[c][p]) % self.q

    def batches(self) -> Iterator[tuple[int, int, np.ndarray]]:
        for c in range(self.num_hashes):
            for p in range(self.delays[c].shape[0]):
                yield c, p, self.coset(c, p)


def plan_queries(config: SketchConfig, q: int, n: int) -> QueryPlan:
    """Draw the subsampling matrices and delay sets for one sketch."""
    if not 1 <= config.b <= n:
        raise ContractViolationError(f"b={config.b} outside [1, n={n}]")
    if q**config.b > BIN_CAPACITY:
        raise CapacityError(f"q^b = {q}^{config.b} bins exceed the {BIN_CAPACITY} budget cap")
    rng = np.random.default_rng(config.seed)
    matrices = []
    delays = []
    eye = np.eye(n, dtype=np.int64)
    for _ in range(config.num_subsample):
        matrices.append(_sample_full_rank(rng, q, n, config.b))
        rows = []
        for _ in range(config.num_repeat):
            offset = rng.integers(0, q, size=n, dtype=np.int64)
            rows.append(offset)
            rows.extend((offset + eye[i]) % q for i in range(n))
        delays.append(np.asarray(rows, dtype=np.int64))
    return QueryPlan(q, n, config.b, matrices, delays)


@dataclass
class BinGraph:
    """Observed bin values: one (q^b, P) complex array per hash."""

    q: int
    n: int
    b: int
    matrices: list
    delays: list
    bins: list


def compute_bins(model: ModelHandle, plan: QueryPlan) -> BinGraph:
    """Evaluate every coset and transform it into bin observations.

    Each slice is a dense q-ary transform over the ``a`` coordinates:
    ``U[j, p] = (1/q^b) sum_a f(M a + d_p) w^{-<a, j>}``.  All of a hash's
    cosets go to the model as one batch, so bridge-backed models pay one
    (pipelined) round of requests per hash instead of one per delay.
    """
    q, b = plan.q, plan.b
    nbins = q**b
    base = all_points(q, b)
    bins = []
    for c in range(plan.num_hashes):
        delays = plan.delays[c]
        points = (base @ plan.matrices[c].T)[None, :, :] + delays[:, None, :]
        vals = model.eval_batch((points % q).reshape(-1, plan.n))
        slices = vals.reshape(delays.shape[0], *(q,) * b)
        coeffs = np.fft.fftn(slices, axes=tuple(range(1, b + 1))) / nbins
        bins.append(np.ascontiguousarray(coeffs.reshape(delays.shape[0], nbins).T))
    return BinGraph(q, plan.n, b, plan.matrices, plan.delays, bins)


def _bin_index(y: np.ndarray, matrix: np.ndarray, q: int, b: int) -> int:
    digits = (y @ matrix) % q
    idx = 0
    for d in digits:
        idx = idx * q + int(d)
    return idx


class Peeler:
    """Mutable peeling state over a :class:`BinGraph`.

    Exposed so tests can drive single steps and watch energy conservation;
    normal callers use :func:`peel`.
    """

    def __init__(self, graph: BinGraph, config: SketchConfig) -> None:
        if len(graph.bins) < 2:
            raise ContractViolationError("peeling needs bins from at least 2 hashes")
        self.graph = graph
        self.config = config
        self.q = graph.q
        self.n = graph.n
        self.b = graph.b
        self.num_repeat = config.num_repeat
        if graph.delays[0].shape[0] != config.num_repeat * (graph.n + 1):
            raise ContractViolationError(
                "delay layout does not match num_repeat blocks of n+1 rows"
            )
        self.tau = max(config.noise_sd / self.q ** (self.b / 2.0), THRESHOLD_FLOOR)
        self.recovered: dict[tuple[int, ...], complex] = {}
        self.events = 0

    def total_energy(self) -> float:
        """Sum over hashes and bins of the delay-averaged squared magnitude."""
        return float(
            sum(np.mean(np.abs(U) ** 2, axis=1).sum() for U in self.graph.bins)
        )

    def _phases(self, c: int, y: np.ndarray) -> np.ndarray:
        dots = (self.graph.delays[c] @ y) % self.q
        return np.exp(2j * np.pi / self.q * dots)

    def _decode(self, c: int, j: int):
        """Try to read a single (frequency, amplitude) out of bin (c, j)."""
        obs = self.graph.bins[c][j]
        if np.mean(np.abs(obs) ** 2) < self.tau**2:
            return None  # zero-ton
        block = self.n + 1
        votes = np.zeros((self.num_repeat, self.n), dtype=np.int64)
        for r in range(self.num_repeat):
            base = obs[r * block]
            if abs(base) < self.tau:
                return None
            ratios = obs[r * block + 1 : (r + 1) * block] / base
            angles = np.angle(ratios) * self.q / (2 * np.pi)
            # round to the nearest root of unity, half-steps toward the smaller digit
            votes[r] = np.ceil(angles - 0.5).astype(np.int64) % self.q
        y = np.empty(self.n, dtype=np.int64)
        for i in range(self.n):
            counts = np.bincount(votes[:, i], minlength=self.q)
            y[i] = int(np.argmax(counts))
        if _bin_index(y, self.graph.matrices[c], self.q, self.b) != j:
            return None  # decoded frequency does not hash here: multi-ton
        phases = self._phases(c, y)
        amp = complex(np.mean(obs * np.conj(phases)))
        residual = float(np.mean(np.abs(obs - amp * phases) ** 2))
        if residual >= self.tau**2:
            return None  # multi-ton
        return y, amp

    def _subtract(self, y: np.ndarray, amp: complex) -> None:
        for c in range(len(self.graph.bins)):
            j = _bin_index(y, self.graph.matrices[c], self.q, self.b)
            self.graph.bins[c][j] -= amp * self._phases(c, y)

    def peel_once(self) -> bool:
        """Scan all bins once; decode and subtract every singleton found."""
        progress = False
        for c in range(len(self.graph.bins)):
            for j in range(self.q**self.b):
                if self.events >= self.config.max_peel_iters:
                    return progress
                decoded = self._decode(c, j)
                if decoded is None:
                    continue
                y, amp = decoded
                key = tuple(int(e) for e in y)
                self.recovered[key] = self.recovered.get(key, 0j) + amp
                self._subtract(y, amp)
                self.events += 1
                progress = True
        return progress

    def run(self) -> None:
        while self.events < self.config.max_peel_iters:
            if not self.peel_once():
                break


def peel(graph: BinGraph, config: SketchConfig) -> tuple[FourierSpectrum, SketchDiagnostics]:
    """Resolve the bin graph into a sparse spectrum plus telemetry.

    Frequencies heavier than ``config.lmax`` are still subtracted from the
    bins (they are real signal) but excluded from the returned spectrum and
    counted in ``coefficients_discarded``.  Non-convergence is soft: the
    partial spectrum is returned with ``gave_up`` set.
    """
    peeler = Peeler(graph, config)
    peeler.run()

    kept: dict[tuple[int, ...], complex] = {}
    discarded = 0
    for y, amp in peeler.recovered.items():
        if abs(amp) <= config.prune_tol:
            continue
        if sum(1 for e in y if e != 0) > config.lmax:
            discarded += 1
        else:
            kept[y] = amp
    spectrum = FourierSpectrum(graph.q, graph.n, kept)

    residual = peeler.total_energy()
    num_bins = len(graph.bins) * graph.q**graph.b
    gave_up = residual > num_bins * peeler.tau**2
    if gave_up:
        log.warning("peeling stalled with residual bin energy %.3g", residual)
    diag = SketchDiagnostics(
        coefficients_recovered=spectrum.sparsity,
        coefficients_discarded=discarded,
        peel_iterations=peeler.events,
        residual_bin_energy=residual,
        gave_up=gave_up,
    )
    return spectrum, diag


def sketch(model: ModelHandle, config: SketchConfig) -> tuple[FourierSpectrum, SketchDiagnostics]:
    """Sketch a model end to end: plan, sample, hash, peel.

    With ``config.exact`` the spectrum comes from a dense transform instead
    (same pruning and order cap), which is the reference path at small n.
    """
    before = model.eval_count
    if config.exact:
        landscape = dense_landscape_from_model(model)
        full = dense_fourier(landscape, prune_tol=config.prune_tol)
        kept = {
            y: a
            for y, a in full.terms.items()
            if sum(1 for e in y if e != 0) <= config.lmax
        }
        spectrum = FourierSpectrum(model.q, model.n, kept)
        diag = SketchDiagnostics(
            queries_planned=model.q**model.n,
            queries_used=model.eval_count - before,
            coefficients_recovered=spectrum.sparsity,
            coefficients_discarded=full.sparsity - spectrum.sparsity,
        )
        return spectrum, diag

    plan = plan_queries(config, model.q, model.n)
    graph = compute_bins(model, plan)
    spectrum, diag = peel(graph, config)
    diag.queries_planned = plan.total_queries
    diag.queries_used = model.eval_count - before
    log.info(
        "sketch done: %d coefficients from %d queries (planned %d)",
        spectrum.sparsity,
        diag.queries_used,
        diag.queries_planned,
    )
    return spectrum, diag


def save_sketch(
    F: FourierSpectrum,
    diagnostics: SketchDiagnostics,
    path,
    lmax: int | None = None,
) -> None:
    """Write the sketch as a single JSON document (sorted, reproducible)."""
    doc = {
        "version": FILE_VERSION,
        "q": F.q,
        "n": F.n,
        "lmax": F.max_weight() if lmax is None else int(lmax),
        "terms": [
            {"y": list(y), "re": amp.real, "im": amp.imag}
            for y, amp in sorted(F.terms.items())
        ],
        "diagnostics": asdict(diagnostics),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_sketch_bundle(path) -> tuple[FourierSpectrum, SketchDiagnostics, int]:
    """Read back spectrum, diagnostics, and the stored order cap."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"sketch file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != FILE_VERSION:
        raise FormatError(
            f"sketch file {path} has version {doc.get('version')!r}, expected {FILE_VERSION}"
        )
    try:
        terms = {
            tuple(int(e) for e in item["y"]): complex(item["re"], item["im"])
            for item in doc["terms"]
        }
        spectrum = FourierSpectrum(int(doc["q"]), int(doc["n"]), terms)
        diag = SketchDiagnostics(**doc["diagnostics"])
        lmax = int(doc["lmax"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"sketch file {path} is malformed: {exc}") from exc
    return spectrum, diag, lmax


def load_sketch(path) -> FourierSpectrum:
    """Load just the spectrum from a sketch file."""
    return load_sketch_bundle(path)[0]
