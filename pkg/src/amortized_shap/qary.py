"""Exact algebra over Z_q^n: vectors, Fourier and Moebius transforms.

Everything in this module is dense and exact (up to float64), sized for the
small-n regime.  It is the substrate for the oracle cross-checks and for the
exact-mode sketch path; the sparse machinery elsewhere is validated against
these routines.

Conventions fixed here and relied on by the rest of the package:

* mixed-radix indexing: position 1 is the most significant digit, so the
  vector ``[x1, ..., xn]`` maps to ``x1*q^(n-1) + ... + xn``;
* Fourier normalization: the synthesis sum ``f(m) = sum_y F[y] w^<m,y>`` with
  ``w = exp(2*pi*i/q)`` carries no prefactor, so the forward (analysis)
  transform divides by ``q^n``.  See README for why this convention is the
  documented one.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import CapacityError, ContractViolationError

# Dense transforms refuse to materialize more than this many points.
DENSE_CAPACITY = 1 << 24

# Subset-lattice (set Moebius) routines refuse beyond this many positions.
SET_CAPACITY = 16

# Amplitudes at or below this magnitude are treated as zero when building
# sparse spectra from dense data.
DEFAULT_PRUNE_TOL = 1e-10


@dataclass(frozen=True)
class QaryVector:
    """An element of Z_q^n, stored as a tuple of digits in ``[0, q)``.

    Hashable and immutable, so it can key sparse coefficient maps.
    """

    elems: tuple[int, ...]
    q: int

    def __post_init__(self) -> None:
        if self.q < 2:
            raise ContractViolationError(f"alphabet size must be >= 2, got {self.q}")
        if len(self.elems) < 1:
            raise ContractViolationError("vector must have length >= 1")
        object.__setattr__(self, "elems", tuple(int(e) for e in self.elems))
        for e in self.elems:
            if not 0 <= e < self.q:
                raise ContractViolationError(
                    f"element {e} outside [0, {self.q}) in {self.elems}"
                )

    @property
    def n(self) -> int:
        return len(self.elems)

    @classmethod
    def from_index(cls, index: int, q: int, n: int) -> "QaryVector":
        """Inverse of :meth:`to_index` for the fixed mixed-radix convention."""
        if not 0 <= index < q**n:
            raise ContractViolationError(f"index {index} outside [0, {q}^{n})")
        digits = []
        for _ in range(n):
            index, rem = divmod(index, q)
            digits.append(rem)
        return cls(tuple(reversed(digits)), q)

    def to_index(self) -> int:
        idx = 0
        for e in self.elems:
            idx = idx * self.q + e
        return idx

    def as_array(self) -> np.ndarray:
        return np.asarray(self.elems, dtype=np.int64)

    def negate(self) -> "QaryVector":
        """Element-wise ``-v mod q`` (the conjugate frequency)."""
        return QaryVector(tuple((-e) % self.q for e in self.elems), self.q)

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, e in enumerate(self.elems) if e != 0)


def _check_same_space(a: QaryVector, b: QaryVector) -> None:
    if a.q != b.q or a.n != b.n:
        raise ContractViolationError(
            f"vectors live in different spaces: Z_{a.q}^{a.n} vs Z_{b.q}^{b.n}"
        )


def leq(m: QaryVector, k: QaryVector) -> bool:
    """Partial order on Z_q^n: ``m <= k`` iff every ``m_i`` is ``k_i`` or 0."""
    _check_same_space(m, k)
    return all(mi == ki or mi == 0 for mi, ki in zip(m.elems, k.elems))


def sub(k: QaryVector, m: QaryVector) -> QaryVector:
    """Real-field subtraction ``k - m``, defined only when ``leq(m, k)``."""
    if not leq(m, k):
        raise ContractViolationError(f"subtraction requires m <= k; got m={m.elems}, k={k.elems}")
    return QaryVector(tuple(ki - mi for ki, mi in zip(k.elems, m.elems)), k.q)


def hamming_weight(v: QaryVector) -> int:
    """Number of nonzero digits (the L0 norm)."""
    return sum(1 for e in v.elems if e != 0)


def scatter(mbar: QaryVector, complement_set: Iterable[int], n: int) -> QaryVector:
    """Place ``mbar`` at the (0-based, ascending) ``complement_set`` positions.

    All other positions are zero.  This builds the padded interaction vector
    whose restriction to the kept coalition is the zero vector.
    """
    positions = sorted(set(int(i) for i in complement_set))
    if len(positions) != mbar.n:
        raise ContractViolationError(
            f"complement has {len(positions)} positions but vector has length {mbar.n}"
        )
    if positions and (positions[0] < 0 or positions[-1] >= n):
        raise ContractViolationError(f"complement positions {positions} outside [0, {n})")
    out = [0] * n
    for pos, val in zip(positions, mbar.elems):
        out[pos] = val
    return QaryVector(tuple(out), mbar.q)


def _guard_dense(q: int, n: int) -> None:
    if q**n > DENSE_CAPACITY:
        raise CapacityError(
            f"dense path needs q^n = {q}^{n} points, above the {DENSE_CAPACITY} cap; "
            "use the sparse sketch instead"
        )


@dataclass(frozen=True)
class DenseLandscape:
    """A real-valued function on all of Z_q^n, stored flat in index order."""

    q: int
    n: int
    values: np.ndarray

    def __post_init__(self) -> None:
        _guard_dense(self.q, self.n)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.q**self.n,):
            raise ContractViolationError(
                f"expected {self.q ** self.n} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ContractViolationError("landscape contains non-finite values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, fn, q: int, n: int) -> "DenseLandscape":
        """Tabulate ``fn`` (QaryVector -> float) over all q^n points."""
        _guard_dense(q, n)
        vals = np.empty(q**n, dtype=np.float64)
        for idx in range(q**n):
            vals[idx] = fn(QaryVector.from_index(idx, q, n))
        return cls(q, n, vals)

    def value_at(self, m: QaryVector) -> float:
        if m.q != self.q or m.n != self.n:
            raise ContractViolationError("point does not match landscape dimensions")
        return float(self.values[m.to_index()])

    def grid(self) -> np.ndarray:
        """The values reshaped to an n-dimensional (q, ..., q) grid."""
        return self.values.reshape((self.q,) * self.n)

    def translate(self, x: QaryVector) -> "DenseLandscape":
        """The landscape ``g(m) = f(m + x mod q)``."""
        if x.q != self.q or x.n != self.n:
            raise ContractViolationError("shift vector does not match landscape")
        grid = self.grid()
        for axis, xi in enumerate(x.elems):
            grid = np.roll(grid, -xi, axis=axis)
        return DenseLandscape(self.q, self.n, grid.reshape(-1).copy())


@dataclass(frozen=True)
class FourierSpectrum:
    """Sparse map frequency -> complex amplitude over Z_q^n.

    Keys are plain digit tuples (the ``elems`` of a :class:`QaryVector`);
    exact zeros are dropped at construction.
    """

    q: int
    n: int
    terms: dict[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cleaned: dict[tuple[int, ...], complex] = {}
        for y, amp in self.terms.items():
            y = tuple(int(e) for e in y)
            if len(y) != self.n or any(not 0 <= e < self.q for e in y):
                raise ContractViolationError(f"frequency {y} outside Z_{self.q}^{self.n}")
            amp = complex(amp)
            if amp != 0:
                cleaned[y] = amp
        object.__setattr__(self, "terms", cleaned)

    @property
    def sparsity(self) -> int:
        return len(self.terms)

    def max_weight(self) -> int:
        return max((sum(1 for e in y if e != 0) for y in self.terms), default=0)

    def energy(self) -> float:
        """L2 norm of the amplitudes."""
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def filtered(self, max_weight: int) -> "FourierSpectrum":
        """Keep only frequencies of Hamming weight at most ``max_weight``."""
        kept = {
            y: a for y, a in self.terms.items() if sum(1 for e in y if e != 0) <= max_weight
        }
        return FourierSpectrum(self.q, self.n, kept)

    def synthesize(self, m: QaryVector) -> complex:
        """Unpruned synthesis sum at one point (complex; may carry residue)."""
        if m.q != self.q or m.n != self.n:
            raise ContractViolationError("point does not match spectrum dimensions")
        omega = 2j * math.pi / self.q
        total = 0j
        for y, amp in self.terms.items():
            phase = sum(mi * yi for mi, yi in zip(m.elems, y)) % self.q
            total += amp * cmath.exp(omega * phase)
        return total

    def is_conjugate_symmetric(self, tol: float = 1e-9) -> bool:
        """True when F[-y mod q] == conj(F[y]) for every stored frequency."""
        for y, amp in self.terms.items():
            neg = tuple((-e) % self.q for e in y)
            mate = self.terms.get(neg)
            if mate is None or abs(mate - amp.conjugate()) > tol:
                return False
        return True


def dense_fourier(f: DenseLandscape, prune_tol: float = DEFAULT_PRUNE_TOL) -> FourierSpectrum:
    """Analysis transform of a dense landscape.

    Computes ``F[y] = (1/q^n) sum_m f(m) w^{-<m,y>}`` via an n-dimensional
    FFT of size q along every axis, then drops amplitudes with magnitude at
    most ``prune_tol``.
    """
    coeffs = np.fft.fftn(f.grid()) / f.q**f.n
    flat = coeffs.reshape(-1)
    keep = np.flatnonzero(np.abs(flat) > prune_tol)
    terms = {
        QaryVector.from_index(int(idx), f.q, f.n).elems: complex(flat[idx]) for idx in keep
    }
    return FourierSpectrum(f.q, f.n, terms)


def inverse_fourier(F: FourierSpectrum, m: QaryVector) -> float:
    """Synthesis sum at ``m``; the imaginary residue is discarded.

    Exact for conjugate-symmetric spectra (those of real landscapes).
    """
    return F.synthesize(m).real


def spectrum_to_dense(F: FourierSpectrum) -> DenseLandscape:
    """Materialize the synthesis sum on the whole grid (real part)."""
    _guard_dense(F.q, F.n)
    grid = np.zeros((F.q,) * F.n, dtype=np.complex128)
    for y, amp in F.terms.items():
        grid[y] = amp
    vals = np.fft.ifftn(grid) * F.q**F.n
    return DenseLandscape(F.q, F.n, vals.real.reshape(-1))


@dataclass(frozen=True)
class MobiusTransform:
    """Sparse map interaction vector -> real coefficient over Z_q^n."""

    q: int
    n: int
    terms: dict[tuple[int, ...], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cleaned: dict[tuple[int, ...], float] = {}
        for k, coeff in self.terms.items():
            k = tuple(int(e) for e in k)
            if len(k) != self.n or any(not 0 <= e < self.q for e in k):
                raise ContractViolationError(f"interaction vector {k} outside Z_{self.q}^{self.n}")
            coeff = float(coeff)
            if coeff != 0.0:
                cleaned[k] = coeff
        object.__setattr__(self, "terms", cleaned)

    @property
    def max_order(self) -> int:
        return max((sum(1 for e in k if e != 0) for k in self.terms), default=0)


def qary_mobius_dense(f: DenseLandscape, prune_tol: float = 0.0) -> MobiusTransform:
    """All coefficients ``M[k] = sum_{m <= k} (-1)^{|k - m|_0} f(m)``.

    The transform factorizes per coordinate (for each axis, the digit-0 slice
    is subtracted from every nonzero-digit slice), giving an O(n q^n) sweep
    with integer weights, hence exact in float64 up to cancellation.
    """
    grid = f.grid().copy()
    for axis in range(f.n):
        base = np.take(grid, 0, axis=axis)
        for digit in range(1, f.q):
            idx = [slice(None)] * f.n
            idx[axis] = digit
            grid[tuple(idx)] -= base
    flat = grid.reshape(-1)
    keep = np.flatnonzero(np.abs(flat) > prune_tol)
    terms = {
        QaryVector.from_index(int(idx), f.q, f.n).elems: float(flat[idx]) for idx in keep
    }
    return MobiusTransform(f.q, f.n, terms)


def inverse_qary_mobius(M: MobiusTransform, m: QaryVector) -> float:
    """Reconstruct ``f(m) = sum_{k <= m} M[k]`` from the sparse coefficients."""
    if m.q != M.q or m.n != M.n:
        raise ContractViolationError("point does not match transform dimensions")
    total = 0.0
    for k, coeff in M.terms.items():
        if all(ki == 0 or ki == mi for ki, mi in zip(k, m.elems)):
            total += coeff
    return total


@dataclass(frozen=True)
class SetMobius:
    """Moebius coefficients of a coalition game, keyed by frozen subsets of [n]."""

    n: int
    terms: dict[frozenset, float] = field(default_factory=dict)


def _subset_table(values: Mapping, n: int) -> np.ndarray:
    """Validate a full 2^n subset table and lay it out by bitmask."""
    if n > SET_CAPACITY:
        raise CapacityError(f"subset lattice with n={n} exceeds the oracle cap {SET_CAPACITY}")
    table = np.empty(1 << n, dtype=np.float64)
    for mask in range(1 << n):
        key = frozenset(i for i in range(n) if mask >> i & 1)
        if key not in values:
            raise ContractViolationError(f"value table is missing subset {set(key) or '{}'}")
        table[mask] = float(values[key])
    return table


def set_mobius(values: Mapping, n: int) -> SetMobius:
    """Moebius transform ``a(S) = sum_{T subseteq S} (-1)^{|S|-|T|} v(T)``.

    ``values`` must cover all 2^n subsets (frozenset keys).  Uses the standard
    in-place subset-sum sweep, one position at a time.
    """
    table = _subset_table(values, n)
    for i in range(n):
        bit = 1 << i
        for mask in range(1 << n):
            if mask & bit:
                table[mask] -= table[mask ^ bit]
    terms = {
        frozenset(i for i in range(n) if mask >> i & 1): float(table[mask])
        for mask in range(1 << n)
    }
    return SetMobius(n, terms)


def inverse_set_mobius(a: SetMobius, T: Iterable[int]) -> float:
    """Zeta sum ``v(T) = sum_{S subseteq T} a(S)``."""
    T = frozenset(int(i) for i in T)
    if any(i < 0 or i >= a.n for i in T):
        raise ContractViolationError(f"subset {set(T)} outside [0, {a.n})")
    return float(sum(coeff for S, coeff in a.terms.items() if S <= T))
