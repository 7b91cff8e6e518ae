"""Arithmetic progressions with restricted differences in finite sets.

Sets live on [0, N) as Python-int bitsets, so A ∩ (A - r) ∩ ... ∩ (A - ell*r)
is ``A & (A >> r) & ... & (A >> ell*r)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import bitmap
from ._rng import uniforms
from .correlation import residue_mask
from .profiles import RandomSet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiniteSet:
    """A subset of [0, N)."""

    N: int
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.N:
            raise ValueError(f"set has elements outside [0, {self.N})")

    @property
    def density(self) -> float:
        return self.bits.bit_count() / self.N

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __contains__(self, x: int) -> bool:
        return 0 <= x < self.N and bool((self.bits >> x) & 1)

    def elements(self) -> list[int]:
        return np.flatnonzero(self.to_bools()).tolist()

    def to_bools(self) -> np.ndarray:
        return bitmap.int_to_bools(self.bits, self.N)

    @classmethod
    def from_bools(cls, bits) -> FiniteSet:
        bits = np.asarray(bits, dtype=bool)
        return cls(bits.size, bitmap.bools_to_int(bits))

    @classmethod
    def from_elements(cls, elements: Iterable[int], N: int) -> FiniteSet:
        bits = 0
        for x in elements:
            if not 0 <= x < N:
                raise ValueError(f"{x} outside [0, {N})")
            bits |= 1 << x
        return cls(N, bits)

    def write_bitmap(self, path) -> None:
        bitmap.write_bitmap(path, self.to_bools())

    @classmethod
    def from_bitmap(cls, path) -> FiniteSet:
        return cls.from_bools(bitmap.read_bitmap(path))

    # test-set generators

    @classmethod
    def full(cls, N: int) -> FiniteSet:
        return cls(N, (1 << N) - 1)

    @classmethod
    def interval(cls, N: int, lo: int, hi: int) -> FiniteSet:
        lo, hi = max(lo, 0), min(hi, N)
        return cls(N, ((1 << (hi - lo)) - 1) << lo if hi > lo else 0)

    @classmethod
    def blocks(cls, N: int, spans) -> FiniteSet:
        bits = 0
        for lo, hi in spans:
            bits |= cls.interval(N, lo, hi).bits
        return cls(N, bits)

    @classmethod
    def congruence(cls, N: int, q: int, r: int = 0) -> FiniteSet:
        return cls(N, residue_mask(0, N, q, r))

    @classmethod
    def random(cls, N: int, density: float, seed: int, stream: int = 0) -> FiniteSet:
        return cls.from_bools(uniforms(seed, 0, N, stream) < density)

    def minus(self, other: FiniteSet) -> FiniteSet:
        return FiniteSet(self.N, self.bits & ~other.bits)

    @classmethod
    def parse(cls, spec: str, N: int, seed: int = 0) -> FiniteSet:
        """Generator specs: ``full``, ``interval:lo:hi``, ``congruence:q:r``,
        ``random:density``, ``blocks:lo:hi:lo:hi...``."""
        kind, *args = spec.split(":")
        if kind == "full":
            return cls.full(N)
        if kind == "interval":
            return cls.interval(N, int(args[0]), int(args[1]))
        if kind == "congruence":
            return cls.congruence(N, int(args[0]), int(args[1]) if len(args) > 1 else 0)
        if kind == "random":
            return cls.random(N, float(args[0]), seed)
        if kind == "blocks":
            vals = [int(a) for a in args]
            return cls.blocks(N, zip(vals[::2], vals[1::2]))
        raise ValueError(f"unknown set spec {spec!r}")


@dataclass(frozen=True)
class APWitness:
    """a, a+r, ..., a+ell*r all in A, with r drawn from the difference set."""

    a: int
    r: int
    ell: int

    def terms(self) -> list[int]:
        return [self.a + i * self.r for i in range(self.ell + 1)]

    def to_dict(self) -> dict:
        return {"a": self.a, "r": self.r, "ell": self.ell, "terms": self.terms()}


def progression_starts(A: FiniteSet, r: int, ell: int) -> int:
    """Bitset of a with a, a+r, ..., a+ell*r all in A."""
    acc = A.bits
    for i in range(1, ell + 1):
        acc &= A.bits >> (i * r)
        if not acc:
            break
    return acc


def intersective_differences(A: FiniteSet, ell: int, r_max: int) -> set[int]:
    """{r in [1, r_max] : A ∩ (A - r) ∩ ... ∩ (A - ell*r) is non-empty}."""
    if r_max < 1 or ell * r_max >= A.N:
        raise ValueError(f"need 1 <= r_max and ell*r_max < N, got r_max={r_max}, ell={ell}, N={A.N}")
    return {r for r in range(1, r_max + 1) if progression_starts(A, r, ell)}


def is_witness(A: FiniteSet, w: APWitness, R) -> bool:
    """Membership re-check that does not use the bitset shifts."""
    return w.r >= 1 and w.r in R and all(x in A for x in w.terms())


def _differences(R) -> list[int]:
    if isinstance(R, RandomSet):
        return R.elements.tolist()
    return sorted(set(int(r) for r in R))


def find_ap_with_difference_in(A: FiniteSet, R, ell: int) -> APWitness | None:
    """First (ell+1)-term progression in A whose difference lies in R.

    Differences are scanned in ascending order and, for each, the smallest
    start is taken.  Returns None when no r in R works.
    """
    diffs = _differences(R)
    if diffs and (diffs[0] < 1 or diffs[-1] >= A.N):
        raise ValueError(f"differences must lie in [1, {A.N})")
    for r in diffs:
        if ell * r >= A.N:
            break
        starts = progression_starts(A, r, ell)
        if starts:
            w = APWitness(bitmap.lowest_bit(starts), r, ell)
            if not all(x in A for x in w.terms()):
                raise AssertionError(f"bitset search produced an invalid witness {w}")
            return w
    return None


def differences_scanned(A: FiniteSet, R, ell: int) -> int:
    """How many r in R could carry a progression inside [0, N) at all."""
    return sum(1 for r in _differences(R) if ell * r < A.N)


def default_windows(N: int, count: int = 5) -> list[int]:
    """Geometric windows floor(N / 2^j), j = count-1..0, ascending."""
    return sorted({N >> j for j in range(count) if N >> j > 0})


@dataclass(frozen=True)
class WindowDensity:
    """Density of A ∩ (A-n) ∩ ... ∩ (A-ell*n) in [0, M) for each usable window M."""

    n: int
    ell: int
    windows: tuple[int, ...]
    densities: tuple[float, ...]
    skipped: tuple[int, ...]

    @property
    def value(self) -> float:
        return self.densities[-1]

    @property
    def oscillation(self) -> float:
        tail = self.densities[-3:]
        return max(tail) - min(tail)


def rho_window_density(A: FiniteSet, n: int, ell: int, windows=None) -> WindowDensity:
    windows = default_windows(A.N) if windows is None else list(windows)
    if any(b <= a for a, b in zip(windows, windows[1:])) or windows[-1] > A.N:
        raise ValueError(f"windows must increase and stay <= N={A.N}")
    starts = progression_starts(A, n, ell)
    used, dens, skipped = [], [], []
    for M in windows:
        if ell * n >= M:
            skipped.append(M)
            continue
        used.append(M)
        dens.append((starts & ((1 << M) - 1)).bit_count() / M)
    if skipped:
        log.debug("n=%d, ell=%d: skipped windows %s with ell*n >= M", n, ell, skipped)
    if not used:
        raise ValueError(f"every window is too short for ell*n = {ell * n}")
    return WindowDensity(n, ell, tuple(used), tuple(dens), tuple(skipped))


def furstenberg_average(A: FiniteSet, ell: int, N_diff: int, windows=None) -> float:
    """(1/N_diff) sum_{n=1}^{N_diff} rho(A ∩ (A-n) ∩ ... ∩ (A-ell*n))."""
    if N_diff < 1:
        raise ValueError("N_diff must be >= 1")
    return sum(rho_window_density(A, n, ell, windows).value for n in range(1, N_diff + 1)) / N_diff


def weighted_difference_average(A: FiniteSet, R, ell: int, N: int, windows=None) -> float:
    """Average of rho(A ∩ ... ∩ (A-ell*n)) over the n in R ∩ [1, N]."""
    diffs = [r for r in _differences(R) if 1 <= r <= N]
    if not diffs:
        raise ValueError(f"R has no elements in [1, {N}]")
    return sum(rho_window_density(A, n, ell, windows).value for n in diffs) / len(diffs)
