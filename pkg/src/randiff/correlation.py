"""Finite functions on integer intervals and their order-ell correlations.

Indicator functions are Python-int bitsets (bit ``x - lo`` holds f(x)), so a
correlation term prod_i f_i(a + i*n) over a < Q is a chain of shifted ANDs
followed by a popcount.  Grid-valued functions are integer arrays scaled by
1/eps, which keeps every sum an exact integer until the final division.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Sequence, Union

import numpy as np

from ._rng import uniforms
from .bitmap import bools_to_int, int_to_bools
from .modular import ModuliSet


class SupportError(ValueError):
    pass


class CoveringBoundError(AssertionError):
    """A restricted inner sum exceeded 1: the moduli or supports are wrong."""


def residue_mask(lo: int, hi: int, q: int, r: int) -> int:
    """Bitset over [lo, hi) of the points x with x = r (mod q)."""
    if q < 1:
        raise ValueError("modulus must be positive")
    first = (r - lo) % q
    size = hi - lo
    if first >= size:
        return 0
    count = (size - 1 - first) // q + 1
    return (((1 << (q * count)) - 1) // ((1 << q) - 1)) << first


@dataclass(frozen=True)
class IndicatorFn:
    """A {0,1}-valued function on [lo, hi)."""

    lo: int
    hi: int
    bits: int

    def __post_init__(self):
        if self.hi < self.lo:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}) reversed")
        if self.bits < 0 or self.bits >> (self.hi - self.lo):
            raise SupportError(f"support outside [{self.lo}, {self.hi})")

    @classmethod
    def from_array(cls, values, lo: int = 0) -> IndicatorFn:
        values = np.asarray(values)
        if not np.isin(values, (0, 1)).all():
            raise ValueError("indicator values must be 0 or 1")
        return cls(lo, lo + values.size, bools_to_int(values.astype(bool)))

    @classmethod
    def from_support(cls, support, lo: int, hi: int) -> IndicatorFn:
        bits = 0
        for x in support:
            if not lo <= x < hi:
                raise SupportError(f"{x} outside [{lo}, {hi})")
            bits |= 1 << (x - lo)
        return cls(lo, hi, bits)

    @classmethod
    def ones(cls, lo: int, hi: int) -> IndicatorFn:
        return cls(lo, hi, (1 << (hi - lo)) - 1)

    def __call__(self, x: int) -> int:
        if not self.lo <= x < self.hi:
            return 0
        return (self.bits >> (x - self.lo)) & 1

    def to_array(self) -> np.ndarray:
        return int_to_bools(self.bits, self.hi - self.lo).astype(np.int64)

    def support(self) -> list[int]:
        return (np.flatnonzero(self.to_array()) + self.lo).tolist()

    def __len__(self) -> int:
        return self.bits.bit_count()


@dataclass(frozen=True)
class SignFn:
    """A {-1,+1}-valued function on [0, Q); ``pos`` marks the +1 points."""

    Q: int
    pos: int

    def __post_init__(self):
        if self.pos < 0 or self.pos >> self.Q:
            raise SupportError(f"sign pattern has bits beyond Q={self.Q}")

    @classmethod
    def from_array(cls, values) -> SignFn:
        values = np.asarray(values)
        if not np.isin(values, (-1, 1)).all():
            raise ValueError("sign function values must be -1 or +1")
        return cls(values.size, bools_to_int(values > 0))

    def __call__(self, x: int) -> int:
        if not 0 <= x < self.Q:
            raise IndexError(f"{x} outside [0, {self.Q})")
        return 1 if (self.pos >> x) & 1 else -1

    def to_array(self) -> np.ndarray:
        return np.where(int_to_bools(self.pos, self.Q), 1, -1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class GridFn:
    """Values k * eps on [lo, lo + len(k)) with integer k, |k| <= 1/eps."""

    lo: int
    eps_inv: int
    k: np.ndarray

    def __post_init__(self):
        if self.eps_inv < 1:
            raise ValueError("eps_inv must be a positive integer")
        if np.abs(self.k).max(initial=0) > self.eps_inv:
            raise ValueError("grid values exceed 1 in absolute value")

    @property
    def hi(self) -> int:
        return self.lo + self.k.size

    @property
    def eps(self) -> float:
        return 1.0 / self.eps_inv

    @property
    def values(self) -> np.ndarray:
        return self.k / self.eps_inv

    def __call__(self, x: int) -> float:
        if not self.lo <= x < self.hi:
            return 0.0
        return float(self.k[x - self.lo]) / self.eps_inv


Fn = Union[IndicatorFn, SignFn, GridFn]


@dataclass(frozen=True, eq=False)
class CorrelationVec:
    """a_n = numerators[n-1] / denominator for n = 1..N-1."""

    ell: int
    Q: int
    N: int
    numerators: np.ndarray
    denominator: int

    @cached_property
    def a(self) -> np.ndarray:
        return np.asarray(self.numerators, dtype=np.float64) / self.denominator

    def __len__(self) -> int:
        return self.N - 1

    def at(self, n: int) -> float:
        if not 1 <= n < self.N:
            raise IndexError(f"n={n} outside [1, {self.N})")
        return float(self.a[n - 1])


def _domain(f: Fn) -> tuple[int, int]:
    if isinstance(f, SignFn):
        return 0, f.Q
    return f.lo, f.hi


def _as_int_array(f: Fn, size: int) -> tuple[np.ndarray, int]:
    """Values on [0, size) as integers, plus the scale they were multiplied by."""
    out = np.zeros(size, dtype=np.int64)
    lo, hi = _domain(f)
    if isinstance(f, GridFn):
        vals, scale = f.k, f.eps_inv
    else:
        vals, scale = f.to_array(), 1
    stop = min(hi, size)
    if stop > lo:
        out[lo:stop] = vals[: stop - lo]
    return out, scale


def _check_supports(fs: Sequence[Fn], Q: int, N: int) -> None:
    for i, f in enumerate(fs):
        lo, hi = _domain(f)
        if lo < 0:
            raise SupportError(f"f_{i} has domain starting at {lo} < 0")
        if isinstance(f, SignFn):
            if i != 0:
                raise SupportError("sign functions are only allowed in the dual (i = 0) slot")
            if f.Q != Q:
                raise SupportError(f"sign function domain [0, {f.Q}) must equal [0, Q={Q})")
            continue
        limit = Q + i * N
        if isinstance(f, IndicatorFn):
            top = lo + f.bits.bit_length()
        else:
            nz = np.flatnonzero(f.k)
            top = lo + int(nz[-1]) + 1 if nz.size else lo
        if top > limit:
            raise SupportError(f"f_{i} has support reaching {top - 1}, outside [0, {limit})")


def correlate(fs: Sequence[Fn], Q: int, N: int) -> CorrelationVec:
    """a_n = (1/Q) sum_{a<Q} prod_i f_i(a + i*n) for n = 1..N-1.

    ``fs`` holds ell + 1 functions; f_i must be supported in [0, Q + i*N).
    Indicators (with an indicator or sign function in slot 0) take the bitset
    path; anything involving a GridFn goes through exact integer arrays.
    """
    if len(fs) < 2:
        raise ValueError("need at least two functions (ell >= 1)")
    if Q < 1 or N < 1:
        raise ValueError(f"need Q >= 1 and N >= 1, got Q={Q}, N={N}")
    _check_supports(fs, Q, N)
    ell = len(fs) - 1
    head, tail = fs[0], fs[1:]
    if all(isinstance(f, IndicatorFn) for f in tail) and isinstance(head, (IndicatorFn, SignFn)):
        nums = _correlate_bits(head, tail, Q, N)
        return CorrelationVec(ell, Q, N, nums, Q)

    size = Q + ell * N
    arrays, scale = [], 1
    for f in fs:
        arr, s = _as_int_array(f, size)
        arrays.append(arr)
        scale *= s
    if Q * math.prod(int(np.abs(a).max(initial=1)) for a in arrays) >= 2 ** 62:
        arrays = [a.astype(object) for a in arrays]
    nums = np.zeros(N - 1, dtype=arrays[0].dtype)
    for n in range(1, N):
        prod_ = arrays[0][:Q].copy()
        for i in range(1, ell + 1):
            prod_ = prod_ * arrays[i][i * n : i * n + Q]
        nums[n - 1] = prod_.sum()
    return CorrelationVec(ell, Q, N, nums, Q * scale)


def _correlate_bits(head, tail, Q: int, N: int) -> np.ndarray:
    window = (1 << Q) - 1
    shifts = [(f.bits << f.lo) for f in tail]  # rebase to origin 0
    nums = np.zeros(N - 1, dtype=np.int64)
    for n in range(1, N):
        acc = window
        for i, bits in enumerate(shifts, start=1):
            acc &= bits >> (i * n)
            if not acc:
                break
        nums[n - 1] = _head_sum(head, acc)
    return nums


def _head_sum(head, acc: int) -> int:
    if isinstance(head, SignFn):
        return 2 * (head.pos & acc).bit_count() - acc.bit_count()
    return ((head.bits << head.lo) & acc).bit_count()


def restrict_residue(f: IndicatorFn, q: int, r: int) -> IndicatorFn:
    """f times the indicator of the class r mod q."""
    if not 0 <= r < q:
        raise ValueError(f"residue {r} not in [0, {q})")
    return IndicatorFn(f.lo, f.hi, f.bits & residue_mask(f.lo, f.hi, q, r))


def restricted_inner_sum_bound(mods: ModuliSet, g0: IndicatorFn | SignFn,
                               gs: Sequence[IndicatorFn], n: int) -> float:
    """|sum_{a<Q} g0(a) prod_i g_i(a + i*n)| for residue-restricted g_i.

    With Q = q_1...q_ell and g_i living on the class r_i mod q_i, at most one a
    contributes (the CRT solution), so the result is at most 1; anything larger
    raises ``CoveringBoundError``.
    """
    if len(gs) != mods.ell:
        raise ValueError(f"{len(gs)} restricted functions for ell={mods.ell}")
    Q = mods.Q
    if isinstance(g0, SignFn):
        if g0.Q != Q:
            raise SupportError(f"g0 domain [0, {g0.Q}) must equal [0, Q={Q})")
    elif g0.lo < 0 or g0.lo + g0.bits.bit_length() > Q:
        raise SupportError(f"g0 must be supported in [0, Q={Q})")
    acc = (1 << Q) - 1
    for i, (g, qi, ri) in enumerate(zip(gs, mods.q, mods.r), start=1):
        if g.lo != 0:
            raise SupportError(f"g_{i} must be defined on [0, ...)")
        if g.bits & ~residue_mask(g.lo, g.hi, qi, ri):
            raise SupportError(f"g_{i} not supported on the class {ri} mod {qi}")
        acc &= g.bits >> (i * n)
    total = _head_sum(g0, acc)
    if abs(total) > 1:
        raise CoveringBoundError(
            f"restricted inner sum {total} at n={n} exceeds 1 for q={mods.q}, r={mods.r}"
        )
    return float(abs(total))


def discretize(values, eps: float, lo: int = 0) -> GridFn:
    """Round a [-1, 1]-valued function to the nearest multiple of eps."""
    eps_inv = round(1.0 / eps)
    if eps <= 0 or eps_inv < 1 or abs(eps_inv * eps - 1.0) > 1e-12:
        raise ValueError(f"1/eps must be a positive integer, got eps={eps}")
    values = np.asarray(values, dtype=np.float64)
    if np.abs(values).max(initial=0.0) > 1.0:
        raise ValueError("function values must be bounded by 1")
    k = np.clip(np.rint(values * eps_inv), -eps_inv, eps_inv).astype(np.int64)
    return GridFn(lo, eps_inv, k)


def convexity_sample(values, seed: int, stream: int = 0) -> IndicatorFn:
    """Draw g on [1, K] with independent coordinates and P(g(b) = 1) = f(b)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size and (values.min() < 0 or values.max() > 1):
        raise ValueError("convexity sampler needs values in [0, 1]")
    hits = uniforms(seed, 1, values.size + 1, stream) < values
    return IndicatorFn(1, values.size + 1, bools_to_int(hits))


def window_functions(A: int, j: int, Q: int, N: int, ell: int) -> list[IndicatorFn]:
    """f_i(b) = 1_A(jQ + b) on [0, Q + i*N), i = 0..ell, for a bitset A."""
    shifted = A >> (j * Q)
    return [IndicatorFn(0, Q + i * N, shifted & ((1 << (Q + i * N)) - 1)) for i in range(ell + 1)]


def residue_tuples(mods: ModuliSet):
    """All residue tuples (r_1, ..., r_ell) with 0 <= r_i < q_i."""
    return product(*(range(q) for q in mods.q))
