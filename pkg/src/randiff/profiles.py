"""Probability profiles (u_n), random sets drawn from them, and the strong law.

Sequences are indexed from n = 1.  Arrays indexed by n carry a dummy slot at
position 0, so ``profile.u[n]`` is u_n and ``partial_sums(profile).S[N]`` is
S(N) = u_1 + ... + u_N with S(0) = 0.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import bitmap
from ._rng import uniforms

log = logging.getLogger(__name__)

KINDS = ("power", "constant", "logpower", "custom")


class ProfileError(ValueError):
    pass


def compensated_cumsum(x: np.ndarray) -> np.ndarray:
    """Running sums with the rounding error of every step folded back in.

    ``np.add.accumulate`` adds sequentially, so each partial sum is exactly
    fl(s_{k-1} + x_k); TwoSum recovers each step's rounding error exactly and a
    second accumulation adds the errors back (cascaded summation).
    """
    x = np.asarray(x, dtype=np.float64)
    s = np.add.accumulate(x)
    prev = np.concatenate(([0.0], s[:-1]))
    bp = s - prev
    err = (prev - (s - bp)) + (x - bp)
    return s + np.add.accumulate(err)


@dataclass(frozen=True)
class Profile:
    """A non-increasing probability sequence u_1 >= u_2 >= ... on [1, n_max].

    kinds: ``power`` u_n = n^-b (0 <= b < 1); ``constant`` u_n = p;
    ``logpower`` u_n = c n^-b (1 + log n)^e; ``custom`` u_n = table[n-1].
    """

    kind: str
    n_max: int
    b: float = 0.0
    p: float = 1.0
    c: float = 1.0
    e: float = 0.0
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ProfileError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        if self.n_max < 1:
            raise ProfileError(f"n_max must be positive, got {self.n_max}")
        if self.kind == "power" and not 0.0 <= self.b < 1.0:
            raise ProfileError(f"power profile needs 0 <= b < 1, got b={self.b}")
        if self.kind == "custom":
            if self.table is None or len(self.table) != self.n_max:
                raise ProfileError("custom profile table must have exactly n_max entries")
        u = self.u[1:]
        if not np.all((u > 0) & (u <= 1)):
            bad = int(np.flatnonzero(~((u > 0) & (u <= 1)))[0]) + 1
            raise ProfileError(f"u_{bad} = {u[bad - 1]!r} is not in (0, 1]")
        rises = np.flatnonzero(np.diff(u) > 0)
        if rises.size:
            n = int(rises[0]) + 1
            raise ProfileError(
                f"profile must be non-increasing: u_{n} = {u[n - 1]!r} < u_{n + 1} = {u[n]!r}"
            )

    @classmethod
    def power(cls, b: float, n_max: int) -> Profile:
        return cls("power", n_max, b=float(b))

    @classmethod
    def constant(cls, p: float, n_max: int) -> Profile:
        return cls("constant", n_max, p=float(p))

    @classmethod
    def log_power(cls, b: float, c: float, e: float, n_max: int) -> Profile:
        return cls("logpower", n_max, b=float(b), c=float(c), e=float(e))

    @classmethod
    def custom(cls, table) -> Profile:
        table = tuple(float(v) for v in table)
        return cls("custom", len(table), table=table)

    def with_n_max(self, n_max: int) -> Profile:
        if self.kind == "custom":
            raise ProfileError("cannot resize a custom profile")
        return Profile(self.kind, n_max, self.b, self.p, self.c, self.e)

    @cached_property
    def u(self) -> np.ndarray:
        n = np.arange(1, self.n_max + 1, dtype=np.float64)
        if self.kind == "power":
            vals = n ** -self.b
        elif self.kind == "constant":
            vals = np.full(self.n_max, self.p)
        elif self.kind == "logpower":
            vals = self.c * n ** -self.b * (1.0 + np.log(n)) ** self.e
        else:
            vals = np.asarray(self.table, dtype=np.float64)
        out = np.empty(self.n_max + 1)
        out[0] = 0.0
        out[1:] = vals
        out.setflags(write=False)
        return out

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n_max": self.n_max}
        if self.kind in ("power", "logpower"):
            d["b"] = self.b
        if self.kind == "constant":
            d["p"] = self.p
        if self.kind == "logpower":
            d.update(c=self.c, e=self.e)
        if self.kind == "custom":
            d["table"] = list(self.table)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> Profile:
        kind = d.get("kind")
        if kind == "custom":
            return cls.custom(d["table"])
        try:
            n_max = int(d["n_max"])
        except KeyError:
            raise ProfileError("profile JSON is missing 'n_max'") from None
        if kind == "power":
            return cls.power(d["b"], n_max)
        if kind == "constant":
            return cls.constant(d["p"], n_max)
        if kind == "logpower":
            return cls.log_power(d["b"], d.get("c", 1.0), d.get("e", 0.0), n_max)
        raise ProfileError(f"unknown profile kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> Profile:
        return cls.from_dict(json.loads(text))

    @classmethod
    def parse(cls, spec: str, n_max: int) -> Profile:
        """Parse ``power:0.5``, ``constant:0.5``, ``logpower:b:c:e`` or a JSON object."""
        spec = spec.strip()
        if spec.startswith("{"):
            d = json.loads(spec)
            d.setdefault("n_max", n_max)
            return cls.from_dict(d)
        kind, *args = spec.split(":")
        try:
            vals = [float(a) for a in args]
            if kind == "power":
                return cls.power(vals[0], n_max)
            if kind == "constant":
                return cls.constant(vals[0], n_max)
            if kind == "logpower":
                return cls.log_power(*vals[:3], n_max)
        except (IndexError, ValueError) as exc:
            raise ProfileError(f"bad profile spec {spec!r}: {exc}") from None
        raise ProfileError(f"bad profile spec {spec!r}")


@dataclass(frozen=True, eq=False)
class PartialSums:
    """S(N) = u_1 + ... + u_N for 0 <= N <= n_max (S(0) = 0)."""

    S: np.ndarray

    def __call__(self, N: int) -> float:
        return float(self.S[N])

    @property
    def n_max(self) -> int:
        return self.S.size - 1

    def first_reaching(self, thresholds) -> np.ndarray:
        """Smallest N with S(N) >= t for each threshold; n_max + 1 when unreachable."""
        return np.searchsorted(self.S, np.asarray(thresholds, dtype=np.float64), side="left")


@lru_cache(maxsize=8)
def partial_sums(profile: Profile) -> PartialSums:
    S = np.empty(profile.n_max + 1)
    S[0] = 0.0
    S[1:] = compensated_cumsum(profile.u[1:])
    S.setflags(write=False)
    return PartialSums(S)


@dataclass(frozen=True, eq=False)
class RandomSet:
    """One realization R = {n : U_n = 1} of the random model on [1, n_max]."""

    seed: int
    profile: Profile
    elements: np.ndarray

    def __len__(self) -> int:
        return int(self.elements.size)

    def __iter__(self):
        return iter(self.elements.tolist())

    def __contains__(self, n) -> bool:
        return 1 <= n <= self.profile.n_max and bool(self.membership[n])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RandomSet):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.profile == other.profile
            and np.array_equal(self.elements, other.elements)
        )

    __hash__ = None

    @cached_property
    def membership(self) -> np.ndarray:
        """Boolean vector indexed by n (slot 0 is always False)."""
        m = np.zeros(self.profile.n_max + 1, dtype=bool)
        m[self.elements] = True
        m.setflags(write=False)
        return m

    @property
    def bits(self) -> bytes:
        return np.packbits(self.membership[1:], bitorder="little").tobytes()

    @cached_property
    def counts(self) -> np.ndarray:
        """counts[N] = |R ∩ [1, N]|."""
        return np.cumsum(self.membership, dtype=np.int64)

    def counting(self, N: int) -> int:
        return int(np.searchsorted(self.elements, N, side="right"))

    def to_lines(self) -> str:
        return "".join(f"{r}\n" for r in self.elements.tolist())

    def write_bitmap(self, path) -> None:
        bitmap.write_bitmap(path, self.membership[1:])

    @classmethod
    def from_bitmap(cls, path, profile: Profile | None = None, seed: int = -1) -> RandomSet:
        bits = bitmap.read_bitmap(path)
        return cls.from_membership(bits, profile, seed)

    @classmethod
    def from_membership(cls, bits, profile: Profile | None = None, seed: int = -1) -> RandomSet:
        """Wrap an explicit set; ``bits[k]`` is membership of k + 1."""
        bits = np.asarray(bits, dtype=bool)
        if profile is None:
            profile = Profile.constant(1.0, bits.size)
        elif profile.n_max != bits.size:
            raise ProfileError(f"bitmap covers {bits.size} indices, profile n_max={profile.n_max}")
        return cls(seed, profile, np.flatnonzero(bits).astype(np.int64) + 1)

    @classmethod
    def from_elements(cls, elements, n_max: int) -> RandomSet:
        els = np.unique(np.asarray(list(elements), dtype=np.int64))
        if els.size and (els[0] < 1 or els[-1] > n_max):
            raise ProfileError(f"elements must lie in [1, {n_max}]")
        return cls(-1, Profile.constant(1.0, n_max), els)


def sample_range(profile: Profile, seed: int, lo: int, hi: int, stream: int = 0) -> np.ndarray:
    """Membership of n for lo <= n < hi, identical to the same slice of a full sample."""
    lo, hi = max(lo, 1), min(hi, profile.n_max + 1)
    return uniforms(seed, lo, hi, stream) < profile.u[lo:hi]


def sample(profile: Profile, seed: int, stream: int = 0) -> RandomSet:
    """Include each n in [1, n_max] independently with probability u_n."""
    hit = sample_range(profile, seed, 1, profile.n_max + 1, stream)
    return RandomSet(seed, profile, np.flatnonzero(hit).astype(np.int64) + 1)


def slln_ratio(rset: RandomSet, N: int) -> float:
    if not 1 <= N <= rset.profile.n_max:
        raise ValueError(f"N={N} outside [1, {rset.profile.n_max}]")
    return rset.counting(N) / partial_sums(rset.profile)(N)


@dataclass(frozen=True, eq=False)
class ThresholdSchedule:
    """Minimal indices N_i with S(N_i) >= thresholds[i-1]."""

    thresholds: np.ndarray
    indices: np.ndarray
    requested: int | None = None
    truncated: bool = False

    def __len__(self) -> int:
        return int(self.indices.size)

    def __getitem__(self, i: int) -> int:
        """N_i, 1-based."""
        if i < 1:
            raise IndexError("schedule indices are 1-based")
        return int(self.indices[i - 1])


def threshold_schedule(profile: Profile, thresholds, requested: int | None = None) -> ThresholdSchedule:
    thresholds = np.asarray(thresholds, dtype=np.float64)
    idx = partial_sums(profile).first_reaching(thresholds)
    ok = idx <= profile.n_max
    truncated = not bool(ok.all())
    if truncated:
        first_bad = int(np.flatnonzero(~ok)[0])
        log.warning(
            "threshold %.6g unreachable within n_max=%d (S(n_max)=%.6g); schedule truncated to %d terms",
            thresholds[first_bad], profile.n_max, partial_sums(profile)(profile.n_max), first_bad,
        )
        thresholds, idx = thresholds[:first_bad], idx[:first_bad]
    return ThresholdSchedule(thresholds, idx.astype(np.int64), requested, truncated)


def slln_subsequence(profile: Profile, count: int | None = None) -> ThresholdSchedule:
    """N_i minimal with S(N_i) >= i^2; all reachable terms when ``count`` is None."""
    if count is None:
        count = math.isqrt(int(partial_sums(profile)(profile.n_max)))
    i = np.arange(1, count + 1, dtype=np.float64)
    return threshold_schedule(profile, i * i, requested=count)
