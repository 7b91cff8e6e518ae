"""Finite permutation systems and the ergodic averages run on them.

A system is a permutation T of {0, ..., m-1} with uniform measure.  Orbits
are read off the cycle decomposition, so T^n x costs O(1) for any n.
Unless stated otherwise sums run over n = 1..N.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .profiles import Profile, RandomSet, partial_sums, threshold_schedule


@dataclass(frozen=True, eq=False)
class FiniteSystem:
    perm: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        if perm.ndim != 1 or perm.size == 0:
            raise ValueError("perm must be a non-empty 1-D array")
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("perm is not a bijection of {0..m-1}")
        perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)

    @property
    def m(self) -> int:
        return int(self.perm.size)

    @cached_property
    def _cycles(self):
        """(flat, start, length, cid, pos): cycle c occupies flat[start[c]:start[c]+length[c]]."""
        m = self.m
        cid = np.full(m, -1, dtype=np.int64)
        pos = np.zeros(m, dtype=np.int64)
        flat = np.empty(m, dtype=np.int64)
        starts, lengths = [], []
        perm = self.perm.tolist()
        k = 0
        for x0 in range(m):
            if cid[x0] >= 0:
                continue
            c, start, x, j = len(starts), k, x0, 0
            while cid[x] < 0:
                cid[x], pos[x], flat[k] = c, j, x
                x, j, k = perm[x], j + 1, k + 1
            starts.append(start)
            lengths.append(k - start)
        return flat, np.array(starts), np.array(lengths), cid, pos

    @property
    def cycle_ids(self) -> np.ndarray:
        return self._cycles[3]

    @property
    def cycle_lengths(self) -> np.ndarray:
        return self._cycles[2]

    def cycles(self) -> list[list[int]]:
        flat, start, length, _, _ = self._cycles
        return [flat[s : s + n].tolist() for s, n in zip(start, length)]

    def orbit(self, x, ns) -> np.ndarray:
        """T^n x for every n in ``ns``; x may be a scalar or an array broadcast against ns."""
        flat, start, length, cid, pos = self._cycles
        x = np.asarray(x)
        c = cid[x]
        return flat[start[c] + (pos[x] + np.asarray(ns, dtype=np.int64)) % length[c]]

    def power(self, n: int) -> np.ndarray:
        """The map x -> T^n x as an index array."""
        return self.orbit(np.arange(self.m), n)

    # constructors

    @classmethod
    def rotation(cls, m: int, k: int = 1) -> FiniteSystem:
        return cls((np.arange(m) + k) % m, f"rotation:{m}" + (f":{k}" if k != 1 else ""))

    @classmethod
    def identity(cls, m: int) -> FiniteSystem:
        return cls(np.arange(m), f"identity:{m}")

    @classmethod
    def doubling(cls, m: int) -> FiniteSystem:
        if m % 2 == 0:
            raise ValueError("x -> 2x mod m is a bijection only for odd m")
        return cls((2 * np.arange(m)) % m, f"doubling:{m}")

    @classmethod
    def skew_product(cls, s: int = 32) -> FiniteSystem:
        """(x, y) -> (x+1, y+x) on Z_s x Z_s, with (x, y) stored at x*s + y."""
        x, y = np.divmod(np.arange(s * s), s)
        return cls(((x + 1) % s) * s + (y + x) % s, f"skew:{s}")

    @classmethod
    def parse(cls, spec: str) -> FiniteSystem:
        kind, *args = spec.split(":")
        vals = [int(a) for a in args]
        makers = {"rotation": cls.rotation, "identity": cls.identity,
                  "doubling": cls.doubling, "skew": cls.skew_product}
        if kind not in makers:
            raise ValueError(f"unknown system {spec!r}; expected one of {sorted(makers)}")
        return makers[kind](*vals)

    def to_dict(self) -> dict:
        return {"name": self.name, "perm": self.perm.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> FiniteSystem:
        if "perm" in d:
            return cls(np.asarray(d["perm"]), d.get("name", "custom"))
        return cls.parse(d["name"])

    @classmethod
    def from_json(cls, text: str) -> FiniteSystem:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Observable:
    """A real function on the points of a finite system, with a sup-norm bound."""

    values: np.ndarray
    bound: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        top = float(np.abs(v).max()) if v.size else 0.0
        if self.bound is None:
            object.__setattr__(self, "bound", top)
        elif top > self.bound:
            raise ValueError(f"|F| reaches {top} > declared bound {self.bound}")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def integral(self) -> float:
        return float(self.values.mean())

    @classmethod
    def constant(cls, m: int, c: float = 1.0) -> Observable:
        return cls(np.full(m, float(c)))

    @classmethod
    def random_indicator(cls, m: int, seed: int, density: float = 0.5) -> Observable:
        rng = np.random.default_rng(seed)
        return cls((rng.random(m) < density).astype(np.float64), 1.0)

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "bound": self.bound}

    @classmethod
    def from_dict(cls, d: dict) -> Observable:
        return cls(np.asarray(d["values"]), d.get("bound"))


def _vals(F, m: int) -> np.ndarray:
    v = F.values if isinstance(F, Observable) else np.asarray(F, dtype=np.float64)
    if v.shape != (m,):
        raise ValueError(f"observable has shape {v.shape}, system has {m} points")
    return v


def _elements(R) -> np.ndarray:
    if isinstance(R, RandomSet):
        return R.elements
    return np.unique(np.asarray(list(R), dtype=np.int64))


def invariant_projection(sys: FiniteSystem, F) -> Observable:
    """Replace F by its mean over each cycle of T."""
    v = _vals(F, sys.m)
    cid = sys.cycle_ids
    means = np.bincount(cid, weights=v) / sys.cycle_lengths
    return Observable(means[cid])


def _product_along(sys: FiniteSystem, Fs, x, ns: np.ndarray) -> np.ndarray:
    """prod_i F_i(T^{i n} x) for each n in ns."""
    out = np.ones(ns.size)
    for i, F in enumerate(Fs, start=1):
        out *= _vals(F, sys.m)[sys.orbit(x, i * ns)]
    return out


def multiple_average(sys: FiniteSystem, Fs, N: int, x: int) -> float:
    """(1/N) sum_{n=1}^N prod_i F_i(T^{i n} x)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return float(_product_along(sys, Fs, x, np.arange(1, N + 1)).sum() / N)


def random_average(sys: FiniteSystem, Fs, R, N: int, x: int) -> float:
    """Average of prod_i F_i(T^{i n} x) over n in R ∩ [1, N]."""
    ns = _elements(R)
    ns = ns[(ns >= 1) & (ns <= N)]
    if ns.size == 0:
        raise ValueError(f"R has no elements in [1, {N}]")
    return float(_product_along(sys, Fs, x, ns).sum() / ns.size)


def _first_elements(R, N: int) -> np.ndarray:
    els = _elements(R)
    if els.size < N:
        raise ValueError(f"R has only {els.size} elements; the largest usable N is {els.size}")
    return els[:N]


def semirandom_direct(sys: FiniteSystem, F1, F2, R, N: int, x: int) -> float:
    """(1/N) sum_{k=1}^N F1(T^k x) F2(T^{r_k} x), r_1 < r_2 < ... the elements of R."""
    r = _first_elements(R, N)
    k = np.arange(1, N + 1)
    return float(np.sum(_vals(F1, sys.m)[sys.orbit(x, k)] * _vals(F2, sys.m)[sys.orbit(x, r)]) / N)


def semirandom_prefix(sys: FiniteSystem, F1, F2, R, N: int, x: int) -> float:
    """The same average written over all times n <= r_N:

        (1/sum U_n) sum_n U_n F1(T^{U_1+...+U_n} x) F2(T^n x).
    """
    r = _first_elements(R, N)
    M = int(r[-1])
    U = np.zeros(M + 1, dtype=np.int64)
    U[r] = 1
    U = U[1:]
    c = np.cumsum(U)
    n = np.arange(1, M + 1)
    terms = U * _vals(F1, sys.m)[sys.orbit(x, c)] * _vals(F2, sys.m)[sys.orbit(x, n)]
    return float(np.sum(terms) / c[-1])


def semirandom_average(sys: FiniteSystem, F1, F2, R, N: int, x: int, check: bool = True,
                       tol: float = 1e-12) -> float:
    direct = semirandom_direct(sys, F1, F2, R, N, x)
    if check:
        prefix = semirandom_prefix(sys, F1, F2, R, N, x)
        if abs(direct - prefix) > tol:
            raise AssertionError(f"semirandom forms disagree: {direct!r} vs {prefix!r}")
    return direct


def _centered_weights(profile: Profile, R, N: int) -> np.ndarray:
    if N > profile.n_max:
        raise ValueError(f"N={N} exceeds n_max={profile.n_max}")
    U = np.zeros(N + 1)
    els = _elements(R)
    U[els[els <= N]] = 1.0
    return (U - profile.u[: N + 1])[1:]


def centered_trace(sys: FiniteSystem, Fs, profile: Profile, R, n_max: int, x: int) -> np.ndarray:
    """A_N for every N <= n_max (slot 0 is nan), where
    A_N = (1/S(N)) sum_{n<=N} (U_n - u_n) prod_i F_i(T^{i n} x)."""
    w = _centered_weights(profile, R, n_max)
    terms = w * _product_along(sys, Fs, x, np.arange(1, n_max + 1))
    out = np.full(n_max + 1, np.nan)
    out[1:] = np.cumsum(terms) / partial_sums(profile).S[1 : n_max + 1]
    return out


def centered_average(sys: FiniteSystem, Fs, profile: Profile, R, N: int, x: int) -> float:
    S_N = partial_sums(profile)(N)
    if S_N <= 0:
        raise ValueError("S(N) must be positive")
    w = _centered_weights(profile, R, N)
    return float(np.sum(w * _product_along(sys, Fs, x, np.arange(1, N + 1))) / S_N)


@dataclass(frozen=True, eq=False)
class SubseqSchedule:
    """N_i minimal with S(N_i) >= sigma^i."""

    sigma: float
    indices: np.ndarray
    requested: int
    truncated: bool = False

    def __len__(self) -> int:
        return int(self.indices.size)

    def __getitem__(self, i: int) -> int:
        if i < 1:
            raise IndexError("schedule indices are 1-based")
        return int(self.indices[i - 1])


def subsequence(profile: Profile, sigma: float, count: int) -> SubseqSchedule:
    if sigma <= 1:
        raise ValueError("sigma must exceed 1")
    sched = threshold_schedule(profile, sigma ** np.arange(1, count + 1, dtype=np.float64), count)
    return SubseqSchedule(float(sigma), sched.indices, count, sched.truncated)


def window_oscillations(trace: np.ndarray, schedule: SubseqSchedule, i_min: int = 1) -> np.ndarray:
    """max_{N_i <= N < N_{i+1}} |trace[N] - trace[N_i]| for i = i_min .. len-1."""
    idx = schedule.indices
    out = []
    for i in range(i_min, len(idx)):
        lo, hi = int(idx[i - 1]), int(idx[i])
        if hi >= trace.size:
            break
        out.append(float(np.abs(trace[lo:hi] - trace[lo]).max()))
    return np.array(out)


def oscillation_check(trace: np.ndarray, schedule: SubseqSchedule, i_min: int = 1) -> float:
    """Largest inter-schedule oscillation of a dense trace; compare with 4(sigma - 1)."""
    osc = window_oscillations(trace, schedule, i_min)
    return float(osc.max()) if osc.size else 0.0


def window_count_ratios(R, profile: Profile, schedule: SubseqSchedule) -> np.ndarray:
    """|R ∩ [N_i, N_{i+1})| / sum_{N_i <= n < N_{i+1}} u_n for consecutive schedule points."""
    els = _elements(R)
    S = partial_sums(profile).S
    idx = schedule.indices
    counts = np.diff(np.searchsorted(els, idx, side="left"))
    mass = S[idx[1:] - 1] - S[idx[:-1] - 1]
    return counts / mass


def maximal_operators(sys: FiniteSystem, F, profile: Profile, R, N_max: int, x=None,
                      chunk: int = 256):
    """(sup_N B_N F, sup_N C_N F) over N <= N_max with

        B_N F = (1/S(N)) sum u_n |F(T^n .)|,   C_N F = (1/S(N)) sum U_n |F(T^n .)|.

    With ``x=None`` both are returned as vectors over the whole space.
    """
    absF = np.abs(_vals(F, sys.m))
    u = profile.u[1 : N_max + 1]
    U = np.zeros(N_max + 1)
    els = _elements(R)
    U[els[els <= N_max]] = 1.0
    U = U[1:]
    S = partial_sums(profile).S[1 : N_max + 1]
    if S[0] <= 0:
        raise ValueError("S(N) must be positive")
    ns = np.arange(1, N_max + 1)
    xs = np.arange(sys.m) if x is None else np.atleast_1d(x)
    B = np.empty(xs.size)
    C = np.empty(xs.size)
    for s in range(0, xs.size, chunk):
        vals = absF[sys.orbit(xs[s : s + chunk, None], ns[None, :])]
        B[s : s + chunk] = (np.cumsum(vals * u, axis=1) / S).max(axis=1)
        C[s : s + chunk] = (np.cumsum(vals * U, axis=1) / S).max(axis=1)
    if x is None:
        return B, C
    return float(B[0]), float(C[0])


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """Blocks [kL, (k+1)L) covering [0, n_max), split by whether they meet R."""

    L: int
    n_max: int
    hit_blocks: np.ndarray
    clean_blocks: np.ndarray

    @property
    def num_blocks(self) -> int:
        return int(self.hit_blocks.size + self.clean_blocks.size)

    @property
    def hit_density(self) -> float:
        return self.hit_blocks.size / self.num_blocks


def block_partition(R, L: int, n_max: int) -> BlockPartition:
    if L < 1:
        raise ValueError("L must be >= 1")
    els = _elements(R)
    if els.size and (els[0] < 0 or els[-1] >= n_max):
        raise ValueError(f"R must lie in [0, {n_max})")
    K = -(-n_max // L)
    hit = np.unique(els // L)
    mask = np.ones(K, dtype=bool)
    mask[hit] = False
    return BlockPartition(L, n_max, hit, np.flatnonzero(mask))


def _prefix_counts(R, N: int) -> np.ndarray:
    """c[n] = |R ∩ [1, n]| for n = 0..N."""
    X = np.zeros(N + 1, dtype=np.int64)
    els = _elements(R)
    X[els[(els >= 1) & (els <= N)]] = 1
    return np.cumsum(X)


def lemma2_average(f, g, w, R, N: int) -> float:
    """(1/sum w_n) sum_{n=1}^N w_n f[c(n)] g[n-1], c(n) = |R ∩ [1, n]|.

    ``w=None`` means unit weights; otherwise w[n-1] = w_n must be positive and
    non-increasing.
    """
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.size < N:
        raise ValueError(f"g has {g.size} terms, need {N}")
    if w is None:
        w = np.ones(N)
    else:
        w = np.asarray(w, dtype=np.float64)[:N]
        if w.size < N or np.any(w <= 0) or np.any(np.diff(w) > 0):
            raise ValueError("weights must be positive and non-increasing")
    c = _prefix_counts(R, N)[1:]
    if c[-1] >= f.size:
        raise ValueError(f"f needs at least {c[-1] + 1} terms")
    return float(np.sum(w * f[c] * g[:N]) / w.sum())


@dataclass(frozen=True)
class Lemma2Split:
    L: int
    K: int
    hit_term: float
    clean_term: float
    clean_bound: float
    hit_fraction: float

    @property
    def total(self) -> float:
        return self.hit_term + self.clean_term


def lemma2_split(f, g, R, L: int, N: int) -> Lemma2Split:
    """Unit-weight average over n < K L (K = N // L), split into blocks that meet R
    and blocks that do not.

    On a clean block c(n) is constant, so that block contributes at most
    max|f| |(1/L) sum_block g_n|; ``clean_bound`` collects these block means.
    The n = 0 slot carries g_0 = 0.
    """
    K = N // L
    if K < 1:
        raise ValueError("need N >= L")
    f = np.asarray(f, dtype=np.float64)
    g0 = np.zeros(K * L)
    g0[1:] = np.asarray(g, dtype=np.float64)[: K * L - 1]
    c = _prefix_counts(R, K * L - 1)
    terms = (f[c] * g0).reshape(K, L)
    els = _elements(R)
    parts = block_partition(els[els < K * L], L, K * L)
    hit = np.zeros(K, dtype=bool)
    hit[parts.hit_blocks] = True
    block_sums = terms.sum(axis=1) / (K * L)
    g_means = np.abs(g0.reshape(K, L).mean(axis=1))
    return Lemma2Split(
        L=L, K=K,
        hit_term=float(block_sums[hit].sum()),
        clean_term=float(block_sums[~hit].sum()),
        clean_bound=float(g_means[~hit].sum() / K),
        hit_fraction=float(hit.mean()),
    )
