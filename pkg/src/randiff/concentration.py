"""Bernstein-type tail bounds, union estimates, covering counts, epsilon
schedules and Monte Carlo estimation of supremum tails.

Probabilities are clipped to [0, 1] only when a value is returned.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._rng import uniforms
from .modular import ModuliSet
from .profiles import Profile, partial_sums, threshold_schedule

SCHEDULE_KINDS = ("power_budget", "log_power", "quarter_root", "log_of_sum")


def bernstein_bound(t: float, sum_var: float, K: float, clip: bool = True) -> float:
    """2 max{exp(-t^2 / (4 sum_var)), exp(-t / (2K))} for a sum of independent,
    mean-zero terms bounded by K with total variance sum_var.

    With sum_var = 0 the first branch vanishes and only 2 exp(-t/(2K)) remains.
    """
    if t <= 0 or sum_var < 0 or K <= 0:
        raise ValueError(f"need t > 0, sum_var >= 0, K > 0; got {t}, {sum_var}, {K}")
    tail = math.exp(-t / (2.0 * K))
    if sum_var > 0:
        tail = max(math.exp(-t * t / (4.0 * sum_var)), tail)
    bound = 2.0 * tail
    return min(1.0, bound) if clip else bound


def corollary1_bound(eps: float, S_N: float) -> float:
    """exp(-eps^2 S(N) / 4): tail of |(1/S(N)) sum (U_n - u_n) a_n| > eps for |a_n| <= 1."""
    if not 0 <= eps < 1:
        raise ValueError(f"eps must be in [0, 1), got {eps}")
    if S_N <= 0:
        raise ValueError(f"S_N must be positive, got {S_N}")
    return math.exp(-eps * eps * S_N / 4.0)


def union_bound(family_size: int, per_event: float) -> float:
    if family_size < 1:
        raise ValueError("family_size must be >= 1")
    if not 0 <= per_event <= 1:
        raise ValueError(f"per_event must be a probability, got {per_event}")
    return min(1.0, family_size * per_event)


def covering_bits(mods: ModuliSet, Q: int, N: int) -> int:
    """Free bits in the restricted families: Q for g_0 plus, for each i, the
    number of points of the class r_i mod q_i inside [0, Q + i*N)."""
    return Q + sum(-(-(Q + i * N) // qi) for i, qi in enumerate(mods.q, start=1))


def covering_log_cardinality(mods: ModuliSet, Q: int, N: int) -> float:
    """log |G_0 x G_1 x ... x G_ell| = covering_bits * log 2."""
    return covering_bits(mods, Q, N) * math.log(2)


def covering_bits_reference(mods: ModuliSet, Q: int, N: int) -> float:
    """The simplified count Q + sum_i ell*N/q_i used in the budget inequality."""
    return Q + sum(mods.ell * N / qi for qi in mods.q)


@dataclass(frozen=True)
class EpsilonSchedule:
    """A rule N -> eps_N.

    power_budget: smallest eps with eps^2 S(N) / N^(1 - 1/(ell+1)) >= C
    log_power:    (log N)^-(1 + delta)
    quarter_root: c S(N)^(-1/4)
    log_of_sum:   (log S(N))^-(1 + delta)
    """

    kind: str
    C: float = 1.0
    ell: int = 2
    delta: float = 0.1
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def power_budget(cls, C: float, ell: int) -> EpsilonSchedule:
        return cls("power_budget", C=C, ell=ell)

    @classmethod
    def log_power(cls, delta: float) -> EpsilonSchedule:
        return cls("log_power", delta=delta)

    @classmethod
    def quarter_root(cls, c: float) -> EpsilonSchedule:
        return cls("quarter_root", c=c)

    @classmethod
    def log_of_sum(cls, delta: float) -> EpsilonSchedule:
        return cls("log_of_sum", delta=delta)

    def evaluate(self, N, S_N):
        """The raw formula (no clipping); accepts scalars or arrays."""
        N = np.asarray(N, dtype=np.float64)
        S_N = np.asarray(S_N, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "power_budget":
                out = np.sqrt(self.C * N ** (1.0 - 1.0 / (self.ell + 1)) / S_N)
            elif self.kind == "log_power":
                out = np.log(N) ** -(1.0 + self.delta)
            elif self.kind == "quarter_root":
                out = self.c * S_N ** -0.25
            else:
                out = np.log(S_N) ** -(1.0 + self.delta)
        return out[()] if out.ndim == 0 else out


@lru_cache(maxsize=16)
def _burn_in(schedule: EpsilonSchedule, profile: Profile) -> tuple[int, np.ndarray]:
    S = partial_sums(profile).S
    N = np.arange(profile.n_max + 1)
    eps = np.full(profile.n_max + 1, np.nan)
    eps[1:] = schedule.evaluate(N[1:], S[1:])
    bad = ~((eps > 0) & (eps < 1))
    bad[0] = True
    # eps[N] > eps[N-1] rules out starting at N-1 but not at N
    rises = np.zeros_like(bad)
    rises[2:] = np.diff(eps[1:]) > 1e-12 * np.abs(eps[1:-1])
    last_bad = int(np.flatnonzero(bad)[-1]) + 1
    last_rise = int(np.flatnonzero(rises)[-1]) if rises.any() else 0
    return max(last_bad, last_rise), eps


def burn_in(schedule: EpsilonSchedule, profile: Profile) -> int:
    """First N such that eps lies in (0, 1) and is non-increasing from N to n_max."""
    return _burn_in(schedule, profile)[0]


def epsilon_at(schedule: EpsilonSchedule, profile: Profile, N: int) -> float:
    first, eps = _burn_in(schedule, profile)
    if first > profile.n_max:
        raise ValueError(f"schedule {schedule.kind} never leaves burn-in within n_max={profile.n_max}")
    if not first <= N <= profile.n_max:
        raise ValueError(f"N={N} is inside the burn-in; first valid N is {first}")
    return float(np.clip(eps[N], np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)))


def lacunary_epsilon_terms(schedule: EpsilonSchedule, profile: Profile, sigma: float,
                           count: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(i, N_i, eps_{N_i}) along N_i = min{N : S(N) >= sigma^i}, past the burn-in."""
    if sigma <= 1:
        raise ValueError("sigma must exceed 1")
    S_max = partial_sums(profile)(profile.n_max)
    top = int(math.floor(math.log(S_max) / math.log(sigma)))
    count = top if count is None else count
    sched = threshold_schedule(profile, sigma ** np.arange(1, count + 1, dtype=np.float64), count)
    first, eps = _burn_in(schedule, profile)
    i = np.flatnonzero(sched.indices >= first) + 1
    idx = sched.indices[i - 1]
    return i, idx, eps[idx]


def lacunary_epsilon_sums(schedule: EpsilonSchedule, profile: Profile, sigma: float,
                          count: int | None = None) -> np.ndarray:
    """Running sums of eps_N over N in I_sigma past the burn-in."""
    return np.cumsum(lacunary_epsilon_terms(schedule, profile, sigma, count)[2])


@dataclass(frozen=True)
class TailEstimate:
    trials: int
    eps: float
    N: int
    S_N: float
    family_size: int
    exceed_count: int
    per_event_bound: float
    bound: float

    @property
    def empirical_tail(self) -> float:
        return self.exceed_count / self.trials

    @property
    def std_error(self) -> float:
        """Binomial standard error of the empirical tail if the bound were exact."""
        p = self.bound
        return math.sqrt(p * (1.0 - p) / self.trials)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials, "eps": self.eps, "N": self.N, "S_N": self.S_N,
            "family_size": self.family_size, "exceed_count": self.exceed_count,
            "empirical_tail": self.empirical_tail, "per_event_bound": self.per_event_bound,
            "bound": self.bound, "std_error": self.std_error,
        }


def family_matrix(family, N: int) -> np.ndarray:
    """Stack a family of CorrelationVecs / vectors / 2-D arrays into an (F, N) matrix.

    Entries past a vector's end are zero, so CorrelationVecs (length N-1) fit.
    """
    if isinstance(family, np.ndarray) and family.ndim == 2:
        if family.shape[1] < N - 1:
            raise ValueError(f"family vectors have length {family.shape[1]} < N-1 = {N - 1}")
        F = np.zeros((family.shape[0], N), dtype=np.float64)
        w = min(N, family.shape[1])
        F[:, :w] = family[:, :w]
    else:
        rows = []
        for vec in family:
            a = np.asarray(getattr(vec, "a", vec), dtype=np.float64)
            rows.extend(a if a.ndim == 2 else [a])
        if not rows:
            raise ValueError("family must be non-empty")
        F = np.zeros((len(rows), N))
        for j, a in enumerate(rows):
            if a.size < N - 1:
                raise ValueError(f"family vector {j} has length {a.size} < N-1 = {N - 1}")
            F[j, : min(N, a.size)] = a[:N]
    if F.shape[0] == 0:
        raise ValueError("family must be non-empty")
    if np.abs(F).max() > 1:
        raise ValueError("family vectors must satisfy |a_n| <= 1")
    return F


def sup_deviations(profile: Profile, F: np.ndarray, trials: int, seed: int,
                   chunk: int = 1000) -> np.ndarray:
    """For each trial t, sup_f |(1/S(N)) sum_{n<=N} (U_n - u_n) a_n| with U keyed by (seed, t).

    ``F`` is the (family_size, N) matrix from ``family_matrix``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    N = F.shape[1]
    if N > profile.n_max:
        raise ValueError(f"N={N} exceeds profile n_max={profile.n_max}")
    u = profile.u[1 : N + 1]
    S_N = partial_sums(profile)(N)
    centre = F @ u
    # {0,1} x small-integer products are exact in float32 below 2**24
    exact32 = bool(np.all(F == np.rint(F))) and N * np.abs(F).max() < 2 ** 24
    Fw = F.astype(np.float32 if exact32 else np.float64)
    out = np.empty(trials)
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        U = np.empty((stop - start, N), dtype=Fw.dtype)
        for t in range(start, stop):
            U[t - start] = uniforms(seed, 1, N + 1, stream=t) < u
        hits = (U @ Fw.T).astype(np.float64)
        out[start:stop] = np.abs(hits - centre).max(axis=1) / S_N
    return out


def sup_tail_monte_carlo(profile: Profile, family, N: int, eps: float, trials: int,
                         seed: int, chunk: int = 1000) -> TailEstimate:
    """Monte Carlo estimate of P(sup_f |(1/S(N)) sum (U_n - u_n) a_n| > eps),
    paired with the union of per-event exponential bounds over the family."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    F = family_matrix(family, N)
    devs = sup_deviations(profile, F, trials, seed, chunk)
    return tail_from_deviations(devs, profile, N, eps, F.shape[0])


def tail_from_deviations(devs: np.ndarray, profile: Profile, N: int, eps: float,
                         family_size: int) -> TailEstimate:
    S_N = partial_sums(profile)(N)
    per_event = corollary1_bound(eps, S_N)
    return TailEstimate(
        trials=int(devs.size), eps=float(eps), N=N, S_N=S_N, family_size=family_size,
        exceed_count=int(np.count_nonzero(devs > eps)),
        per_event_bound=per_event, bound=union_bound(family_size, per_event),
    )
