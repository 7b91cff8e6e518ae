"""Prime moduli selection, CRT solving and the covering-budget optimizer."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

DEFAULT_BUDGET_CONSTANT = Fraction(1, 5)
_SEGMENT = 1 << 16


class ModuliError(ValueError):
    pass


def _small_primes(limit: int) -> np.ndarray:
    """All primes <= limit."""
    if limit < 2:
        return np.empty(0, dtype=np.int64)
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def primes_between(lo: int, hi: int) -> list[int]:
    """Primes p with lo <= p < hi, by a segmented sieve of Eratosthenes."""
    lo = max(lo, 2)
    if hi <= lo:
        return []
    base = _small_primes(math.isqrt(hi - 1))
    out = []
    for start in range(lo, hi, _SEGMENT):
        stop = min(start + _SEGMENT, hi)
        seg = np.ones(stop - start, dtype=bool)
        for p in base.tolist():
            if p * p >= stop:
                break
            first = max(p * p, -(-start // p) * p)
            seg[first - start :: p] = False
        out.extend((np.flatnonzero(seg) + start).tolist())
    return out


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d, s = d // 2, s + 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def iroot(n: int, k: int) -> int:
    """floor(n ** (1/k)) for n >= 0, exact."""
    if n < 0 or k < 1:
        raise ValueError("iroot needs n >= 0, k >= 1")
    if n < 2:
        return n
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    while x ** k > n:
        x -= 1
    while (x + 1) ** k <= n:
        x += 1
    return x


def _in_window(p: int, N: int, ell: int, factor: int) -> bool:
    # N^(1/(ell+1)) < p < factor * N^(1/(ell+1)), compared exactly in integers
    e = ell + 1
    return N < p ** e < factor ** e * N


@dataclass(frozen=True)
class ModuliSet:
    """ell distinct primes q_i with residues r_i; Q is their product."""

    q: tuple[int, ...]
    r: tuple[int, ...] = ()
    N: int | None = None
    widened: bool = False

    def __post_init__(self):
        q = tuple(int(x) for x in self.q)
        r = tuple(int(x) for x in self.r) if self.r else (0,) * len(q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        if not q:
            raise ModuliError("need at least one modulus")
        if len(set(q)) != len(q) or not all(is_prime(x) for x in q):
            raise ModuliError(f"moduli must be distinct primes, got {q}")
        if len(r) != len(q):
            raise ModuliError(f"{len(r)} residues for {len(q)} moduli")
        if any(not 0 <= ri < qi for ri, qi in zip(r, q)):
            raise ModuliError(f"residues {r} not reduced modulo {q}")
        if self.N is not None:
            bad = [p for p in q if not _in_window(p, self.N, len(q), 5)]
            if bad:
                raise ModuliError(
                    f"moduli {bad} outside (N^(1/{len(q) + 1}), 5 N^(1/{len(q) + 1})) for N={self.N}"
                )

    @property
    def ell(self) -> int:
        return len(self.q)

    @property
    def Q(self) -> int:
        return math.prod(self.q)

    def with_residues(self, r) -> ModuliSet:
        return ModuliSet(self.q, tuple(r), self.N, self.widened)

    def to_dict(self) -> dict:
        return {"ell": self.ell, "q": list(self.q), "Q": self.Q, "N": self.N,
                "r": list(self.r), "widened": self.widened}


def select_moduli(N: int, ell: int) -> ModuliSet:
    """The ell smallest primes in (N^(1/(ell+1)), 2 N^(1/(ell+1))).

    Falls back to the wider Chebyshev window with factor 5 when the factor-2
    window has fewer than ell primes; the result records the widening.
    """
    if N < 2 or ell < 1:
        raise ModuliError(f"need N >= 2 and ell >= 1, got N={N}, ell={ell}")
    e = ell + 1
    lo = iroot(N, e)
    for factor in (2, 5):
        hi = iroot(factor ** e * N, e) + 1
        cands = [p for p in primes_between(lo, hi + 1) if _in_window(p, N, ell, factor)]
        if len(cands) >= ell:
            return ModuliSet(tuple(cands[:ell]), N=N, widened=factor == 5)
    raise ModuliError(
        f"fewer than {ell} primes in (N^(1/{e}), 5 N^(1/{e})) for N={N}, ell={ell}; use a larger N"
    )


def crt(residues, moduli) -> int:
    """The unique x in [0, prod(moduli)) with x = residues[i] mod moduli[i]."""
    x, M = 0, 1
    for a, m in zip(residues, moduli):
        t = ((a - x) * pow(M, -1, m)) % m
        x += M * t
        M *= m
    return x


def crt_solve(mods: ModuliSet, n: int) -> int:
    """The a in [0, Q) with a = r_i - i*n (mod q_i) for i = 1..ell."""
    targets = [(ri - i * n) % qi for i, (qi, ri) in enumerate(zip(mods.q, mods.r), start=1)]
    return crt(targets, mods.q)


@dataclass(frozen=True)
class BudgetReport:
    N: int
    ell: int
    eps: float
    S_N: float
    q_star: float
    Q_star: float
    q: tuple[int, ...]
    Q: int
    lhs_exact: Fraction
    budget_exact: Fraction
    widened: bool
    budget_constant: Fraction = DEFAULT_BUDGET_CONSTANT

    @property
    def lhs(self) -> float:
        return float(self.lhs_exact)

    @property
    def budget(self) -> float:
        return float(self.budget_exact)

    @property
    def feasible(self) -> bool:
        return self.lhs_exact <= self.budget_exact

    def to_dict(self) -> dict:
        return {
            "N": self.N, "ell": self.ell, "eps": self.eps, "S_N": self.S_N,
            "q_star": self.q_star, "Q_star": self.Q_star,
            "q": list(self.q), "Q": self.Q,
            "lhs": self.lhs, "budget": self.budget, "feasible": self.feasible,
            "widened": self.widened, "budget_constant": float(self.budget_constant),
        }


def budget_lhs(q, N: int) -> Fraction:
    """Q + sum_i ell*N/q_i, exactly."""
    ell = len(q)
    return math.prod(q) + sum(Fraction(ell * N, qi) for qi in q)


def optimal_params(N: int, ell: int, eps: float, S_N: float,
                   budget_constant=DEFAULT_BUDGET_CONSTANT) -> BudgetReport:
    """Realize the ideal moduli q* = N^(1/(ell+1)) and check the covering budget.

    Feasible when Q + sum ell*N/q_i <= budget_constant * eps^2 * S(N).
    """
    if not 0 < eps <= 1:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    if S_N <= 0:
        raise ValueError(f"S_N must be positive, got {S_N}")
    mods = select_moduli(N, ell)
    const = Fraction(budget_constant)
    budget = const * Fraction(eps) ** 2 * Fraction(S_N)
    return BudgetReport(
        N=N, ell=ell, eps=float(eps), S_N=float(S_N),
        q_star=N ** (1.0 / (ell + 1)), Q_star=N ** (ell / (ell + 1.0)),
        q=mods.q, Q=mods.Q, lhs_exact=budget_lhs(mods.q, N), budget_exact=budget,
        widened=mods.widened, budget_constant=const,
    )
