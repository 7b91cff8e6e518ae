"""Slow, obviously-correct reference implementations used by the tests.

Nothing here shares code with the package: plain loops, math.fsum and
Python sets only.
"""
from __future__ import annotations

import math


def partial_sum(u, N):
    """sum_{n=1}^N u(n) with exact float rounding of the true sum."""
    return math.fsum(u(n) for n in range(1, N + 1))


def first_reaching(u, thresholds, n_max):
    out, n = [], 0
    acc = []
    it = iter(thresholds)
    t = next(it, None)
    while t is not None and n < n_max:
        n += 1
        acc.append(u(n))
        if math.fsum(acc) >= t:
            out.append(n)
            t = next(it, None)
            while t is not None and math.fsum(acc) >= t:
                out.append(n)
                t = next(it, None)
    return out


def primes_upto(n):
    return [p for p in range(2, n + 1) if all(p % d for d in range(2, math.isqrt(p) + 1))]


def crt_brute(targets, moduli):
    Q = math.prod(moduli)
    sols = [a for a in range(Q) if all(a % q == t % q for t, q in zip(targets, moduli))]
    return sols


def correlation(fs, Q, N):
    """a_n numerators: sum_{a<Q} prod_i f_i(a + i n) for n = 1..N-1 with f_i as dicts/lists."""
    out = []
    for n in range(1, N):
        total = 0
        for a in range(Q):
            term = 1
            for i, f in enumerate(fs):
                x = a + i * n
                term *= f[x] if 0 <= x < len(f) else 0
            total += term
        out.append(total)
    return out


def intersective(A, N, ell, r_max):
    """A as a Python set inside [0, N)."""
    return {r for r in range(1, r_max + 1)
            if any(all(a + i * r in A for i in range(ell + 1)) for a in range(N))}


def first_ap(A, N, R, ell):
    for r in sorted(R):
        for a in range(N):
            if all(a + i * r in A for i in range(ell + 1)):
                return a, r
    return None


def window_density(A, n, ell, M):
    return sum(1 for a in range(M) if all(a + i * n in A for i in range(ell + 1))) / M


def rotate(x, n, m):
    return (x + n) % m


def multiple_average(T, F, N, x):
    """T: callable (x, n) -> T^n x."""
    total = 0.0
    for n in range(1, N + 1):
        term = 1.0
        for i, f in enumerate(F, start=1):
            term *= f[T(x, i * n)]
        total += term
    return total / N


def random_average(T, F, R, N, x):
    ns = [n for n in sorted(R) if 1 <= n <= N]
    total = 0.0
    for n in ns:
        term = 1.0
        for i, f in enumerate(F, start=1):
            term *= f[T(x, i * n)]
        total += term
    return total / len(ns)


def centered_average(T, F, u, R, N, x):
    Rs = set(R)
    total = 0.0
    for n in range(1, N + 1):
        term = (1.0 if n in Rs else 0.0) - u[n]
        for i, f in enumerate(F, start=1):
            term *= f[T(x, i * n)]
        total += term
    return total / math.fsum(u[1 : N + 1])


def cycle_means(perm, F):
    m = len(perm)
    out = [0.0] * m
    seen = [False] * m
    for x0 in range(m):
        if seen[x0]:
            continue
        cyc, x = [], x0
        while not seen[x]:
            seen[x] = True
            cyc.append(x)
            x = perm[x]
        mean = sum(F[y] for y in cyc) / len(cyc)
        for y in cyc:
            out[y] = mean
    return out


def lemma2_average(f, g, w, R, N):
    Rs = set(R)
    c, num, den = 0, 0.0, 0.0
    for n in range(1, N + 1):
        if n in Rs:
            c += 1
        wn = 1.0 if w is None else w[n - 1]
        num += wn * f[c] * g[n - 1]
        den += wn
    return num / den
