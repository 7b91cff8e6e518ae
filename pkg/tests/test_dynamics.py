import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from randiff.dynamics import (
    FiniteSystem, Observable, block_partition, centered_average, centered_trace,
    invariant_projection, lemma2_average, lemma2_split, maximal_operators, multiple_average,
    oscillation_check, random_average, semirandom_average, semirandom_direct, semirandom_prefix,
    subsequence, window_count_ratios, window_oscillations,
)
from randiff.profiles import Profile, partial_sums, sample

import oracles


def stepper(sys):
    """T^n x by repeated application, independent of the cycle tables."""
    perm = sys.perm.tolist()

    def T(x, n):
        for _ in range(n):
            x = perm[x]
        return x
    return T


perms = st.integers(1, 40).flatmap(lambda m: st.permutations(list(range(m))))


# systems and observables

def test_constructors_are_bijections():
    assert FiniteSystem.rotation(5).perm.tolist() == [1, 2, 3, 4, 0]
    assert FiniteSystem.rotation(5, 2).perm.tolist() == [2, 3, 4, 0, 1]
    assert FiniteSystem.doubling(7).perm.tolist() == [0, 2, 4, 6, 1, 3, 5]
    skew = FiniteSystem.skew_product(4)
    assert skew.m == 16 and sorted(skew.perm.tolist()) == list(range(16))
    # (1, 2) -> (2, 3)
    assert skew.perm[1 * 4 + 2] == 2 * 4 + 3
    assert FiniteSystem.skew_product().m == 1024
    with pytest.raises(ValueError):
        FiniteSystem.doubling(8)
    with pytest.raises(ValueError):
        FiniteSystem(np.array([0, 0, 1]))


def test_system_parse_and_json():
    for spec in ("rotation:101", "identity:4", "doubling:13", "skew:8", "rotation:12:5"):
        sys = FiniteSystem.parse(spec)
        back = FiniteSystem.from_json(sys.to_json())
        assert np.array_equal(back.perm, sys.perm) and back.name == sys.name
    assert FiniteSystem.parse("rotation:12:5").name == "rotation:12:5"
    with pytest.raises(ValueError):
        FiniteSystem.parse("baker:4")


@settings(max_examples=60, deadline=None)
@given(perms, st.integers(0, 200))
def test_orbit_matches_repeated_application(perm, n):
    sys = FiniteSystem(np.array(perm))
    T = stepper(sys)
    assert sys.power(n).tolist() == [T(x, n) for x in range(sys.m)]


def test_observable_bound():
    F = Observable(np.array([0.5, -2.0]))
    assert F.bound == 2.0 and F.integral == -0.75
    with pytest.raises(ValueError):
        Observable(np.array([3.0]), bound=1.0)
    assert Observable.from_dict(F.to_dict()).values.tolist() == [0.5, -2.0]
    G = Observable.random_indicator(50, 3)
    assert set(G.values.tolist()) <= {0.0, 1.0} and G.bound == 1.0


# invariant projection

def test_projection_examples():
    F = np.arange(1.0, 12.0)
    assert np.allclose(invariant_projection(FiniteSystem.rotation(11), F).values, F.mean())
    assert invariant_projection(FiniteSystem.identity(11), F).values.tolist() == F.tolist()
    two_cycles = FiniteSystem(np.array([1, 2, 0, 4, 5, 3]))
    got = invariant_projection(two_cycles, [1, 2, 3, 10, 20, 30]).values
    assert got.tolist() == [2, 2, 2, 20, 20, 20]


@settings(max_examples=80, deadline=None)
@given(perms, st.data())
def test_projection_properties(perm, data):
    sys = FiniteSystem(np.array(perm))
    m = sys.m
    vec = st.lists(st.floats(-10, 10), min_size=m, max_size=m)
    F, G = np.array(data.draw(vec)), np.array(data.draw(vec))
    P = invariant_projection(sys, F).values
    assert np.allclose(P, oracles.cycle_means(perm, F.tolist()))
    assert np.allclose(invariant_projection(sys, P).values, P)
    assert np.allclose(invariant_projection(sys, 2 * F - G).values, 2 * P - invariant_projection(sys, G).values)
    assert math.isclose(P.mean(), F.mean(), abs_tol=1e-9)
    assert np.array_equal(P[sys.perm], P)


# multiple and random averages

def test_multiple_average_examples():
    sys = FiniteSystem.rotation(7)
    ones = Observable.constant(7)
    assert multiple_average(sys, [ones, ones, ones], 50, 3) == 1.0
    F = np.arange(7.0)
    assert multiple_average(sys, [F], 7 * 4, 2) == pytest.approx(F.mean(), abs=1e-14)


def test_multiple_average_z5_seed42_matches_oracle():
    sys = FiniteSystem.rotation(5)
    rng = np.random.default_rng(42)
    F1, F2 = rng.random(5), rng.random(5)
    T = lambda x, n: oracles.rotate(x, n, 5)
    for N in (1, 7, 100):
        for x in range(5):
            assert multiple_average(sys, [F1, F2], N, x) == pytest.approx(
                oracles.multiple_average(T, [F1, F2], N, x), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(perms, st.integers(1, 3), st.integers(1, 60), st.integers(0, 2 ** 32))
def test_multiple_average_any_permutation(perm, ell, N, seed):
    sys = FiniteSystem(np.array(perm))
    rng = np.random.default_rng(seed)
    Fs = [rng.uniform(-1, 1, sys.m) for _ in range(ell)]
    x = int(rng.integers(sys.m))
    assert multiple_average(sys, Fs, N, x) == pytest.approx(
        oracles.multiple_average(stepper(sys), Fs, N, x), abs=1e-12)


def test_random_average_examples():
    sys = FiniteSystem.rotation(7)
    rng = np.random.default_rng(1)
    F1, F2 = rng.random(7), rng.random(7)
    N = 100
    assert random_average(sys, [F1, F2], range(1, N + 1), N, 4) == pytest.approx(
        multiple_average(sys, [F1, F2], N, 4), abs=1e-14)
    R = sample(Profile.constant(0.5, 200), 7)
    ones = np.ones(7)
    assert random_average(sys, [ones, ones], R, N, 0) == 1.0
    T = lambda x, n: oracles.rotate(x, n, 7)
    assert random_average(sys, [F1, F2], R, N, 4) == pytest.approx(
        oracles.random_average(T, [F1, F2], R.elements.tolist(), N, 4), abs=1e-14)
    with pytest.raises(ValueError):
        random_average(sys, [F1], {150}, N, 0)


@pytest.mark.parametrize("m,k", [(11, 3), (101, 1), (30, 7)])
def test_full_cycles_give_the_mean(m, k):
    sys = FiniteSystem.rotation(m)
    F = np.random.default_rng(m).random(m)
    assert random_average(sys, [F], range(1, m * k + 1), m * k, 5) == pytest.approx(F.mean(), abs=1e-14)


# semirandom

def test_semirandom_reductions():
    sys = FiniteSystem.rotation(11)
    R = sample(Profile.power(0.5, 5000), 4)
    F1 = np.random.default_rng(0).random(11)
    ones = np.ones(11)
    assert semirandom_average(sys, ones, ones, R, 50, 0) == 1.0
    assert semirandom_average(sys, F1, ones, R, 50, 3) == pytest.approx(
        multiple_average(sys, [F1], 50, 3), abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_semirandom_two_forms_agree(seed):
    sys = FiniteSystem.rotation(11)
    R = sample(Profile.power(0.5, 5000), seed)
    rng = np.random.default_rng(seed)
    F1, F2 = rng.uniform(-1, 1, 11), rng.uniform(-1, 1, 11)
    for x in range(11):
        d = semirandom_direct(sys, F1, F2, R, 50, x)
        p = semirandom_prefix(sys, F1, F2, R, 50, x)
        assert abs(d - p) <= 1e-12
        ref = sum(F1[(x + k) % 11] * F2[(x + r) % 11]
                  for k, r in enumerate(R.elements[:50].tolist(), start=1)) / 50
        assert d == pytest.approx(ref, abs=1e-14)


def test_semirandom_reports_max_usable_N():
    R = sample(Profile.power(0.5, 100), 0)
    n = len(R)
    with pytest.raises(ValueError, match=f"largest usable N is {n}"):
        semirandom_average(FiniteSystem.rotation(5), np.ones(5), np.ones(5), R, n + 1, 0)
    semirandom_average(FiniteSystem.rotation(5), np.ones(5), np.ones(5), R, n, 0)


def test_semirandom_convergence_small_scale():
    # a lighter version of the N = 10^5 probe
    prof = Profile.power(0.3, 5 * 10 ** 5)
    sys = FiniteSystem.rotation(101)
    hits = 0
    for s in range(20):
        F1 = Observable.random_indicator(101, 2 * s)
        F2 = Observable.random_indicator(101, 2 * s + 1)
        v = semirandom_average(sys, F1, F2, sample(prof, s), 10 ** 4, 0)
        hits += abs(v - F1.integral * F2.integral) <= 0.05
    assert hits >= 18


# centered averages

def test_centered_trivial_cases():
    sys = FiniteSystem.doubling(13)
    prof = Profile.constant(1.0, 500)
    R = sample(prof, 0)
    F = np.random.default_rng(0).random(13)
    assert centered_average(sys, [F, F], prof, R, 500, 1) == 0.0
    p2 = Profile.power(0.3, 500)
    assert centered_average(sys, [np.zeros(13)], p2, sample(p2, 1), 500, 1) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_centered_matches_oracle(seed):
    sys = FiniteSystem.doubling(13)
    prof = Profile.power(0.3, 2000)
    R = sample(prof, seed)
    rng = np.random.default_rng(seed)
    Fs = [rng.uniform(-1, 1, 13) for _ in range(2)]
    got = centered_average(sys, Fs, prof, R, 2000, 3)
    ref = oracles.centered_average(stepper(sys), Fs, prof.u, R.elements.tolist(), 2000, 3)
    assert got == pytest.approx(ref, abs=1e-12)
    trace = centered_trace(sys, Fs, prof, R, 2000, 3)
    assert math.isnan(trace[0])
    for N in (1, 17, 999, 2000):
        assert trace[N] == pytest.approx(centered_average(sys, Fs, prof, R, N, 3), abs=1e-12)


def test_centered_doubling_concentrates():
    N = 10 ** 4
    prof = Profile.power(0.3, N)
    sys = FiniteSystem.doubling(13)
    vals = []
    for s in range(100):
        Fs = [Observable.random_indicator(13, 1000 + 2 * s + i) for i in range(2)]
        vals.append(centered_average(sys, Fs, prof, sample(prof, s), N, 1))
    assert np.mean(np.abs(vals) <= 0.1) >= 0.95


# lacunary schedules and oscillation

def test_subsequence_examples():
    assert subsequence(Profile.constant(1.0, 2000), 2, 10).indices.tolist() == [2 ** i for i in range(1, 11)]
    assert subsequence(Profile.constant(1.0, 100), 1.5, 3)[3] == 4
    sched = subsequence(Profile.power(0.5, 1000), 2, 5)
    # direct summation: S(279) < 32 <= S(280)
    assert sched[5] == 280
    S = partial_sums(Profile.power(0.5, 1000))
    assert S(279) < 32 <= S(280)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(1.05, 3.0))
def test_subsequence_minimal_with_bounded_overshoot(b, sigma):
    prof = Profile.power(b, 20000)
    sched = subsequence(prof, sigma, 200)
    S = partial_sums(prof).S
    i = np.arange(1, len(sched) + 1)
    target = sigma ** i
    assert np.all(S[sched.indices] >= target)
    assert np.all(S[sched.indices - 1] < target)
    assert np.all(S[sched.indices] - target <= prof.u[1])


def test_subsequence_truncation_and_errors():
    sched = subsequence(Profile.constant(1.0, 100), 2, 10)
    assert sched.truncated and len(sched) == 6 and sched.requested == 10
    with pytest.raises(ValueError):
        subsequence(Profile.constant(1.0, 100), 1.0, 3)
    with pytest.raises(IndexError):
        sched[0]


def test_oscillation_trivial_cases():
    sched = subsequence(Profile.constant(1.0, 1000), 2, 9)
    assert oscillation_check(np.full(1001, 0.3), sched) == 0.0
    prof = Profile.constant(1.0, 1000)
    trace = centered_trace(FiniteSystem.rotation(7), [np.arange(7.0)], prof, sample(prof, 0), 1000, 0)
    assert oscillation_check(trace, sched) == 0.0


def test_window_oscillations_by_hand():
    sched = subsequence(Profile.constant(1.0, 16), 2, 4)  # 2, 4, 8, 16
    trace = np.zeros(17)
    trace[5] = 0.7
    trace[9] = -0.2
    assert window_oscillations(trace, sched).tolist() == [0.0, 0.7, 0.2]
    assert window_oscillations(trace, sched, i_min=3).tolist() == [0.2]


def test_oscillation_probe_power_04():
    n_max = 2 * 10 ** 5
    prof = Profile.power(0.4, n_max)
    sched = subsequence(prof, 1.2, 200)
    sys = FiniteSystem.rotation(101)
    ok = 0
    for s in range(40):
        F = Observable.random_indicator(101, s)
        trace = centered_trace(sys, [F], prof, sample(prof, s), n_max, 0)
        ok += oscillation_check(trace, sched, i_min=10) <= 4 * 0.2
    assert ok >= 38


def test_window_count_ratios_near_one():
    prof = Profile.power(0.3, 10 ** 6)
    sched = subsequence(prof, 2, 40)
    good = 0
    for s in range(50):
        ratios = window_count_ratios(sample(prof, s), prof, sched)[9:]
        assert ratios.size >= 4
        good += np.all((0.8 <= ratios) & (ratios <= 1.2))
    assert good >= 45


def test_window_count_ratios_exact_for_constant_one():
    prof = Profile.constant(1.0, 1024)
    sched = subsequence(prof, 2, 10)
    assert window_count_ratios(sample(prof, 0), prof, sched).tolist() == [1.0] * 9


# maximal operators

def test_maximal_operator_examples():
    sys = FiniteSystem.rotation(31)
    prof = Profile.power(0.5, 400)
    R = sample(prof, 2)
    B, C = maximal_operators(sys, np.ones(31), prof, R, 400)
    assert np.allclose(B, 1.0, atol=1e-12)
    S = partial_sums(prof).S[1:]
    assert np.allclose(C, np.max(R.counts[1:] / S))
    assert maximal_operators(sys, np.zeros(31), prof, R, 400, x=3) == (0.0, 0.0)


def test_maximal_operators_match_loop():
    sys = FiniteSystem.doubling(15)
    prof = Profile.power(0.4, 120)
    R = sample(prof, 5)
    F = np.random.default_rng(5).uniform(-1, 1, 15)
    T = stepper(sys)
    Rs = set(R.elements.tolist())
    for x in range(15):
        sb = sc = sB = sC = 0.0
        for N in range(1, 121):
            v = abs(F[T(x, N)])
            sb += prof.u[N] * v
            sc += (N in Rs) * v
            S = partial_sums(prof)(N)
            sB, sC = max(sB, sb / S), max(sC, sc / S)
        assert maximal_operators(sys, F, prof, R, 120, x=x) == pytest.approx((sB, sC), abs=1e-12)


def test_maximal_l2_ratio_on_z1009():
    m = 1009
    sys = FiniteSystem.rotation(m)
    prof = Profile.power(0.5, 2000)
    R = sample(prof, 0)
    worst = 0.0
    for s in range(100):
        F = Observable.random_indicator(m, s, density=0.3)
        B, _ = maximal_operators(sys, F, prof, R, 2000)
        worst = max(worst, np.mean(B ** 2) / np.mean(F.values ** 2))
    assert worst <= 10


# block partition and zero-density averages

def test_block_partition_examples():
    empty = block_partition([], 10, 100)
    assert empty.hit_blocks.size == 0 and empty.clean_blocks.tolist() == list(range(10))
    squares = [k * k for k in range(1, 11)]
    bp = block_partition(squares, 10, 110)
    assert bp.hit_blocks.tolist() == [0, 1, 2, 3, 4, 6, 8, 10]
    assert sorted(bp.hit_blocks.tolist() + bp.clean_blocks.tolist()) == list(range(11))


def test_block_partition_squares_density():
    squares = np.arange(1, 1000) ** 2
    bp = block_partition(squares, 10, 10 ** 6)
    assert bp.num_blocks == 10 ** 5
    assert bp.hit_blocks.size == len({int(s) // 10 for s in squares})
    assert bp.hit_density <= 0.02
    assert set((squares // 10).tolist()) <= set(bp.hit_blocks.tolist())


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(0, 299)), st.integers(1, 40))
def test_block_partition_is_a_partition(R, L):
    bp = block_partition(R, L, 300)
    hit, clean = set(bp.hit_blocks.tolist()), set(bp.clean_blocks.tolist())
    assert not hit & clean and hit | clean == set(range(-(-300 // L)))
    assert all(r // L in hit for r in R)
    assert all(any(k * L <= r < (k + 1) * L for r in R) for k in hit)


def test_lemma2_examples():
    N = 10 ** 6
    squares = np.arange(1, 1001) ** 2
    f = np.ones(1001)
    g = (-1.0) ** np.arange(1, N + 1)
    assert lemma2_average(f, np.zeros(N), None, squares, N) == 0.0
    assert abs(lemma2_average(f, g, None, squares, N)) <= 0.01


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 300), st.sets(st.integers(1, 300), max_size=30), st.integers(0, 2 ** 32),
       st.booleans())
def test_lemma2_matches_loop(N, R, seed, weighted):
    rng = np.random.default_rng(seed)
    f = rng.uniform(-1, 1, len(R) + 1)
    g = rng.uniform(-1, 1, N)
    w = np.sort(rng.uniform(0.1, 1, N))[::-1] if weighted else None
    assert lemma2_average(f, g, w, R, N) == pytest.approx(oracles.lemma2_average(f, g, w, R, N), abs=1e-12)


def test_lemma2_rejects_increasing_weights():
    with pytest.raises(ValueError):
        lemma2_average(np.ones(2), np.ones(3), [1, 2, 3], {1}, 3)


def test_lemma2_split_adds_up():
    N, L = 10 ** 4, 20
    squares = np.arange(1, 101) ** 2
    rng = np.random.default_rng(0)
    f = rng.uniform(-1, 1, 101)
    g = rng.uniform(-1, 1, N)
    sp = lemma2_split(f, g, squares, L, N)
    # the split covers n = 1 .. KL - 1 with normalisation KL
    KL = sp.K * L
    assert sp.total == pytest.approx(lemma2_average(f, g, None, squares, KL - 1) * (KL - 1) / KL, abs=1e-12)
    assert abs(sp.clean_term) <= np.abs(f).max() * sp.clean_bound + 1e-12
    assert sp.hit_fraction == block_partition(squares[squares < KL], L, KL).hit_density
