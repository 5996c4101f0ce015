import itertools
import math

import numpy as np
import pytest

from segconsist.stats import mann_whitney_u, welch_t_test

scipy_stats = pytest.importorskip("scipy.stats")


def test_welch_identical_samples():
    xs = [0.1, 0.4, 0.7]
    t, dof, p = welch_t_test(xs, list(xs))
    assert t == 0.0
    assert p == pytest.approx(1.0)


def test_welch_pinned_example():
    t, dof, p = welch_t_test([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert t == pytest.approx(-1.0)
    assert dof == pytest.approx(8.0)
    assert p == pytest.approx(0.3466, abs=1e-3)


def test_welch_matches_scipy():
    rng = np.random.default_rng(4)
    for _ in range(25):
        xs = rng.normal(0, 1, size=rng.integers(3, 15)).tolist()
        ys = rng.normal(0.5, 2, size=rng.integers(3, 15)).tolist()
        t, dof, p = welch_t_test(xs, ys)
        ref = scipy_stats.ttest_ind(xs, ys, equal_var=False)
        assert t == pytest.approx(ref.statistic, rel=1e-10)
        assert p == pytest.approx(ref.pvalue, rel=1e-8)


def test_welch_affine_invariance():
    rng = np.random.default_rng(8)
    xs = rng.random(6).tolist()
    ys = rng.random(7).tolist()
    _, _, p0 = welch_t_test(xs, ys)
    a, b = 3.7, -1.2
    _, _, p1 = welch_t_test([a * v + b for v in xs], [a * v + b for v in ys])
    assert abs(p0 - p1) < 1e-12


def test_welch_symmetry_and_errors():
    xs = [1.0, 2.0, 3.0]
    ys = [2.0, 4.0, 5.0]
    t1, _, p1 = welch_t_test(xs, ys)
    t2, _, p2 = welch_t_test(ys, xs)
    assert t1 == -t2
    assert p1 == p2
    with pytest.raises(ValueError):
        welch_t_test([1.0], ys)
    with pytest.raises(ValueError):
        welch_t_test([1.0, 1.0], [2.0, 2.0])


def test_mann_whitney_enumeration_example():
    u, p = mann_whitney_u([1, 2], [3, 4])
    assert u == 0.0
    assert p == pytest.approx(2 / 6)


def test_mann_whitney_full_tie():
    u, p = mann_whitney_u([5.0], [5.0])
    assert u == 0.5
    assert p == 1.0


def test_mann_whitney_exact_brute_force_cross_check():
    # Independent oracle: enumerate raw value assignments, not ranks.
    xs = [0.1, 0.9, 1.3]
    ys = [0.4, 2.0, 2.2, 3.1]
    u_obs, p = mann_whitney_u(xs, ys)

    pooled = sorted(xs + ys)

    def u_min_for(subset):
        sx = [pooled[i] for i in subset]
        sy = [pooled[i] for i in range(len(pooled)) if i not in subset]
        ux = sum((x > y) + 0.5 * (x == y) for x in sx for y in sy)
        return min(ux, len(sx) * len(sy) - ux)

    hits = 0
    combos = list(itertools.combinations(range(len(pooled)), len(xs)))
    for c in combos:
        if u_min_for(set(c)) <= u_obs + 1e-12:
            hits += 1
    assert p == pytest.approx(hits / len(combos))


def test_mann_whitney_symmetry():
    rng = np.random.default_rng(3)
    xs = rng.random(8).tolist()
    ys = rng.random(9).tolist()
    u1, p1 = mann_whitney_u(xs, ys)
    u2, p2 = mann_whitney_u(ys, xs)
    assert u1 == u2
    assert p1 == p2


def test_mann_whitney_normal_approx_agrees_with_exact():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(30):
        xs = np.round(rng.normal(0, 1, 6), 6).tolist()
        ys = np.round(rng.normal(0.4, 1, 6), 6).tolist()
        if len(set(xs + ys)) != 12:
            continue
        _, p_exact = mann_whitney_u(xs, ys)
        # Force the approximation path by appending a far, tie-free pair
        # to push n past the exact cutoff? No: compare directly via the
        # internal branches instead, by scaling sizes. Use scipy exact vs
        # our approx is cleaner below; here check our two paths.
        from segconsist import stats as _s

        pooled = xs + ys
        ranks = _s._midranks(pooled)
        rank_sum_x = sum(ranks[:6])
        ux = rank_sum_x - 6 * 7 / 2.0
        uy = 36 - ux
        mean = 18.0
        var = 36 / 12.0 * 13
        z = (max(ux, uy) - mean - 0.5) / math.sqrt(var)
        p_approx = min(1.0, math.erfc(z / math.sqrt(2.0)))
        worst = max(worst, abs(p_exact - p_approx))
    assert worst < 0.02


def test_mann_whitney_matches_scipy_large_samples():
    rng = np.random.default_rng(7)
    xs = rng.normal(0, 1, 40).tolist()
    ys = rng.normal(0.6, 1.3, 40).tolist()
    u, p = mann_whitney_u(xs, ys)
    ref = scipy_stats.mannwhitneyu(xs, ys, alternative="two-sided", method="asymptotic")
    assert p == pytest.approx(ref.pvalue, rel=1e-6)
    assert u == min(ref.statistic, 40 * 40 - ref.statistic)


def test_mann_whitney_shift_drives_p_down():
    rng = np.random.default_rng(1)
    xs = rng.random(20).tolist()
    ys = (rng.random(20) + 5.0).tolist()
    _, p = mann_whitney_u(xs, ys)
    assert p < 1e-6
    with pytest.raises(ValueError):
        mann_whitney_u([], xs)
