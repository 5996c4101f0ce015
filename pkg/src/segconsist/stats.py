"""Significance tests for comparing IoU samples across training regimes.

Welch's unequal-variance t-test (two-sided p through a hand-evaluated
regularized incomplete beta function, continued-fraction form) and the
Mann-Whitney U test with midrank tie handling, exact enumeration at
small sample sizes, and a tie- and continuity-corrected normal
approximation otherwise.
"""

from __future__ import annotations

import itertools
import math

__all__ = ["welch_t_test", "mann_whitney_u"]

_BETA_TOL = 1e-10
_FPMIN = 1e-300
# Exact enumeration cap: C(12, 6) = 924 assignments.
_EXACT_MAX_N = 12


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_TOL:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _t_sf_two_sided(t: float, dof: float) -> float:
    """P(|T| >= |t|) for Student's t with ``dof`` degrees of freedom."""
    return _reg_inc_beta(dof / 2.0, 0.5, dof / (dof + t * t))


def welch_t_test(xs, ys) -> tuple[float, float, float]:
    """Welch's t-test; returns (t, Welch-Satterthwaite dof, two-sided p)."""
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    nx, ny = len(xs), len(ys)
    if nx < 2 or ny < 2:
        raise ValueError("welch_t_test: each sample needs at least 2 values")
    mx = sum(xs) / nx
    my = sum(ys) / ny
    vx = sum((v - mx) ** 2 for v in xs) / (nx - 1)
    vy = sum((v - my) ** 2 for v in ys) / (ny - 1)
    if vx == 0.0 and vy == 0.0:
        raise ValueError("welch_t_test: both samples have zero variance")
    sex = vx / nx
    sey = vy / ny
    t = (mx - my) / math.sqrt(sex + sey)
    dof = (sex + sey) ** 2 / (sex**2 / (nx - 1) + sey**2 / (ny - 1))
    return t, dof, _t_sf_two_sided(t, dof)


def _midranks(values) -> list[float]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # Tied block shares the mean of its would-be ranks (1-based).
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _u_min_from_ranks(rank_sum_x: float, nx: int, ny: int) -> float:
    ux = rank_sum_x - nx * (nx + 1) / 2.0
    return min(ux, nx * ny - ux)


def _exact_two_sided_p(nx: int, ny: int, u_obs: float) -> float:
    """Enumerate every assignment of ranks 1..nx+ny to the x-sample and
    count those at least as extreme as the observed min-U. Valid only
    without ties (ranks are then a permutation of 1..n)."""
    n = nx + ny
    total = 0
    extreme = 0
    for combo in itertools.combinations(range(1, n + 1), nx):
        total += 1
        if _u_min_from_ranks(float(sum(combo)), nx, ny) <= u_obs + 1e-12:
            extreme += 1
    return extreme / total


def mann_whitney_u(xs, ys) -> tuple[float, float]:
    """Mann-Whitney U test; returns (min(U_x, U_y), two-sided p).

    Exact enumeration when nx+ny <= 12 and the pooled sample is tie
    free; otherwise the normal approximation with tie correction and a
    0.5 continuity correction.
    """
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    nx, ny = len(xs), len(ys)
    if nx == 0 or ny == 0:
        raise ValueError("mann_whitney_u: samples must be non-empty")
    pooled = xs + ys
    ranks = _midranks(pooled)
    rank_sum_x = sum(ranks[:nx])
    ux = rank_sum_x - nx * (nx + 1) / 2.0
    uy = nx * ny - ux
    u = min(ux, uy)

    n = nx + ny
    has_ties = len(set(pooled)) != n
    if n <= _EXACT_MAX_N and not has_ties:
        return u, _exact_two_sided_p(nx, ny, u)

    tie_counts = [len(list(g)) for _, g in itertools.groupby(sorted(pooled))]
    tie_term = sum(c**3 - c for c in tie_counts)
    var = nx * ny / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return u, 1.0
    mean = nx * ny / 2.0
    z = (max(ux, uy) - mean - 0.5) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2.0))
    return u, min(1.0, max(0.0, p))
