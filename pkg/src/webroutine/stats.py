"""Group comparison and association statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.special import kolmogorov


@dataclass(frozen=True)
class GroupComparison:
    group_a: str
    group_b: str
    n_a: int
    n_b: int
    ks_statistic: float
    p_value: float
    cliffs_delta: float
    alpha_adjusted: float

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha_adjusted


def _sample(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"sample {name} is empty")
    return arr


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sided two-sample Kolmogorov-Smirnov test.

    Returns ``(D, p)`` with ``D = sup |F_a - F_b|`` over the pooled sample
    and ``p`` from the asymptotic Kolmogorov distribution at
    ``D * sqrt(m n / (m + n))``.
    """
    a = np.sort(_sample(a, "a"))
    b = np.sort(_sample(b, "b"))
    m, n = a.size, b.size
    pooled = np.concatenate([a, b])
    # right-continuous ECDFs at every pooled point handle ties on both sides
    cdf_a = np.searchsorted(a, pooled, side="right") / m
    cdf_b = np.searchsorted(b, pooled, side="right") / n
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    en = m * n / (m + n)
    p = float(min(1.0, max(0.0, kolmogorov(d * math.sqrt(en)))))
    return d, p


def cliffs_delta(a, b) -> float:
    """``P(a > b) - P(a < b)`` over all cross pairs; ties count for neither."""
    a = _sample(a, "a")
    b = np.sort(_sample(b, "b"))
    below = np.searchsorted(b, a, side="left").sum()
    above = (b.size - np.searchsorted(b, a, side="right")).sum()
    return float((int(below) - int(above)) / (a.size * b.size))


def pearson_r(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be one-dimensional and of equal length")
    if x.size < 2:
        raise ValueError("correlation needs at least two observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = math.fsum(dx * dx)
    syy = math.fsum(dy * dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation is undefined for a constant series")
    r = math.fsum(dx * dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def bonferroni(alpha: float, n_comparisons: int) -> float:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if n_comparisons < 1:
        raise ValueError(f"need at least one comparison, got {n_comparisons}")
    return alpha / n_comparisons


def mean_ci(xs, level: float = 0.95) -> tuple[float, float, float]:
    """Mean with a normal-approximation confidence interval."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size < 2:
        raise ValueError("a confidence interval needs at least two values")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    mean = float(xs.mean())
    half = z * float(xs.std(ddof=1)) / math.sqrt(xs.size)
    return mean, mean - half, mean + half


def compare_groups(group_a: str, a, group_b: str, b, alpha_adjusted: float) -> GroupComparison:
    d, p = ks_two_sample(a, b)
    return GroupComparison(
        group_a=group_a,
        group_b=group_b,
        n_a=len(a),
        n_b=len(b),
        ks_statistic=d,
        p_value=p,
        cliffs_delta=cliffs_delta(a, b),
        alpha_adjusted=alpha_adjusted,
    )
