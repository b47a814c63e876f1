"""Predictability limits from entropies via Fano's inequality, and the
data-sufficiency (convergence) analysis."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .infotheory import EntropyProfile, match_lengths, prefix_lambda_sums, _symbols

MAX_BISECTION_STEPS = 200
BISECTION_TOL = 1e-12


@dataclass(frozen=True)
class PredictabilityProfile:
    pi_rand: float
    pi_unc: float
    pi_max: float
    n_symbols: int
    length: int
    clamped: bool = False


@dataclass(frozen=True)
class ConvergenceCurve:
    lengths: np.ndarray
    deltas: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        if len(self.lengths) != len(self.deltas):
            raise ValueError("lengths and deltas differ in size")
        if np.any(np.diff(self.lengths) <= 0):
            raise ValueError("lengths must be strictly increasing")


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def fano_lhs(p: float, n: int) -> float:
    """``H_b(p) + (1 - p) log2(n - 1)``."""
    tail = (1.0 - p) * math.log2(n - 1) if n > 2 else 0.0
    return binary_entropy(p) + tail


def solve_fano(s: float, n: int) -> float:
    """Largest probability ``p`` with ``H_b(p) + (1 - p) log2(n - 1) = s``.

    The root is searched on ``[1/n, 1]``, where the left-hand side falls
    monotonically from ``log2 n`` to 0. Entropies at or above ``log2 n``
    map to ``1/n``.
    """
    if n < 1 or int(n) != n:
        raise ValueError(f"alphabet size must be a positive integer, got {n}")
    if s < 0 or math.isnan(s):
        raise ValueError(f"entropy must be non-negative, got {s}")
    n = int(n)
    if n == 1 or s == 0.0:
        return 1.0
    if s >= math.log2(n):
        return 1.0 / n
    lo, hi = 1.0 / n, 1.0
    for _ in range(MAX_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if fano_lhs(mid, n) > s:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECTION_TOL:
            break
    lo_gap = abs(fano_lhs(lo, n) - s)
    hi_gap = abs(fano_lhs(hi, n) - s)
    return lo if lo_gap <= hi_gap else hi


def predictability_profile(ep: EntropyProfile) -> PredictabilityProfile:
    n = ep.n_symbols
    limit = math.log2(n) if n >= 1 else 0.0
    return PredictabilityProfile(
        pi_rand=solve_fano(ep.s_rand, n),
        pi_unc=solve_fano(ep.s_unc, n),
        pi_max=solve_fano(ep.s_rate, n),
        n_symbols=n,
        length=ep.length,
        clamped=ep.s_rate > limit or ep.s_unc > limit,
    )


def prefix_pi_max(traj) -> np.ndarray:
    """``Π^max`` of every prefix; element ``m - 1`` is for length ``m``.

    N is recounted on each prefix. Length-1 prefixes (N = 1) give 1.
    """
    seq = list(_symbols(traj))
    n = len(seq)
    sums = prefix_lambda_sums(match_lengths(seq))
    seen = set()
    distinct = np.empty(n, dtype=np.int64)
    for k, s in enumerate(seq):
        seen.add(s)
        distinct[k] = len(seen)
    out = np.empty(n, dtype=float)
    for k in range(n):
        m = k + 1
        if distinct[k] == 1:
            out[k] = 1.0
        else:
            out[k] = solve_fano(m * math.log2(m) / int(sums[k]), int(distinct[k]))
    return out


def convergence_curve(traj, step: int = 1, horizon: int | None = None) -> ConvergenceCurve:
    """Absolute change of ``Π^max`` between consecutive prefix lengths
    ``step, 2·step, ...``; reported from ``2·step`` up to ``horizon``
    (default: the full length)."""
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    seq = list(_symbols(traj))
    if horizon is not None:
        if horizon > len(seq):
            raise ValueError(f"trajectory of length {len(seq)} is shorter than the horizon {horizon}")
        seq = seq[:horizon]
    if len(seq) < 2 * step:
        raise ValueError(f"trajectory of length {len(seq)} is shorter than 2*step = {2 * step}")
    pis = prefix_pi_max(seq)
    grid = np.arange(step, len(seq) + 1, step)
    values = pis[grid - 1]
    return ConvergenceCurve(lengths=grid[1:], deltas=np.abs(np.diff(values)), values=values[1:])


def mean_curve(curves: Sequence[ConvergenceCurve]) -> tuple[np.ndarray, np.ndarray]:
    if not curves:
        raise ValueError("no convergence curves given")
    lengths = curves[0].lengths
    for c in curves[1:]:
        if not np.array_equal(c.lengths, lengths):
            raise ValueError("convergence curves do not share one length grid")
    return lengths, np.mean(np.vstack([c.deltas for c in curves]), axis=0)


def min_sufficient_length(curves: Sequence[ConvergenceCurve], threshold: float) -> int | None:
    """Smallest grid length whose cross-user mean delta is ``<= threshold``;
    None when no grid point qualifies."""
    lengths, mean = mean_curve(curves)
    hits = np.flatnonzero(mean <= threshold)
    return int(lengths[hits[0]]) if hits.size else None
