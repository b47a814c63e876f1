"""Entropy measures for discrete trajectories.

All functions accept a :class:`~webroutine.trajectory.Trajectory` or any
sequence of hashable symbols.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trajectory import Trajectory


class EmptyTrajectoryError(ValueError):
    pass


class InsufficientLengthError(ValueError):
    pass


@dataclass(frozen=True)
class EntropyProfile:
    s_rand: float
    s_unc: float
    s_rate: float
    n_symbols: int
    length: int


def _symbols(traj) -> Sequence:
    if isinstance(traj, Trajectory):
        return traj.symbols
    if isinstance(traj, np.ndarray):
        return traj.tolist()
    return traj


def _require_nonempty(seq: Sequence) -> None:
    if len(seq) == 0:
        raise EmptyTrajectoryError("entropy profile is undefined for an empty trajectory")


def _shannon(counts) -> float:
    counts = [c for c in counts if c > 0]
    total = sum(counts)
    # fsum is exactly rounded, so the result does not depend on label order
    return 0.0 - math.fsum((c / total) * math.log2(c / total) for c in counts)


def random_entropy(traj) -> float:
    """``log2 N`` where N is the number of distinct symbols."""
    seq = _symbols(traj)
    _require_nonempty(seq)
    return math.log2(len(set(seq)))


def uncorrelated_entropy(traj) -> float:
    """Shannon entropy (bits) of the symbol frequencies."""
    seq = _symbols(traj)
    _require_nonempty(seq)
    return _shannon(Counter(seq).values())


def block_entropy(traj, L: int) -> float:
    """Shannon entropy of the overlapping length-``L`` blocks. ``L = 0`` gives 0."""
    seq = _symbols(traj)
    n = len(seq)
    if L == 0:
        return 0.0
    if not 1 <= L <= n:
        raise ValueError(f"block length must lie in [1, {n}], got {L}")
    seq = tuple(seq)
    return _shannon(Counter(seq[i:i + L] for i in range(n - L + 1)).values())


class _SuffixAutomaton:
    """Suffix automaton of a whole sequence, recording for each state the
    smallest end index of its occurrences."""

    def __init__(self, seq: Sequence):
        self.next: list[dict] = [{}]
        self.link = [-1]
        self.length = [0]
        self.firstpos = [-1]
        last = 0
        for i, c in enumerate(seq):
            cur = self._new(self.length[last] + 1, i)
            p = last
            while p != -1 and c not in self.next[p]:
                self.next[p][c] = cur
                p = self.link[p]
            if p == -1:
                self.link[cur] = 0
            else:
                q = self.next[p][c]
                if self.length[p] + 1 == self.length[q]:
                    self.link[cur] = q
                else:
                    clone = self._new(self.length[p] + 1, self.firstpos[q])
                    self.next[clone] = dict(self.next[q])
                    self.link[clone] = self.link[q]
                    while p != -1 and self.next[p].get(c) == q:
                        self.next[p][c] = clone
                        p = self.link[p]
                    self.link[q] = clone
                    self.link[cur] = clone
            last = cur

    def _new(self, length: int, firstpos: int) -> int:
        self.next.append({})
        self.link.append(-1)
        self.length.append(length)
        self.firstpos.append(firstpos)
        return len(self.length) - 1


def match_lengths(traj) -> np.ndarray:
    """Match lengths ``Λ_i`` (1-based position i), as an int64 array.

    ``Λ_i`` is one plus the length of the longest block starting at ``i``
    that occurs entirely inside ``x_1..x_{i-1}``, capped at ``ℓ - i + 2``.

    Runs in O(ℓ) transitions: the longest past match at ``i + 1`` is at
    least the one at ``i`` minus its first symbol, so the current match is
    only ever shortened by one step along a suffix link.
    """
    seq = list(_symbols(traj))
    n = len(seq)
    out = np.ones(n, dtype=np.int64)
    if n == 0:
        return out
    sam = _SuffixAutomaton(seq)
    nxt, link, length, firstpos = sam.next, sam.link, sam.length, sam.firstpos
    state, matched = 0, 0
    for i in range(n):
        # extend while the longer block still has an occurrence ending before i
        while i + matched < n:
            target = nxt[state].get(seq[i + matched])
            if target is None or firstpos[target] > i - 1:
                break
            state = target
            matched += 1
        out[i] = min(matched + 1, n - i + 1)
        if matched > 0:
            matched -= 1
            if matched <= length[link[state]]:
                state = link[state]
    return out


def match_lengths_naive(traj) -> np.ndarray:
    """Quadratic-search reference for :func:`match_lengths`."""
    seq = tuple(_symbols(traj))
    n = len(seq)
    out = np.ones(n, dtype=np.int64)
    for i in range(n):
        past = seq[:i]
        k = 0
        while i + k < n:
            block = seq[i:i + k + 1]
            if not any(past[j:j + k + 1] == block for j in range(i - k)):
                break
            k += 1
        out[i] = min(k + 1, n - i + 1)
    return out


def lz_entropy_rate(traj, lambdas: np.ndarray | None = None) -> float:
    """Match-length entropy-rate estimate ``ℓ log2 ℓ / Σ Λ_i`` in bits/symbol."""
    seq = _symbols(traj)
    n = len(seq)
    if n < 2:
        raise InsufficientLengthError(f"entropy-rate estimate needs at least 2 symbols, got {n}")
    if lambdas is None:
        lambdas = match_lengths(seq)
    return n * math.log2(n) / int(lambdas.sum())


def prefix_lambda_sums(lambdas: np.ndarray) -> np.ndarray:
    """``Σ Λ_i`` for every prefix, where prefix length ``m`` caps ``Λ_i`` at
    ``m - i + 2``. Element ``m - 1`` belongs to the prefix of length ``m``.

    Truncating the sequence only shortens the look-ahead, never the past,
    so prefix match lengths follow from the full ones without recomputation.
    """
    lam = np.asarray(lambdas, dtype=np.int64)
    n = len(lam)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    i = np.arange(1, n + 1, dtype=np.int64)
    # for m in [i, e_i) position i contributes m - i + 2; from e_i on, Λ_i
    e = np.minimum(np.maximum(lam + i - 2, i), n + 1)
    count = np.zeros(n + 2, dtype=np.int64)
    offset = np.zeros(n + 2, dtype=np.int64)
    const = np.zeros(n + 2, dtype=np.int64)
    np.add.at(count, i, 1)
    np.add.at(count, e, -1)
    np.add.at(offset, i, 2 - i)
    np.add.at(offset, e, i - 2)
    np.add.at(const, e, lam)
    m = np.arange(n + 2, dtype=np.int64)
    totals = np.cumsum(count) * m + np.cumsum(offset) + np.cumsum(const)
    return totals[1:n + 1]


def entropy_profile(traj) -> EntropyProfile:
    seq = _symbols(traj)
    _require_nonempty(seq)
    n = len(seq)
    return EntropyProfile(
        s_rand=random_entropy(seq),
        s_unc=uncorrelated_entropy(seq),
        s_rate=lz_entropy_rate(seq),
        n_symbols=len(set(seq)),
        length=n,
    )
