"""Synthetic users with known entropy rates.

Markov sources give closed-form entropy rates to validate the estimators;
:func:`synth_events` renders generated symbols as visit events so the full
ingest/trajectory pipeline can be exercised.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import VisitEvent

ROW_TOL = 1e-12
DEFAULT_START_TIME = 1_600_000_000
N_CATEGORIES = 5


class ReducibleChainError(ValueError):
    pass


@dataclass(frozen=True)
class MarkovModel:
    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        pi0 = np.array(self.initial, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
            raise ValueError(f"transition matrix must be square and non-empty, got shape {P.shape}")
        if pi0.shape != (P.shape[0],):
            raise ValueError("initial distribution does not match the transition matrix")
        if np.any(P < 0) or np.any(pi0 < 0):
            raise ValueError("probabilities must be non-negative")
        bad = np.flatnonzero(np.abs(P.sum(axis=1) - 1.0) > ROW_TOL)
        if bad.size:
            raise ValueError(f"row {int(bad[0])} of the transition matrix does not sum to 1")
        if abs(pi0.sum() - 1.0) > ROW_TOL:
            raise ValueError("initial distribution does not sum to 1")
        P.setflags(write=False)
        pi0.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial", pi0)

    @property
    def k(self) -> int:
        return self.transition.shape[0]

    @classmethod
    def from_rows(cls, rows, initial=None) -> "MarkovModel":
        P = np.array(rows, dtype=float)
        if initial is None:
            initial = np.full(P.shape[0], 1.0 / P.shape[0])
        return cls(P, np.asarray(initial, dtype=float))

    def with_self_loops(self, weight: float) -> "MarkovModel":
        """Mix the transitions with the identity: ``(1 - w) P + w I``."""
        if not 0.0 <= weight < 1.0:
            raise ValueError(f"self-loop weight must lie in [0, 1), got {weight}")
        P = (1.0 - weight) * self.transition + weight * np.eye(self.k)
        P /= P.sum(axis=1, keepdims=True)
        return MarkovModel(P, self.initial)


@dataclass(frozen=True)
class SyntheticUserSpec:
    model: MarkovModel
    dwell_mean_seconds: float
    visit_count: int
    seed: int
    zipf_exponent: float | None = None
    user_id: str = "synth"
    pages_per_domain: int = 5
    start_time: int = DEFAULT_START_TIME

    def __post_init__(self):
        if self.visit_count < 1:
            raise ValueError("visit_count must be >= 1")
        if self.dwell_mean_seconds <= 0:
            raise ValueError("dwell_mean_seconds must be positive")
        if self.zipf_exponent is not None and self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be >= 0")
        if self.pages_per_domain < 1:
            raise ValueError("pages_per_domain must be >= 1")


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i] & ~seen):
            seen[j] = True
            stack.append(int(j))
    return seen


def is_irreducible(model: MarkovModel) -> bool:
    adj = model.transition > 0
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def stationary_distribution(model: MarkovModel) -> np.ndarray:
    """Solve ``π P = π``, ``Σ π = 1`` with the last balance equation
    replaced by the normalization."""
    if not is_irreducible(model):
        raise ReducibleChainError("chain is reducible: some state cannot reach every other state")
    k = model.k
    A = model.transition.T - np.eye(k)
    A[-1, :] = 1.0
    rhs = np.zeros(k)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def markov_entropy_rate(model: MarkovModel) -> float:
    """``-Σ_i π_i Σ_j P_ij log2 P_ij`` in bits per symbol."""
    pi = stationary_distribution(model)
    P = model.transition
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log2(P), 0.0)
    return float(-(pi * terms.sum(axis=1)).sum())


def markov_generate(model: MarkovModel, n: int, seed: int) -> np.ndarray:
    """Length-``n`` realization; the first state is drawn from ``initial``."""
    if n < 1:
        raise ValueError(f"sequence length must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(model.transition, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(n)
    out = np.empty(n, dtype=np.int64)
    init_cdf = np.cumsum(model.initial)
    init_cdf[-1] = 1.0
    state = int(np.searchsorted(init_cdf, u[0], side="right"))
    out[0] = state
    rows = [row.tolist() for row in cdf]
    for t in range(1, n):
        state = bisect_right(rows[state], u[t])
        out[t] = state
    return out


def zipf_generate(k: int, exponent: float, n: int, seed: int) -> np.ndarray:
    """i.i.d. draws over ``k`` states with popularity ``∝ (rank + 1)^-exponent``."""
    rng = np.random.default_rng(seed)
    weights = np.arange(1, k + 1, dtype=float) ** -exponent
    return rng.choice(k, size=n, p=weights / weights.sum())


def iid_entropy(k: int, exponent: float) -> float:
    w = np.arange(1, k + 1, dtype=float) ** -exponent
    p = w / w.sum()
    return float(-(p * np.log2(p)).sum())


def synth_symbols(spec: SyntheticUserSpec) -> np.ndarray:
    seq_seed, _ = np.random.SeedSequence(spec.seed).spawn(2)
    seed = int(seq_seed.generate_state(1, np.uint64)[0])
    if spec.zipf_exponent is not None:
        return zipf_generate(spec.model.k, spec.zipf_exponent, spec.visit_count, seed)
    return markov_generate(spec.model, spec.visit_count, seed)


def synth_events(spec: SyntheticUserSpec) -> list[VisitEvent]:
    """One back-to-back visit per generated symbol.

    Dwell times are exponential with the given mean, rounded to whole
    seconds. Symbol ``k`` becomes domain ``d<k>``; the URL appends a page
    drawn from a per-domain pool; the category is ``c<k mod 5>``.
    """
    symbols = synth_symbols(spec)
    _, dwell_seq = np.random.SeedSequence(spec.seed).spawn(2)
    rng = np.random.default_rng(dwell_seq)
    dwell = np.rint(rng.exponential(spec.dwell_mean_seconds, size=len(symbols))).astype(np.int64)
    pages = rng.integers(spec.pages_per_domain, size=len(symbols))
    events = []
    t = spec.start_time
    for sym, sec, page in zip(symbols.tolist(), dwell.tolist(), pages.tolist()):
        domain = f"d{sym}"
        events.append(
            VisitEvent(
                start_time=t,
                active_seconds=sec,
                url=f"{domain}/p{page}",
                domain=domain,
                category=f"c{sym % N_CATEGORIES}",
                user_id=spec.user_id,
            )
        )
        t += sec
    return events


def random_sparse_model(k: int, out_degree: int, rng: np.random.Generator, concentration: float = 1.0) -> MarkovModel:
    """Irreducible chain: a random Hamiltonian cycle plus ``out_degree - 1``
    extra random successors per state, with Dirichlet weights."""
    order = rng.permutation(k)
    P = np.zeros((k, k))
    for pos, i in enumerate(order):
        succ = {int(order[(pos + 1) % k])}
        others = [j for j in range(k) if j != i and j not in succ]
        extra = min(out_degree - 1, len(others))
        if extra > 0:
            succ.update(int(j) for j in rng.choice(others, size=extra, replace=False))
        succ = sorted(succ)
        P[i, succ] = rng.dirichlet(np.full(len(succ), concentration))
    return MarkovModel(P, np.full(k, 1.0 / k))


def hierarchical_model(
    k: int,
    rng: np.random.Generator,
    n_categories: int = N_CATEGORIES,
    out_degree: int = 2,
    concentration: float = 1.0,
) -> MarkovModel:
    """Lumpable chain over ``k`` domains where domain ``d`` belongs to
    category ``d mod n_categories``.

    The category sequence is itself a sparse Markov chain; the next domain
    is drawn from fixed within-category weights, so every finer level only
    adds uncertainty on top of the coarser one.
    """
    if k < n_categories:
        raise ValueError(f"need at least {n_categories} domains, got {k}")
    Q = random_sparse_model(n_categories, out_degree, rng, concentration).transition
    cat = np.arange(k) % n_categories
    weights = rng.dirichlet(np.full(k, concentration))
    within = weights / np.bincount(cat, weights=weights, minlength=n_categories)[cat]
    P = Q[cat][:, cat] * within[None, :]
    P /= P.sum(axis=1, keepdims=True)
    return MarkovModel(P, np.full(k, 1.0 / k))


def default_ensemble(
    n_users: int = 100,
    seed: int = 0,
    visit_count: int = 800,
    dwell_mean_seconds: float = 240.0,
    self_loop_weight: float = 0.3,
    states: tuple[int, int] = (8, 25),
    out_degree: tuple[int, int] = (2, 3),
) -> list[SyntheticUserSpec]:
    """Seeded population of dwell-heavy hierarchical Markov users with ids
    ``u000``, ``u001``, ..."""
    root = np.random.SeedSequence(seed)
    specs = []
    width = max(3, len(str(n_users - 1)))
    for idx, child in enumerate(root.spawn(n_users)):
        rng = np.random.default_rng(child)
        k = int(rng.integers(states[0], states[1] + 1))
        deg = int(rng.integers(out_degree[0], out_degree[1] + 1))
        model = hierarchical_model(k, rng, out_degree=deg)
        if self_loop_weight > 0:
            model = model.with_self_loops(self_loop_weight)
        specs.append(
            SyntheticUserSpec(
                model=model,
                dwell_mean_seconds=dwell_mean_seconds,
                visit_count=visit_count,
                seed=int(rng.integers(2**63)),
                user_id=f"u{idx:0{width}d}",
            )
        )
    return specs


def ensemble_events(specs: Sequence[SyntheticUserSpec]) -> list[VisitEvent]:
    events = []
    for spec in specs:
        events.extend(synth_events(spec))
    return events
