"""Batch analyses over a population of users.

Each analysis takes a :class:`RunConfig` and a ``{user_id: events}`` map
(parsed from ``cfg.input`` when not given) and returns plain rows ready to
be written as CSV. Per-user work can run on a process pool; results are
always merged in user-id order, so output does not depend on the number of
workers.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .infotheory import entropy_profile
from .ingest import SpatialResolution, VisitEvent, read_events
from .predictability import convergence_curve, min_sufficient_length, predictability_profile
from .stats import bonferroni, compare_groups, mean_ci
from .trajectory import ALL_KINDS, BinningConfig, Trajectory, TrajectoryKind, build_all, format_dump_line

log = logging.getLogger(__name__)

# minutes: 0.25, 0.5, 0.75, 1..15
DEFAULT_DELTA_T_GRID = (15, 30, 45) + tuple(60 * m for m in range(1, 16))
DEFAULT_RESOLUTION_GRID = (SpatialResolution.URL, SpatialResolution.DOMAIN, SpatialResolution.CATEGORY)

MEASURES = ("s_rand", "s_unc", "s_rate", "pi_rand", "pi_unc", "pi_max")
REPORT_COLUMNS = (
    "user_id", "kind", "resolution", "delta_t_seconds", "length", "n_symbols",
    *MEASURES, "clamped",
)
EXCLUDED_COLUMNS = ("user_id", "reason")
SWEEP_COLUMNS = (
    "dimension", "value", "kind", "n_users",
    *itertools.chain.from_iterable((f"{m}_mean", f"{m}_ci_low", f"{m}_ci_high") for m in MEASURES),
)
CONVERGENCE_COLUMNS = ("length", "n_users", "mean_delta", "q05_delta", "q95_delta")
COMPARE_COLUMNS = (
    "group_a", "group_b", "n_a", "n_b", "ks_statistic", "p_value",
    "cliffs_delta", "alpha_adjusted", "significant",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    input: Path | None = None
    out: Path | None = None
    resolution: SpatialResolution = SpatialResolution.DOMAIN
    delta_t_seconds: int = 60
    kinds: tuple[TrajectoryKind, ...] = ALL_KINDS
    min_length: int = 100
    seed: int = 0
    step: int = 1
    threshold: float = 0.01
    horizon: int | None = None
    sample_users: int | None = None
    delta_t_grid: tuple[int, ...] = DEFAULT_DELTA_T_GRID
    resolution_grid: tuple[SpatialResolution, ...] = DEFAULT_RESOLUTION_GRID
    compare_kind: TrajectoryKind = TrajectoryKind.STAT
    alpha: float = 0.05
    workers: int = 1

    def __post_init__(self):
        if self.min_length < 2:
            raise ConfigError("min_length must be >= 2")
        if self.delta_t_seconds <= 0:
            raise ConfigError("delta_t must be a positive number of seconds")
        if not self.kinds:
            raise ConfigError("at least one trajectory kind is required")
        if self.step < 1:
            raise ConfigError("step must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.horizon is not None and self.horizon < 2 * self.step:
            raise ConfigError("horizon must be at least 2*step")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")

    @property
    def binning(self) -> BinningConfig:
        return BinningConfig(self.delta_t_seconds, self.seed)

    def to_dict(self) -> dict:
        return {
            "input": str(self.input) if self.input else None,
            "resolution": self.resolution.value,
            "delta_t_seconds": self.delta_t_seconds,
            "kinds": [k.value for k in self.kinds],
            "min_length": self.min_length,
            "seed": self.seed,
            "step": self.step,
            "threshold": self.threshold,
            "horizon": self.horizon,
            "sample_users": self.sample_users,
            "delta_t_grid": list(self.delta_t_grid),
            "resolution_grid": [r.value for r in self.resolution_grid],
            "compare_kind": self.compare_kind.value,
            "alpha": self.alpha,
        }


@dataclass
class PipelineResult:
    rows: list[dict] = field(default_factory=list)
    excluded: list[dict] = field(default_factory=list)
    trajectories: dict[str, dict[TrajectoryKind, Trajectory]] = field(default_factory=dict)

    @property
    def n_users(self) -> int:
        return len(self.trajectories) + len(self.excluded)


def load_users(cfg: RunConfig, users: Mapping[str, Sequence[VisitEvent]] | None) -> Mapping[str, Sequence[VisitEvent]]:
    if users is not None:
        return users
    if cfg.input is None:
        raise ConfigError("no input file configured")
    return read_events(cfg.input)


def _parallel_map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    chunk = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def gate_reason(trajectories: Mapping[TrajectoryKind, Trajectory], min_length: int) -> str | None:
    """Why a user is excluded, or None. The length gate applies to the
    binned non-stationary trajectory."""
    gate = trajectories[TrajectoryKind.BIN_NONSTAT]
    if len(gate) < min_length:
        return f"bin-nonstat length {len(gate)} < min_length {min_length}"
    for kind, traj in trajectories.items():
        if len(traj) < 2:
            return f"{kind.value} length {len(traj)} < 2"
    return None


def measure_row(user_id: str, traj: Trajectory) -> dict:
    ep = entropy_profile(traj)
    pp = predictability_profile(ep)
    return {
        "user_id": user_id,
        "kind": traj.kind.value,
        "resolution": traj.resolution.value,
        "delta_t_seconds": traj.delta_t_seconds if traj.delta_t_seconds is not None else "",
        "length": ep.length,
        "n_symbols": ep.n_symbols,
        "s_rand": ep.s_rand,
        "s_unc": ep.s_unc,
        "s_rate": ep.s_rate,
        "pi_rand": pp.pi_rand,
        "pi_unc": pp.pi_unc,
        "pi_max": pp.pi_max,
        "clamped": pp.clamped,
    }


def _analyze_user(task) -> tuple[str, dict, str | None, list[dict]]:
    user_id, events, cfg = task
    kinds = tuple(dict.fromkeys((TrajectoryKind.BIN_NONSTAT, *cfg.kinds)))
    trajectories = build_all(events, cfg.binning, cfg.resolution, kinds)
    reason = gate_reason(trajectories, cfg.min_length)
    rows = [] if reason else [measure_row(user_id, trajectories[k]) for k in cfg.kinds]
    return user_id, {k: trajectories[k] for k in cfg.kinds}, reason, rows


def run_pipeline(cfg: RunConfig, users: Mapping[str, Sequence[VisitEvent]] | None = None) -> PipelineResult:
    """Entropies and predictabilities for every user passing the length gate."""
    users = load_users(cfg, users)
    tasks = [(u, users[u], cfg) for u in sorted(users)]
    result = PipelineResult()
    for user_id, trajectories, reason, rows in _parallel_map(_analyze_user, tasks, cfg.workers):
        if reason:
            result.excluded.append({"user_id": user_id, "reason": reason})
        else:
            result.trajectories[user_id] = trajectories
            result.rows.extend(rows)
    log.info("analyzed %d users, excluded %d", len(result.trajectories), len(result.excluded))
    return result


def eligible_users(cfg: RunConfig, users: Mapping[str, Sequence[VisitEvent]]) -> tuple[list[str], list[dict]]:
    keep, excluded = [], []
    for user_id in sorted(users):
        trajectories = build_all(users[user_id], cfg.binning, cfg.resolution, (TrajectoryKind.BIN_NONSTAT,))
        reason = gate_reason(trajectories, cfg.min_length)
        if reason:
            excluded.append({"user_id": user_id, "reason": reason})
        else:
            keep.append(user_id)
    return keep, excluded


def _sweep_user(task) -> list[tuple]:
    dimension, user_id, events, cfg = task
    out = []
    if dimension == "temporal":
        for dt in cfg.delta_t_grid:
            trajectories = build_all(events, BinningConfig(dt, cfg.seed), cfg.resolution, cfg.kinds)
            out.extend(_sweep_measures(dt, trajectories))
    else:
        for res in cfg.resolution_grid:
            trajectories = build_all(events, cfg.binning, res, cfg.kinds)
            out.extend(_sweep_measures(res.value, trajectories))
    return out


def _sweep_measures(value, trajectories) -> list[tuple]:
    out = []
    for kind, traj in trajectories.items():
        if len(traj) >= 2:
            row = measure_row("", traj)
            out.append((value, kind.value, tuple(row[m] for m in MEASURES)))
    return out


def run_sweep(cfg: RunConfig, dimension: str, users: Mapping[str, Sequence[VisitEvent]] | None = None) -> tuple[list[dict], list[dict]]:
    """Ensemble mean and 95% CI of every measure at each grid point.

    Users are gated once at the configured resolution and delta_t; the
    same population is then used at every grid point.
    """
    if dimension not in ("temporal", "spatial"):
        raise ConfigError(f"unknown sweep dimension {dimension!r}")
    grid = cfg.delta_t_grid if dimension == "temporal" else cfg.resolution_grid
    if not grid:
        raise ConfigError(f"the {dimension} sweep grid is empty")
    users = load_users(cfg, users)
    keep, excluded = eligible_users(cfg, users)
    per_user = _parallel_map(_sweep_user, [(dimension, u, users[u], cfg) for u in keep], cfg.workers)
    collected: dict[tuple, list[tuple]] = {}
    for records in per_user:
        for value, kind, measures in records:
            collected.setdefault((value, kind), []).append(measures)
    rows = []
    for g in grid:
        value = g if dimension == "temporal" else g.value
        for kind in cfg.kinds:
            samples = collected.get((value, kind.value), [])
            row = {"dimension": dimension, "value": value, "kind": kind.value, "n_users": len(samples)}
            arr = np.array(samples, dtype=float).reshape(len(samples), len(MEASURES))
            for j, m in enumerate(MEASURES):
                if len(samples) >= 2:
                    mean, lo, hi = mean_ci(arr[:, j])
                elif len(samples) == 1:
                    mean, lo, hi = float(arr[0, j]), math.nan, math.nan
                else:
                    mean = lo = hi = math.nan
                row[f"{m}_mean"], row[f"{m}_ci_low"], row[f"{m}_ci_high"] = mean, lo, hi
            rows.append(row)
    return rows, excluded


@dataclass
class ConvergenceResult:
    rows: list[dict]
    min_length: int | None
    horizon: int
    users: list[str]
    excluded: list[dict]


def _curve_task(task):
    user_id, events, cfg, horizon = task
    traj = build_all(events, cfg.binning, cfg.resolution, (TrajectoryKind.BIN_NONSTAT,))[TrajectoryKind.BIN_NONSTAT]
    return convergence_curve(traj, cfg.step, horizon)


def run_convergence(cfg: RunConfig, users: Mapping[str, Sequence[VisitEvent]] | None = None) -> ConvergenceResult:
    """Mean absolute change of prefix ``Π^max`` on binned non-stationary
    trajectories, with its 5-95% band and the resulting minimum length.

    Curves run up to ``cfg.horizon`` (default: the shortest eligible
    trajectory); users shorter than the horizon or than ``2*step`` are
    excluded. ``cfg.sample_users`` draws a seeded random subset.
    """
    users = load_users(cfg, users)
    lengths = {}
    excluded = []
    for user_id in sorted(users):
        traj = build_all(users[user_id], cfg.binning, cfg.resolution, (TrajectoryKind.BIN_NONSTAT,))[TrajectoryKind.BIN_NONSTAT]
        if len(traj) < 2 * cfg.step:
            excluded.append({"user_id": user_id, "reason": f"bin-nonstat length {len(traj)} < 2*step"})
        else:
            lengths[user_id] = len(traj)
    if not lengths:
        raise ValueError("no user has a trajectory long enough for the convergence analysis")
    horizon = cfg.horizon if cfg.horizon is not None else min(lengths.values())
    chosen = []
    for user_id, n in lengths.items():
        if n < horizon:
            excluded.append({"user_id": user_id, "reason": f"bin-nonstat length {n} < horizon {horizon}"})
        else:
            chosen.append(user_id)
    if cfg.sample_users is not None and cfg.sample_users < len(chosen):
        rng = np.random.default_rng(cfg.seed)
        picked = set(rng.choice(len(chosen), size=cfg.sample_users, replace=False).tolist())
        for idx, user_id in enumerate(chosen):
            if idx not in picked:
                excluded.append({"user_id": user_id, "reason": "not sampled"})
        chosen = [u for idx, u in enumerate(chosen) if idx in picked]
    if not chosen:
        raise ValueError(f"no user reaches the convergence horizon {horizon}")
    excluded.sort(key=lambda r: r["user_id"])
    curves = _parallel_map(_curve_task, [(u, users[u], cfg, horizon) for u in chosen], cfg.workers)
    deltas = np.vstack([c.deltas for c in curves])
    mean = deltas.mean(axis=0)
    q05, q95 = np.quantile(deltas, [0.05, 0.95], axis=0)
    rows = [
        {"length": int(L), "n_users": len(curves), "mean_delta": float(m), "q05_delta": float(a), "q95_delta": float(b)}
        for L, m, a, b in zip(curves[0].lengths, mean, q05, q95)
    ]
    return ConvergenceResult(rows, min_sufficient_length(curves, cfg.threshold), horizon, chosen, excluded)


@dataclass
class CompareResult:
    comparisons: list
    warnings: list[str]
    excluded: list[dict]

    @property
    def rows(self) -> list[dict]:
        return [
            {
                "group_a": c.group_a, "group_b": c.group_b, "n_a": c.n_a, "n_b": c.n_b,
                "ks_statistic": c.ks_statistic, "p_value": c.p_value, "cliffs_delta": c.cliffs_delta,
                "alpha_adjusted": c.alpha_adjusted, "significant": c.significant,
            }
            for c in self.comparisons
        ]


def run_compare(
    cfg: RunConfig,
    groups: Mapping[str, str],
    users: Mapping[str, Sequence[VisitEvent]] | None = None,
) -> CompareResult:
    """Pairwise KS test and Cliff's delta of ``Π^max`` between user groups,
    at a Bonferroni-adjusted alpha over all pairs."""
    kinds = tuple(dict.fromkeys((*cfg.kinds, cfg.compare_kind)))
    result = run_pipeline(replace(cfg, kinds=kinds), users)
    pi_max = {
        row["user_id"]: row["pi_max"] for row in result.rows if row["kind"] == cfg.compare_kind.value
    }
    known = set(pi_max) | {r["user_id"] for r in result.excluded}
    warnings = [f"user {u!r} in grouping file is not in the input" for u in sorted(groups) if u not in known]
    by_group: dict[str, list[float]] = {}
    for user_id in sorted(groups):
        if user_id in pi_max:
            by_group.setdefault(groups[user_id], []).append(pi_max[user_id])
    labels = sorted(set(groups.values()))
    small = [g for g in labels if len(by_group.get(g, [])) < 2]
    if small:
        raise ValueError(f"groups with fewer than 2 analyzed users: {', '.join(small)}")
    if len(labels) < 2:
        raise ValueError("need at least two groups to compare")
    pairs = list(itertools.combinations(labels, 2))
    alpha_adj = bonferroni(cfg.alpha, len(pairs))
    comparisons = [compare_groups(a, by_group[a], b, by_group[b], alpha_adj) for a, b in pairs]
    return CompareResult(comparisons, warnings, result.excluded)


def dump_trajectories(cfg: RunConfig, users: Mapping[str, Sequence[VisitEvent]] | None = None) -> list[str]:
    """Dump lines for every user and requested kind, without the length gate."""
    users = load_users(cfg, users)
    lines = []
    for user_id in sorted(users):
        for traj in build_all(users[user_id], cfg.binning, cfg.resolution, cfg.kinds).values():
            lines.append(format_dump_line(traj, user_id))
    return lines
