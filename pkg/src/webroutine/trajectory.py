"""Trajectory construction from one user's visit stream.

Three kinds are built:

* ``STAT``: one symbol per non-empty time bin, the location with the most
  active seconds in that bin.
* ``BIN_NONSTAT``: the ``STAT`` series with adjacent repeats collapsed.
* ``SEQ_NONSTAT``: raw visit order with adjacent repeats collapsed.
"""
from __future__ import annotations

import enum
import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .ingest import SpatialResolution, SymbolTable, VisitEvent

DEFAULT_DELTA_T = 60


class TrajectoryKind(enum.Enum):
    STAT = "stat"
    BIN_NONSTAT = "bin-nonstat"
    SEQ_NONSTAT = "seq-nonstat"

    @classmethod
    def parse(cls, value: "str | TrajectoryKind") -> "TrajectoryKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown trajectory kind {value!r}; expected stat, bin-nonstat or seq-nonstat"
            ) from None


ALL_KINDS = (TrajectoryKind.STAT, TrajectoryKind.BIN_NONSTAT, TrajectoryKind.SEQ_NONSTAT)


@dataclass(frozen=True)
class BinningConfig:
    delta_t_seconds: int = DEFAULT_DELTA_T
    tie_break_seed: int = 0

    def __post_init__(self):
        if int(self.delta_t_seconds) != self.delta_t_seconds or self.delta_t_seconds <= 0:
            raise ValueError(f"delta_t_seconds must be a positive integer, got {self.delta_t_seconds!r}")
        if not 0 <= self.tie_break_seed < 2**64:
            raise ValueError("tie_break_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Trajectory:
    symbols: tuple[int, ...]
    kind: TrajectoryKind
    resolution: SpatialResolution = SpatialResolution.DOMAIN
    delta_t_seconds: int | None = None
    user_id: str | None = None
    table: SymbolTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if self.kind is not TrajectoryKind.STAT:
            for a, b in zip(self.symbols, self.symbols[1:]):
                if a == b:
                    raise ValueError(f"{self.kind.value} trajectory has equal adjacent symbols")
        if self.kind is TrajectoryKind.SEQ_NONSTAT and self.delta_t_seconds is not None:
            raise ValueError("sequential trajectories carry no delta_t")

    @property
    def alphabet_size(self) -> int:
        return len(set(self.symbols))

    @property
    def is_empty(self) -> bool:
        return not self.symbols

    def __len__(self) -> int:
        return len(self.symbols)

    def labels(self) -> list[str]:
        """Location strings of the symbols; needs the originating table."""
        if self.table is None:
            raise ValueError("trajectory has no symbol table attached")
        return [self.table.label(s) for s in self.symbols]


def compress_adjacent(symbols: Iterable) -> list:
    """Collapse maximal runs of equal neighbours, keeping order."""
    out = []
    for s in symbols:
        if not out or out[-1] != s:
            out.append(s)
    return out


def _user_key(user_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(user_id.encode("utf-8"), digest_size=8).digest(), "little")


def _tie_break(candidates: Sequence, seed: int, user_id: str, bin_index: int):
    # counter-based stream keyed by (seed, user); the bin index is the counter
    bitgen = np.random.Philox(key=[seed, _user_key(user_id)], counter=[bin_index, 0, 0, 0])
    return candidates[int(np.random.Generator(bitgen).integers(len(candidates)))]


def _table_for(events: Sequence[VisitEvent], res: SpatialResolution, table: SymbolTable | None) -> SymbolTable:
    if table is None:
        table = SymbolTable(events[0].user_id if events else None, res)
    return table


def bin_winners(
    events: Sequence[VisitEvent],
    cfg: BinningConfig,
    res: SpatialResolution = SpatialResolution.DOMAIN,
) -> list[tuple[int, str]]:
    """``(bin_index, winning location)`` for every bin with positive activity.

    Bins are anchored at the earliest start time; a visit credits each bin
    with the seconds it overlaps that bin.
    """
    if not events:
        return []
    dt = cfg.delta_t_seconds
    t0 = min(ev.start_time for ev in events)
    seconds: dict[int, dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for ev in events:
        if ev.active_seconds <= 0:
            continue
        loc = ev.location(res)
        start, end = ev.start_time - t0, ev.end_time - t0
        for b in range(start // dt, (end - 1) // dt + 1):
            seconds[b][loc] += min(end, (b + 1) * dt) - max(start, b * dt)
    user_id = events[0].user_id
    winners = []
    for b in sorted(seconds):
        per_loc = seconds[b]
        best = max(per_loc.values())
        tied = sorted(loc for loc, sec in per_loc.items() if sec == best)
        winner = tied[0] if len(tied) == 1 else _tie_break(tied, cfg.tie_break_seed, user_id, b)
        winners.append((b, winner))
    return winners


def build_stationary(
    events: Sequence[VisitEvent],
    cfg: BinningConfig = BinningConfig(),
    res: SpatialResolution = SpatialResolution.DOMAIN,
    table: SymbolTable | None = None,
) -> Trajectory:
    table = _table_for(events, res, table)
    # allocate ids in visit order so they agree with the sequential builder
    for ev in events:
        table.resolve(ev.location(res))
    symbols = [table.id_of(loc) for _, loc in bin_winners(events, cfg, res)]
    return Trajectory(
        tuple(symbols),
        TrajectoryKind.STAT,
        res,
        cfg.delta_t_seconds,
        events[0].user_id if events else None,
        table,
    )


def build_binned_nonstationary(
    events: Sequence[VisitEvent],
    cfg: BinningConfig = BinningConfig(),
    res: SpatialResolution = SpatialResolution.DOMAIN,
    table: SymbolTable | None = None,
) -> Trajectory:
    stat = build_stationary(events, cfg, res, table)
    return Trajectory(
        tuple(compress_adjacent(stat.symbols)),
        TrajectoryKind.BIN_NONSTAT,
        res,
        cfg.delta_t_seconds,
        stat.user_id,
        stat.table,
    )


def build_sequential_nonstationary(
    events: Sequence[VisitEvent],
    res: SpatialResolution = SpatialResolution.DOMAIN,
    table: SymbolTable | None = None,
) -> Trajectory:
    table = _table_for(events, res, table)
    symbols = compress_adjacent(table.resolve(ev.location(res)) for ev in events)
    return Trajectory(
        tuple(symbols),
        TrajectoryKind.SEQ_NONSTAT,
        res,
        None,
        events[0].user_id if events else None,
        table,
    )


def build_trajectory(
    events: Sequence[VisitEvent],
    kind: TrajectoryKind,
    cfg: BinningConfig = BinningConfig(),
    res: SpatialResolution = SpatialResolution.DOMAIN,
    table: SymbolTable | None = None,
) -> Trajectory:
    if kind is TrajectoryKind.STAT:
        return build_stationary(events, cfg, res, table)
    if kind is TrajectoryKind.BIN_NONSTAT:
        return build_binned_nonstationary(events, cfg, res, table)
    return build_sequential_nonstationary(events, res, table)


def build_all(
    events: Sequence[VisitEvent],
    cfg: BinningConfig = BinningConfig(),
    res: SpatialResolution = SpatialResolution.DOMAIN,
    kinds: Iterable[TrajectoryKind] = ALL_KINDS,
) -> dict[TrajectoryKind, Trajectory]:
    """Build the requested kinds sharing one symbol table."""
    table = SymbolTable(events[0].user_id if events else None, res)
    for ev in events:
        table.resolve(ev.location(res))
    return {kind: build_trajectory(events, kind, cfg, res, table) for kind in kinds}


# Dump format: user_id<TAB>kind<TAB>N<TAB>space-separated ids


def format_dump_line(traj: Trajectory, user_id: str | None = None) -> str:
    user = user_id if user_id is not None else traj.user_id
    if user is None:
        raise ValueError("trajectory has no user id")
    if "\t" in user or "\n" in user:
        raise ValueError(f"user id {user!r} cannot be written to the dump format")
    ids = " ".join(str(s) for s in traj.symbols)
    return f"{user}\t{traj.kind.value}\t{traj.alphabet_size}\t{ids}"


def parse_dump_line(line: str) -> tuple[str, TrajectoryKind, int, tuple[int, ...]]:
    parts = line.rstrip("\n").split("\t")
    if len(parts) != 4:
        raise ValueError(f"expected 4 tab-separated fields, got {len(parts)}")
    user, kind, n, ids = parts
    symbols = tuple(int(tok) for tok in ids.split())
    n = int(n)
    if n != len(set(symbols)):
        raise ValueError(f"declared N={n} but the sequence has {len(set(symbols))} distinct symbols")
    return user, TrajectoryKind.parse(kind), n, symbols
