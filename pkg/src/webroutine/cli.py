"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

from .ingest import IngestError, SpatialResolution, VisitEvent, write_events
from .pipeline import (
    COMPARE_COLUMNS,
    CONVERGENCE_COLUMNS,
    EXCLUDED_COLUMNS,
    REPORT_COLUMNS,
    SWEEP_COLUMNS,
    ConfigError,
    RunConfig,
    dump_trajectories,
    run_compare,
    run_convergence,
    run_pipeline,
    run_sweep,
)
from .synth import MarkovModel, SyntheticUserSpec, default_ensemble, ensemble_events
from .trajectory import TrajectoryKind

log = logging.getLogger("webroutine")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def write_table(path: Path, columns: Sequence[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_summary(path: Path, summary: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("grid is empty")
    return values


def _kinds(text: str) -> tuple[TrajectoryKind, ...]:
    try:
        return tuple(dict.fromkeys(TrajectoryKind.parse(tok) for tok in text.split(",") if tok.strip()))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _resolutions(text: str) -> tuple[SpatialResolution, ...]:
    try:
        return tuple(SpatialResolution.parse(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
    p.add_argument("--input", type=Path, required=needs_input, help="visit log (.csv, or .jsonl/.ndjson)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--delta-t", type=int, default=60, dest="delta_t", help="bin width in seconds (default 60)")
    p.add_argument("--resolution", type=SpatialResolution.parse, default=SpatialResolution.DOMAIN,
                   choices=list(SpatialResolution), metavar="{url,domain,category}")
    p.add_argument("--kinds", type=_kinds, default=None, help="comma list of stat,bin-nonstat,seq-nonstat")
    p.add_argument("--min-length", type=int, default=100, help="minimum bin-nonstat length (default 100)")
    p.add_argument("--seed", type=_u64, default=0, help="tie-break / sampling seed")
    p.add_argument("--step", type=int, default=1, help="convergence grid step")
    p.add_argument("--threshold", type=float, default=0.01, help="convergence threshold on mean delta")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="webroutine", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="entropies and predictabilities per user")
    _common(p)

    p = sub.add_parser("sweep", help="ensemble means over a temporal or spatial grid")
    _common(p)
    p.add_argument("--dimension", choices=("temporal", "spatial"), required=True)
    p.add_argument("--grid", default=None,
                   help="delta_t seconds (temporal) or resolutions (spatial), comma-separated")

    p = sub.add_parser("converge", help="data-sufficiency analysis of prefix predictability")
    _common(p)
    p.add_argument("--horizon", type=int, default=None, help="longest prefix length (default: shortest user)")
    p.add_argument("--sample-users", type=int, default=None, help="random subset size")

    p = sub.add_parser("compare", help="pairwise group comparison of predictability")
    _common(p)
    p.add_argument("--groups", type=Path, required=True, help="CSV with columns user_id,group")
    p.add_argument("--compare-kind", type=TrajectoryKind.parse, default=TrajectoryKind.STAT,
                   choices=list(TrajectoryKind), metavar="{stat,bin-nonstat,seq-nonstat}")
    p.add_argument("--alpha", type=float, default=0.05)

    p = sub.add_parser("synth", help="write synthetic users in the ingest CSV format")
    p.add_argument("--spec", type=Path, required=True, help="JSON synthesis spec")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("dump-trajectories", help="write trajectories as tab-separated lines")
    _common(p)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    kwargs = dict(
        input=args.input,
        out=args.out,
        resolution=args.resolution,
        delta_t_seconds=args.delta_t,
        min_length=args.min_length,
        seed=args.seed,
        step=args.step,
        threshold=args.threshold,
        workers=args.workers,
    )
    if args.kinds is not None:
        kwargs["kinds"] = args.kinds
    if getattr(args, "horizon", None) is not None:
        kwargs["horizon"] = args.horizon
    if getattr(args, "sample_users", None) is not None:
        kwargs["sample_users"] = args.sample_users
    if getattr(args, "compare_kind", None) is not None:
        kwargs["compare_kind"] = args.compare_kind
        kwargs["alpha"] = args.alpha
    grid = getattr(args, "grid", None)
    if grid is not None:
        try:
            if args.dimension == "temporal":
                kwargs["delta_t_grid"] = _int_list(grid)
            else:
                kwargs["resolution_grid"] = _resolutions(grid)
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(str(exc)) from None
    return RunConfig(**kwargs)


def _out_dir(cfg: RunConfig) -> Path:
    out = cfg.out if cfg.out is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summary(command: str, cfg: RunConfig, started: float, **extra) -> dict:
    return {"command": command, "config": cfg.to_dict(), "elapsed_seconds": round(time.perf_counter() - started, 3), **extra}


def cmd_analyze(cfg: RunConfig) -> None:
    started = time.perf_counter()
    result = run_pipeline(cfg)
    out = _out_dir(cfg)
    write_table(out / "report.csv", REPORT_COLUMNS, result.rows)
    write_table(out / "excluded.csv", EXCLUDED_COLUMNS, result.excluded)
    write_summary(out / "summary.json", _summary(
        "analyze", cfg, started,
        users_total=result.n_users, users_analyzed=len(result.trajectories), users_excluded=len(result.excluded),
        rows=len(result.rows),
    ))


def cmd_sweep(cfg: RunConfig, dimension: str) -> None:
    started = time.perf_counter()
    rows, excluded = run_sweep(cfg, dimension)
    out = _out_dir(cfg)
    write_table(out / f"sweep_{dimension}.csv", SWEEP_COLUMNS, rows)
    write_table(out / "excluded.csv", EXCLUDED_COLUMNS, excluded)
    write_summary(out / "summary.json", _summary(
        "sweep", cfg, started, dimension=dimension, grid_points=len(rows), users_excluded=len(excluded),
    ))


def cmd_converge(cfg: RunConfig) -> None:
    started = time.perf_counter()
    result = run_convergence(cfg)
    out = _out_dir(cfg)
    write_table(out / "convergence.csv", CONVERGENCE_COLUMNS, result.rows)
    write_table(out / "excluded.csv", EXCLUDED_COLUMNS, result.excluded)
    write_summary(out / "summary.json", _summary(
        "converge", cfg, started,
        horizon=result.horizon, users_used=len(result.users), users_excluded=len(result.excluded),
        min_sufficient_length=result.min_length if result.min_length is not None else "not-reached",
    ))
    print(f"minimum sufficient length: {result.min_length if result.min_length is not None else 'not reached'}")


def read_groups(path: Path) -> dict[str, str]:
    groups = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"user_id", "group"} <= set(reader.fieldnames):
            raise IngestError("grouping file needs the columns user_id,group", 1, str(path))
        for row in reader:
            user, group = (row["user_id"] or "").strip(), (row["group"] or "").strip()
            if not user or not group:
                raise IngestError("empty user_id or group", reader.line_num, str(path))
            if user in groups and groups[user] != group:
                raise IngestError(f"user {user!r} assigned to two groups", reader.line_num, str(path))
            groups[user] = group
    return groups


def cmd_compare(cfg: RunConfig, groups_path: Path) -> None:
    started = time.perf_counter()
    result = run_compare(cfg, read_groups(groups_path))
    out = _out_dir(cfg)
    write_table(out / "compare.csv", COMPARE_COLUMNS, result.rows)
    write_table(out / "excluded.csv", EXCLUDED_COLUMNS, result.excluded)
    for warning in result.warnings:
        log.warning(warning)
    write_summary(out / "summary.json", _summary(
        "compare", cfg, started, pairs=len(result.comparisons), warnings=result.warnings,
    ))


def specs_from_json(doc: dict) -> list[SyntheticUserSpec]:
    """Synthesis spec: ``{"ensemble": {...default_ensemble kwargs}}`` and/or
    ``{"users": [{"user_id", "transition", "initial", "dwell_mean_seconds",
    "visit_count", "seed", ...}]}``."""
    if not isinstance(doc, dict):
        raise ConfigError("synthesis spec must be a JSON object")
    specs = []
    if "ensemble" in doc:
        params = dict(doc["ensemble"])
        for key in ("states", "out_degree"):
            if key in params:
                params[key] = tuple(params[key])
        try:
            specs.extend(default_ensemble(**params))
        except TypeError as exc:
            raise ConfigError(f"bad ensemble parameters: {exc}") from None
    for i, entry in enumerate(doc.get("users", [])):
        try:
            model = MarkovModel.from_rows(entry["transition"], entry.get("initial"))
            specs.append(SyntheticUserSpec(
                model=model,
                dwell_mean_seconds=float(entry["dwell_mean_seconds"]),
                visit_count=int(entry["visit_count"]),
                seed=int(entry["seed"]),
                zipf_exponent=entry.get("zipf_exponent"),
                user_id=str(entry.get("user_id", f"s{i:03d}")),
                pages_per_domain=int(entry.get("pages_per_domain", 5)),
            ))
        except KeyError as exc:
            raise ConfigError(f"user entry {i} lacks field {exc.args[0]!r}") from None
    if not specs:
        raise ConfigError("synthesis spec defines no users")
    ids = [s.user_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ConfigError("synthesis spec repeats a user id")
    return specs


def cmd_synth(spec_path: Path, out: Path) -> None:
    try:
        doc = json.loads(spec_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read synthesis spec {spec_path}: {exc}") from None
    try:
        specs = specs_from_json(doc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out.mkdir(parents=True, exist_ok=True)
    events: list[VisitEvent] = ensemble_events(specs)
    with open(out / "events.csv", "w", newline="", encoding="utf-8") as fh:
        write_events(events, fh)
    print(f"wrote {len(events)} events for {len(specs)} users to {out / 'events.csv'}")


def cmd_dump(cfg: RunConfig) -> None:
    lines = dump_trajectories(cfg)
    if cfg.out is None:
        for line in lines:
            print(line)
        return
    out = _out_dir(cfg)
    with open(out / "trajectories.tsv", "w", encoding="utf-8", newline="") as fh:
        fh.writelines(line + "\n" for line in lines)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "synth":
            cmd_synth(args.spec, args.out)
            return EXIT_OK
        cfg = config_from_args(args)
        if args.command == "analyze":
            cmd_analyze(cfg)
        elif args.command == "sweep":
            cmd_sweep(cfg, args.dimension)
        elif args.command == "converge":
            cmd_converge(cfg)
        elif args.command == "compare":
            cmd_compare(cfg, args.groups)
        elif args.command == "dump-trajectories":
            cmd_dump(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
