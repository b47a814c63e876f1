"""Routineness and predictability limits of web visitation trajectories."""
from importlib import resources

from .infotheory import (
    EntropyProfile,
    block_entropy,
    entropy_profile,
    lz_entropy_rate,
    match_lengths,
    random_entropy,
    uncorrelated_entropy,
)
from .ingest import SpatialResolution, SymbolTable, VisitEvent, parse_events, read_events, resolve_location
from .predictability import (
    PredictabilityProfile,
    binary_entropy,
    convergence_curve,
    min_sufficient_length,
    predictability_profile,
    solve_fano,
)
from .trajectory import (
    BinningConfig,
    Trajectory,
    TrajectoryKind,
    build_binned_nonstationary,
    build_sequential_nonstationary,
    build_stationary,
    compress_adjacent,
)

__version__ = "0.1.0"


def toy_fixture_path():
    """Path-like handle to the bundled nine-visit toy log."""
    return resources.files(__package__).joinpath("data", "toy_fig1.csv")


def load_toy_events() -> list[VisitEvent]:
    with toy_fixture_path().open("rb") as fh:
        return parse_events(fh, source="toy_fig1.csv")["toy"]
