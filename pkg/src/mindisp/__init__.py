"""Minimum-dispersion motion primitive graphs for search-based planning."""

from .baseline import BaselineSource, UniformInputSpec, baseline_expand, forward_simulate, input_lattice
from .dispersion import (
    NO_TILING,
    DispersionConfigError,
    DispersionRun,
    PartialResultError,
    TilingSpec,
    estimate_dispersion,
    min_dispersion_vertices,
    tile_points,
)
from .graph import (
    FORMAT_VERSION,
    ChecksumError,
    FormatVersionError,
    GraphFileError,
    MalformedGraphError,
    PrimitiveGraph,
    build_edges,
)
from .graph import load as load_graph
from .graph import save as save_graph
from .grid import MapFileError, OccupancyGrid, load_pgm, save_pgm
from .planner import (
    CheckCounter,
    GraphSource,
    PlanFailedError,
    PlanQuery,
    PlanResult,
    QueryError,
    collision_check,
    plan,
)
from .sampling import DenseSampleSet, SamplingConfigError, StateBox, generate_dense
from .systems import DoubleIntegrator2D, ReedsShepp, SteeringError, Trajectory, make_system

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
