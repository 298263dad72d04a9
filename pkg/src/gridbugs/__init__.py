"""gridbugs: a deterministic grid-of-bugs simulation engine.

A 16-rung feature ladder (movement, growth, food, scheduling, outputs,
mortality/reproduction, predators) over a toroidal grid, runnable in two
memory layouts (cell records vs contiguous field arrays) and under an
in-process stripe-partitioned multi-worker runtime with ghost exchange and
a cross-worker bug-migration protocol.  All randomness is derived from a
single 64-bit seed; equal configs give bit-identical runs.
"""

from .config import (
    ConfigError,
    FeatureSet,
    ModelConfig,
    PRESETS,
    StopRule,
    apply_overrides,
    effective_config_text,
    parse_config_text,
    preset,
)
from .engine import (
    RunReport,
    WorldState,
    convert_layout,
    init_world,
    run,
    run_world,
    state_digest,
    step,
)
from .fileio import (
    CheckpointError,
    HabitatError,
    checkpoint,
    read_habitat,
    restore,
    write_raster,
    write_stats,
)
from .model import StatsRow
from .partition import (
    BenchReport,
    BenchRow,
    PartitionRuntime,
    ProtocolError,
    speedup_bench,
)
from .space import GeometryError, GridGeometry, PartitionError, stripe_partition

__version__ = "0.1.0"

__all__ = [
    "BenchReport",
    "BenchRow",
    "CheckpointError",
    "ConfigError",
    "FeatureSet",
    "GeometryError",
    "GridGeometry",
    "HabitatError",
    "ModelConfig",
    "PRESETS",
    "PartitionError",
    "PartitionRuntime",
    "ProtocolError",
    "RunReport",
    "StatsRow",
    "StopRule",
    "WorldState",
    "apply_overrides",
    "checkpoint",
    "convert_layout",
    "effective_config_text",
    "init_world",
    "parse_config_text",
    "preset",
    "read_habitat",
    "restore",
    "run",
    "run_world",
    "speedup_bench",
    "state_digest",
    "step",
    "stripe_partition",
    "write_raster",
    "write_stats",
]
