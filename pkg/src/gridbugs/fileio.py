"""File formats: stats/histogram/bench CSV, habitat maps, checkpoints, PPM.

Everything here is byte-deterministic: floats are written with ``repr``
(shortest round-trip form), rows end with ``\\n``, and checkpoint floats are
stored as big-endian IEEE-754 bit patterns so restore is exact.
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct
import warnings
from dataclasses import dataclass

from . import engine
from . import rng as rnglib
from .config import (ConfigError, ModelConfig, apply_overrides,
                     effective_config_text, parse_config_text)
from .model import BugRecord, PredatorRecord, StatsRow

CHECKPOINT_FORMAT = "gridbugs-checkpoint-1"

STATS_HEADER = ["step", "bug_count", "min_size", "mean_size", "max_size",
                "predator_count", "total_food"]
HISTOGRAM_HEADER = ["step", "bin_lo", "bin_hi", "count"]
BENCH_HEADER = ["variant", "workers", "repetition", "seconds", "speedup",
                "ghost_cells_per_step"]


class HabitatError(ConfigError):
    """Malformed habitat map (reported with file name and line number)."""


class CheckpointError(Exception):
    """Unreadable, truncated, or version-mismatched checkpoint."""


# ── stats / histogram / bench CSV ──────────────────────────────────────────

def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_stats(path: str, rows: list[StatsRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(STATS_HEADER)
        for r in rows:
            w.writerow([r.step, r.bug_count, repr(r.min_size), repr(r.mean_size),
                        repr(r.max_size), r.predator_count, repr(r.total_food)])


def read_stats(path: str) -> list[StatsRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != STATS_HEADER:
            raise ValueError(f"{path}: unexpected stats header {header!r}")
        return [
            StatsRow(int(r[0]), int(r[1]), float(r[2]), float(r[3]),
                     float(r[4]), int(r[5]), float(r[6]))
            for r in reader
        ]


def write_histogram(path: str, step: int, counts: list[int],
                    bin_width: float) -> None:
    """Append one step's bin rows; the header is written when the file is
    created.  The last bin also collects every size at or beyond its lower
    edge."""
    fresh = not os.path.exists(path)
    with open(path, "a", newline="") as fh:
        w = _csv_writer(fh)
        if fresh:
            w.writerow(HISTOGRAM_HEADER)
        for i, count in enumerate(counts):
            w.writerow([step, repr(i * bin_width), repr((i + 1) * bin_width), count])


def write_bench(path: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(BENCH_HEADER)
        for r in rows:
            w.writerow([r.variant, r.workers, r.repetition, repr(r.seconds),
                        repr(r.speedup), r.ghost_cells_per_step])


# ── habitat maps ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Habitat:
    width: int
    height: int
    rates: list[float]  # flat row-major, cells not listed in the file are 0.0


def read_habitat(path: str) -> Habitat:
    """Text map: first data line ``width height``, then ``x y rate`` lines.
    Blank lines and lines starting with ``#`` are skipped.  A cell listed
    twice keeps the last value (with a warning)."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise HabitatError(f"cannot read habitat file {path}: {exc}") from exc

    width = height = None
    rates: list[float] | None = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if width is None:
            if len(parts) != 2:
                raise HabitatError(
                    f"{path}:{lineno}: expected 'width height', got {line!r}")
            try:
                width, height = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise HabitatError(f"{path}:{lineno}: bad dimensions {line!r}") from exc
            if width <= 0 or height <= 0:
                raise HabitatError(f"{path}:{lineno}: dimensions must be positive")
            rates = [0.0] * (width * height)
            continue
        if len(parts) != 3:
            raise HabitatError(f"{path}:{lineno}: expected 'x y rate', got {line!r}")
        try:
            x, y, rate = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise HabitatError(f"{path}:{lineno}: bad cell entry {line!r}") from exc
        if not (0 <= x < width and 0 <= y < height):
            raise HabitatError(
                f"{path}:{lineno}: cell ({x}, {y}) outside {width}x{height} map")
        if rate < 0 or not math.isfinite(rate):
            raise HabitatError(f"{path}:{lineno}: rate must be finite and >= 0")
        flat = y * width + x
        if rates[flat] != 0.0:
            warnings.warn(f"{path}:{lineno}: cell ({x}, {y}) listed twice; "
                          "keeping the later value", stacklevel=2)
        rates[flat] = rate
    if width is None:
        raise HabitatError(f"{path}: no dimension line found")
    return Habitat(width, height, rates)


# ── checkpoints ────────────────────────────────────────────────────────────

def _f2hex(v: float) -> str:
    return struct.pack(">d", v).hex()


def _hex2f(s: str) -> float:
    return struct.unpack(">d", bytes.fromhex(s))[0]


def checkpoint(world: engine.WorldState, path: str) -> None:
    """Full snapshot of the sequential world; restore is bit-exact, so a run
    split across a checkpoint matches the unsplit run byte for byte."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": effective_config_text(world.config),
        "step_count": world.step_count,
        "next_bug_id": world.next_bug_id,
        "retry_cap_hits": world.retry_cap_hits,
        "streams": {name: f"{s.state:016x}" for name, s in world.streams.items()},
        "bugs": [[r.bug_id, r.cell, _f2hex(r.size)]
                 for r in world.bugs.records_by_id()],
        "predators": [[r.pred_id, r.cell]
                      for r in world.predators.records_by_id()],
        "food": [_f2hex(v) for v in world.cells.food_values()],
        "production": [_f2hex(v) for v in world.cells.production_values()],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def restore(path: str) -> engine.WorldState:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupted checkpoint {path}: {exc}") from exc

    try:
        if doc["format"] != CHECKPOINT_FORMAT:
            raise CheckpointError(
                f"{path}: format {doc['format']!r} is not {CHECKPOINT_FORMAT!r}")
        overrides = parse_config_text(doc["config"], source=f"{path}#config")
        config = apply_overrides(ModelConfig(), overrides).validate()
        geom = engine.GridGeometry(config.width, config.height)
        cells = engine.make_cells(config.layout, geom)
        food = [_hex2f(s) for s in doc["food"]]
        production = [_hex2f(s) for s in doc["production"]]
        if len(food) != geom.n_cells or len(production) != geom.n_cells:
            raise CheckpointError(f"{path}: cell attribute length mismatch")
        cells.set_food_values(food)
        cells.set_production_rates(production)

        bugs = engine.AgentArena()
        for bid, cell, size_hex in doc["bugs"]:
            if not (0 <= cell < geom.n_cells):
                raise CheckpointError(f"{path}: bug cell {cell} out of range")
            h = bugs.alloc(int(bid), BugRecord(int(bid), int(cell), _hex2f(size_hex)))
            cells.set_occupant(int(cell), h)
        predators = engine.AgentArena()
        for pid, cell in doc["predators"]:
            if not (0 <= cell < geom.n_cells):
                raise CheckpointError(f"{path}: predator cell {cell} out of range")
            predators.alloc(int(pid), PredatorRecord(int(pid), int(cell)))

        streams = {}
        for name in engine._STREAM_TAGS:
            streams[name] = rnglib.RngState(int(doc["streams"][name], 16))

        return engine.WorldState(
            config, geom, cells, bugs, predators, streams,
            step_count=int(doc["step_count"]),
            next_bug_id=int(doc["next_bug_id"]),
            retry_cap_hits=int(doc["retry_cap_hits"]),
        )
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CheckpointError(f"incomplete or corrupted checkpoint {path}: {exc}") from exc


# ── rasters ────────────────────────────────────────────────────────────────

def render_raster_parts(width: int, height: int, food_values,
                        bug_cell_sizes, predator_cells,
                        food_display_max: float) -> bytes:
    """Binary PPM (P6): empty cells green scaled by food, bug cells red
    scaled by size (full red at size 100, the stop-threshold scale),
    predator cells blue."""
    pixels = bytearray(3 * width * height)
    for i, f in enumerate(food_values):
        g = f / food_display_max
        pixels[3 * i + 1] = round(255 * (g if g < 1.0 else 1.0))
    for cell, size in bug_cell_sizes:
        base = 3 * cell
        s = size / 100.0
        pixels[base] = round(255 * (s if s < 1.0 else 1.0))
        pixels[base + 1] = 0
        pixels[base + 2] = 0
    for cell in predator_cells:
        base = 3 * cell
        pixels[base] = 0
        pixels[base + 1] = 0
        pixels[base + 2] = 255
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + bytes(pixels)


def render_raster(world: engine.WorldState) -> bytes:
    geom = world.geometry
    return render_raster_parts(
        geom.width, geom.height, world.cells.food_values(),
        ((r.cell, r.size) for r in world.bugs.records_by_id()),
        (r.cell for r in world.predators.records_by_id()),
        world.config.food_display_max)


def write_raster(world: engine.WorldState, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(render_raster(world))
