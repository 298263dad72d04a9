"""Sequential simulation engine with two interchangeable memory layouts.

The logical state — bug positions/sizes, predator positions, per-cell food,
step counter — is identical in both layouts:

* ``cell_object``: one record per cell holding food / production / occupant.
* ``field``: each attribute in its own contiguous array, indexed by flat
  cell index.

Rule semantics live in :mod:`gridbugs.model`; the layouts differ only in how
attributes are fetched and stored (the field layout additionally vectorizes
the food-production update and the best-food candidate gather — the whole
point of that layout).  Equivalence is enforced by per-step state digests.
"""

from __future__ import annotations

import math
import struct
import time
from dataclasses import dataclass, field
from hashlib import blake2b

import numpy as np

from . import model
from . import rng as rnglib
from .config import ConfigError, ModelConfig
from .model import (
    GHOST_OCCUPIED,
    AgentArena,
    BugRecord,
    Handle,
    PredatorRecord,
    StatsRow,
)
from .space import GridGeometry

_PLACEMENT_ATTEMPTS = 5  # per offspring; failures skipped

_STREAM_TAGS = {
    "scheduler": rnglib.STREAM_SCHEDULER,
    "movement": rnglib.STREAM_MOVEMENT,
    "mortality": rnglib.STREAM_MORTALITY,
    "reproduction": rnglib.STREAM_REPRODUCTION,
    "predators": rnglib.STREAM_PREDATORS,
}


# ── neighborhood tables ────────────────────────────────────────────────────

def build_move_table(
    geom: GridGeometry,
    radius: int,
    rows: np.ndarray | None = None,
    rowmap: np.ndarray | None = None,
) -> np.ndarray:
    """(cells, (2r+1)^2) table of Moore-ball flat indices, own cell included,
    in row-major offset order.  ``rows``/``rowmap`` build the table for a
    worker slab: candidates are wrapped in global space, then translated to
    slab-local flat indices (they always land inside the slab because the
    halo is at least as deep as the radius).
    """
    w, h = geom.width, geom.height
    if rows is None:
        rows = np.arange(h, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    offs = np.arange(-radius, radius + 1, dtype=np.int64)
    y = np.repeat(rows, w)
    x = np.tile(np.arange(w, dtype=np.int64), len(rows))
    dy = np.repeat(offs, 2 * radius + 1)
    dx = np.tile(offs, 2 * radius + 1)
    gy = (y[:, None] + dy[None, :]) % h
    gx = (x[:, None] + dx[None, :]) % w
    if rowmap is not None:
        gy = rowmap[gy]
        if (gy < 0).any():
            raise ValueError("move table candidate outside worker slab")
    return np.ascontiguousarray(gy * w + gx, dtype=np.int32)


def table_center(radius: int) -> int:
    return ((2 * radius + 1) ** 2) // 2


# ── layouts ────────────────────────────────────────────────────────────────

class _CellRec:
    __slots__ = ("food", "production", "occupant")

    def __init__(self) -> None:
        self.food = 0.0
        self.production = 0.0
        self.occupant = None


class CellObjectCells:
    """Record-per-cell layout (the natural object model)."""

    layout_name = "cell_object"
    __slots__ = ("geometry", "records", "ids_u64")

    def __init__(self, geometry: GridGeometry, global_ids: np.ndarray | None = None):
        self.geometry = geometry
        self.records = [_CellRec() for _ in range(geometry.n_cells)]
        self.ids_u64 = (
            np.arange(geometry.n_cells, dtype=np.uint64)
            if global_ids is None
            else global_ids.astype(np.uint64)
        )

    @property
    def n_cells(self) -> int:
        return len(self.records)

    def food(self, i: int) -> float:
        return self.records[i].food

    def set_food(self, i: int, v: float) -> None:
        self.records[i].food = v

    def production(self, i: int) -> float:
        return self.records[i].production

    def set_production_rates(self, rates) -> None:
        for rec, r in zip(self.records, rates):
            rec.production = float(r)

    def occupant(self, i: int):
        return self.records[i].occupant

    def set_occupant(self, i: int, h: Handle) -> None:
        self.records[i].occupant = h

    def clear_occupant(self, i: int) -> None:
        self.records[i].occupant = None

    def is_empty(self, i: int) -> bool:
        return self.records[i].occupant is None

    def has_bug(self, i: int) -> bool:
        occ = self.records[i].occupant
        return occ is not None and occ is not GHOST_OCCUPIED

    def produce_stochastic(self, step: int, seed: int, rate: float,
                           start: int = 0, end: int | None = None) -> None:
        draws = rnglib.cell_stream_uniform_ids(
            seed, self.ids_u64[start:end], step, rnglib.STREAM_FOOD
        ).tolist()
        recs = self.records
        for k, d in enumerate(draws):
            rec = recs[start + k]
            rec.food = rec.food + d * rate

    def produce_habitat(self, start: int = 0, end: int | None = None) -> None:
        for rec in self.records[start:end]:
            rec.food = rec.food + rec.production

    def best_food_move(self, idx: int, table: np.ndarray,
                       id_table: np.ndarray | None = None) -> int:
        """Best-food rule over the candidate table row ``idx``.  Ordering
        (and the returned value) use ``id_table`` — global flat indices —
        so worker slabs tie-break exactly like the sequential grid."""
        cands = table[idx].tolist()
        gids = cands if id_table is None else id_table[idx].tolist()
        center = len(cands) // 2
        recs = self.records
        best_id = -1
        best_food = -1.0
        for k, t in enumerate(cands):
            rec = recs[t]
            if rec.occupant is None or k == center:
                f = rec.food
                if f > best_food:
                    best_food = f
                    best_id = gids[k]
                elif f == best_food:
                    g = gids[k]
                    if g < best_id:
                        best_id = g
        return best_id

    def food_fsum(self, start: int = 0, end: int | None = None) -> float:
        return math.fsum(rec.food for rec in self.records[start:end])

    def food_values(self, start: int = 0, end: int | None = None) -> list[float]:
        return [rec.food for rec in self.records[start:end]]

    def set_food_values(self, values, start: int = 0) -> None:
        for k, v in enumerate(values):
            self.records[start + k].food = v

    def production_values(self, start: int = 0, end: int | None = None) -> list[float]:
        return [rec.production for rec in self.records[start:end]]

    def food_bytes(self, start: int = 0, end: int | None = None) -> bytes:
        vals = self.food_values(start, end)
        return struct.pack(f"<{len(vals)}d", *vals)


class FieldCells:
    """Struct-of-arrays layout: contiguous per-attribute planes."""

    layout_name = "field"
    __slots__ = ("geometry", "food_arr", "production_arr", "occupant_arr", "ids_u64")

    # occupant encoding: -1 empty, -2 ghost-occupied, else (slot<<32)|gen
    _EMPTY = -1
    _GHOST = -2

    def __init__(self, geometry: GridGeometry, global_ids: np.ndarray | None = None):
        n = geometry.n_cells
        self.geometry = geometry
        self.food_arr = np.zeros(n, dtype=np.float64)
        self.production_arr = np.zeros(n, dtype=np.float64)
        self.occupant_arr = np.full(n, self._EMPTY, dtype=np.int64)
        self.ids_u64 = (
            np.arange(n, dtype=np.uint64) if global_ids is None
            else global_ids.astype(np.uint64)
        )

    @property
    def n_cells(self) -> int:
        return len(self.food_arr)

    def food(self, i: int) -> float:
        return float(self.food_arr[i])

    def set_food(self, i: int, v: float) -> None:
        self.food_arr[i] = v

    def production(self, i: int) -> float:
        return float(self.production_arr[i])

    def set_production_rates(self, rates) -> None:
        self.production_arr[:] = np.asarray(list(rates), dtype=np.float64)

    def occupant(self, i: int):
        v = int(self.occupant_arr[i])
        if v == self._EMPTY:
            return None
        if v == self._GHOST:
            return GHOST_OCCUPIED
        return Handle(v >> 32, v & 0xFFFFFFFF)

    def set_occupant(self, i: int, h: Handle) -> None:
        if h is GHOST_OCCUPIED:
            self.occupant_arr[i] = self._GHOST
        else:
            self.occupant_arr[i] = (h.slot << 32) | (h.gen & 0xFFFFFFFF)

    def clear_occupant(self, i: int) -> None:
        self.occupant_arr[i] = self._EMPTY

    def is_empty(self, i: int) -> bool:
        return self.occupant_arr[i] == self._EMPTY

    def has_bug(self, i: int) -> bool:
        return self.occupant_arr[i] >= 0

    def produce_stochastic(self, step: int, seed: int, rate: float,
                           start: int = 0, end: int | None = None) -> None:
        draws = rnglib.cell_stream_uniform_ids(
            seed, self.ids_u64[start:end], step, rnglib.STREAM_FOOD
        )
        self.food_arr[start:end] += draws * rate

    def produce_habitat(self, start: int = 0, end: int | None = None) -> None:
        self.food_arr[start:end] += self.production_arr[start:end]

    def best_food_move(self, idx: int, table: np.ndarray,
                       id_table: np.ndarray | None = None) -> int:
        cand = table[idx]
        gids = cand if id_table is None else id_table[idx]
        adm = self.occupant_arr[cand] == self._EMPTY
        adm[len(cand) // 2] = True  # own cell (offset 0,0) always admissible
        foods = self.food_arr[cand]
        best = foods[adm].max()
        return int(gids[adm & (foods == best)].min())

    def food_fsum(self, start: int = 0, end: int | None = None) -> float:
        return math.fsum(self.food_arr[start:end].tolist())

    def food_values(self, start: int = 0, end: int | None = None) -> list[float]:
        return self.food_arr[start:end].tolist()

    def set_food_values(self, values, start: int = 0) -> None:
        self.food_arr[start:start + len(values)] = values

    def production_values(self, start: int = 0, end: int | None = None) -> list[float]:
        return self.production_arr[start:end].tolist()

    def food_bytes(self, start: int = 0, end: int | None = None) -> bytes:
        return self.food_arr[start:end].astype("<f8", copy=False).tobytes()


_LAYOUT_CLASSES = {"cell_object": CellObjectCells, "field": FieldCells}


def make_cells(layout: str, geometry: GridGeometry,
               global_ids: np.ndarray | None = None):
    return _LAYOUT_CLASSES[layout](geometry, global_ids)


# ── world state ────────────────────────────────────────────────────────────

class WorldState:
    __slots__ = (
        "config", "geometry", "cells", "bugs", "predators", "streams",
        "step_count", "next_bug_id", "retry_cap_hits", "_move_table",
    )

    def __init__(self, config: ModelConfig, geometry: GridGeometry, cells,
                 bugs: AgentArena, predators: AgentArena,
                 streams: dict, step_count: int, next_bug_id: int,
                 retry_cap_hits: int = 0) -> None:
        self.config = config
        self.geometry = geometry
        self.cells = cells
        self.bugs = bugs
        self.predators = predators
        self.streams = streams
        self.step_count = step_count
        self.next_bug_id = next_bug_id
        self.retry_cap_hits = retry_cap_hits
        self._move_table = None

    def move_table(self) -> np.ndarray:
        if self._move_table is None:
            self._move_table = build_move_table(self.geometry, self.config.move_radius)
        return self._move_table

    def take_bug_id(self) -> int:
        v = self.next_bug_id
        self.next_bug_id = v + 1
        return v

    def resolve_spawn(self, flat: int):
        return flat if self.cells.is_empty(flat) else None


def derive_streams(seed: int, rank: int = 0) -> dict:
    return {name: rnglib.substream(seed, tag, rank)
            for name, tag in _STREAM_TAGS.items()}


def init_world(config: ModelConfig) -> WorldState:
    config = config.validate()
    geom = GridGeometry(config.width, config.height)
    cells = make_cells(config.layout, geom)

    if config.food_mode == "habitat":
        from .fileio import read_habitat  # deferred: fileio imports engine

        habitat = read_habitat(config.habitat_file)
        if (habitat.width, habitat.height) != (config.width, config.height):
            raise ConfigError(
                f"habitat map is {habitat.width}x{habitat.height}, "
                f"run grid is {config.width}x{config.height}"
            )
        cells.set_production_rates(habitat.rates)

    bugs = AgentArena()
    place = rnglib.substream(config.seed, rnglib.STREAM_INIT_BUGS)
    sizes = rnglib.substream(config.seed, rnglib.STREAM_INIT_SIZES)
    n = geom.n_cells
    for bid in range(config.initial_bug_count):
        while True:
            flat = place.next_int(0, n - 1)
            if cells.is_empty(flat):
                break
        if config.initial_bug_size_sd > 0:
            while True:
                size = sizes.next_gauss(config.initial_bug_size, config.initial_bug_size_sd)
                if size >= 0.0:
                    break
        else:
            size = config.initial_bug_size
        h = bugs.alloc(bid, BugRecord(bid, flat, size))
        cells.set_occupant(flat, h)

    predators = AgentArena()
    if config.features.predators:
        pplace = rnglib.substream(config.seed, rnglib.STREAM_INIT_PREDATORS)
        taken: set[int] = set()
        for pid in range(config.predator_count):
            while True:
                flat = pplace.next_int(0, n - 1)
                if flat not in taken:
                    break
            taken.add(flat)
            predators.alloc(pid, PredatorRecord(pid, flat))

    return WorldState(
        config, geom, cells, bugs, predators,
        derive_streams(config.seed), step_count=0,
        next_bug_id=config.initial_bug_count,
    )


# ── shared phase pieces (sequential engine and partition workers) ──────────

def feed_bug(cells, rec: BugRecord, food_on: bool, max_consumption: float) -> None:
    if food_on:
        fv = cells.food(rec.cell)
        eaten = fv if fv < max_consumption else max_consumption
        cells.set_food(rec.cell, fv - eaten)
        rec.size += eaten
    else:
        rec.size += max_consumption


def scheduled_ids(bugs: AgentArena, scheduler: str, stream) -> list[int]:
    ids = bugs.ids_sorted()
    if scheduler == "shuffled":
        return stream.shuffle(ids)
    if scheduler == "sorted_desc_size":
        return sorted(
            ids, key=lambda bid: (-bugs.records[bugs.by_id[bid].slot].size, bid)
        )
    return ids


def mortality_reproduction_phase(
    bugs: AgentArena, cells, geom: GridGeometry, config: ModelConfig,
    mortality_stream, reproduction_stream, take_id, resolve_spawn, to_global,
) -> None:
    """Sweep live bugs in ascending id order: survival draw first, then
    reproduction for survivors at/over the threshold.  Offspring offsets are
    drawn in global coordinates; ``resolve_spawn`` maps a global flat index
    to a placeable local one (or None — attempt consumed, failure skipped).
    Newborns do not act until the next step.  The parent's cell stays
    occupied until after its placements, then the parent is removed.
    """
    p = config.survival_probability
    threshold = config.reproduce_threshold
    radius = config.offspring_place_radius
    w, h = geom.width, geom.height
    for bid in bugs.ids_sorted():
        handle = bugs.handle_of(bid)
        rec = bugs.get(handle)
        if not model.survive(mortality_stream, p):
            cells.clear_occupant(rec.cell)
            bugs.remove(handle, bid)
            continue
        if rec.size < threshold:
            continue
        g = to_global(rec.cell)
        x0, y0 = g % w, g // w
        for _ in range(config.offspring_count):
            for _attempt in range(_PLACEMENT_ATTEMPTS):
                dx = reproduction_stream.next_int(-radius, radius)
                dy = reproduction_stream.next_int(-radius, radius)
                target = ((y0 + dy) % h) * w + (x0 + dx) % w
                local = resolve_spawn(target)
                if local is not None:
                    nid = take_id()
                    nh = bugs.alloc(nid, BugRecord(nid, local, 0.0))
                    cells.set_occupant(local, nh)
                    break
        cells.clear_occupant(rec.cell)
        bugs.remove(handle, bid)


def predator_phase(
    predators: AgentArena, bugs: AgentArena, cells, geom: GridGeometry,
    stream, has_bug, is_local, to_global, to_local,
) -> None:
    """Predators act in shuffled id order; each hunts the radius-1 Moore
    block (own cell included) and kills at most one bug per step."""
    for pid in stream.shuffle(predators.ids_sorted()):
        prec = predators.get(predators.handle_of(pid))
        dest_g, killed = model.predator_hunt(
            to_global(prec.cell), geom, stream, has_bug, is_local
        )
        dest = to_local(dest_g)
        if killed:
            victim = cells.occupant(dest)
            vrec = bugs.get(victim)
            cells.clear_occupant(dest)
            bugs.remove(victim, vrec.bug_id)
        prec.cell = dest


def _identity(x):
    return x


def _always(_):
    return True


# ── stepping ───────────────────────────────────────────────────────────────

def step(world: WorldState) -> StatsRow:
    """One full step: food production; bug moves + immediate eat/grow in
    scheduler order (first-come-first-served occupancy); mortality and
    reproduction sweep; predator actions; stats."""
    config = world.config
    feats = config.features
    cells = world.cells
    bugs = world.bugs
    s = world.step_count

    if feats.food:
        if config.food_mode == "habitat":
            cells.produce_habitat()
        else:
            cells.produce_stochastic(s, config.seed, config.max_food_production)

    movement = world.streams["movement"]
    best = config.movement_rule == "best_food"
    table = world.move_table() if best else None
    radius = config.move_radius
    growth = feats.growth
    food_on = feats.food
    maxc = config.max_consumption
    geom = world.geometry
    is_empty = cells.is_empty
    for bid in scheduled_ids(bugs, config.scheduler, world.streams["scheduler"]):
        handle = bugs.handle_of(bid)
        rec = bugs.get(handle)
        own = rec.cell
        if best:
            dest = cells.best_food_move(own, table)
        else:
            dest, capped = model.select_move_random_retry(
                own, geom, is_empty, movement, radius)
            if capped:
                world.retry_cap_hits += 1
        if dest != own:
            cells.clear_occupant(own)
            cells.set_occupant(dest, handle)
            rec.cell = dest
        if growth:
            feed_bug(cells, rec, food_on, maxc)

    if feats.mortality_reproduction:
        mortality_reproduction_phase(
            bugs, cells, world.geometry, config,
            world.streams["mortality"], world.streams["reproduction"],
            world.take_bug_id, world.resolve_spawn, _identity,
        )

    if feats.predators:
        predator_phase(
            world.predators, bugs, cells, world.geometry,
            world.streams["predators"], cells.has_bug, _always,
            _identity, _identity,
        )

    world.step_count = s + 1
    return stats_row(world)


def stats_row(world: WorldState) -> StatsRow:
    sizes = [rec.size for rec in world.bugs.records_by_id()]
    return model.stats_from(
        world.step_count, sizes, len(world.predators), world.cells.food_fsum()
    )


def size_histogram(world: WorldState) -> list[int]:
    return model.histogram(
        (rec.size for rec in world.bugs.records_by_id()),
        world.config.histogram_bin_width,
        world.config.histogram_bins,
    )


# ── running ────────────────────────────────────────────────────────────────

@dataclass
class RunReport:
    steps: int
    stop_reason: str
    wall_seconds: float
    cpu_seconds: float
    stats_rows: list[StatsRow]
    histograms: list[tuple[int, list[int]]] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    final_digest: int = 0


def _stop_reached(world: WorldState, last_row: StatsRow | None) -> str | None:
    rule = world.config.stop
    if rule.kind == "fixed_steps":
        return "fixed_steps" if world.step_count >= rule.value else None
    mx = last_row.max_size if last_row is not None else model.max_bugsize(
        rec.size for rec in world.bugs.records_by_id()
    )
    return "max_size_reached" if mx >= rule.value else None


def run_world(world: WorldState, on_step=None) -> RunReport:
    """Advance ``world`` until its stop rule fires (evaluated after each full
    step, and once up front so a satisfied rule runs zero steps)."""
    rows: list[StatsRow] = []
    hists: list[tuple[int, list[int]]] = []
    want_hist = world.config.features.histogram_output
    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    last: StatsRow | None = None
    while True:
        reason = _stop_reached(world, last)
        if reason is not None:
            break
        last = step(world)
        rows.append(last)
        if want_hist:
            hists.append((last.step, size_histogram(world)))
        if on_step is not None:
            on_step(world, last)
    return RunReport(
        steps=len(rows),
        stop_reason=reason,
        wall_seconds=time.perf_counter() - wall0,
        cpu_seconds=time.process_time() - cpu0,
        stats_rows=rows,
        histograms=hists,
        diagnostics={"retry_cap_hits": world.retry_cap_hits},
        final_digest=state_digest(world),
    )


def run(config: ModelConfig) -> RunReport:
    return run_world(init_world(config))


def audit_occupancy(cells, bugs: AgentArena, n_cells: int | None = None,
                    where: str = "") -> list[str]:
    """Occupancy invariant: every live bug's cell points back at its handle,
    no two bugs share a cell, and no stale handle lingers in a cell.
    Returns human-readable violations (empty list = clean)."""
    violations = []
    seen: dict[int, int] = {}
    for bid in bugs.ids_sorted():
        handle = bugs.by_id[bid]
        rec = bugs.get(handle)
        if rec is None:
            violations.append(f"{where}bug {bid}: stale handle in arena index")
            continue
        if rec.cell in seen:
            violations.append(
                f"{where}bugs {seen[rec.cell]} and {bid} share cell {rec.cell}")
        seen[rec.cell] = bid
        occ = cells.occupant(rec.cell)
        if occ != handle:
            violations.append(
                f"{where}bug {bid}: cell {rec.cell} holds {occ!r}, not its handle")
    if isinstance(cells, FieldCells):
        occupied = int((cells.occupant_arr >= 0).sum())
    else:
        occupied = sum(
            1 for r in cells.records
            if r.occupant is not None and r.occupant is not GHOST_OCCUPIED
        )
    if occupied != len(bugs):
        violations.append(
            f"{where}{occupied} occupied cells for {len(bugs)} live bugs")
    return violations


def audit_world(world: WorldState) -> list[str]:
    return audit_occupancy(world.cells, world.bugs)


# ── digests and layout conversion ──────────────────────────────────────────

_BUG_PACK = struct.Struct("<QId")
_PRED_PACK = struct.Struct("<QI")


def digest_state(step_count: int, bug_triples, pred_pairs, food_bytes: bytes) -> int:
    """64-bit digest over the canonical logical state.  ``bug_triples`` must
    arrive as (id, global flat cell, size) in ascending id order; predators
    likewise.  Layout and partitioning must not leak into these bytes."""
    bug_bytes = bytearray()
    n_bugs = 0
    for bid, cell, size in bug_triples:
        bug_bytes += _BUG_PACK.pack(bid, cell, size)
        n_bugs += 1
    pred_bytes = bytearray()
    n_preds = 0
    for pid, cell in pred_pairs:
        pred_bytes += _PRED_PACK.pack(pid, cell)
        n_preds += 1
    h = blake2b(digest_size=8)
    h.update(b"GBSTATE1")
    h.update(struct.pack("<QQQ", step_count, n_bugs, n_preds))
    h.update(bytes(bug_bytes))
    h.update(bytes(pred_bytes))
    h.update(food_bytes)
    return int.from_bytes(h.digest(), "big")


def state_digest(world: WorldState) -> int:
    return digest_state(
        world.step_count,
        ((r.bug_id, r.cell, r.size) for r in world.bugs.records_by_id()),
        ((r.pred_id, r.cell) for r in world.predators.records_by_id()),
        world.cells.food_bytes(),
    )


def _copy_arena(arena: AgentArena, copier) -> AgentArena:
    out = AgentArena()
    out.records = [copier(r) if r is not None else None for r in arena.records]
    out.gens = list(arena.gens)
    out.free = list(arena.free)
    out.by_id = dict(arena.by_id)
    return out


def convert_layout(world: WorldState, target_layout: str) -> WorldState:
    """Same logical state (and RNG states) in the other representation."""
    if target_layout not in _LAYOUT_CLASSES:
        raise ConfigError(f"unknown layout {target_layout!r}")
    cells = make_cells(target_layout, world.geometry, world.cells.ids_u64)
    cells.set_food_values(world.cells.food_values())
    cells.set_production_rates(world.cells.production_values())
    bugs = _copy_arena(world.bugs, lambda r: BugRecord(r.bug_id, r.cell, r.size))
    predators = _copy_arena(world.predators, lambda r: PredatorRecord(r.pred_id, r.cell))
    for slot, rec in enumerate(bugs.records):
        if rec is not None:
            cells.set_occupant(rec.cell, Handle(slot, bugs.gens[slot]))
    from dataclasses import replace

    return WorldState(
        replace(world.config, layout=target_layout),
        world.geometry, cells, bugs, predators,
        {name: s.clone() for name, s in world.streams.items()},
        world.step_count, world.next_bug_id, world.retry_cap_hits,
    )
