"""Agent records and per-agent rules.

The rules are written against a tiny duck-typed "view" protocol — anything
with ``geometry``, ``is_empty(flat)`` and ``food(flat)`` — so the same
functions drive both memory layouts and the partition workers (whose view of
remote cells is a snapshot, or nothing at all in field mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

from .space import GridGeometry


class Handle(NamedTuple):
    """Generation-tagged reference into an :class:`AgentArena`.

    A handle whose generation no longer matches the arena slot refers to a
    dead agent; ``AgentArena.get`` returns None for it instead of aliasing
    whoever reuses the slot.
    """

    slot: int
    gen: int


# Occupancy marker for halo cells reported occupied by a remote worker.
# Never stored by local rules; is_empty() treats it like any live occupant.
GHOST_OCCUPIED = Handle(-1, -1)


class BugRecord:
    __slots__ = ("bug_id", "cell", "size")

    def __init__(self, bug_id: int, cell: int, size: float) -> None:
        self.bug_id = bug_id
        self.cell = cell
        self.size = size


class PredatorRecord:
    __slots__ = ("pred_id", "cell")

    def __init__(self, pred_id: int, cell: int) -> None:
        self.pred_id = pred_id
        self.cell = cell


class AgentArena:
    """Slot arena with generation tags and an id index.

    Slots are storage only: every behavioral iteration order in the engine is
    keyed by agent id, so checkpoint restore may renumber slots freely.
    """

    __slots__ = ("records", "gens", "free", "by_id")

    def __init__(self) -> None:
        self.records: list = []
        self.gens: list[int] = []
        self.free: list[int] = []
        self.by_id: dict[int, Handle] = {}

    def __len__(self) -> int:
        return len(self.by_id)

    def alloc(self, agent_id: int, record) -> Handle:
        if agent_id in self.by_id:
            raise ValueError(f"agent id {agent_id} already live")
        if self.free:
            slot = self.free.pop()
            self.records[slot] = record
        else:
            slot = len(self.records)
            self.records.append(record)
            self.gens.append(0)
        h = Handle(slot, self.gens[slot])
        self.by_id[agent_id] = h
        return h

    def get(self, h: Handle):
        """Record for a live handle, or None if the handle is stale."""
        if 0 <= h.slot < len(self.gens) and self.gens[h.slot] == h.gen:
            return self.records[h.slot]
        return None

    def alive(self, h: Handle) -> bool:
        return self.get(h) is not None

    def remove(self, h: Handle, agent_id: int) -> None:
        if not self.alive(h):
            raise ValueError(f"removing stale handle {h}")
        self.gens[h.slot] += 1
        self.records[h.slot] = None
        self.free.append(h.slot)
        del self.by_id[agent_id]

    def handle_of(self, agent_id: int) -> Handle:
        return self.by_id[agent_id]

    def ids_sorted(self) -> list[int]:
        return sorted(self.by_id)

    def records_by_id(self):
        for agent_id in sorted(self.by_id):
            yield self.records[self.by_id[agent_id].slot]


# ── movement ───────────────────────────────────────────────────────────────

def retry_cap(radius: int) -> int:
    """Liveness cap on drawn candidate cells before a bug gives up and stays."""
    return 10 * (2 * radius + 1) ** 2


def select_move_random_retry(own_flat: int, geom: GridGeometry, is_empty,
                             rng, radius: int) -> tuple[int, bool]:
    """Draw (dx, dy) offsets until the drawn cell is empty (or is the bug's
    own cell).  Coordinates are global; ``is_empty`` takes a global flat
    index.  Returns (destination flat, cap_hit)."""
    w = geom.width
    h = geom.height
    x0 = own_flat % w
    y0 = own_flat // w
    for _ in range(retry_cap(radius)):
        dx = rng.next_int(-radius, radius)
        dy = rng.next_int(-radius, radius)
        target = ((y0 + dy) % h) * w + (x0 + dx) % w
        if target == own_flat or is_empty(target):
            return target, False
    return own_flat, True


def select_move_best_food(own_flat: int, geom: GridGeometry, food, is_empty,
                          radius: int) -> int:
    """Reference best-food scan: among the bug's own cell and every empty
    cell in the Moore ball, pick maximal food; ties go to the lowest flat
    index.  The layouts carry equivalent fast paths; this stays the oracle.
    ``food`` and ``is_empty`` take global flat indices.
    """
    w, h = geom.width, geom.height
    x0 = own_flat % w
    y0 = own_flat // w
    best_flat = -1
    best_food = -1.0
    for dy in range(-radius, radius + 1):
        row = ((y0 + dy) % h) * w
        for dx in range(-radius, radius + 1):
            target = row + (x0 + dx) % w
            if target != own_flat and not is_empty(target):
                continue
            f = food(target)
            if f > best_food or (f == best_food and target < best_flat):
                best_food = f
                best_flat = target
    return best_flat


# ── feeding, mortality, predation ──────────────────────────────────────────

def consume_amount(food: float, max_consumption: float) -> float:
    return food if food < max_consumption else max_consumption


def survive(rng, survival_probability: float) -> bool:
    return rng.next_uniform(0.0, 1.0) < survival_probability


def predator_hunt(
    own_flat: int,
    geom: GridGeometry,
    rng,
    has_bug: Callable[[int], bool],
    is_local: Callable[[int], bool],
) -> tuple[int, bool]:
    """One predator action: scan the radius-1 Moore block (own cell included)
    in shuffled order and kill-and-move onto the first live bug; otherwise
    move to a uniformly drawn radius-1 cell.  Returns (destination, killed).

    ``is_local`` restricts both hunting and the fallback move; a fallback
    draw landing off-stripe leaves the predator in place (draw still spent).
    """
    w, h = geom.width, geom.height
    x0 = own_flat % w
    y0 = own_flat // w
    cells = [
        ((y0 + dy) % h) * w + (x0 + dx) % w
        for dy in (-1, 0, 1)
        for dx in (-1, 0, 1)
    ]
    for c in rng.shuffle(cells):
        if is_local(c) and has_bug(c):
            return c, True
    dest = cells[rng.next_int(0, 8)]
    if not is_local(dest):
        dest = own_flat
    return dest, False


# ── aggregates ─────────────────────────────────────────────────────────────

def max_bugsize(sizes) -> float:
    mx = 0.0
    for s in sizes:
        if s > mx:
            mx = s
    return mx


def histogram(sizes, bin_width: float, bin_count: int) -> list[int]:
    """counts[i] = #sizes in [i*w, (i+1)*w); the last bin absorbs overflow."""
    counts = [0] * bin_count
    top = bin_count - 1
    for s in sizes:
        i = int(s / bin_width)
        counts[i if i < top else top] += 1
    return counts


@dataclass(frozen=True)
class StatsRow:
    step: int
    bug_count: int
    min_size: float
    mean_size: float
    max_size: float
    predator_count: int
    total_food: float


def stats_from(step: int, sizes_by_id: list[float], predator_count: int,
               total_food: float) -> StatsRow:
    """Aggregate a stats row from sizes listed in ascending bug id order."""
    n = len(sizes_by_id)
    if n == 0:
        return StatsRow(step, 0, 0.0, 0.0, 0.0, predator_count, total_food)
    return StatsRow(
        step,
        n,
        min(sizes_by_id),
        math.fsum(sizes_by_id) / n,
        max(sizes_by_id),
        predator_count,
        total_food,
    )
