"""Toroidal grid geometry, neighborhoods, and stripe partitions.

Cells are addressed either as ``(x, y)`` pairs or as row-major flat indices
``y * width + x``.  Both axes wrap (mathematical modulo, so negative
coordinates wrap correctly).  Partitions slice the grid into horizontal
stripes of near-equal height arranged on a ring; each stripe sees its
neighbours' border rows through a halo of configurable radius.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class GeometryError(ValueError):
    pass


class PartitionError(ValueError):
    pass


class CellIndex(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class GridGeometry:
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise GeometryError(
                f"grid dimensions must be positive, got {self.width}x{self.height}"
            )

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def wrap(self, x: int, y: int) -> CellIndex:
        return CellIndex(x % self.width, y % self.height)

    def flat(self, x: int, y: int) -> int:
        return (y % self.height) * self.width + (x % self.width)

    def coords(self, flat: int) -> CellIndex:
        return CellIndex(flat % self.width, flat // self.width)


def _check_radius(geom: GridGeometry, radius: int) -> None:
    if radius < 0:
        raise GeometryError(f"radius must be >= 0, got {radius}")
    if 2 * radius + 1 > min(geom.width, geom.height):
        raise GeometryError(
            f"neighborhood diameter {2 * radius + 1} exceeds grid "
            f"{geom.width}x{geom.height}; cells would alias"
        )


def moore_neighborhood(
    geom: GridGeometry, center: CellIndex, radius: int, include_center: bool = False
) -> list[CellIndex]:
    """Chebyshev-ball neighborhood in row-major offset order (dy, then dx)."""
    _check_radius(geom, radius)
    cx, cy = center
    out = []
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dx == 0 and dy == 0 and not include_center:
                continue
            out.append(geom.wrap(cx + dx, cy + dy))
    return out


def von_neumann_neighborhood(
    geom: GridGeometry, center: CellIndex, radius: int
) -> list[CellIndex]:
    """Manhattan-ball neighborhood (|dx|+|dy| <= r), center excluded."""
    _check_radius(geom, radius)
    cx, cy = center
    out = []
    for dy in range(-radius, radius + 1):
        span = radius - abs(dy)
        for dx in range(-span, span + 1):
            if dx == 0 and dy == 0:
                continue
            out.append(geom.wrap(cx + dx, cy + dy))
    return out


# ── stripe partition ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class PartitionMap:
    geometry: GridGeometry
    worker_count: int
    row_starts: tuple[int, ...]
    row_counts: tuple[int, ...]
    halo_radius: int

    def rows_of(self, worker: int) -> range:
        return range(self.row_starts[worker], self.row_starts[worker] + self.row_counts[worker])

    def owner_of_row(self, row: int) -> int:
        row %= self.geometry.height
        for w in range(self.worker_count):
            if self.row_starts[w] <= row < self.row_starts[w] + self.row_counts[w]:
                return w
        raise PartitionError(f"row {row} not covered by any stripe")

    def owner_of_flat(self, flat: int) -> int:
        return self.owner_of_row(flat // self.geometry.width)


def stripe_partition(
    geom: GridGeometry, worker_count: int, halo_radius: int = 4
) -> PartitionMap:
    """Split rows into ``worker_count`` stripes; remainder rows go to the
    lowest ranks, so stripe heights differ by at most one."""
    if worker_count < 1:
        raise PartitionError(f"worker_count must be >= 1, got {worker_count}")
    if worker_count > geom.height:
        raise PartitionError(
            f"cannot cut {geom.height} rows into {worker_count} stripes"
        )
    if halo_radius < 0:
        raise PartitionError(f"halo_radius must be >= 0, got {halo_radius}")
    base, rem = divmod(geom.height, worker_count)
    starts, counts = [], []
    row = 0
    for rank in range(worker_count):
        h = base + (1 if rank < rem else 0)
        starts.append(row)
        counts.append(h)
        row += h
    if worker_count > 1 and min(counts) < halo_radius:
        raise PartitionError(
            f"stripe height {min(counts)} is below the halo radius "
            f"{halo_radius}; bugs could jump past a neighbouring stripe"
        )
    if worker_count > 1 and max(counts) + 2 * halo_radius > geom.height:
        raise PartitionError(
            f"stripe height {max(counts)} plus two halos of {halo_radius} "
            f"exceeds the {geom.height}-row grid; a slab would wrap onto itself"
        )
    return PartitionMap(geom, worker_count, tuple(starts), tuple(counts), halo_radius)


def halo_rows(pmap: PartitionMap, worker: int) -> list[int]:
    """Rows of other stripes visible to ``worker`` (deduplicated, sorted)."""
    geom = pmap.geometry
    local = set(pmap.rows_of(worker))
    rows = set()
    start = pmap.row_starts[worker]
    end = start + pmap.row_counts[worker]
    for d in range(1, pmap.halo_radius + 1):
        rows.add((start - d) % geom.height)
        rows.add((end - 1 + d) % geom.height)
    return sorted(rows - local)


def ghost_cells(pmap: PartitionMap, worker: int) -> list[CellIndex]:
    """Non-local cells ``worker`` must see, sorted by flat index, no dupes."""
    geom = pmap.geometry
    out = []
    for row in halo_rows(pmap, worker):
        for x in range(geom.width):
            out.append(CellIndex(x, row))
    return out


def naive_ghost_list(
    pmap: PartitionMap, worker: int, kind: str, radius: int
) -> list[CellIndex]:
    """Ghost cells the naive way: walk every local cell's neighborhood and
    keep each remote neighbour, duplicates and all.  Exists to measure how
    much the deduplicated exchange saves; never used for transfers."""
    if kind == "moore":
        neigh = lambda c: moore_neighborhood(pmap.geometry, c, radius)
    elif kind == "von_neumann":
        neigh = lambda c: von_neumann_neighborhood(pmap.geometry, c, radius)
    else:
        raise GeometryError(f"unknown neighborhood kind {kind!r}")
    local_rows = set(pmap.rows_of(worker))
    out = []
    for row in pmap.rows_of(worker):
        for x in range(pmap.geometry.width):
            for cell in neigh(CellIndex(x, row)):
                if cell.y not in local_rows:
                    out.append(cell)
    return out
