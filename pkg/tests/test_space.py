"""Toroidal geometry, neighborhoods, stripe partitions, ghost-cell sets."""

import random

import pytest

from gridbugs import space
from gridbugs.space import (
    CellIndex,
    GeometryError,
    GridGeometry,
    PartitionError,
    ghost_cells,
    moore_neighborhood,
    naive_ghost_list,
    stripe_partition,
    von_neumann_neighborhood,
)


G200 = GridGeometry(200, 200)


# ── wrap ────────────────────────────────────────────────────────────────────

def test_wrap_examples():
    assert G200.wrap(-1, -1) == CellIndex(199, 199)
    assert G200.wrap(0, 0) == CellIndex(0, 0)
    assert G200.wrap(405, 201) == CellIndex(5, 1)


def test_flat_index_is_row_major():
    g = GridGeometry(7, 5)
    assert g.flat(3, 2) == 2 * 7 + 3
    assert g.coords(2 * 7 + 3) == CellIndex(3, 2)


# ── Moore neighborhoods ─────────────────────────────────────────────────────

def test_moore_radius4_with_center_is_81_cells():
    cells = moore_neighborhood(G200, CellIndex(10, 10), 4, include_center=True)
    assert len(cells) == 81
    assert len(set(cells)) == 81


def test_moore_radius0_is_just_the_center():
    assert moore_neighborhood(G200, CellIndex(3, 4), 0, include_center=True) == [
        CellIndex(3, 4)
    ]


def test_moore_radius1_ring_wraps_at_origin():
    cells = moore_neighborhood(G200, CellIndex(0, 0), 1, include_center=False)
    assert len(cells) == 8
    assert CellIndex(199, 199) in cells


def test_moore_order_is_row_major_offsets():
    g = GridGeometry(9, 9)
    cells = moore_neighborhood(g, CellIndex(4, 4), 1, include_center=True)
    assert cells == [
        CellIndex(3, 3), CellIndex(4, 3), CellIndex(5, 3),
        CellIndex(3, 4), CellIndex(4, 4), CellIndex(5, 4),
        CellIndex(3, 5), CellIndex(4, 5), CellIndex(5, 5),
    ]


def test_moore_rejects_self_overlapping_radius():
    with pytest.raises(GeometryError):
        moore_neighborhood(GridGeometry(8, 8), CellIndex(0, 0), 4,
                           include_center=True)


# ── von Neumann neighborhoods ───────────────────────────────────────────────

def test_von_neumann_counts():
    c = CellIndex(10, 10)
    assert von_neumann_neighborhood(G200, c, 0) == []
    assert len(von_neumann_neighborhood(G200, c, 1)) == 4
    assert len(von_neumann_neighborhood(G200, c, 2)) == 12


def test_von_neumann_matches_manhattan_enumeration():
    c = CellIndex(50, 60)
    got = set(von_neumann_neighborhood(G200, c, 2))
    want = {
        G200.wrap(50 + dx, 60 + dy)
        for dx in range(-2, 3)
        for dy in range(-2, 3)
        if 0 < abs(dx) + abs(dy) <= 2
    }
    assert got == want


# ── stripe partitions ───────────────────────────────────────────────────────

def test_even_division_200_rows_4_workers():
    pmap = stripe_partition(G200, 4, 4)
    assert [len(pmap.rows_of(r)) for r in range(4)] == [50, 50, 50, 50]


def test_remainder_rows_go_to_lowest_ranks():
    pmap = stripe_partition(G200, 3, 4)
    assert [len(pmap.rows_of(r)) for r in range(3)] == [67, 67, 66]


def test_single_worker_is_one_stripe():
    pmap = stripe_partition(G200, 1, 4)
    assert list(pmap.rows_of(0)) == list(range(200))
    assert ghost_cells(pmap, 0) == []


def test_stripes_cover_rows_disjointly():
    rnd = random.Random(0)
    for _ in range(50):
        h = rnd.randint(9, 120)
        workers = rnd.randint(1, 4)
        g = GridGeometry(10, h)
        if workers > 1 and (h // workers < 1 or h // workers + 2 < 1):
            continue
        try:
            pmap = stripe_partition(g, workers, 1)
        except PartitionError:
            continue
        seen = []
        for r in range(workers):
            rows = list(pmap.rows_of(r))
            assert rows == sorted(rows)
            seen.extend(rows)
        assert sorted(seen) == list(range(h))
        heights = [len(pmap.rows_of(r)) for r in range(workers)]
        assert max(heights) - min(heights) <= 1


def test_stripe_shorter_than_halo_is_rejected():
    with pytest.raises(PartitionError):
        stripe_partition(GridGeometry(40, 12), 4, 4)  # stripes of 3 < halo 4


def test_halo_band_wrapping_onto_own_stripe_is_rejected():
    # stripes of 5 pass the min-height check, but 5 + 2*4 > 10 rows total:
    # a worker's halo band would wrap around onto its own rows.
    with pytest.raises(PartitionError):
        stripe_partition(GridGeometry(40, 10), 2, 4)


def test_owner_lookup_agrees_with_rows():
    pmap = stripe_partition(G200, 3, 4)
    for r in range(3):
        for row in pmap.rows_of(r):
            assert pmap.owner_of_row(row) == r


# ── ghost-cell sets ─────────────────────────────────────────────────────────

def test_ghost_set_size_200x200_np4_radius4():
    pmap = stripe_partition(G200, 4, 4)
    for r in range(4):
        cells = ghost_cells(pmap, r)
        assert len(cells) == 2 * 4 * 200 == 1600
        flats = [G200.flat(c.x, c.y) for c in cells]
        assert flats == sorted(flats)
        assert len(set(flats)) == len(flats)
        assert all(pmap.owner_of_row(c.y) != r for c in cells)


def test_ghost_set_size_20x20_np2_radius1():
    g = GridGeometry(20, 20)
    pmap = stripe_partition(g, 2, 1)
    assert len(ghost_cells(pmap, 0)) == 2 * 1 * 20 == 40
    assert len(ghost_cells(pmap, 1)) == 40


# ── naive (duplicated) ghost lists ──────────────────────────────────────────

def _duplication_of(pmap, geom, worker, kind, radius, row_distance):
    """Occurrence count in the naive list of one remote cell `row_distance`
    rows below the worker's stripe."""
    rows = pmap.rows_of(worker)
    target_row = (rows[-1] + row_distance) % geom.height
    target = CellIndex(geom.width // 2, target_row)
    listing = naive_ghost_list(pmap, worker, kind, radius)
    return sum(1 for c in listing if c == target)


def test_naive_duplication_factor_moore_radius4():
    pmap = stripe_partition(G200, 4, 4)
    assert _duplication_of(pmap, G200, 1, "moore", 4, 1) == 36
    # general (r - d + 1) * (2r + 1) law across the whole halo depth
    for d in range(1, 5):
        assert _duplication_of(pmap, G200, 1, "moore", 4, d) == (4 - d + 1) * 9


def test_naive_duplication_factor_moore_radius1():
    pmap = stripe_partition(G200, 4, 1)
    assert _duplication_of(pmap, G200, 2, "moore", 1, 1) == 3


def test_naive_von_neumann_radius1_has_no_duplication():
    pmap = stripe_partition(G200, 4, 1)
    listing = naive_ghost_list(pmap, 0, "von_neumann", 1)
    assert len(listing) == len(set(listing))


def test_naive_list_deduplicates_to_the_ghost_set():
    rnd = random.Random(7)
    for _ in range(20):
        w = rnd.randint(6, 30)
        h = rnd.randint(12, 60)
        workers = rnd.randint(2, 4)
        radius = rnd.randint(1, 3)
        g = GridGeometry(w, h)
        try:
            pmap = stripe_partition(g, workers, radius)
        except PartitionError:
            continue
        for r in range(workers):
            naive = naive_ghost_list(pmap, r, "moore", radius)
            assert set(naive) == set(ghost_cells(pmap, r))
