"""In-process stripe-partitioned runtime.

The grid is cut into horizontal stripes, one worker per stripe.  Workers
never touch each other's state directly: everything crosses through explicit
messages on per-pair FIFO queues, driven in lockstep by a single-threaded
round-robin loop (rank order), which keeps every run bit-reproducible.

Per step, in order:

A. food production on the local stripe (plus halo replication of the
   production increments in the field variant, straight from the
   counter-based food stream);
B. ghost exchange — the ghost variant ships food *and* an occupied flag for
   every halo cell each step; the field variant ships nothing here unless
   ``exact_halo_food`` asks for per-step food rows;
C. local movement in scheduler order (first-come-first-served); a move onto
   a remote row becomes an emigration request and the bug stays put, still
   occupying its cell, until the owner decides;
D. emigration requests delivered to destination owners;
E. arbitration: requests sorted by (destination, origin rank, bug id); the
   first per cell is approved iff the cell is still empty after local moves;
F. decisions travel back, then approved bugs travel as transfers (two
   delivery rounds); origins remove, owners insert;
G. eat + grow, ascending bug id (migrants eat at their new cell);
H. mortality / reproduction, offspring clipped to the local stripe;
I. predators, local prey only, never migrating;
J. stats reduction over all workers.

With one worker there are no remote rows, so C+G collapse to exactly the
sequential engine's move-then-eat behaviour and every stream sees the same
draws: a one-worker run is bit-identical to the sequential engine.
"""

from __future__ import annotations

import math
import statistics
import struct
import time
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import engine, model
from .config import ModelConfig, StopRule
from .engine import RunReport, build_move_table, digest_state, feed_bug, scheduled_ids
from .model import GHOST_OCCUPIED, AgentArena, BugRecord, PredatorRecord, StatsRow
from .space import GridGeometry, PartitionMap, halo_rows, stripe_partition

_WORKER_ID_SHIFT = 48  # offspring ids: (rank << shift) | counter

STARTUP_STEP = -1


class ProtocolError(Exception):
    """A worker received a message that violates the migration protocol."""


# ── messages ───────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EmigrationRequest:
    request_id: tuple[int, int]  # (origin rank, per-step sequence number)
    origin_rank: int
    bug_id: int
    size: float
    dest_flat: int  # global


@dataclass(frozen=True)
class GhostUpdate:
    sender: int
    step: int
    cells: list  # (global flat, food, occupied flag or None)


@dataclass(frozen=True)
class Emigrations:
    sender: int
    step: int
    requests: list


@dataclass(frozen=True)
class Decisions:
    sender: int
    step: int
    verdicts: list  # (request_id, approved)


@dataclass(frozen=True)
class BugTransfers:
    sender: int
    step: int
    bugs: list  # (request_id, bug_id, size, global dest flat)


class _Transport:
    """Per-ordered-pair FIFO queues with kind/step/sender validation."""

    def __init__(self) -> None:
        self.queues: dict[tuple[int, int], deque] = {}
        self.messages_sent = 0

    def send(self, src: int, dst: int, msg) -> None:
        self.queues.setdefault((src, dst), deque()).append(msg)
        self.messages_sent += 1

    def recv(self, src: int, dst: int, kind, step: int):
        q = self.queues.get((src, dst))
        if not q:
            raise ProtocolError(
                f"worker {dst} expected {kind.__name__} from {src}, queue empty")
        msg = q.popleft()
        if not isinstance(msg, kind):
            raise ProtocolError(
                f"worker {dst} expected {kind.__name__} from {src}, "
                f"got {type(msg).__name__}")
        if msg.sender != src or msg.step != step:
            raise ProtocolError(
                f"worker {dst}: stale message from {msg.sender} "
                f"(step {msg.step}, expected {step} from {src})")
        return msg


# ── workers ────────────────────────────────────────────────────────────────

class StripeWorker:
    """One stripe plus its halo band, stored as a slab: the rows
    ``start - halo .. start + count + halo`` (wrapped) in band order, so the
    stripe sits contiguously in the middle and all bookkeeping stays
    row-major."""

    def __init__(self, rank: int, config: ModelConfig, pmap: PartitionMap,
                 transport: _Transport) -> None:
        geom = pmap.geometry
        self.rank = rank
        self.config = config
        self.pmap = pmap
        self.transport = transport
        self.geometry = geom
        self.width = geom.width
        self.start = pmap.row_starts[rank]
        self.count = pmap.row_counts[rank]
        depth = pmap.halo_radius if pmap.worker_count > 1 else 0
        self.halo_depth = depth
        h = geom.height
        self.slab_rows = [(self.start - depth + k) % h
                          for k in range(self.count + 2 * depth)]
        rowmap = [-1] * h
        for i, g in enumerate(self.slab_rows):
            rowmap[g] = i
        self.rowmap = rowmap
        self.lo = depth * geom.width  # slab flat where the stripe starts
        self.hi = (depth + self.count) * geom.width
        gids = (np.asarray(self.slab_rows, dtype=np.int64)[:, None] * geom.width
                + np.arange(geom.width, dtype=np.int64)[None, :]).ravel()
        self.gids = gids.tolist()
        self.cells = engine.make_cells(
            config.layout, GridGeometry(geom.width, len(self.slab_rows)),
            gids.astype(np.uint64))
        self.bugs = AgentArena()
        self.predators = AgentArena()
        self.streams = engine.derive_streams(config.seed, rank)
        self.id_counter = config.initial_bug_count
        self.retry_cap_hits = 0
        self.ghost_cells_sent = 0
        self.migration_requests = 0
        self.migration_denials = 0
        self.neighbors = sorted(
            {pmap.owner_of_row(r) for r in halo_rows(pmap, rank)})
        # rows I own that each neighbour needs as halo, deduplicated
        self.send_rows = {
            n: sorted(r for r in halo_rows(pmap, n)
                      if pmap.owner_of_row(r) == rank)
            for n in self.neighbors
        }
        self._move_table = None
        self._id_table = None
        self._pending: dict = {}
        self._outbox: dict = {}
        self._verdicts: dict = {}
        self._expected: dict = {}

    # — coordinate translation —

    def to_local(self, gflat: int) -> int:
        row = self.rowmap[gflat // self.width]
        if row < 0:
            raise ProtocolError(
                f"worker {self.rank}: global cell {gflat} outside its slab")
        return row * self.width + gflat % self.width

    def to_global(self, lflat: int) -> int:
        return self.gids[lflat]

    def owns_flat(self, gflat: int) -> bool:
        return self.start <= gflat // self.width < self.start + self.count

    def _is_empty_global(self, gflat: int) -> bool:
        row = self.rowmap[gflat // self.width]
        return self.cells.is_empty(row * self.width + gflat % self.width)

    def _has_bug_global(self, gflat: int) -> bool:
        row = self.rowmap[gflat // self.width]
        return self.cells.has_bug(row * self.width + gflat % self.width)

    def take_id(self) -> int:
        nid = (self.rank << _WORKER_ID_SHIFT) | self.id_counter
        self.id_counter += 1
        return nid

    def resolve_spawn(self, gflat: int):
        if not self.owns_flat(gflat):
            return None  # off-stripe placement draw: attempt fails
        local = self.to_local(gflat)
        return local if self.cells.is_empty(local) else None

    # — phase A: production —

    def produce(self, step: int) -> None:
        if not self.config.features.food:
            return
        cfg = self.config
        habitat = cfg.food_mode == "habitat"
        if habitat:
            self.cells.produce_habitat(self.lo, self.hi)
        else:
            self.cells.produce_stochastic(
                step, cfg.seed, cfg.max_food_production, self.lo, self.hi)
        # Field variant: replay the same production increments on the halo
        # band instead of shipping food rows.  Halo food then misses remote
        # grazing — the documented approximation this variant trades on.
        if (cfg.variant == "field" and not cfg.exact_halo_food
                and self.halo_depth > 0):
            if habitat:
                self.cells.produce_habitat(0, self.lo)
                self.cells.produce_habitat(self.hi, None)
            else:
                self.cells.produce_stochastic(
                    step, cfg.seed, cfg.max_food_production, 0, self.lo)
                self.cells.produce_stochastic(
                    step, cfg.seed, cfg.max_food_production, self.hi, None)

    # — phase B: ghost exchange —

    def send_ghosts(self, step: int, with_occupancy: bool) -> None:
        w = self.width
        for n in self.neighbors:
            payload = []
            for row in self.send_rows[n]:
                l0 = self.rowmap[row] * w
                g0 = row * w
                foods = self.cells.food_values(l0, l0 + w)
                if with_occupancy:
                    for x in range(w):
                        payload.append(
                            (g0 + x, foods[x], not self.cells.is_empty(l0 + x)))
                else:
                    for x in range(w):
                        payload.append((g0 + x, foods[x], None))
            self.ghost_cells_sent += len(payload)
            self.transport.send(self.rank, n, GhostUpdate(self.rank, step, payload))

    def recv_ghosts(self, step: int, with_occupancy: bool) -> None:
        for n in self.neighbors:
            msg = self.transport.recv(n, self.rank, GhostUpdate, step)
            for gflat, food, occupied in msg.cells:
                local = self.to_local(gflat)
                if self.owns_flat(gflat):
                    raise ProtocolError(
                        f"worker {self.rank}: ghost update for its own cell {gflat}")
                self.cells.set_food(local, food)
                if with_occupancy:
                    if occupied:
                        self.cells.set_occupant(local, GHOST_OCCUPIED)
                    else:
                        self.cells.clear_occupant(local)

    # — phase C: local moves —

    def local_moves(self, step: int) -> None:
        cfg = self.config
        self._pending = {}
        self._outbox = {n: [] for n in self.neighbors}
        seq = 0
        bugs = self.bugs
        cells = self.cells
        order = scheduled_ids(bugs, cfg.scheduler, self.streams["scheduler"])
        movement = self.streams["movement"]
        best = cfg.movement_rule == "best_food"
        if best and self._move_table is None:
            stripe_rows = np.arange(self.start, self.start + self.count)
            self._move_table = build_move_table(
                self.geometry, cfg.move_radius, rows=stripe_rows,
                rowmap=np.asarray(self.rowmap))
            self._id_table = build_move_table(
                self.geometry, cfg.move_radius, rows=stripe_rows)
        radius = cfg.move_radius
        w = self.width
        start, count = self.start, self.count
        rowmap = self.rowmap
        for bid in order:
            handle = bugs.handle_of(bid)
            rec = bugs.get(handle)
            own_local = rec.cell
            own_global = self.gids[own_local]
            if best:
                dest_global = cells.best_food_move(
                    own_local - self.lo, self._move_table, self._id_table)
            else:
                dest_global, capped = model.select_move_random_retry(
                    own_global, self.geometry, self._is_empty_global,
                    movement, radius)
                if capped:
                    self.retry_cap_hits += 1
            if dest_global == own_global:
                continue
            gy = dest_global // w
            if start <= gy < start + count:
                dest_local = rowmap[gy] * w + dest_global % w
                cells.clear_occupant(own_local)
                cells.set_occupant(dest_local, handle)
                rec.cell = dest_local
            else:
                owner = self.pmap.owner_of_row(gy)
                if owner not in self._outbox:
                    raise ProtocolError(
                        f"worker {self.rank}: bug {bid} tried to jump past "
                        f"the halo to worker {owner}")
                seq += 1
                rid = (self.rank, seq)
                self._outbox[owner].append(
                    EmigrationRequest(rid, self.rank, bid, rec.size, dest_global))
                self._pending[rid] = (handle, bid, dest_global)
                self.migration_requests += 1

    # — phases D/E/F: migration protocol —

    def send_emigrations(self, step: int) -> None:
        for n in self.neighbors:
            self.transport.send(
                self.rank, n, Emigrations(self.rank, step, self._outbox[n]))

    def recv_emigrations(self, step: int) -> None:
        self._inbound = []
        for n in self.neighbors:
            msg = self.transport.recv(n, self.rank, Emigrations, step)
            for req in msg.requests:
                if req.origin_rank != n:
                    raise ProtocolError(
                        f"worker {self.rank}: request {req.request_id} claims "
                        f"origin {req.origin_rank} but arrived from {n}")
                if not self.owns_flat(req.dest_flat):
                    raise ProtocolError(
                        f"worker {self.rank}: request {req.request_id} targets "
                        f"cell {req.dest_flat} it does not own")
                self._inbound.append(req)

    def arbitrate(self, step: int, trace: list | None) -> None:
        ordered = sorted(
            self._inbound,
            key=lambda r: (r.dest_flat, r.origin_rank, r.bug_id))
        self._verdicts = {n: [] for n in self.neighbors}
        self._expected = {}
        taken: set[int] = set()
        for req in ordered:
            local = self.to_local(req.dest_flat)
            empty = self.cells.is_empty(local)
            approved = empty and req.dest_flat not in taken
            if approved:
                taken.add(req.dest_flat)
                self._expected[req.request_id] = local
            else:
                self.migration_denials += 1
            self._verdicts[req.origin_rank].append((req.request_id, approved))
            if trace is not None:
                trace.append({
                    "step": step, "owner": self.rank,
                    "request_id": req.request_id, "origin": req.origin_rank,
                    "bug_id": req.bug_id, "dest_flat": req.dest_flat,
                    "cell_empty": bool(empty), "approved": bool(approved),
                })

    def send_decisions(self, step: int) -> None:
        for n in self.neighbors:
            self.transport.send(
                self.rank, n, Decisions(self.rank, step, self._verdicts[n]))

    def recv_decisions_send_transfers(self, step: int) -> None:
        transfers = {n: [] for n in self.neighbors}
        for n in self.neighbors:
            msg = self.transport.recv(n, self.rank, Decisions, step)
            for rid, approved in msg.verdicts:
                entry = self._pending.pop(rid, None)
                if entry is None:
                    raise ProtocolError(
                        f"worker {self.rank}: decision for unknown request {rid}")
                handle, bid, dest_global = entry
                if approved:
                    rec = self.bugs.get(handle)
                    transfers[n].append((rid, bid, rec.size, dest_global))
                    self.cells.clear_occupant(rec.cell)
                    self.bugs.remove(handle, bid)
        if self._pending:
            missing = sorted(self._pending)
            raise ProtocolError(
                f"worker {self.rank}: requests never answered: {missing}")
        for n in self.neighbors:
            self.transport.send(
                self.rank, n, BugTransfers(self.rank, step, transfers[n]))

    def recv_transfers(self, step: int) -> None:
        for n in self.neighbors:
            msg = self.transport.recv(n, self.rank, BugTransfers, step)
            for rid, bid, size, dest_global in msg.bugs:
                local = self._expected.pop(rid, None)
                if local is None:
                    raise ProtocolError(
                        f"worker {self.rank}: transfer {rid} was never approved")
                if not self.cells.is_empty(local):
                    raise ProtocolError(
                        f"worker {self.rank}: approved cell {dest_global} "
                        f"occupied before transfer {rid} landed")
                handle = self.bugs.alloc(bid, BugRecord(bid, local, size))
                self.cells.set_occupant(local, handle)
        if self._expected:
            missing = sorted(self._expected)
            raise ProtocolError(
                f"worker {self.rank}: approved immigrants never arrived: {missing}")

    # — phases G/H/I —

    def feed(self, step: int) -> None:
        if not self.config.features.growth:
            return
        food_on = self.config.features.food
        maxc = self.config.max_consumption
        bugs = self.bugs
        cells = self.cells
        for bid in bugs.ids_sorted():
            feed_bug(cells, bugs.get(bugs.handle_of(bid)), food_on, maxc)

    def mortality(self, step: int) -> None:
        engine.mortality_reproduction_phase(
            self.bugs, self.cells, self.geometry, self.config,
            self.streams["mortality"], self.streams["reproduction"],
            self.take_id, self.resolve_spawn, self.to_global)

    def hunt(self, step: int) -> None:
        engine.predator_phase(
            self.predators, self.bugs, self.cells, self.geometry,
            self.streams["predators"], self._has_bug_global,
            self.owns_flat, self.to_global, self.to_local)


# ── runtime ────────────────────────────────────────────────────────────────

class PartitionRuntime:
    """Drives all stripe workers in-process, phase by phase, rank order."""

    def __init__(self, config: ModelConfig, trace: bool = False) -> None:
        config = config.validate()
        self.config = config
        seed_world = engine.init_world(config)
        geom = seed_world.geometry
        self.geometry = geom
        self.pmap = stripe_partition(geom, config.workers, config.halo_radius)
        self.transport = _Transport()
        self.workers = [
            StripeWorker(rank, config, self.pmap, self.transport)
            for rank in range(config.workers)
        ]
        for rec in seed_world.bugs.records_by_id():
            w = self.workers[self.pmap.owner_of_flat(rec.cell)]
            local = w.to_local(rec.cell)
            handle = w.bugs.alloc(rec.bug_id, BugRecord(rec.bug_id, local, rec.size))
            w.cells.set_occupant(local, handle)
        for rec in seed_world.predators.records_by_id():
            w = self.workers[self.pmap.owner_of_flat(rec.cell)]
            w.predators.alloc(
                rec.pred_id, PredatorRecord(rec.pred_id, w.to_local(rec.cell)))
        if config.food_mode == "habitat":
            production = seed_world.cells.production_values()
            for w in self.workers:
                w.cells.set_production_rates([production[g] for g in w.gids])
        self.step_count = 0
        self.trace_log: list | None = [] if trace else None
        self._last_sizes: list[float] = []
        self.ghost_cells_startup = 0
        self._ghost_cells_after_startup = 0
        # startup neighbour preparation: one full exchange in both variants
        # (the field variant only ever ships food here)
        if config.workers > 1:
            with_occ = config.variant == "ghost"
            for w in self.workers:
                w.send_ghosts(STARTUP_STEP, with_occ)
            for w in self.workers:
                w.recv_ghosts(STARTUP_STEP, with_occ)
            self.ghost_cells_startup = sum(w.ghost_cells_sent for w in self.workers)

    # — stepping —

    def _exchange_per_step(self) -> bool:
        cfg = self.config
        if cfg.workers <= 1:
            return False
        return cfg.variant == "ghost" or cfg.exact_halo_food

    def step(self) -> StatsRow:
        s = self.step_count
        cfg = self.config
        workers = self.workers
        for w in workers:
            w.produce(s)
        if self._exchange_per_step():
            with_occ = cfg.variant == "ghost"
            for w in workers:
                w.send_ghosts(s, with_occ)
            for w in workers:
                w.recv_ghosts(s, with_occ)
        for w in workers:
            w.local_moves(s)
        for w in workers:
            w.send_emigrations(s)
        for w in workers:
            w.recv_emigrations(s)
        for w in workers:
            w.arbitrate(s, self.trace_log)
        for w in workers:
            w.send_decisions(s)
        for w in workers:
            w.recv_decisions_send_transfers(s)
        for w in workers:
            w.recv_transfers(s)
        for w in workers:
            w.feed(s)
        if cfg.features.mortality_reproduction:
            for w in workers:
                w.mortality(s)
        if cfg.features.predators:
            for w in workers:
                w.hunt(s)
        self.step_count = s + 1
        return self._stats()

    def _stats(self) -> StatsRow:
        pairs = []
        for w in self.workers:
            for rec in w.bugs.records_by_id():
                pairs.append((rec.bug_id, rec.size))
        pairs.sort()
        sizes = [size for _, size in pairs]
        total_food = math.fsum(
            w.cells.food_fsum(w.lo, w.hi) for w in self.workers)
        predator_count = sum(len(w.predators) for w in self.workers)
        self._last_sizes = sizes
        return model.stats_from(self.step_count, sizes, predator_count, total_food)

    # — running —

    def _stop_reached(self, last: StatsRow | None) -> str | None:
        rule = self.config.stop
        if rule.kind == "fixed_steps":
            return "fixed_steps" if self.step_count >= rule.value else None
        if last is not None:
            mx = last.max_size
        else:
            mx = model.max_bugsize(
                rec.size for w in self.workers for rec in w.bugs.records_by_id())
        return "max_size_reached" if mx >= rule.value else None

    def run(self, on_step=None) -> RunReport:
        rows: list[StatsRow] = []
        hists: list[tuple[int, list[int]]] = []
        want_hist = self.config.features.histogram_output
        wall0 = time.perf_counter()
        cpu0 = time.process_time()
        last: StatsRow | None = None
        while True:
            reason = self._stop_reached(last)
            if reason is not None:
                break
            last = self.step()
            rows.append(last)
            if want_hist:
                hists.append((last.step, model.histogram(
                    self._last_sizes, self.config.histogram_bin_width,
                    self.config.histogram_bins)))
            if on_step is not None:
                on_step(self, last)
        self._ghost_cells_after_startup = (
            sum(w.ghost_cells_sent for w in self.workers)
            - self.ghost_cells_startup)
        return RunReport(
            steps=len(rows),
            stop_reason=reason,
            wall_seconds=time.perf_counter() - wall0,
            cpu_seconds=time.process_time() - cpu0,
            stats_rows=rows,
            histograms=hists,
            diagnostics=self.diagnostics(len(rows)),
            final_digest=self.global_digest(),
        )

    # — inspection —

    def bug_count(self) -> int:
        return sum(len(w.bugs) for w in self.workers)

    def collect_bugs(self) -> list[tuple[int, int, float]]:
        return sorted(
            (rec.bug_id, w.to_global(rec.cell), rec.size)
            for w in self.workers for rec in w.bugs.records_by_id())

    def collect_predators(self) -> list[tuple[int, int]]:
        return sorted(
            (rec.pred_id, w.to_global(rec.cell))
            for w in self.workers for rec in w.predators.records_by_id())

    def global_food_values(self) -> list[float]:
        values = [0.0] * self.geometry.n_cells
        width = self.geometry.width
        for w in self.workers:
            stripe = w.cells.food_values(w.lo, w.hi)
            d0 = w.start * width
            values[d0:d0 + len(stripe)] = stripe
        return values

    def global_digest(self) -> int:
        food = self.global_food_values()
        return digest_state(
            self.step_count,
            self.collect_bugs(),
            self.collect_predators(),
            struct_pack_doubles(food),
        )

    def audit(self) -> list[str]:
        violations = []
        seen_ids: set[int] = set()
        for w in self.workers:
            violations.extend(
                engine.audit_occupancy(w.cells, w.bugs, where=f"worker {w.rank}: "))
            for rec in w.bugs.records_by_id():
                if rec.bug_id in seen_ids:
                    violations.append(
                        f"bug {rec.bug_id} present on more than one worker")
                seen_ids.add(rec.bug_id)
                if not w.owns_flat(w.to_global(rec.cell)):
                    violations.append(
                        f"worker {w.rank}: bug {rec.bug_id} sits on a row "
                        f"it does not own")
            for rec in w.predators.records_by_id():
                if not w.owns_flat(w.to_global(rec.cell)):
                    violations.append(
                        f"worker {w.rank}: predator {rec.pred_id} off its stripe")
        return violations

    def diagnostics(self, steps: int) -> dict:
        sent_total = sum(w.ghost_cells_sent for w in self.workers)
        after = sent_total - self.ghost_cells_startup
        return {
            "workers": self.config.workers,
            "variant": self.config.variant,
            "ghost_cells_startup": self.ghost_cells_startup,
            "ghost_cells_total": sent_total,
            "ghost_cells_per_step": (after // steps) if steps else 0,
            "messages_sent": self.transport.messages_sent,
            "migration_requests": sum(w.migration_requests for w in self.workers),
            "migration_denials": sum(w.migration_denials for w in self.workers),
            "retry_cap_hits": sum(w.retry_cap_hits for w in self.workers),
        }


def struct_pack_doubles(values: list[float]) -> bytes:
    return struct.pack(f"<{len(values)}d", *values)


# ── benchmarking ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BenchRow:
    variant: str
    workers: int
    repetition: int
    seconds: float
    speedup: float
    ghost_cells_per_step: int


@dataclass(frozen=True)
class BenchFlag:
    variant: str
    workers: int
    cv: float  # stddev / mean of the repetition times


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    cvs: list[BenchFlag] = field(default_factory=list)   # every configuration
    flags: list[BenchFlag] = field(default_factory=list)  # cv > 0.10 only


VARIANT_LAYOUTS = {"ghost": "cell_object", "field": "field"}


def speedup_bench(config: ModelConfig, worker_counts, repetitions: int,
                  steps: int, variants=("ghost", "field")) -> BenchReport:
    """Time both runtime variants over the worker counts.  Speedup is the
    mean time at the smallest worker count divided by the mean at each count
    (so the baseline rows carry exactly 1.0); repetition scatter above 10%
    of the mean is flagged rather than hidden."""
    report = BenchReport()
    counts = sorted(set(worker_counts))
    if not counts:
        return report
    for variant in variants:
        baseline_mean = None
        for workers in counts:
            cfg = replace(
                config, workers=workers, variant=variant,
                layout=VARIANT_LAYOUTS[variant],
                stop=StopRule("fixed_steps", steps))
            seconds = []
            ghost_rate = 0
            for _rep in range(repetitions):
                runtime = PartitionRuntime(cfg)
                t0 = time.perf_counter()
                runtime.run()
                seconds.append(time.perf_counter() - t0)
                ghost_rate = runtime.diagnostics(steps)["ghost_cells_per_step"]
            mean = math.fsum(seconds) / len(seconds)
            if baseline_mean is None:
                baseline_mean = mean
            speedup = baseline_mean / mean
            for rep, sec in enumerate(seconds):
                report.rows.append(
                    BenchRow(variant, workers, rep, sec, speedup, ghost_rate))
            if len(seconds) > 1 and mean > 0:
                cv = statistics.stdev(seconds) / mean
                report.cvs.append(BenchFlag(variant, workers, cv))
                if cv > 0.10:
                    report.flags.append(BenchFlag(variant, workers, cv))
    return report
