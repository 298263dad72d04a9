"""Batch command-line driver: ``run``, ``bench``, ``snapshot``, ``inspect``.

Configuration precedence, lowest to highest: built-in defaults, ``--preset``,
``--config`` file, the ``GRIDBUGS_SEED`` environment variable, explicit
flags.  The effective configuration is written next to every run's outputs.

Exit codes: 0 success, 1 configuration error, 2 runtime/protocol error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import engine, fileio, partition, report
from .config import (
    PRESETS,
    ConfigError,
    FeatureSet,
    ModelConfig,
    StopRule,
    apply_overrides,
    effective_config_text,
    parse_config_text,
    preset,
)
from .space import GeometryError, PartitionError, stripe_partition

SEED_ENV_VAR = "GRIDBUGS_SEED"

_LAYOUT_FLAG = {"cell": "cell_object", "cell_object": "cell_object",
                "field": "field"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit 1
        raise ConfigError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="gridbugs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    def common(p, workers_list=False):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--preset", help="feature-ladder preset v1..v16")
        p.add_argument("--steps", type=int,
                       help="run exactly this many steps (overrides the stop rule)")
        p.add_argument("--seed", type=int, help="RNG seed")
        if workers_list:
            p.add_argument("--workers",
                           help="comma-separated worker counts, e.g. 1,2,4")
        else:
            p.add_argument("--workers", type=int, help="worker count")
        p.add_argument("--variant", choices=("ghost", "field"),
                       help="partition runtime variant")
        p.add_argument("--layout", choices=sorted(_LAYOUT_FLAG),
                       help="memory layout (cell | field)")

    p_run = sub.add_parser("run", help="run one simulation")
    common(p_run)
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--raster-every", type=int, default=0, metavar="K",
                       help="write raster_NNNNNN.ppm every K steps")
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="speedup benchmark over worker counts")
    common(p_bench, workers_list=True)
    p_bench.add_argument("--reps", type=int, default=3,
                         help="repetitions per configuration")
    p_bench.add_argument("--out", default=".", help="output directory")
    p_bench.set_defaults(func=cmd_bench)

    p_snap = sub.add_parser("snapshot", help="write a PPM raster of a world")
    common(p_snap)
    p_snap.add_argument("--checkpoint", help="render a checkpoint instead "
                        "of a fresh world")
    p_snap.add_argument("--out", default="snapshot.ppm", help="output file")
    p_snap.set_defaults(func=cmd_snapshot)

    p_inspect = sub.add_parser(
        "inspect", help="print effective config, preset table, partition map")
    common(p_inspect)
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def _resolve_config(args, workers_is_list: bool = False) -> ModelConfig:
    overrides: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}")
        overrides = parse_config_text(text, source=args.config)

    preset_name = overrides.get("preset", args.preset)
    cfg = preset(preset_name) if preset_name else ModelConfig()
    cfg = apply_overrides(cfg, overrides)

    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            cfg = replace(cfg, seed=int(env_seed))
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}")

    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if not workers_is_list and args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.variant is not None:
        cfg = replace(cfg, variant=args.variant)
    if args.layout is not None:
        cfg = replace(cfg, layout=_LAYOUT_FLAG[args.layout])
    if args.steps is not None:
        if args.steps < 0:
            raise ConfigError(f"--steps must be >= 0, got {args.steps}")
        cfg = replace(cfg, stop=StopRule("fixed_steps", args.steps))
    return cfg.validate()


def _fresh(path: str) -> str:
    if os.path.exists(path):
        os.remove(path)
    return path


# ── run ────────────────────────────────────────────────────────────────────

def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    path = lambda name: os.path.join(outdir, name)

    with open(path("effective_config.txt"), "w") as fh:
        fh.write(effective_config_text(cfg))

    raster_every = args.raster_every

    def on_step(state, row):
        if raster_every and row.step % raster_every == 0:
            target = path(f"raster_{row.step:06d}.ppm")
            if isinstance(state, engine.WorldState):
                fileio.write_raster(state, target)
            else:
                data = fileio.render_raster_parts(
                    cfg.width, cfg.height, state.global_food_values(),
                    ((cell, size) for _, cell, size in state.collect_bugs()),
                    (cell for _, cell in state.collect_predators()),
                    cfg.food_display_max)
                with open(target, "wb") as fh:
                    fh.write(data)

    world = None
    if cfg.workers == 1:
        world = engine.init_world(cfg)
        run_report = engine.run_world(world, on_step=on_step)
        diagnostics = run_report.diagnostics
    else:
        runtime = partition.PartitionRuntime(cfg)
        run_report = runtime.run(on_step=on_step)
        diagnostics = run_report.diagnostics

    fileio.write_stats(path("stats.csv"), run_report.stats_rows)
    written = ["effective_config.txt", "stats.csv"]
    if cfg.features.histogram_output:
        hist_path = _fresh(path("histogram.csv"))
        for step_no, counts in run_report.histograms:
            fileio.write_histogram(hist_path, step_no, counts,
                                   cfg.histogram_bin_width)
        if run_report.histograms:
            written.append("histogram.csv")
    if world is not None:
        fileio.checkpoint(world, path("checkpoint.json"))
        written.append("checkpoint.json")
    report.population_figure(run_report.stats_rows, path("population.png"))
    written.append("population.png")

    last = run_report.stats_rows[-1] if run_report.stats_rows else None
    print(f"steps executed: {run_report.steps} (stop: {run_report.stop_reason})")
    if last is not None:
        print(f"final bugs: {last.bug_count}  predators: {last.predator_count}  "
              f"mean size: {last.mean_size:.6g}  total food: {last.total_food:.6g}")
    print(f"wall: {run_report.wall_seconds:.3f} s  "
          f"cpu: {run_report.cpu_seconds:.3f} s")
    for key, value in sorted(diagnostics.items()):
        print(f"{key}: {value}")
    print("wrote: " + ", ".join(os.path.join(outdir, n) for n in written))
    return 0


# ── bench ──────────────────────────────────────────────────────────────────

def _parse_worker_list(text: str | None) -> list[int]:
    if not text:
        return [1, 2, 4]
    try:
        counts = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--workers wants integers like 1,2,4; got {text!r}")
    if not counts or any(c < 1 for c in counts):
        raise ConfigError(f"--workers wants positive counts, got {text!r}")
    return counts


def cmd_bench(args) -> int:
    if args.preset is None and args.config is None:
        args.preset = "v10"  # the ladder's benchmark rung
    cfg = _resolve_config(args, workers_is_list=True)
    counts = _parse_worker_list(args.workers)
    if args.steps is not None:
        steps = args.steps
    elif cfg.stop.kind == "fixed_steps":
        steps = int(cfg.stop.value)
    else:
        steps = 500
    variants = (args.variant,) if args.variant else (cfg.variant,)

    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "effective_config.txt"), "w") as fh:
        fh.write(effective_config_text(cfg))

    bench = partition.speedup_bench(cfg, counts, args.reps, steps,
                                    variants=variants)
    fileio.write_bench(os.path.join(outdir, "bench.csv"), bench.rows)
    report.speedup_figure(bench.rows, os.path.join(outdir, "speedup.png"))

    for cv in bench.cvs:
        print(f"{cv.variant} workers={cv.workers}: stddev/mean = {cv.cv:.4f}")
    for flag in bench.flags:
        print(f"warning: {flag.variant} workers={flag.workers} timing scatter "
              f"{flag.cv:.1%} exceeds 10% of the mean", file=sys.stderr)
    print(f"wrote: {os.path.join(outdir, 'bench.csv')}, "
          f"{os.path.join(outdir, 'speedup.png')}")
    return 0


# ── snapshot ───────────────────────────────────────────────────────────────

def cmd_snapshot(args) -> int:
    if args.checkpoint:
        world = fileio.restore(args.checkpoint)
        if args.steps:
            for _ in range(args.steps):
                engine.step(world)
    else:
        cfg = _resolve_config(args)
        world = engine.init_world(cfg)
        if args.steps:
            for _ in range(args.steps):
                engine.step(world)
    fileio.write_raster(world, args.out)
    print(f"wrote: {args.out}")
    return 0


# ── inspect ────────────────────────────────────────────────────────────────

_FEATURE_COLUMNS = [f.name for f in FeatureSet.__dataclass_fields__.values()]


def cmd_inspect(args) -> int:
    cfg = _resolve_config(args)
    print("# effective configuration")
    print(effective_config_text(cfg), end="")
    print()
    print("# presets")
    header = ["preset"] + _FEATURE_COLUMNS + ["scheduler", "movement", "stop"]
    print("  ".join(header))
    for name, pc in PRESETS.items():
        row = [name]
        for col in _FEATURE_COLUMNS:
            row.append("on" if getattr(pc.features, col) else "-")
        stop = f"{pc.stop.kind}:{int(pc.stop.value) if pc.stop.kind == 'fixed_steps' else pc.stop.value}"
        row.extend([pc.scheduler, pc.movement_rule, stop])
        print("  ".join(row))
    print()
    pmap = stripe_partition(
        engine.GridGeometry(cfg.width, cfg.height), cfg.workers,
        cfg.halo_radius)
    heights = ",".join(str(c) for c in pmap.row_counts)
    print(f"# partition map (workers={cfg.workers})")
    print(f"stripe heights: {heights}")
    for rank in range(pmap.worker_count):
        rows = pmap.rows_of(rank)
        print(f"rank {rank}: rows {rows.start}..{rows.stop - 1} "
              f"({pmap.row_counts[rank]} rows)")
    return 0


# ── entry point ────────────────────────────────────────────────────────────

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        return args.func(args)
    except (ConfigError, GeometryError, PartitionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (fileio.CheckpointError, partition.ProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
