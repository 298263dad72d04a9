"""Figures rendered next to the delimited outputs.

matplotlib is imported lazily and pinned to the Agg backend; PNG metadata
that would vary between runs (the Software chunk) is stripped so identical
runs produce identical bytes.
"""

from __future__ import annotations

from .model import StatsRow

_SAVE_KW = {"dpi": 100, "metadata": {"Software": None}}


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def population_figure(rows: list[StatsRow], path: str) -> None:
    """Bug count (and mean size on a second axis) over steps."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    steps = [r.step for r in rows]
    ax.plot(steps, [r.bug_count for r in rows], color="tab:red", label="bugs")
    ax.set_xlabel("step")
    ax.set_ylabel("bug count", color="tab:red")
    ax2 = ax.twinx()
    ax2.plot(steps, [r.mean_size for r in rows], color="tab:green",
             label="mean size")
    ax2.set_ylabel("mean size", color="tab:green")
    ax.set_title("population")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def speedup_figure(bench_rows, path: str) -> None:
    """Mean speedup vs worker count, one line per variant, plus the ideal
    diagonal."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    variants: dict[str, dict[int, float]] = {}
    for row in bench_rows:
        variants.setdefault(row.variant, {})[row.workers] = row.speedup
    all_counts: set[int] = set()
    for variant in sorted(variants):
        pts = sorted(variants[variant].items())
        all_counts.update(w for w, _ in pts)
        ax.plot([w for w, _ in pts], [s for _, s in pts],
                marker="o", label=variant)
    if all_counts:
        lo, hi = min(all_counts), max(all_counts)
        ax.plot([lo, hi], [lo, hi], linestyle=":", color="gray", label="ideal")
    ax.set_xlabel("workers")
    ax.set_ylabel("speedup")
    ax.set_title("speedup vs workers")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
