"""SVG figures for sweep summaries: runtime, gap intervals and slot counts vs nodes."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "svg.hashsalt": "wvne",       # stable element ids, so reruns give identical files
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.0, 3.4),
}
MARKERS = "osd^v<>px"


def _series(summary):
    out = {}
    for s in summary:
        out.setdefault((s.level, s.k), []).append(s)
    return out


def _label(level, k):
    return f"level {level}, k={'all' if k is None else k}"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def runtime_figure(summary, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, ((level, k), cells) in enumerate(sorted(_series(summary).items(), key=str)):
            pts = [(c.node_count, c.median_heuristic_ms) for c in cells if c.median_heuristic_ms is not None]
            if pts:
                x, y = zip(*pts)
                ax.plot(x, y, marker=MARKERS[i % len(MARKERS)], label=_label(level, k))
        exact = sorted({(c.node_count, c.median_exact_ms) for c in summary if c.median_exact_ms is not None})
        if exact:
            x, y = zip(*exact)
            ax.plot(x, y, "k--", marker="*", label="exact")
        ax.set_yscale("log")
        ax.set_xlabel("nodes")
        ax.set_ylabel("median runtime [ms]")
        ax.legend(fontsize=7)
        return _save(fig, path)


def gap_figure(summary, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        series = sorted(_series(summary).items(), key=str)
        width = 0.6 / max(len(series), 1)
        for i, ((level, k), cells) in enumerate(series):
            cells = [c for c in cells if c.mean_gap is not None]
            if not cells:
                continue
            x = [c.node_count + (i - (len(series) - 1) / 2) * width for c in cells]
            y = [c.mean_gap for c in cells]
            err = [[c.mean_gap - c.gap_ci_low for c in cells], [c.gap_ci_high - c.mean_gap for c in cells]]
            ax.errorbar(x, y, yerr=err, fmt=MARKERS[i % len(MARKERS)], capsize=3, label=_label(level, k))
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xlabel("nodes")
        ax.set_ylabel("gap (mean, 95% CI)")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=7)
        return _save(fig, path)


def slots_figure(summary, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, ((level, k), cells) in enumerate(sorted(_series(summary).items(), key=str)):
            pts = [(c.node_count, c.mean_heuristic_slots) for c in cells if c.mean_heuristic_slots is not None]
            if pts:
                x, y = zip(*pts)
                ax.plot(x, y, marker=MARKERS[i % len(MARKERS)], label=_label(level, k))
        exact = sorted({(c.node_count, c.mean_exact_slots) for c in summary if c.mean_exact_slots is not None})
        if exact:
            x, y = zip(*exact)
            ax.plot(x, y, "k--", marker="*", label="exact")
        ax.set_xlabel("nodes")
        ax.set_ylabel("mean used slots")
        ax.legend(fontsize=7)
        return _save(fig, path)


def write_figures(summary: Sequence, out_dir: Path, timing: bool = True) -> dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {
        "gap_figure": gap_figure(summary, out_dir / "gap_ci.svg"),
        "slots_figure": slots_figure(summary, out_dir / "slots_vs_nodes.svg"),
    }
    if timing:
        paths["runtime_figure"] = runtime_figure(summary, out_dir / "runtime_vs_nodes.svg")
    return paths
