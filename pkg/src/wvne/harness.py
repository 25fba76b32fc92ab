"""Seeded experiment sweeps: heuristic vs exact over generated rooms.

A plan names node counts, lookahead levels, neighbour limits and seeds.  Every
``(node_count, seed)`` pair is one unit of work: the instance is generated
once, the exact optimum (when the instance is small enough) is computed once,
and each ``(level, k)`` heuristic variant runs against it.  Units may run in a
process pool; records are always returned in plan order.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .exact import BudgetExhausted, ExactConfig, Infeasible, solve_exact
from .heuristic import HeuristicParams, parse_k, solve_heuristic
from .model import objective
from .scenario import DEFAULT_NOISE_FLOOR, DEFAULT_SINR_THRESHOLD, ScenarioConfig, generate_instance
from .validator import validate

STATUSES = ("ok", "infeasible", "budget", "exact_skipped", "invalid")
CSV_COLUMNS = (
    "node_count", "level", "k", "seed", "heuristic_slots", "exact_slots", "gap",
    "heuristic_runtime_ms", "exact_runtime_ms", "status",
)
TIMING_COLUMNS = ("heuristic_runtime_ms", "exact_runtime_ms")
Z95 = 1.959963984540054


def gap(heur_slots: int, opt_slots: int) -> Optional[float]:
    """Relative excess of the heuristic over the optimum; None when the optimum is 0."""
    if opt_slots == 0:
        return None
    return (heur_slots - opt_slots) / opt_slots


def k_label(k: Optional[int]) -> str:
    return "all" if k is None else str(k)


@dataclass(frozen=True)
class Plan:
    node_counts: tuple
    levels: tuple = (1,)
    ks: tuple = (None,)
    seeds: tuple = tuple(range(20))
    noise_floor: float = DEFAULT_NOISE_FLOOR
    sinr_threshold: float = DEFAULT_SINR_THRESHOLD
    room_side: float = 25.0
    block_weight: float = 1.0
    max_slots: Optional[int] = None
    exact_cutoff: int = 4
    exact_node_limit: int = 5_000_000
    max_path_hops: Optional[int] = None
    backtrack_budget: Optional[int] = 10_000
    mode: str = "relaxed"

    @classmethod
    def from_dict(cls, d: dict) -> "Plan":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown plan keys: {sorted(extra)}")
        d = dict(d)
        seeds = d.get("seeds", 20)
        d["seeds"] = tuple(range(seeds)) if isinstance(seeds, int) else tuple(int(s) for s in seeds)
        d["node_counts"] = tuple(int(n) for n in d["node_counts"])
        d["levels"] = tuple(int(x) for x in d.get("levels", (1,)))
        d["ks"] = tuple(parse_k(k) for k in d.get("ks", ("all",)))
        return cls(**d)

    def scenario(self, node_count: int, seed: int) -> ScenarioConfig:
        return ScenarioConfig(
            node_count, seed=seed, room_side=self.room_side, noise_floor=self.noise_floor,
            sinr_threshold=self.sinr_threshold, block_weight=self.block_weight, max_slots=self.max_slots,
        )


def load_plan(path: Union[str, Path]) -> Plan:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml
        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    return Plan.from_dict(data)


@dataclass
class ExperimentRecord:
    node_count: int
    level: int
    k: Optional[int]
    seed: int
    heuristic_slots: Optional[int] = None
    exact_slots: Optional[int] = None
    gap: Optional[float] = None
    heuristic_runtime_ms: Optional[float] = None
    exact_runtime_ms: Optional[float] = None
    status: str = "ok"
    # not part of the CSV
    expansions: int = 0
    mean_branching: float = 0.0
    problems: list = field(default_factory=list)

    def invariant_problems(self) -> list[str]:
        out = list(self.problems)
        both = self.heuristic_slots is not None and self.exact_slots is not None
        if (self.gap is not None) != (both and self.exact_slots > 0):
            out.append("gap present without both slot counts (or vice versa)")
        if self.gap is not None and self.gap < 0:
            out.append(f"negative gap {self.gap}")
        if self.status not in STATUSES:
            out.append(f"unknown status {self.status}")
        return out


def _ms(t0: float) -> float:
    return (time.perf_counter() - t0) * 1000.0


def run_unit(plan: Plan, node_count: int, seed: int) -> list[ExperimentRecord]:
    """All (level, k) records for one generated instance."""
    net, app = generate_instance(plan.scenario(node_count, seed))
    exact_slots = exact_ms = None
    exact_status = "exact_skipped"
    problems = []
    if node_count <= plan.exact_cutoff:
        t0 = time.perf_counter()
        try:
            sol = solve_exact(net, app, ExactConfig(node_limit=plan.exact_node_limit, mode=plan.mode))
            exact_ms = _ms(t0)
            if not validate(sol, net, app, plan.mode).ok:
                problems.append("exact solution failed validation")
            exact_slots = objective(sol)
            exact_status = "ok"
        except Infeasible:
            exact_ms = _ms(t0)
            exact_status = "infeasible"
        except BudgetExhausted:
            exact_ms = _ms(t0)
            exact_status = "budget"

    out = []
    for level in plan.levels:
        for k in plan.ks:
            rec = ExperimentRecord(node_count, level, k, seed, exact_slots=exact_slots,
                                   exact_runtime_ms=exact_ms, problems=list(problems))
            params = HeuristicParams(level=level, k=k, seed=seed, backtrack_budget=plan.backtrack_budget,
                                     max_path_hops=plan.max_path_hops)
            stats = {}
            t0 = time.perf_counter()
            try:
                sol = solve_heuristic(net, app, params, stats)
                rec.heuristic_runtime_ms = _ms(t0)
                rec.heuristic_slots = objective(sol)
                rec.status = exact_status
            except Infeasible:
                rec.heuristic_runtime_ms = _ms(t0)
                rec.status = "infeasible"
                if exact_status == "ok":
                    rec.problems.append("heuristic found no mapping although one exists")
            except BudgetExhausted:
                rec.heuristic_runtime_ms = _ms(t0)
                rec.status = "budget"
            except AssertionError as exc:   # the heuristic re-validates its own output
                rec.heuristic_runtime_ms = _ms(t0)
                rec.problems.append(str(exc))
            rec.expansions = stats.get("expansions", 0)
            rec.mean_branching = stats.get("mean_branching", 0.0)
            if exact_status == "infeasible" and rec.heuristic_slots is not None:
                rec.problems.append("heuristic mapped an instance the exact search calls infeasible")
            if rec.heuristic_slots is not None and exact_slots is not None:
                rec.gap = gap(rec.heuristic_slots, exact_slots)
            if rec.invariant_problems():
                rec.status = "invalid"
            out.append(rec)
    return out


def _unit(args):
    return run_unit(*args)


def run_experiment(plan: Plan, jobs: int = 1) -> list[ExperimentRecord]:
    units = [(plan, n, s) for n in plan.node_counts for s in plan.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_unit, units))
    else:
        results = [_unit(u) for u in units]
    by_key = {}
    for recs in results:
        for r in recs:
            by_key[r.node_count, r.level, r.k, r.seed] = r
    return [by_key[n, lv, k, s] for n in plan.node_counts for lv in plan.levels for k in plan.ks for s in plan.seeds]


# --- reporting ----------------------------------------------------------------


def _cell(value, column: str, timing: bool) -> str:
    if value is None or (column in TIMING_COLUMNS and not timing):
        return ""
    if column == "k":
        return k_label(value)
    if isinstance(value, float):
        return f"{value:.3f}" if column in TIMING_COLUMNS else f"{value:.6f}"
    return str(value)


def records_csv(records: Sequence[ExperimentRecord], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([_cell(getattr(r, c), c, timing) for c in CSV_COLUMNS])
    return buf.getvalue()


@dataclass(frozen=True)
class CellSummary:
    node_count: int
    level: int
    k: Optional[int]
    runs: int
    solved: int
    median_heuristic_ms: Optional[float]
    median_exact_ms: Optional[float]
    mean_gap: Optional[float]
    gap_ci_low: Optional[float]
    gap_ci_high: Optional[float]
    gap_samples: int
    mean_heuristic_slots: Optional[float]
    mean_exact_slots: Optional[float]
    mean_branching: Optional[float]


def mean_ci(values: Sequence[float]) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """Mean with a normal-approximation 95% interval; order of ``values`` does not matter."""
    if not values:
        return None, None, None
    x = np.sort(np.asarray(values, dtype=float))
    m = float(math.fsum(x) / len(x))
    if len(x) < 2:
        return m, m, m
    sd = math.sqrt(math.fsum((x - m) ** 2) / (len(x) - 1))
    half = Z95 * sd / math.sqrt(len(x))
    return m, m - half, m + half


def _median(values):
    return float(np.median(sorted(values))) if values else None


def _mean(values):
    return math.fsum(sorted(values)) / len(values) if values else None


def summarize(records: Sequence[ExperimentRecord]) -> list[CellSummary]:
    cells = {}
    for r in records:
        cells.setdefault((r.node_count, r.level, -1 if r.k is None else r.k), []).append(r)
    out = []
    for key in sorted(cells, key=lambda c: (c[0], c[1], math.inf if c[2] == -1 else c[2])):
        rs = cells[key]
        solved = [r for r in rs if r.heuristic_slots is not None]
        gaps = [r.gap for r in rs if r.gap is not None]
        m, lo, hi = mean_ci(gaps)
        out.append(CellSummary(
            node_count=key[0], level=key[1], k=rs[0].k, runs=len(rs), solved=len(solved),
            median_heuristic_ms=_median([r.heuristic_runtime_ms for r in solved if r.heuristic_runtime_ms is not None]),
            median_exact_ms=_median([r.exact_runtime_ms for r in rs if r.exact_slots is not None]),
            mean_gap=m, gap_ci_low=lo, gap_ci_high=hi, gap_samples=len(gaps),
            mean_heuristic_slots=_mean([r.heuristic_slots for r in solved]),
            mean_exact_slots=_mean([r.exact_slots for r in rs if r.exact_slots is not None]),
            mean_branching=_mean([r.mean_branching for r in solved]),
        ))
    return out


def summary_csv(summary: Sequence[CellSummary], timing: bool = True) -> str:
    cols = [f.name for f in fields(CellSummary)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for s in summary:
        row = []
        for c in cols:
            v = getattr(s, c)
            if v is None or (c.startswith("median_") and not timing):
                row.append("")
            elif c == "k":
                row.append(k_label(v))
            elif isinstance(v, float):
                row.append(f"{v:.6f}")
            else:
                row.append(str(v))
        w.writerow(row)
    return buf.getvalue()


def summary_table(summary: Sequence[CellSummary], timing: bool = True) -> str:
    """Plain-text table for the terminal."""
    head = f"{'nodes':>5} {'level':>5} {'k':>4} {'runs':>4} {'slots':>7} {'gap':>8} {'95% CI':>19}"
    if timing:
        head += f" {'heur ms':>9} {'exact ms':>9}"
    lines = [head]
    for s in summary:
        slots = f"{s.mean_heuristic_slots:.2f}" if s.mean_heuristic_slots is not None else "-"
        g = f"{s.mean_gap:.4f}" if s.mean_gap is not None else "-"
        ci = f"[{s.gap_ci_low:.4f}, {s.gap_ci_high:.4f}]" if s.mean_gap is not None else "-"
        line = f"{s.node_count:>5} {s.level:>5} {k_label(s.k):>4} {s.runs:>4} {slots:>7} {g:>8} {ci:>19}"
        if timing:
            hm = f"{s.median_heuristic_ms:.2f}" if s.median_heuristic_ms is not None else "-"
            em = f"{s.median_exact_ms:.2f}" if s.median_exact_ms is not None else "-"
            line += f" {hm:>9} {em:>9}"
        lines.append(line)
    return "\n".join(lines)


def report(records: Sequence[ExperimentRecord], out_dir: Union[str, Path], timing: bool = True,
           plots: bool = True) -> dict[str, Path]:
    """Write records.csv, summary.csv and the SVG figures; returns the written paths."""
    if not records:
        raise ValueError("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = summarize(records)
    paths = {"records": out_dir / "records.csv", "summary": out_dir / "summary.csv"}
    paths["records"].write_text(records_csv(records, timing), encoding="utf-8")
    paths["summary"].write_text(summary_csv(summary, timing), encoding="utf-8")
    if plots:
        from .plotting import write_figures
        paths.update(write_figures(summary, out_dir, timing=timing))
    return paths


def problems(records: Sequence[ExperimentRecord]) -> list[str]:
    out = []
    for r in records:
        for p in r.invariant_problems():
            out.append(f"n={r.node_count} level={r.level} k={k_label(r.k)} seed={r.seed}: {p}")
    return out
