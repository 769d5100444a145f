"""Scenario execution: branch tasks, CSV/manifest/SVG output."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import svg
from .config import DistributionSpec, ScenarioConfig, Scenario, parse_config
from .ed import ed_analysis, match_solutions
from .errors import XXCentralError
from .model import (
    CouplingDistribution,
    ModelParams,
    build_model,
    field_from_angle,
    make_distribution,
)
from .observables import ObservableTracker
from .solver import ParentState, all_parents

log = logging.getLogger(__name__)

FIGURES = ("fig1", "fig2", "fig3a", "fig3b", "fig3c")
BASE_COLUMNS = (
    "series", "parent", "point", "g", "g_tilde", "status", "classification",
    "gamma0", "Bx_eff", "By_eff", "Bperp_rel",
)
ED_COLUMNS = ("ed_tuple_distance", "ed_max_error", "ed_max_error_bath_z")
# oracle thresholds used to flag ed_check rows
ED_EXPECTATION_TOL = 1e-6
ED_BATH_Z_TOL = 1e-4


@dataclass(frozen=True)
class SeriesSpec:
    label: str
    n_spins: int
    distribution: CouplingDistribution
    field: tuple[float, float, float]

    def model(self) -> ModelParams:
        return build_model(self.distribution, 1.0, self.field)

    @property
    def field_norm(self) -> float:
        return float(np.linalg.norm(self.field))


def _distribution(spec: DistributionSpec, n_spins: int) -> CouplingDistribution:
    if spec.values is not None:
        return CouplingDistribution.custom(spec.values)
    return make_distribution(spec.kind, n_spins, spec.total, spec.jitter)


def _field(config: ScenarioConfig, theta: float | None = None) -> tuple[float, float, float]:
    f = config.field
    if theta is None and f.components is not None:
        return tuple(f.components)
    return tuple(float(v) for v in field_from_angle(f.norm, f.theta if theta is None else theta))


def build_series(config: ScenarioConfig) -> list[SeriesSpec]:
    n, s = config.n_spins, config.scenario
    if s is Scenario.ANGLE_SWEEP:
        dist = _distribution(config.distribution, n)
        return [SeriesSpec(f"theta={t:.6g}", n, dist, _field(config, t)) for t in config.thetas]
    if s is Scenario.SIZE_SWEEP:
        return [
            SeriesSpec(f"N={m}", m, _distribution(config.distribution, m), _field(config))
            for m in config.sizes
        ]
    if s is Scenario.DISTRIBUTION_SWEEP:
        out = []
        for d in config.distributions:
            m = d.n_spins or (len(d.values) + 1 if d.values else n)
            label = d.label or f"{d.kind} N={m}"
            out.append(SeriesSpec(label, m, _distribution(d, m), _field(config)))
        return out
    return [SeriesSpec(f"N={n}", n, _distribution(config.distribution, n), _field(config))]


def grid_values(config: ScenarioConfig) -> np.ndarray:
    g = config.g_grid
    if g.spacing == "log":
        return np.geomspace(g.min, g.max, g.points)
    return np.linspace(g.min, g.max, g.points)


def rg_couplings(series: SeriesSpec, config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """(RG coupling g, rescaled g~) for every grid point of ``series``."""
    base = series.model()
    axis = grid_values(config)
    # g~ = multiplier * total / |B| and RG g = multiplier * base.g
    per_tilde = base.g * series.field_norm / series.distribution.total
    if config.g_grid.axis == "g":
        return axis, axis / per_tilde
    return axis * per_tilde, axis


@dataclass(frozen=True)
class BranchTask:
    series_index: int
    series: SeriesSpec
    parent: str
    g_values: tuple[float, ...]
    g_tilde: tuple[float, ...]
    bath_sz: bool
    steps_hint: int
    delta_factors: tuple[float, ...]
    tol: float
    tol_gamma: float
    keep_solutions: bool = False


def _empty_row(task: BranchTask, i: int, parent: ParentState) -> dict[str, Any]:
    return {
        "series": task.series.label,
        "parent": parent.label,
        "point": i,
        "g": task.g_values[i],
        "g_tilde": task.g_tilde[i],
        "status": "ok",
        "message": "",
    }


def run_branch(task: BranchTask) -> tuple[list[dict[str, Any]], dict[str, int]]:
    """Track one parent through the grid; failures are recorded per row."""
    params = task.series.model()
    parent = (
        ParentState.from_label(task.parent)
        if len(task.parent) == task.series.n_spins
        else ParentState.from_motif(task.parent, task.series.n_spins)
    )
    norm = task.series.field_norm
    rows: list[dict[str, Any]] = []
    stats = {"steps": 0, "rejected": 0, "newton_iterations": 0}
    try:
        tracker = ObservableTracker(
            params,
            parent,
            max(task.g_values),
            with_bath_sz=task.bath_sz,
            delta_factors=task.delta_factors,
            steps_hint=task.steps_hint,
            tol=task.tol,
            tol_gamma=task.tol_gamma,
        )
    except XXCentralError as exc:
        for i in range(len(task.g_values)):
            row = _empty_row(task, i, parent)
            row.update(status=f"failed:{type(exc).__name__}", message=str(exc))
            rows.append(row)
        return rows, stats

    for i, g in enumerate(task.g_values):
        row = _empty_row(task, i, parent)
        try:
            rec = tracker.advance(g)
        except (XXCentralError, np.linalg.LinAlgError, FloatingPointError) as exc:
            log.info("%s %s g=%g failed: %s", task.series.label, parent.label, g, exc)
            row.update(status=f"failed:{type(exc).__name__}", message=str(exc))
            rows.append(row)
            continue
        bfield = rec.effective_field
        row.update(
            classification=rec.classification.value,
            gamma0=rec.gamma0,
            Bx_eff=float(bfield[0]),
            By_eff=float(bfield[1]),
            Bperp_rel=rec.inplane_effective_field / norm,
            spins=rec.expectations,
        )
        if task.keep_solutions:
            row["r"] = rec.solution.r
        rows.append(row)
    for t in tracker.trackers:
        stats["steps"] += t.steps
        stats["rejected"] += t.rejected
        stats["newton_iterations"] += t.newton_iterations
    return rows, stats


def _ed_compare(rows: list[dict[str, Any]], series: SeriesSpec, g_value: float, tol: float) -> None:
    """Attach oracle distances to the rows of one grid point (modifies rows)."""
    params = series.model().with_g(g_value)
    ed = ed_analysis(params)
    good = [r for r in rows if r["status"] == "ok"]
    if not good:
        return
    ed_tuples = np.array([s.charge_tuple for s in ed])
    if len(good) == len(ed):
        report = match_solutions(ed, [_Tuple(r["r"]) for r in good], tol=math.inf)
        pairing = {j: i for i, j, _ in report.pairs}
    else:
        pairing = {
            j: int(np.argmin(np.max(np.abs(ed_tuples - r["r"]), axis=1))) for j, r in enumerate(good)
        }
    for j, row in enumerate(good):
        state = ed[pairing[j]]
        dist = float(np.max(np.abs(state.charge_tuple - row["r"])))
        diff = np.abs(state.expectations - row["spins"])
        bath_z = float(np.max(diff[1:, 2])) if diff.shape[0] > 1 else 0.0
        diff[1:, 2] = 0.0
        row.update(ed_tuple_distance=dist, ed_max_error=float(np.max(diff)), ed_max_error_bath_z=bath_z)
        bad = dist > tol or row["ed_max_error"] > ED_EXPECTATION_TOL or (
            np.isfinite(bath_z) and bath_z > ED_BATH_Z_TOL
        )
        if bad:
            row.update(status="mismatch", message=f"tuple distance {dist:.3e}")


@dataclass(frozen=True)
class _Tuple:
    r: np.ndarray


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def rows_to_csv(rows: Sequence[dict[str, Any]], n_max: int, ed_columns: bool = False) -> str:
    """Serialize rows; floats use repr so they parse back to identical doubles."""
    spin_cols = [f"S{a}_{j}" for j in range(n_max) for a in "xyz"]
    header = list(BASE_COLUMNS) + (list(ED_COLUMNS) if ed_columns else []) + spin_cols
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        cells = [_cell(row.get(c)) for c in BASE_COLUMNS]
        if ed_columns:
            cells += [_cell(row.get(c)) for c in ED_COLUMNS]
        spins = row.get("spins")
        flat = [] if spins is None else [float(v) for v in np.asarray(spins).ravel()]
        cells += [_cell(v) for v in flat] + [""] * (len(spin_cols) - len(flat))
        writer.writerow(cells)
    return buf.getvalue()


def read_csv(path: str | os.PathLike) -> list[dict[str, Any]]:
    """Parse a data.csv back into rows (floats restored, spins as (N, 3) arrays)."""
    text = Path(path).read_text(encoding="utf-8")
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        row: dict[str, Any] = {
            "series": rec["series"],
            "parent": rec["parent"],
            "point": int(rec["point"]),
            "status": rec["status"],
        }
        for key in BASE_COLUMNS[3:]:
            if key in ("status",):
                continue
            if rec[key] != "":
                row[key] = rec[key] if key == "classification" else float(rec[key])
        for key in ED_COLUMNS:
            if rec.get(key):
                row[key] = float(rec[key])
        spins = [
            [float(rec[f"S{a}_{j}"]) for a in "xyz"]
            for j in range(len(row["parent"]))
            if rec.get(f"Sx_{j}", "") != ""
        ]
        if spins:
            row["spins"] = np.array(spins)
        out.append(row)
    return out


def _branch_summary(rows: Sequence[dict[str, Any]]) -> dict[str, Any]:
    good = [r for r in rows if r["status"] == "ok"]
    if not good:
        return {"ok_points": 0}
    gam = np.array([r["gamma0"] for r in good])
    gt = np.array([r["g_tilde"] for r in good])
    i = int(np.argmin(gam))
    return {
        "ok_points": len(good),
        "min_gamma0": float(gam[i]),
        "dip_depth": float(0.25 - gam[i]),
        "g_tilde_at_min": float(gt[i]),
        "final_gamma0": float(gam[-1]),
        "final_Bperp_rel": float(good[-1]["Bperp_rel"]),
    }


def _panels(config: ScenarioConfig, rows: list[dict[str, Any]], series: list[SeriesSpec]) -> dict[str, str]:
    groups: dict[tuple[str, str], list[dict[str, Any]]] = {}
    for r in rows:
        groups.setdefault((r["series"], r["parent"]), []).append(r)

    def xy(group, key):
        return (
            [r["g_tilde"] for r in group],
            [r.get(key, math.nan) if r["status"] == "ok" else math.nan for r in group],
        )

    def name(s, p):
        if len(series) == 1:
            return p if len(p) <= 12 else p[:12] + "..."
        return s if len({k[1] for k in groups}) == 1 else f"{s} {p[:8]}"

    panels: dict[str, str] = {}
    xlabel = "g~ = sum_k Gamma_k / |B|"
    purity = svg.Plot("Central-spin purity factor", xlabel, "gamma_0", hlines=[0.25])
    bfield = svg.Plot("In-plane effective field", xlabel, "|B~_perp| / |B|", log_y=True)
    bx = svg.Plot("Effective field x component", xlabel, "B~^x / |B|", hlines=[0.0])
    for (s, p), group in groups.items():
        label = name(s, p)
        norm = next(sp.field_norm for sp in series if sp.label == s)
        purity.curves.append(svg.Curve(*xy(group, "gamma0"), label=label))
        bfield.curves.append(svg.Curve(*xy(group, "Bperp_rel"), label=label))
        x, y = xy(group, "Bx_eff")
        bx.curves.append(svg.Curve(x, [v / norm for v in y], label=label))
    panels["purity.svg"] = svg.render(purity)
    panels["effective_field.svg"] = svg.render(bfield)
    panels["effective_field_x.svg"] = svg.render(bx)

    if config.scenario is Scenario.STATE_PROFILE:
        for idx, ((s, p), group) in enumerate(groups.items()):
            n = len(p)
            suffix = "" if len(groups) == 1 else f"_{idx}"
            for a, axis in enumerate("xyz"):
                plot = svg.Plot(f"<S^{axis}_j> for parent {name(s, p)}", xlabel, f"<S^{axis}_j>")
                plot.hlines = [0.5, -0.5] if axis == "z" else []
                gt = [r["g_tilde"] for r in group]
                for j in range(n):
                    ys = [r["spins"][j, a] if r["status"] == "ok" else math.nan for r in group]
                    shade = int(200 * j / max(n - 1, 1))
                    color = "#d62728" if j == 0 else f"rgb({shade},{shade},255)"
                    label = "central spin" if j == 0 else ("bath spins" if j == 1 else None)
                    plot.curves.append(svg.Curve(gt, ys, label=label, color=color, width=2.5 if j == 0 else 1.0))
                panels[f"spin_{axis}{suffix}.svg"] = svg.render(plot)
    return panels


def _tasks(config: ScenarioConfig, series: list[SeriesSpec]) -> list[BranchTask]:
    tasks = []
    for si, sp in enumerate(series):
        g_values, g_tilde = rg_couplings(sp, config)
        if config.scenario is Scenario.ED_CHECK:
            parents = [p.label for p in all_parents(sp.n_spins)]
        else:
            parents = list(config.parents)
        for p in parents:
            tasks.append(
                BranchTask(
                    si, sp, p,
                    tuple(float(v) for v in g_values),
                    tuple(float(v) for v in g_tilde),
                    config.bath_sz,
                    config.steps_hint,
                    config.delta_factors,
                    config.tolerances.newton,
                    config.tolerances.gamma,
                    keep_solutions=config.scenario is Scenario.ED_CHECK,
                )
            )
    return tasks


def run_scenario(config: ScenarioConfig, out: str | os.PathLike | None = None, threads: int = 1) -> dict[str, Any]:
    """Run every (series, parent) branch and write data.csv, manifest.json and SVG panels.

    Branches run in a process pool when ``threads > 1``; results are merged in
    task order, so output is identical for any thread count.
    """
    out = Path(out or config.output or f"out/{config.scenario.value}")
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    series = build_series(config)
    tasks = _tasks(config, series)

    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_branch, tasks))
    else:
        results = [run_branch(t) for t in tasks]

    stats = {"steps": 0, "rejected": 0, "newton_iterations": 0}
    rows: list[dict[str, Any]] = []
    summaries = []
    for task, (branch_rows, branch_stats) in zip(tasks, results):
        for k in stats:
            stats[k] += branch_stats[k]
        rows.extend(branch_rows)
        summaries.append({"series": task.series.label, "parent": branch_rows[0]["parent"], **_branch_summary(branch_rows)})

    is_ed = config.scenario is Scenario.ED_CHECK
    if is_ed:
        for si, sp in enumerate(series):
            for point, g in enumerate(tasks[0].g_values):
                group = [r for r in rows if r["series"] == sp.label and r["point"] == point]
                _ed_compare(group, sp, g, config.tolerances.match)

    n_max = max(sp.n_spins for sp in series)
    (out / "data.csv").write_bytes(rows_to_csv(rows, n_max, ed_columns=is_ed).encode("utf-8"))
    panels = _panels(config, rows, series)
    for fname, content in panels.items():
        (out / fname).write_bytes(content.encode("utf-8"))

    failed = [r for r in rows if r["status"] != "ok"]
    manifest = {
        "scenario": config.scenario.value,
        "config": config.to_dict(),
        "series": [
            {"label": s.label, "n_spins": s.n_spins, "field": list(s.field),
             "couplings": [float(v) for v in s.distribution.values]}
            for s in series
        ],
        "stats": {
            **stats,
            "branches": len(tasks),
            "rows": len(rows),
            "ok": len(rows) - len(failed),
            "failed": len(failed),
            "threads": threads,
            "wall_time_s": round(time.perf_counter() - started, 3),
        },
        "branches": summaries,
        "rows": [
            {k: r[k] for k in ("series", "parent", "point", "g_tilde", "status", "message")}
            for r in rows
        ],
        "files": ["data.csv", "manifest.json", *panels],
        "exit_status": exit_status(rows),
    }
    if is_ed:
        dists = [r["ed_tuple_distance"] for r in rows if "ed_tuple_distance" in r]
        manifest["ed"] = {
            "compared": len(dists),
            "mismatches": sum(r["status"] == "mismatch" for r in rows),
            "max_tuple_distance": max(dists, default=None),
            "max_expectation_error": max((r["ed_max_error"] for r in rows if "ed_max_error" in r), default=None),
            "max_bath_z_error": max((r["ed_max_error_bath_z"] for r in rows if "ed_max_error_bath_z" in r), default=None),
        }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, allow_nan=True) + "\n", encoding="utf-8")
    manifest["output"] = str(out)
    return manifest


def exit_status(rows: Sequence[dict[str, Any]]) -> int:
    return 1 if any(r["status"] != "ok" for r in rows) else 0


def bundled_config(name: str) -> ScenarioConfig:
    text = resources.files("xxcentral.figures").joinpath(f"{name}.json").read_bytes()
    return parse_config(text)


def reproduce_paper_figures(
    out_root: str | os.PathLike = "figures",
    threads: int = 1,
    names: Sequence[str] = FIGURES,
) -> dict[str, Any]:
    """Run the bundled figure configs into ``out_root/<timestamp>/<name>``."""
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    root = Path(out_root) / stamp
    root.mkdir(parents=True, exist_ok=True)
    figures = {}
    for name in names:
        manifest = run_scenario(bundled_config(name), root / name, threads)
        figures[name] = {
            "output": manifest["output"],
            "stats": manifest["stats"],
            "branches": manifest["branches"],
            "exit_status": manifest["exit_status"],
        }
    summary = {
        "root": str(root),
        "figures": figures,
        "exit_status": max((f["exit_status"] for f in figures.values()), default=0),
    }
    (root / "manifest.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return summary
