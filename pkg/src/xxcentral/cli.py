"""Command-line entry point: solve, sweep, reproduce-figures, ed-check."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import Scenario, ScenarioConfig, parse_config
from .errors import SchemaError, XXCentralError
from .runner import FIGURES, BranchTask, build_series, reproduce_paper_figures, run_branch, run_scenario

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


def _load(path: str | None, default: dict) -> ScenarioConfig:
    if path is None:
        return parse_config(json.dumps(default))
    return parse_config(Path(path).read_bytes())


def _solve(args) -> int:
    config = _load(args.config, {"scenario": "purity_vs_g"})
    if args.parent:
        config = replace(config, parents=tuple(args.parent))
    out = []
    status = EXIT_OK
    for sp in build_series(config):
        per_tilde = sp.model().g * sp.field_norm / sp.distribution.total
        for motif in config.parents:
            task = BranchTask(
                0, sp, motif, (args.g_tilde * per_tilde,), (args.g_tilde,),
                config.bath_sz, config.steps_hint, config.delta_factors,
                config.tolerances.newton, config.tolerances.gamma, keep_solutions=True,
            )
            row = run_branch(task)[0][0]
            rec = {k: row[k] for k in ("series", "parent", "g", "g_tilde", "status", "message")}
            if row["status"] == "ok":
                rec.update(
                    energy=float(row["r"][0]),
                    charges=[float(v) for v in row["r"]],
                    gamma0=row["gamma0"],
                    classification=row["classification"],
                    effective_field=[row["Bx_eff"], row["By_eff"]],
                    expectations=np.asarray(row["spins"]).tolist(),
                )
            else:
                status = EXIT_PARTIAL
            out.append(rec)
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


def _report(manifest: dict) -> None:
    s = manifest["stats"]
    print(
        f"{manifest['scenario']}: {s['ok']}/{s['rows']} rows ok, "
        f"{s['branches']} branches, {s['wall_time_s']} s -> {manifest['output']}"
    )
    if "ed" in manifest:
        e = manifest["ed"]
        print(
            f"ed-check: {e['compared']} compared, {e['mismatches']} mismatches, "
            f"max tuple distance {e['max_tuple_distance']}"
        )


def _sweep(args) -> int:
    config = _load(args.config, {"scenario": "purity_vs_g"})
    manifest = run_scenario(config, args.out, args.threads)
    _report(manifest)
    return manifest["exit_status"]


def _ed_check(args) -> int:
    config = _load(args.config, {"scenario": "ed_check", "g_grid": {"min": 0.0, "max": 10.0, "points": 11}})
    if config.scenario is not Scenario.ED_CHECK:
        raise ValueError(f"scenario: ed-check needs 'ed_check', got {config.scenario.value!r}")
    manifest = run_scenario(config, args.out, args.threads)
    _report(manifest)
    return manifest["exit_status"]


def _figures(args) -> int:
    summary = reproduce_paper_figures(args.out or "figures", args.threads, args.only or FIGURES)
    for name, fig in summary["figures"].items():
        s = fig["stats"]
        print(f"{name}: {s['ok']}/{s['rows']} rows ok, {s['wall_time_s']} s")
    print(f"written under {summary['root']}")
    return summary["exit_status"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xxcentral", description=__doc__)
    parser.add_argument("--verbose", "-v", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", metavar="PATH", help="JSON scenario file")
        p.add_argument("--out", metavar="DIR", help="output location")
        p.add_argument("--threads", type=int, default=1, metavar="K", help="worker processes")
        p.add_argument("--verbose", "-v", action="count", default=argparse.SUPPRESS)

    p = sub.add_parser("solve", help="solve single states at one rescaled coupling")
    common(p)
    p.add_argument("--g-tilde", type=float, required=True, help="rescaled coupling sum(Gamma)/|B|")
    p.add_argument("--parent", action="append", help="parent motif, may repeat; write --parent=-+ for motifs starting with -")
    p.set_defaults(func=_solve)

    p = sub.add_parser("sweep", help="run a scenario config")
    common(p)
    p.set_defaults(func=_sweep)

    p = sub.add_parser("reproduce-figures", help="run all bundled figure configs")
    common(p, config=False)
    p.add_argument("--only", nargs="+", choices=FIGURES)
    p.set_defaults(func=_figures)

    p = sub.add_parser("ed-check", help="compare every solver state with exact diagonalization")
    common(p)
    p.set_defaults(func=_ed_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (SchemaError, ValueError, OSError) as exc:
        if isinstance(exc, XXCentralError) and not isinstance(exc, ValueError):
            raise
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
