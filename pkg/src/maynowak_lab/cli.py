"""Command-line front end.

::

    maynowak-lab [--output-dir DIR] [--quiet] simulate RUN.ini
    maynowak-lab sweep SWEEP.ini
    maynowak-lab converge laplacian_eigen --levels 4
    maynowak-lab equilibria MODEL.ini

Exit codes: 0 success (a classified blow-up counts as success), 2 bad
configuration, 3 numerical divergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, config_to_dict, config_to_ini, load_config
from .diagnostics import Classification, TooFewSamples, rows_to_csv
from .experiments import (
    SWEEP_COLUMNS,
    BracketInvalid,
    ConvergenceKind,
    RunRecord,
    convergence_study,
    estimate_critical_alpha,
    run_simulation,
    run_sweep,
)
from .models import State, System, homogeneous_equilibria, rhs_may_nowak_ode

log = logging.getLogger("maynowak_lab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

SUMMARY_SCHEMA = "maynowak-lab/summary/1"


def _finite(value):
    """JSON has no inf/nan; map them to null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    return value


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_finite(payload), indent=2) + "\n", encoding="utf-8")


def summary_payload(record: RunRecord, cfg: RunConfig) -> dict:
    """The summary.json document.  Keys appear in this order in every file."""
    o = record.outcome
    res = record.integration
    return {
        "schema": SUMMARY_SCHEMA,
        "classification": o.classification.value,
        "t_detect": o.t_detect,
        "reason": o.reason,
        "termination": {
            "kind": res.termination.kind.value,
            "t": res.termination.t,
            "reason": res.termination.reason,
        },
        "peaks": {
            "linf_u": o.peak_linf_u,
            "grad_v_lq": o.peak_grad_v_lq,
            "linf_w": o.peak_linf_w,
        },
        "plateau_ratios": dict(sorted(o.plateau_ratios.items())),
        "functional": record.functional.to_dict(),
        "integration": {
            "steps": res.steps,
            "rejected": res.rejected,
            "dt_smallest": res.dt_smallest,
            "dt_largest": res.dt_largest,
            "dt_last": res.dt_last,
            "worst_negativity": res.worst_negativity,
        },
        "rows": len(record.rows),
        "wall_time_s": record.wall_time,
        "version": __version__,
        "config": config_to_dict(cfg),
    }


def write_run_artifacts(record: RunRecord, cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "diagnostics.csv").write_text(rows_to_csv(record.rows), encoding="utf-8")
    (out / "config.ini").write_text(config_to_ini(cfg), encoding="utf-8")
    _dump_json(out / "summary.json", summary_payload(record, cfg))
    if record.snapshots:
        _write_snapshots(record.snapshots, out / "snapshots.npz")
    if cfg.output.plots and record.rows:
        from . import plotting

        label = record.outcome.classification.value
        plotting.plot_norms(record.rows, out / "norms.svg", title=label)
        plotting.plot_masses(record.rows, out / "masses.svg")


def _write_snapshots(states: Sequence[State], path: Path) -> None:
    arrays = {
        "t": np.array([s.t for s in states]),
        "u": np.stack([s.u for s in states]),
        "v": np.stack([s.v for s in states]),
    }
    if states[0].w is not None:
        arrays["w"] = np.stack([s.w for s in states])
    for axis, c in enumerate(states[0].grid.centers):
        arrays[f"x{axis}"] = c
    np.savez(path, **arrays)


def _output_dir(args, cfg: Optional[RunConfig], fallback: str) -> Path:
    if args.output_dir:
        return Path(args.output_dir)
    if cfg is not None and cfg.output.directory:
        return Path(cfg.output.directory)
    return Path("runs") / fallback


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _require_spatial(cfg: RunConfig) -> None:
    if cfg.setup.model.system is System.MAY_NOWAK_ODE:
        raise ConfigError("[model] system: may_nowak_ode has no spatial dynamics to simulate")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    _require_spatial(cfg)
    out = _output_dir(args, cfg, Path(args.config).stem)
    try:
        record = run_simulation(cfg.setup, keep_snapshots=cfg.output.snapshots)
    except TooFewSamples as exc:
        raise ConfigError(f"[diagnostics] sample_interval: {exc}") from None
    write_run_artifacts(record, cfg, out)
    o = record.outcome
    t_detect = "" if o.t_detect is None else f" at t={o.t_detect:.6g}"
    _say(args, f"{o.classification.value}{t_detect} ({record.integration.termination.kind.value}); artifacts in {out}")
    if o.classification is Classification.DIVERGED:
        log.error("run diverged: %s", o.reason or record.integration.termination.reason)
        return EXIT_DIVERGED
    return EXIT_OK


def _sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    columns = SWEEP_COLUMNS + ("run_dir",)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(["" if row.get(c) is None else row[c] for c in columns])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    _require_spatial(cfg)
    out = _output_dir(args, cfg, Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    opts = cfg.sweep
    workers = opts.workers if opts else 1
    result = run_sweep(cfg.sweep_spec(), workers=workers)

    rows = result.summary_rows()
    for row in rows:
        key = (row["alpha"], row["kappa"], row["seed"])
        name = f"alpha{row['alpha']:g}_kappa{row['kappa']:g}_seed{row['seed']}"
        record = result.records.get(key)
        if record is not None:
            run_cfg = RunConfig(record.setup, cfg.output)
            write_run_artifacts(record, run_cfg, out / name)
            row["run_dir"] = name
    (out / "sweep_summary.csv").write_text(_sweep_csv(rows), encoding="utf-8")

    report = {
        "empirical_critical_alpha": result.empirical_critical_alpha,
        "critical_bracket": result.critical_bracket,
        "invariant_checks": [
            {"alpha": k[0], "kappa": k[1], "seed": k[2], **v} for k, v in sorted(result.invariant_checks.items())
        ],
        "bisection": None,
    }
    if opts is not None and opts.critical_bracket is not None:
        try:
            est = estimate_critical_alpha(cfg.setup, opts.critical_bracket, opts.critical_iterations, opts.conversion)
            report["bisection"] = {
                "estimate": est.estimate,
                "bracket": list(est.bracket),
                "evaluations": [list(e) for e in est.evaluations],
            }
            _say(args, f"critical alpha estimate {est.estimate:.4g} in {est.bracket}")
        except BracketInvalid as exc:
            report["bisection"] = {"error": str(exc)}
            log.warning("bisection skipped: %s", exc)
    report["config"] = config_to_dict(cfg)
    _dump_json(out / "sweep.json", report)
    if cfg.output.plots:
        from . import plotting

        plotting.plot_sweep(rows, out / "sweep.svg")

    for row in rows:
        _say(args, f"alpha={row['alpha']:g} kappa={row['kappa']:g} seed={row['seed']}: {row['classification']}")
    _say(args, f"{len(rows)} runs; summary in {out / 'sweep_summary.csv'}")
    diverged = [r for r in rows if r["classification"] == Classification.DIVERGED.value]
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_converge(args) -> int:
    kind = ConvergenceKind(args.kind)
    out = _output_dir(args, None, "converge")
    out.mkdir(parents=True, exist_ok=True)
    rows = convergence_study(kind, args.levels)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("h", "error", "observed_order"))
    for r in rows:
        writer.writerow((repr(r.h), repr(r.error), "" if r.observed_order is None else repr(r.observed_order)))
    (out / f"convergence_{kind.value}.csv").write_text(buf.getvalue(), encoding="utf-8")
    from . import plotting

    plotting.plot_convergence(rows, out / f"convergence_{kind.value}.svg", title=kind.value)
    _say(args, f"{'h':>12} {'error':>12} {'order':>8}")
    for r in rows:
        order = "" if r.observed_order is None else f"{r.observed_order:8.3f}"
        _say(args, f"{r.h:12.4e} {r.error:12.4e} {order:>8}")
    return EXIT_OK


def cmd_equilibria(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.setup.model
    out = _output_dir(args, cfg, Path(args.config).stem)
    out.mkdir(parents=True, exist_ok=True)
    found = []
    for eq in homogeneous_equilibria(spec):
        residual = max(abs(x) for x in rhs_may_nowak_ode(eq, spec))
        found.append({"u": eq[0], "v": eq[1], "w": eq[2], "residual": residual})
        _say(args, f"({eq[0]:.10g}, {eq[1]:.10g}, {eq[2]:.10g})  residual {residual:.2e}")
    _dump_json(out / "equilibria.json", {"equilibria": found, "config": config_to_dict(cfg)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maynowak-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--output-dir", help="directory for artifacts (overrides [output] directory)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress and result lines")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run an (alpha, kappa, seed) sweep")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("converge", help="observed order of accuracy against an exact solution")
    p.add_argument("kind", choices=[k.value for k in ConvergenceKind])
    p.add_argument("--levels", type=int, default=3)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("equilibria", help="list the spatially homogeneous equilibria")
    p.add_argument("config")
    p.set_defaults(func=cmd_equilibria)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
