"""Command-line front end.

    lastiterate [--config FILE] [--set key=value ...] [--out DIR] [--workers N] COMMAND

Commands: simulate, probe-sensitivity, probe-oscillation, audit-regret,
pmf-tools, check-all [--full]. Outputs go to --out, else $LASTITERATE_OUT,
else ./lastiterate-out. Exit codes: 0 ok, 1 acceptance failure, 2 config
error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, parse_config
from .dynamics import CheckpointSchedule, mix_seed, monte_carlo
from .games import nash_equilibrium
from .io import emit_csv, trajectory_rows, write_json
from .pmf import binomial_pmf, demoivre_ratio_certificate, shift_ratio_bound_check
from .probes import (
    oscillation_estimate,
    realized_regret,
    report_dict,
    s_grid,
    sensitivity_probe,
    time_average_deviation,
)

OUT_ENV = "LASTITERATE_OUT"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


@dataclass
class RunManifest:
    command: str
    config: str
    config_hash: str
    version: str = __version__
    seconds: float = 0.0
    outputs: list[str] = field(default_factory=list)


def _ensemble(cfg: ExperimentConfig, workers: int, extra=()):
    rc = cfg.run_config()
    if extra:
        from dataclasses import replace

        rc = replace(rc, schedule=CheckpointSchedule(cfg.checkpoint_base, cfg.checkpoint_ratio, tuple(extra)))
    n = 1 if cfg.mode == "telepathic" else cfg.n_runs
    return monte_carlo(rc, n, cfg.seed, workers)


def cmd_simulate(cfg, out: Path, workers: int) -> list[Path]:
    ens = _ensemble(cfg, workers)
    files = []
    width = max(3, len(str(len(ens) - 1)))
    for i, traj in enumerate(ens.runs):
        files.append(emit_csv(trajectory_rows(traj), "dynamics", out / f"trajectory_{i:0{width}d}.csv"))
    return files


def _equilibrium(cfg):
    try:
        return nash_equilibrium(cfg.game_obj)
    except ValueError as exc:
        raise ConfigError(f"invalid value for 'game': {exc}") from None


def cmd_probe_sensitivity(cfg, out: Path, workers: int) -> list[Path]:
    _equilibrium(cfg)
    t = cfg.probe_t
    grid = list(cfg.probe_s) or s_grid(t, cfg.alpha_coeff, cfg.s_points)
    reports = [sensitivity_probe(cfg.spec1, cfg.game_obj, t, s, cfg.n_runs, cfg.seed, cfg.tail_value) for s in grid]
    best = max(reports, key=lambda r: r.mean_response)
    rows = [(r.t, r.s, r.mean_response, r.ci_halfwidth, r.n_samples) for r in reports]
    return [
        emit_csv(rows, "sensitivity", out / "sensitivity.csv"),
        write_json({"best": report_dict(best), "reports": [report_dict(r) for r in reports]}, out / "sensitivity.json"),
    ]


def cmd_probe_oscillation(cfg, out: Path, workers: int) -> list[Path]:
    eq = _equilibrium(cfg)
    if not 0 < cfg.delta < min(eq.p_star, 1 - eq.p_star):
        raise ConfigError(f"invalid value for 'delta': {cfg.delta}; expected a real in (0, min(p*, 1-p*))")
    ens = _ensemble(cfg, workers)
    rep = oscillation_estimate(ens, eq.p_star, cfg.delta)
    rows = [(t, f, rep.n_runs, rep.delta) for t, f in zip(rep.checkpoints, rep.fraction_deviating)]
    dev = np.stack([time_average_deviation(r, eq) for r in ens.runs])
    ta_rows = [(i, int(t), d) for i in range(len(ens)) for t, d in zip(ens.times, dev[i])]
    return [
        emit_csv(rows, "oscillation", out / "oscillation.csv"),
        emit_csv(ta_rows, "time-average", out / "time_average.csv"),
        write_json(report_dict(rep), out / "oscillation.json"),
    ]


def cmd_audit_regret(cfg, out: Path, workers: int) -> list[Path]:
    if cfg.mode == "telepathic":
        raise ConfigError("invalid value for 'mode': regret audits need realization feedback")
    ens = _ensemble(cfg, workers)
    rows, worst = [], []
    for i, traj in enumerate(ens.runs):
        series = [realized_regret(traj, 1, int(t)) for t in traj.times]
        rows += [(i, traj.seed, r.t, r.regret, r.normalized) for r in series]
        worst.append(max(r.normalized for r in series))
    summary = {"n_runs": len(ens), "max_normalized_regret": max(worst), "per_replica_max": worst}
    return [emit_csv(rows, "regret", out / "regret.csv"), write_json(summary, out / "regret.json")]


def cmd_pmf_tools(cfg, out: Path, workers: int) -> list[Path]:
    eq = _equilibrium(cfg)
    t, q = cfg.probe_t, eq.q_star
    s = cfg.probe_s[0] if cfg.probe_s else math.floor(math.sqrt(t))
    shift = shift_ratio_bound_check(t, s, q, cfg.window)
    report = {
        "t": t, "q": q, "s": s, "window": cfg.window,
        "demoivre_certificate": demoivre_ratio_certificate(t, q, 2.0 * cfg.window),
        "shift_ratio_measured": shift.measured,
        "shift_ratio_bound": shift.bound,
        "shift_ratio_corrected_bound": shift.corrected_bound,
        "shift_ratio_argmin_z": shift.argmin_z,
    }
    return [emit_csv(binomial_pmf(t, q).rows(), "pmf", out / "binomial_pmf.csv"), write_json(report, out / "pmf_report.json")]


def cmd_check_all(cfg, out: Path, workers: int, full: bool = False):
    from .acceptance import run_all

    lines = []

    def report(line):
        print(line, flush=True)
        lines.append(line)

    results = run_all(full=full, workers=workers, report=report)
    failed = [r.number for r in results if not r.passed]
    report(f"{len(results) - len(failed)}/{len(results)} run criteria passed" + (f"; failed: {failed}" if failed else ""))
    path = out / "acceptance.txt"
    path.write_text("\n".join(lines) + "\n")
    return [path], bool(failed)


COMMANDS = {
    "simulate": cmd_simulate,
    "probe-sensitivity": cmd_probe_sensitivity,
    "probe-oscillation": cmd_probe_oscillation,
    "audit-regret": cmd_audit_regret,
    "pmf-tools": cmd_pmf_tools,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lastiterate", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", help="key = value config file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./lastiterate-out)")
    ap.add_argument("--workers", type=int, default=1, help="replica worker processes")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name)
    ca = sub.add_parser("check-all", help="run the acceptance criteria")
    ca.add_argument("--full", action="store_true", help="include the multi-minute ensemble criteria")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        if args.workers < 1:
            raise ConfigError("invalid value for '--workers': expected an integer >= 1")
        cfg = parse_config(args.config, args.set)
        out = Path(args.out or cfg.output_dir or os.environ.get(OUT_ENV) or "lastiterate-out")
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = False
    try:
        if args.command == "check-all":
            files, failed = cmd_check_all(cfg, out, args.workers, args.full)
        else:
            files = COMMANDS[args.command](cfg, out, args.workers)
        manifest = RunManifest(args.command, cfg.to_text(), cfg.config_hash(),
                               seconds=round(time.perf_counter() - start, 3),
                               outputs=[str(p) for p in files])
        mpath = out / "manifest.json"
        manifest.outputs.append(str(mpath))
        write_json(manifest.__dict__, mpath)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        traceback.print_exc()
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if args.command != "check-all":
        print(f"wrote {len(manifest.outputs)} files to {out}")
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
