"""Command line front end for sweeps, demos, benchmarks, and bounds.

Subcommands:

``run``
    Monte-Carlo RMSE sweep over the configured schemes; writes the trial
    CSV and prints one aggregate line per (scheme, SNR).
``demo``
    A single arbitrary scenario at one SNR; prints truth and detection
    rows as CSV so they can be plotted as an angle-distance view.
``bench``
    Mean pipeline runtime per scheme on one scenario.
``crb``
    Bound-only sweep; writes the per-SNR bound summary as CSV.

All subcommands accept ``--config`` (TOML, see README) and ``--seed``;
flags override the file.  Exit code is 0 on success and 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, parse_config, parse_snr_range
from .crb import crb_evaluate
from .evaluation import (
    NOISE_STREAM,
    _scenario_for_trial,
    measure_runtime,
    objects_physical_params,
    run_scheme,
    run_sweep,
    scenario_physical_params,
    scheme_specs_from_config,
    trial_seed,
    write_csv,
)
from .scenario import add_noise, noise_parameters, synthesize_channel

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plain-isac",
        description="Multidimensional ISAC parameter estimation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None, help="TOML experiment file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", type=Path, default=None, help="output CSV path")

    p_run = sub.add_parser("run", help="Monte-Carlo RMSE sweep")
    common(p_run)
    p_run.add_argument("--schemes", type=str, default=None, help="comma list: plain,sequential,tensor-esprit")
    p_run.add_argument("--trials", type=int, default=None, help="trials per SNR point")
    p_run.add_argument("--snr", type=str, default=None, metavar="A:B:STEP", help="SNR sweep in dB")
    p_run.add_argument("--time-trials", action="store_true",
                       help="record wall-clock per trial (breaks byte-determinism of the CSV)")

    p_demo = sub.add_parser("demo", help="single-scenario detection view")
    common(p_demo)
    p_demo.add_argument("--snr-db", type=float, default=0.0, help="scenario SNR in dB")
    p_demo.add_argument("--objects", type=int, default=12, help="number of objects")
    p_demo.add_argument("--mode", type=str, default="random", choices=("random", "equidistant"))

    p_bench = sub.add_parser("bench", help="mean runtime per scheme")
    common(p_bench)
    p_bench.add_argument("--schemes", type=str, default=None, help="comma list of schemes")
    p_bench.add_argument("--trials", type=int, default=100, help="timing repeats per scheme")
    p_bench.add_argument("--snr-db", type=float, default=0.0, help="scenario SNR in dB")

    p_crb = sub.add_parser("crb", help="bound-only sweep")
    common(p_crb)
    p_crb.add_argument("--trials", type=int, default=None, help="scenario draws averaged per SNR point")
    p_crb.add_argument("--snr", type=str, default=None, metavar="A:B:STEP", help="SNR sweep in dB")

    return parser


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config is not None else ExperimentConfig()
    updates: dict[str, object] = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "schemes", None):
        updates["schemes"] = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    if getattr(args, "trials", None) is not None and args.command != "bench":
        updates["trials"] = args.trials
    if getattr(args, "snr", None):
        start, stop, step = parse_snr_range(args.snr)
        updates.update(snr_start_db=start, snr_stop_db=stop, snr_step_db=step)
    if args.out is not None:
        updates["output_path"] = str(args.out)
    if args.command == "demo":
        updates.update(scenario_mode=args.mode, n_objects=args.objects)
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    records, reports = run_sweep(cfg, time_trials=args.time_trials)
    out = Path(cfg.output_path)
    write_csv(records, out)
    print(f"wrote {len(records)} rows to {out}")
    for rep in reports:
        print(
            f"{rep.scheme:>14s} @ {rep.snr_db:+6.1f} dB: "
            f"angle {rep.rmse_angle_deg:10.4g} deg, "
            f"distance {rep.rmse_distance_m:10.4g} m, "
            f"velocity {rep.rmse_velocity_kmh:10.4g} km/h, "
            f"failures {100.0 * rep.failure_rate:5.1f}%"
        )
    return 0


def _cmd_demo(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    grid = cfg.grid()
    snr_db = args.snr_db
    sc = _scenario_for_trial(cfg, grid, snr_db, trial=0)
    h = synthesize_channel(sc)
    y = add_noise(h, sc, snr_db, trial_seed(cfg.seed, snr_db, 0, NOISE_STREAM))
    p_tx, _ = noise_parameters(sc, snr_db)
    spec = scheme_specs_from_config(cfg)[0]
    dset = run_scheme(spec, y, grid, true_np=None)

    print("kind,angle_deg,distance_m,velocity_kmh,magnitude")
    truth = scenario_physical_params(sc)
    for row, path in zip(truth, sc.paths):
        print(f"truth,{row[0]:.6g},{row[1]:.6g},{row[2]:.6g},{abs(path.gain):.6g}")
    est = objects_physical_params(dset.objects, grid)
    scale = 1.0 / math.sqrt(p_tx)
    for row, obj in zip(est, dset.objects):
        print(f"detected,{row[0]:.6g},{row[1]:.6g},{row[2]:.6g},{obj.gain_magnitude * scale:.6g}")
    print(f"# scheme={spec.name} estimated_count={dset.estimated_count} snr_db={snr_db:g}", file=sys.stderr)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    grid = cfg.grid()
    sc = _scenario_for_trial(cfg, grid, args.snr_db, trial=0)
    true_np = sc.n_paths if cfg.true_np_override else None
    lines = ["scheme,mean_runtime_s,repeats"]
    for spec in scheme_specs_from_config(cfg):
        mean_s = measure_runtime(spec, sc, args.trials, snr_db=args.snr_db, true_np=true_np)
        lines.append(f"{spec.name},{mean_s:.6g},{args.trials}")
    text = "\n".join(lines)
    print(text)
    if args.out is not None:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def _cmd_crb(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    grid = cfg.grid()
    lines = ["snr_db,crb_angle_deg,crb_distance_m,crb_velocity_kmh,trials"]
    for snr_db in cfg.snr_points():
        sums = np.zeros(3)
        for trial in range(cfg.trials):
            sc = _scenario_for_trial(cfg, grid, snr_db, trial)
            p_tx, p_no = noise_parameters(sc, snr_db)
            bound = crb_evaluate(sc, p_no / p_tx)
            sums += [
                np.mean(np.square(bound.angle_deg)),
                np.mean(np.square(bound.distance_m)),
                np.mean(np.square(bound.velocity_kmh)),
            ]
        rms = np.sqrt(sums / cfg.trials)
        lines.append(f"{snr_db:g},{rms[0]:.6g},{rms[1]:.6g},{rms[2]:.6g},{cfg.trials}")
    text = "\n".join(lines)
    print(text)
    if args.out is not None:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


_COMMANDS = {"run": _cmd_run, "demo": _cmd_demo, "bench": _cmd_bench, "crb": _cmd_crb}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
