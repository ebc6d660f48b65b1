"""Monte-Carlo RMSE sweeps, seeding, CSV output, and runtime measurement.

Every trial derives its random streams deterministically from the master
seed, the SNR point, the trial index, and a purpose tag, so results are
reproducible bit for bit and independent of execution order or worker
count.  All schemes of one trial see the same scenario and the same noise
realization, which makes scheme comparisons paired.

The ``runtime_s`` CSV column is written as 0 unless per-trial timing is
explicitly requested, because the output contract is byte-deterministic
for a fixed (config, seed) pair and wall-clock never is.  Runtime
comparisons use :func:`measure_runtime` instead.

Set the environment variable ``PLAIN_THREADS`` to a worker count to run
trials in parallel processes; the default is serial execution.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import EspritConfig, sequential_estimate, tensor_esprit
from .compression import CompressionPlan, compress
from .config import ExperimentConfig
from .crb import crb_evaluate
from .estimation import dimension_specs
from .fusion import DetectedObject, DetectedObjectSet, plain_detect
from .scenario import (
    GridSpec,
    Scenario,
    add_noise,
    generate_equidistant_scenario,
    generate_random_scenario,
    noise_parameters,
    param_map,
    synthesize_channel,
)

__all__ = [
    "CSV_COLUMNS",
    "SchemeSpec",
    "TrialRecord",
    "RmseReport",
    "rmse",
    "scenario_physical_params",
    "objects_physical_params",
    "trial_seed",
    "run_scheme",
    "run_trial",
    "run_sweep",
    "scheme_specs_from_config",
    "aggregate_records",
    "write_csv",
    "read_csv",
    "measure_runtime",
    "worker_count",
]

CSV_COLUMNS = (
    "scheme",
    "snr_db",
    "trial",
    "rmse_angle_deg",
    "rmse_distance_m",
    "rmse_velocity_kmh",
    "crb_angle_deg",
    "crb_distance_m",
    "crb_velocity_kmh",
    "n_detected",
    "runtime_s",
    "failed",
)

# purpose tags for the per-trial seed streams
SCENARIO_STREAM = 0
NOISE_STREAM = 1


@dataclass(frozen=True)
class SchemeSpec:
    """One labeled estimation pipeline entering a sweep."""

    name: str
    kind: str
    plan: CompressionPlan | None = None
    fusion: str = "omp"
    algos: tuple[str, str, str] | None = None
    use_fba: bool = True
    oversampling: int = 4
    clean_rounds: int = 1
    esprit: EspritConfig | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("plain", "sequential", "tensor-esprit"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "plain" and self.plan is None:
            raise ValueError("a plain scheme needs a compression plan")


@dataclass(frozen=True)
class TrialRecord:
    """One CSV row: a single scheme on a single trial of one SNR point."""

    scheme: str
    snr_db: float
    trial: int
    rmse_angle_deg: float
    rmse_distance_m: float
    rmse_velocity_kmh: float
    crb_angle_deg: float
    crb_distance_m: float
    crb_velocity_kmh: float
    n_detected: int
    runtime_s: float
    failed: bool

    def as_row(self) -> list[str]:
        return [
            self.scheme,
            _fmt(self.snr_db),
            str(self.trial),
            _fmt(self.rmse_angle_deg),
            _fmt(self.rmse_distance_m),
            _fmt(self.rmse_velocity_kmh),
            _fmt(self.crb_angle_deg),
            _fmt(self.crb_distance_m),
            _fmt(self.crb_velocity_kmh),
            str(self.n_detected),
            _fmt(self.runtime_s),
            "1" if self.failed else "0",
        ]


@dataclass(frozen=True)
class RmseReport:
    """Aggregate of all trials of one scheme at one SNR point."""

    scheme: str
    snr_db: float
    n_trials: int
    rmse_angle_deg: float
    rmse_distance_m: float
    rmse_velocity_kmh: float
    crb_angle_deg: float
    crb_distance_m: float
    crb_velocity_kmh: float
    mean_runtime_s: float
    failure_rate: float

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("a report needs at least one trial")
        for name in ("rmse_angle_deg", "rmse_distance_m", "rmse_velocity_kmh"):
            value = getattr(self, name)
            if math.isfinite(value) and value < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError("failure_rate must lie in [0, 1]")


def rmse(true_params, est_params, sort_dim: int = 0) -> np.ndarray:
    """Per-dimension RMSE after canonical sorting.

    Both parameter sets, arrays of shape (n_paths, n_dims), are sorted
    ascending by their own ``sort_dim`` column and that permutation is
    applied to every column, so the pairing is order-free.  Units are
    whatever the caller passes in.
    """
    t = np.asarray(true_params, dtype=float)
    e = np.asarray(est_params, dtype=float)
    if t.ndim != 2 or t.shape != e.shape:
        raise ValueError(f"parameter sets must share a (paths, dims) shape, got {t.shape} vs {e.shape}")
    if not 0 <= sort_dim < t.shape[1]:
        raise ValueError(f"sort_dim {sort_dim} out of range for {t.shape[1]} dimensions")
    t = t[np.argsort(t[:, sort_dim], kind="stable")]
    e = e[np.argsort(e[:, sort_dim], kind="stable")]
    return np.sqrt(np.mean((t - e) ** 2, axis=0))


def scenario_physical_params(sc: Scenario) -> np.ndarray:
    """Truth as an (n_paths, 3) array of degrees, meters, km/h."""
    grid = sc.grid
    rows = np.empty((sc.n_paths, 3))
    for i, path in enumerate(sc.paths):
        rows[i, 0] = path.angle_deg
        rows[i, 1] = param_map("delay", path.delay_s, grid, "to_physical")
        rows[i, 2] = param_map("doppler", path.doppler_hz, grid, "to_physical")
    return rows


def objects_physical_params(objects: Sequence[DetectedObject], grid: GridSpec) -> np.ndarray:
    """Detected objects as an (n, 3) array of degrees, meters, km/h."""
    rows = np.empty((len(objects), 3))
    for i, obj in enumerate(objects):
        rows[i, 0] = obj.params[0]
        rows[i, 1] = param_map("delay", obj.params[1], grid, "to_physical")
        rows[i, 2] = param_map("doppler", obj.params[2], grid, "to_physical")
    return rows


def trial_seed(master_seed: int, snr_db: float, trial: int, purpose: int) -> np.random.SeedSequence:
    """Deterministic per-(SNR, trial, purpose) seed stream.

    The SNR enters as an integer key in millidecibels so arbitrarily
    fine sweep steps stay distinct.
    """
    snr_key = int(round(float(snr_db) * 1000.0)) & 0xFFFFFFFF
    return np.random.SeedSequence([int(master_seed), snr_key, int(trial), int(purpose)])


def _scenario_for_trial(cfg: ExperimentConfig, grid: GridSpec, snr_db: float, trial: int) -> Scenario:
    seed = trial_seed(cfg.seed, snr_db, trial, SCENARIO_STREAM)
    maker = generate_equidistant_scenario if cfg.scenario_mode == "equidistant" else generate_random_scenario
    return maker(
        cfg.n_objects,
        cfg.angle_range_deg,
        cfg.distance_range_m,
        cfg.velocity_range_kmh,
        grid,
        seed,
    )


def run_scheme(
    spec: SchemeSpec,
    h: np.ndarray,
    grid: GridSpec,
    true_np: int | None,
) -> DetectedObjectSet:
    """Execute one pipeline (compression included) on a ready tensor."""
    if spec.kind == "plain":
        comp = compress(h, spec.plan)
        dspecs = dimension_specs(grid, comp)
        return plain_detect(
            comp,
            dspecs,
            algos=spec.algos,
            use_fba=spec.use_fba,
            method=spec.fusion,
            true_np=true_np,
            clean_rounds=spec.clean_rounds,
            oversampling=spec.oversampling,
        )
    if spec.kind == "sequential":
        return sequential_estimate(h, grid, dft_oversampling=spec.oversampling, use_fba=spec.use_fba)
    return tensor_esprit(h, grid, cfg=spec.esprit, true_np=true_np)


def _pad_objects(dset: DetectedObjectSet, n_target: int) -> tuple[list[DetectedObject], bool]:
    """Enforce exactly n_target objects for RMSE pairing.

    Surplus detections are trimmed to the strongest by gain; shortfalls are
    padded from the ranked-but-unselected candidates.  If those run out the
    trial is a failure.
    """
    objs = list(dset.objects)
    if len(objs) > n_target:
        strongest = sorted(range(len(objs)), key=lambda i: -objs[i].gain_magnitude)[:n_target]
        objs = [objs[i] for i in sorted(strongest)]
    pool = list(dset.alternates)
    while len(objs) < n_target and pool:
        objs.append(pool.pop(0))
    return objs, len(objs) < n_target


def _crb_rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(np.asarray(values, dtype=float)))))


def run_trial(
    schemes: Sequence[SchemeSpec],
    sc: Scenario,
    snr_db: float,
    noise_seed,
    sort_dim: int = 0,
    true_np_override: bool = True,
    time_trials: bool = False,
    trial: int = 0,
) -> list[TrialRecord]:
    """All schemes on one noisy realization of one scenario."""
    grid = sc.grid
    truth = scenario_physical_params(sc)
    h = synthesize_channel(sc)
    y = add_noise(h, sc, snr_db, noise_seed)
    p_tx, p_no = noise_parameters(sc, snr_db)
    bound = crb_evaluate(sc, p_no / p_tx)
    crb_row = (_crb_rms(bound.angle_deg), _crb_rms(bound.distance_m), _crb_rms(bound.velocity_kmh))
    true_np = sc.n_paths if true_np_override else None

    records = []
    for spec in schemes:
        start = time.perf_counter()
        try:
            dset = run_scheme(spec, y, grid, true_np)
            error = None
        except Exception as exc:  # noqa: BLE001 - a failing trial is a data point
            dset = DetectedObjectSet(objects=(), estimated_count=0)
            error = exc
        elapsed = time.perf_counter() - start
        objs, short = _pad_objects(dset, sc.n_paths)
        failed = error is not None or short
        if failed:
            errs = (math.nan, math.nan, math.nan)
        else:
            est = objects_physical_params(objs, grid)
            errs = tuple(float(v) for v in rmse(truth, est, sort_dim))
        records.append(
            TrialRecord(
                scheme=spec.name,
                snr_db=float(snr_db),
                trial=int(trial),
                rmse_angle_deg=errs[0],
                rmse_distance_m=errs[1],
                rmse_velocity_kmh=errs[2],
                crb_angle_deg=crb_row[0],
                crb_distance_m=crb_row[1],
                crb_velocity_kmh=crb_row[2],
                n_detected=int(dset.estimated_count),
                runtime_s=elapsed if time_trials else 0.0,
                failed=failed,
            )
        )
    return records


def _trial_task(task) -> list[TrialRecord]:
    cfg, specs, snr_db, trial, time_trials = task
    grid = cfg.grid()
    sc = _scenario_for_trial(cfg, grid, snr_db, trial)
    noise_seed = trial_seed(cfg.seed, snr_db, trial, NOISE_STREAM)
    return run_trial(
        specs,
        sc,
        snr_db,
        noise_seed,
        sort_dim=cfg.sort_dim,
        true_np_override=cfg.true_np_override,
        time_trials=time_trials,
        trial=trial,
    )


def scheme_specs_from_config(cfg: ExperimentConfig) -> list[SchemeSpec]:
    specs = []
    for token in cfg.schemes:
        if token == "plain":
            specs.append(
                SchemeSpec(
                    name="plain",
                    kind="plain",
                    plan=cfg.compression_plan(),
                    fusion=cfg.fusion_method,
                    algos=(cfg.algorithm,) * 3,
                    use_fba=cfg.use_fba,
                    oversampling=cfg.oversampling,
                    clean_rounds=cfg.clean_rounds,
                )
            )
        elif token == "sequential":
            specs.append(
                SchemeSpec(name="sequential", kind="sequential", use_fba=False, oversampling=cfg.oversampling)
            )
        else:
            specs.append(SchemeSpec(name="tensor-esprit", kind="tensor-esprit", esprit=cfg.esprit_config()))
    return specs


def worker_count(n_tasks: int) -> int:
    """Worker processes to use: PLAIN_THREADS when set, otherwise 1."""
    raw = os.environ.get("PLAIN_THREADS")
    if raw is None:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        raise ValueError(f"PLAIN_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(workers, max(n_tasks, 1)))


def run_sweep(
    cfg: ExperimentConfig,
    time_trials: bool = False,
) -> tuple[list[TrialRecord], list[RmseReport]]:
    """Full SNR sweep over all configured schemes.

    Returns the per-trial records (CSV rows, ordered by scheme, SNR,
    trial) and their per-(scheme, SNR) aggregates.  Identical inputs give
    identical outputs regardless of the worker count.
    """
    specs = scheme_specs_from_config(cfg)
    tasks = [
        (cfg, specs, snr_db, trial, time_trials)
        for snr_db in cfg.snr_points()
        for trial in range(cfg.trials)
    ]
    workers = worker_count(len(tasks))
    if workers > 1:
        chunksize = max(1, len(tasks) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_trial_task, tasks, chunksize=chunksize))
    else:
        chunks = [_trial_task(task) for task in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.scheme, r.snr_db, r.trial))
    return records, aggregate_records(records)


def aggregate_records(records: Sequence[TrialRecord]) -> list[RmseReport]:
    """Collapse trial rows into one report per (scheme, SNR).

    The aggregate RMSE is the root of the mean squared error over all
    non-failed trials, which equals the RMSE of the concatenated error
    sample because every trial carries the same number of paths.
    """
    groups: dict[tuple[str, float], list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.scheme, rec.snr_db), []).append(rec)
    reports = []
    for (scheme, snr_db), rows in sorted(groups.items()):
        ok = [r for r in rows if not r.failed]

        def agg(field: str) -> float:
            if not ok:
                return math.nan
            return float(np.sqrt(np.mean([getattr(r, field) ** 2 for r in ok])))

        reports.append(
            RmseReport(
                scheme=scheme,
                snr_db=snr_db,
                n_trials=len(rows),
                rmse_angle_deg=agg("rmse_angle_deg"),
                rmse_distance_m=agg("rmse_distance_m"),
                rmse_velocity_kmh=agg("rmse_velocity_kmh"),
                crb_angle_deg=float(np.mean([r.crb_angle_deg for r in rows])),
                crb_distance_m=float(np.mean([r.crb_distance_m for r in rows])),
                crb_velocity_kmh=float(np.mean([r.crb_velocity_kmh for r in rows])),
                mean_runtime_s=float(np.mean([r.runtime_s for r in rows])),
                failure_rate=sum(r.failed for r in rows) / len(rows),
            )
        )
    return reports


def _fmt(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".12g")


def write_csv(records: Sequence[TrialRecord], path: str | Path) -> None:
    """Write trial rows with a platform-independent byte layout."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.as_row())


def read_csv(path: str | Path) -> list[TrialRecord]:
    """Parse a results file back into records (round-trip of write_csv)."""
    records = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}")
        for row in reader:
            records.append(
                TrialRecord(
                    scheme=row["scheme"],
                    snr_db=float(row["snr_db"]),
                    trial=int(row["trial"]),
                    rmse_angle_deg=float(row["rmse_angle_deg"]),
                    rmse_distance_m=float(row["rmse_distance_m"]),
                    rmse_velocity_kmh=float(row["rmse_velocity_kmh"]),
                    crb_angle_deg=float(row["crb_angle_deg"]),
                    crb_distance_m=float(row["crb_distance_m"]),
                    crb_velocity_kmh=float(row["crb_velocity_kmh"]),
                    n_detected=int(row["n_detected"]),
                    runtime_s=float(row["runtime_s"]),
                    failed=row["failed"] == "1",
                )
            )
    return records


def measure_runtime(
    spec: SchemeSpec,
    sc: Scenario,
    repeats: int,
    snr_db: float | None = None,
    noise_seed: int = 0,
    true_np: int | None = None,
) -> float:
    """Mean wall-clock seconds of the estimation pipeline alone.

    Scenario synthesis and noise generation happen once, outside the
    timed region; compression is part of the pipeline and is timed.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    h = synthesize_channel(sc)
    y = add_noise(h, sc, snr_db, noise_seed)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        run_scheme(spec, y, sc.grid, true_np)
        times.append(time.perf_counter() - start)
    return float(np.mean(times))
