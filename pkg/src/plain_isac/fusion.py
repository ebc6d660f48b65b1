"""Fusing per-dimension estimates into multidimensional objects.

The decoupled stage returns independently sorted parameter lists per
dimension; this module recovers which entries belong together.  A core
tensor over the response columns is computed either in one least-squares
step (pseudo-inverse along every mode) or greedily with orthogonal matching
pursuit, paths are ranked by mean core power over virtual snapshots, and
the strongest combinations become the detected objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .compression import CompressedInput
from .estimation import DimensionEstimate, DimensionSpec, estimate_dimension
from .tensor_core import mode_product, outer_rank1

__all__ = [
    "CoreEstimate",
    "DetectedObject",
    "DetectedObjectSet",
    "ls_fuse",
    "rank_paths",
    "select_objects",
    "omp_fuse",
    "estimate_gains",
    "plain_detect",
    "iterative_refine",
]

# Relative singular-value cutoff of the pseudo-inverses used in fusion.
PINV_RCOND = 1e-10


@dataclass(frozen=True)
class CoreEstimate:
    """Core tensor over per-dimension components.

    ``core`` has one axis per dimension (sized like the per-dimension model
    orders) plus a trailing snapshot axis when the compressed input carries
    virtual snapshots.
    """

    core: np.ndarray
    method: str
    has_snapshot_axis: bool
    flags: tuple[str, ...] = ()

    @property
    def mean_power(self) -> np.ndarray:
        p = np.abs(self.core) ** 2
        return p.mean(axis=-1) if self.has_snapshot_axis else p


@dataclass(frozen=True)
class DetectedObject:
    """One fused object: per-dimension parameters in internal units."""

    params: tuple[float, ...]
    gain_magnitude: float
    indices: tuple[int, ...] | None = None


@dataclass(frozen=True)
class DetectedObjectSet:
    """Detected objects plus bookkeeping for reporting.

    ``estimated_count`` is the max-rule object count before any override;
    ``alternates`` lists ranked-but-unselected candidates (used to pad when
    a fixed object count is requested downstream).
    """

    objects: tuple[DetectedObject, ...]
    estimated_count: int
    alternates: tuple[DetectedObject, ...] = ()
    flags: tuple[str, ...] = ()

    @property
    def n_detected(self) -> int:
        return len(self.objects)


def _pinv(mat: np.ndarray) -> tuple[np.ndarray, bool]:
    """Pseudo-inverse with a fixed relative cutoff; flags rank deficiency."""
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0:
        raise ValueError("cannot invert an empty matrix")
    cutoff = s[0] * PINV_RCOND
    rank = int(np.sum(s > cutoff))
    inv_s = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    pinv = (vh.conj().T * inv_s) @ u.conj().T
    return pinv, rank < min(mat.shape)


def ls_fuse(compressed: CompressedInput, estimates: Sequence[DimensionEstimate]) -> CoreEstimate:
    """Least-squares core: pseudo-invert every response matrix along its mode."""
    if len(estimates) != compressed.n_modes:
        raise ValueError("one estimate per tensor dimension is required")
    flags: list[str] = []
    core = compressed.h_prime
    for m, est in enumerate(estimates):
        if est.responses.shape[1] == 0:
            raise ValueError(f"dimension {m} has no components to fuse")
        pinv, deficient = _pinv(est.responses)
        if deficient:
            flags.append(f"rank_deficient_mode_{m}")
        core = mode_product(core, pinv, m)
    return CoreEstimate(
        core=core,
        method="ls",
        has_snapshot_axis=compressed.has_snapshot_axis,
        flags=tuple(flags),
    )


def rank_paths(core: CoreEstimate) -> list[tuple[int, ...]]:
    """Index combinations ordered by descending mean power.

    Ties break lexicographically, so the ordering is a deterministic
    function of the core values.
    """
    power = core.mean_power
    order = np.argsort(-power.ravel(), kind="stable")
    return [tuple(int(i) for i in np.unravel_index(f, power.shape)) for f in order]


def select_objects(
    orders: Sequence[int],
    ranked: Sequence[tuple[int, ...]],
    true_np: int | None = None,
) -> list[tuple[int, ...]]:
    """Truncate the ranked combination list at the max-rule object count.

    The object count is the maximum per-dimension model order unless
    ``true_np`` overrides it.  All-zero orders yield an empty selection.
    """
    if true_np is not None:
        if true_np < 1:
            raise ValueError("true_np must be at least 1")
        count = int(true_np)
    else:
        count = max((int(o) for o in orders), default=0)
    if count == 0:
        return []
    if not ranked:
        raise ValueError("ranked combination list is empty but components were detected")
    return list(ranked[:count])


def _ordered_unique(values: Sequence[int]) -> list[int]:
    return list(dict.fromkeys(values))


def _match_scores(resid: np.ndarray, estimates, has_snapshots: bool) -> np.ndarray:
    t = resid
    for m, est in enumerate(estimates):
        t = mode_product(t, est.responses.conj().T, m)
    p = np.abs(t) ** 2
    return p.sum(axis=-1) if has_snapshots else p


def omp_fuse(
    compressed: CompressedInput,
    estimates: Sequence[DimensionEstimate],
    max_iters: int,
) -> tuple[list[tuple[int, ...]], CoreEstimate]:
    """Greedy fusion: repeatedly match, augment, and re-fit a partial core.

    Each iteration correlates the residual with every response combination,
    adds the strongest index tuple, refits a least-squares core restricted
    to the columns selected so far, and subtracts the reconstruction.  The
    returned core is embedded at the original index positions (entries off
    the selected sub-grid stay zero).  Selecting an already-chosen tuple
    cannot improve the fit, so the loop flags it and stops early.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if len(estimates) != compressed.n_modes:
        raise ValueError("one estimate per tensor dimension is required")
    for m, est in enumerate(estimates):
        if est.responses.shape[1] == 0:
            raise ValueError(f"dimension {m} has no components to fuse")
    h_prime = compressed.h_prime
    has_snapshots = compressed.has_snapshot_axis
    orders = tuple(est.responses.shape[1] for est in estimates)
    core_shape = orders + ((compressed.snapshots,) if has_snapshots else ())

    selected: list[tuple[int, ...]] = []
    flags: list[str] = []
    resid = h_prime
    sub_core = None
    col_lists: list[list[int]] = [[] for _ in estimates]
    for _ in range(max_iters):
        scores = _match_scores(resid, estimates, has_snapshots)
        pick = tuple(int(i) for i in np.unravel_index(int(np.argmax(scores)), scores.shape))
        if pick in selected:
            flags.append("stagnation")
            break
        selected.append(pick)
        col_lists = [_ordered_unique([s[m] for s in selected]) for m in range(len(estimates))]
        sub_core = h_prime
        sub_mats = []
        for m, est in enumerate(estimates):
            mat = est.responses[:, col_lists[m]]
            sub_mats.append(mat)
            pinv, deficient = _pinv(mat)
            if deficient and "rank_deficient_submatrix" not in flags:
                flags.append("rank_deficient_submatrix")
            sub_core = mode_product(sub_core, pinv, m)
        recon = sub_core
        for m, mat in enumerate(sub_mats):
            recon = mode_product(recon, mat, m)
        resid = h_prime - recon

    core = np.zeros(core_shape, dtype=np.complex128)
    if sub_core is not None:
        ix = [np.asarray(c) for c in col_lists]
        if has_snapshots:
            ix.append(np.arange(compressed.snapshots))
        core[np.ix_(*ix)] = sub_core
    return selected, CoreEstimate(
        core=core,
        method="omp",
        has_snapshot_axis=has_snapshots,
        flags=tuple(flags),
    )


def estimate_gains(core: CoreEstimate, objects: Sequence[tuple[int, ...]]) -> np.ndarray:
    """Gain magnitudes ``sqrt(mean_s |core[idx]|**2)`` per object.

    With averaging compression, each response column is attenuated by the
    in-block phase spread, so the magnitudes carry that factor (close to
    one for slowly varying dimensions).
    """
    power = core.mean_power
    return np.array([math.sqrt(float(power[idx])) for idx in objects])


def _detect_once(
    compressed: CompressedInput,
    specs: Sequence[DimensionSpec],
    algos: Sequence[str],
    use_fba: bool,
    method: str,
    true_np: int | None,
    oversampling: int,
) -> tuple[DetectedObjectSet, list[DimensionEstimate], CoreEstimate | None]:
    estimates = [
        estimate_dimension(compressed, m, specs[m], algo=algos[m], use_fba=use_fba, oversampling=oversampling)
        for m in range(compressed.n_modes)
    ]
    aic_orders = [est.model_order for est in estimates]
    estimated_count = max(aic_orders, default=0)
    n_target = int(true_np) if true_np is not None else estimated_count
    flags: list[str] = []
    if n_target == 0:
        return DetectedObjectSet(objects=(), estimated_count=0), estimates, None

    # Fusion needs at least one component per dimension; re-estimate empty
    # dimensions with a forced single component.
    for m, est in enumerate(estimates):
        if est.model_order == 0:
            estimates[m] = estimate_dimension(
                compressed, m, specs[m], algo=algos[m], use_fba=use_fba,
                oversampling=oversampling, force_order=1,
            )
            flags.append(f"forced_order_mode_{m}")

    if method == "ls":
        core = ls_fuse(compressed, estimates)
        ranked = rank_paths(core)
        chosen = select_objects(aic_orders, ranked, true_np)
    elif method == "omp":
        chosen, core = omp_fuse(compressed, estimates, max_iters=n_target)
        ranked = rank_paths(core)
    else:
        raise ValueError(f"unknown fusion method {method!r}")

    rest = [idx for idx in ranked if idx not in set(chosen)]
    gains = estimate_gains(core, chosen + rest)

    def build(idx: tuple[int, ...], gain: float) -> DetectedObject:
        params = tuple(float(estimates[m].params[idx[m]]) for m in range(len(idx)))
        return DetectedObject(params=params, gain_magnitude=float(gain), indices=idx)

    objects = tuple(build(idx, g) for idx, g in zip(chosen, gains[: len(chosen)]))
    alternates = tuple(build(idx, g) for idx, g in zip(rest, gains[len(chosen) :]))
    for est in estimates:
        flags.extend(est.flags)
    dset = DetectedObjectSet(
        objects=objects,
        estimated_count=estimated_count,
        alternates=alternates,
        flags=tuple(flags),
    )
    return dset, estimates, core


def plain_detect(
    compressed: CompressedInput,
    specs: Sequence[DimensionSpec],
    algos: Sequence[str] | None = None,
    use_fba: bool = True,
    method: str = "omp",
    true_np: int | None = None,
    clean_rounds: int = 1,
    oversampling: int = 4,
) -> DetectedObjectSet:
    """Complete decoupled detection on a compressed tensor.

    Estimates every dimension independently, fuses with ``method`` (``ls``
    or ``omp``), and selects the strongest combinations.  ``true_np``
    overrides the max-rule object count.  ``clean_rounds > 1`` repeats the
    detection on the residual after subtracting the found objects.
    """
    if algos is None:
        algos = ("root_music",) * compressed.n_modes
    if len(algos) != compressed.n_modes:
        raise ValueError("one algorithm per dimension is required")
    if clean_rounds < 1:
        raise ValueError("clean_rounds must be at least 1")
    if clean_rounds > 1:
        return iterative_refine(
            compressed, specs, rounds=clean_rounds, algos=algos, use_fba=use_fba,
            method=method, true_np=true_np, oversampling=oversampling,
        )
    dset, _, _ = _detect_once(compressed, specs, algos, use_fba, method, true_np, oversampling)
    return dset


def _phase_distance(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2.0 * math.pi))


def _is_duplicate(obj: DetectedObject, kept: Sequence[DetectedObject], specs) -> bool:
    for other in kept:
        close = True
        for m, spec in enumerate(specs):
            bin_width = 2.0 * math.pi / spec.length
            mu_a = spec.phase_per_sample(obj.params[m])
            mu_b = spec.phase_per_sample(other.params[m])
            if _phase_distance(mu_a, mu_b) >= 0.5 * bin_width:
                close = False
                break
        if close:
            return True
    return False


def _reconstruct_objects(
    compressed: CompressedInput,
    specs: Sequence[DimensionSpec],
    objects: Sequence[DetectedObject],
) -> np.ndarray:
    """Least-squares reconstruction of ``objects`` from the compressed tensor."""
    h_prime = compressed.h_prime
    cols = [
        [spec.response(obj.params[m]) for obj in objects]
        for m, spec in enumerate(specs)
    ]
    atoms = np.stack(
        [outer_rank1([cols[m][p] for m in range(len(specs))]).ravel() for p in range(len(objects))],
        axis=1,
    )
    if compressed.has_snapshot_axis:
        data = h_prime.reshape(-1, compressed.snapshots)
    else:
        data = h_prime.reshape(-1, 1)
    amps, *_ = np.linalg.lstsq(atoms, data, rcond=None)
    recon = (atoms @ amps).reshape(h_prime.shape)
    return recon


def iterative_refine(
    compressed: CompressedInput,
    specs: Sequence[DimensionSpec],
    rounds: int,
    algos: Sequence[str] | None = None,
    use_fba: bool = True,
    method: str = "omp",
    true_np: int | None = None,
    oversampling: int = 4,
) -> DetectedObjectSet:
    """Detect, subtract, and re-detect on the residual up to ``rounds`` times.

    Newly found objects are merged unless they fall within half a
    compressed-grid bin of an already declared object in every dimension.
    The loop stops early when a round adds nothing or increases the
    residual energy.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if algos is None:
        algos = ("root_music",) * compressed.n_modes
    declared: list[DetectedObject] = []
    flags: list[str] = []
    estimated_count = 0
    current = compressed
    prev_energy = float(np.linalg.norm(compressed.h_prime)) ** 2
    for round_idx in range(rounds):
        dset, _, _ = _detect_once(current, specs, algos, use_fba, method, true_np, oversampling)
        if round_idx == 0:
            estimated_count = dset.estimated_count
            first_alternates = dset.alternates
        new = [obj for obj in dset.objects if not _is_duplicate(obj, declared, specs)]
        if not new:
            break
        declared.extend(new)
        if round_idx == rounds - 1:
            break
        recon = _reconstruct_objects(compressed, specs, declared)
        resid = compressed.h_prime - recon
        energy = float(np.linalg.norm(resid)) ** 2
        if energy >= prev_energy:
            flags.append("residual_energy_increase")
            break
        prev_energy = energy
        current = replace(compressed, h_prime=resid)
    return DetectedObjectSet(
        objects=tuple(declared),
        estimated_count=estimated_count,
        alternates=tuple(first_alternates) if declared else (),
        flags=tuple(flags),
    )
