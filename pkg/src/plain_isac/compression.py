"""Lossy tensor compression ahead of the estimation stages.

Four per-dimension reductions are supported, all expressible as selection
or averaging matrices applied along a mode:

- ``decimate``: keep every ``step``-th sample, ``n_out = floor(n / step)``,
- ``average``: mean over consecutive blocks of ``step`` samples,
- ``decimate_snapshots``: every decimation offset combination becomes one
  virtual snapshot, concatenated along an appended trailing mode,
- ``smooth``: sliding windows of length ``ceil(n / step)`` at all
  non-wrapping shifts, again stacked as virtual snapshots.

Snapshot-producing schemes cap the snapshot count at ``max_snapshots`` by
sampling the lexicographic shift enumeration (equidistantly by default).
Uniform sample spacings are preserved: the model spacing is multiplied by
``step`` for decimation-like schemes and stays untouched for smoothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor_core import concat_mode

__all__ = [
    "SCHEMES",
    "SNAPSHOT_SCHEMES",
    "CompressionPlan",
    "CompressedInput",
    "decimation_matrix",
    "averaging_matrix",
    "compress",
    "downsample_response",
    "check_resolvability",
]

SCHEMES = ("none", "decimate", "average", "decimate_snapshots", "smooth")
SNAPSHOT_SCHEMES = frozenset({"decimate_snapshots", "smooth"})


@dataclass(frozen=True)
class CompressionPlan:
    """Per-dimension reduction schemes and factors.

    Snapshot-producing schemes cannot be mixed with non-snapshot schemes
    within one plan because a single snapshot count applies globally; use a
    factor of one on dimensions that should stay untouched.
    """

    schemes: tuple[str, ...]
    factors: tuple[int, ...]
    max_snapshots: int = 100
    snapshot_sampling: str = "equidistant"
    sampling_seed: int = 0

    def __post_init__(self) -> None:
        if len(self.schemes) != len(self.factors):
            raise ValueError("schemes and factors must have equal length")
        if not self.schemes:
            raise ValueError("plan must cover at least one dimension")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown compression scheme {s!r}")
        for s, f in zip(self.schemes, self.factors):
            if f < 1:
                raise ValueError("compression factors must be at least 1")
            if s == "none" and f != 1:
                raise ValueError("scheme 'none' requires a factor of 1")
        kinds = {s in SNAPSHOT_SCHEMES for s in self.schemes}
        if kinds == {True, False}:
            raise ValueError("snapshot-producing schemes cannot be mixed with non-snapshot schemes")
        if self.max_snapshots < 1:
            raise ValueError("max_snapshots must be at least 1")
        if self.snapshot_sampling not in ("equidistant", "random"):
            raise ValueError(f"unknown snapshot sampling {self.snapshot_sampling!r}")

    @classmethod
    def uniform(cls, scheme: str, factors: Sequence[int], **kwargs) -> "CompressionPlan":
        """One scheme applied to every dimension with per-dimension factors."""
        factors = tuple(int(f) for f in factors)
        return cls(schemes=(scheme,) * len(factors), factors=factors, **kwargs)

    @property
    def produces_snapshots(self) -> bool:
        return any(s in SNAPSHOT_SCHEMES for s in self.schemes)


@dataclass(frozen=True)
class CompressedInput:
    """Compressed tensor plus the bookkeeping the estimators need.

    ``h_prime`` is M-way for non-snapshot plans and (M+1)-way otherwise with
    the trailing mode enumerating the ``snapshots`` virtual snapshots.
    ``spacing_multipliers`` relate the compressed sample spacing of each
    dimension to the original one.  ``selection_matrices`` hold the
    unshifted per-dimension operators realizing the reduction.
    """

    h_prime: np.ndarray
    snapshots: int
    reduced_lengths: tuple[int, ...]
    spacing_multipliers: tuple[int, ...]
    selection_matrices: tuple[np.ndarray, ...]
    plan: CompressionPlan
    snapshot_shifts: tuple[tuple[int, ...], ...] | None = None

    @property
    def n_modes(self) -> int:
        return len(self.reduced_lengths)

    @property
    def has_snapshot_axis(self) -> bool:
        return self.h_prime.ndim == self.n_modes + 1


def decimation_matrix(n: int, step: int, offset: int = 0) -> np.ndarray:
    """Selection matrix keeping samples ``offset, offset+step, ...`` of ``n``."""
    if not 1 <= step <= n:
        raise ValueError(f"step {step} invalid for length {n}")
    n_out = n // step
    if not 0 <= offset <= n - 1 - (n_out - 1) * step:
        raise ValueError(f"offset {offset} leaves the index range of length {n}")
    j = np.zeros((n_out, n))
    j[np.arange(n_out), offset + step * np.arange(n_out)] = 1.0
    return j


def averaging_matrix(n: int, step: int) -> np.ndarray:
    """Block-averaging matrix with rows of ``step`` entries equal to ``1/step``."""
    if not 1 <= step <= n:
        raise ValueError(f"step {step} invalid for length {n}")
    n_out = n // step
    j = np.zeros((n_out, n))
    for i in range(n_out):
        j[i, i * step : (i + 1) * step] = 1.0 / step
    return j


def _window_matrix(n: int, width: int) -> np.ndarray:
    return np.eye(width, n)


def _reduced_length(n: int, scheme: str, factor: int) -> int:
    if scheme in ("none",):
        return n
    if scheme in ("decimate", "average", "decimate_snapshots"):
        if factor > n:
            raise ValueError(f"factor {factor} exceeds dimension length {n}")
        return n // factor
    if scheme == "smooth":
        if factor > n:
            raise ValueError(f"factor {factor} exceeds dimension length {n}")
        return math.ceil(n / factor)
    raise ValueError(f"unknown compression scheme {scheme!r}")


def _decimate_axis(x: np.ndarray, axis: int, step: int, offset: int = 0) -> np.ndarray:
    n_out = x.shape[axis] // step
    idx = offset + step * np.arange(n_out)
    return np.take(x, idx, axis=axis)


def _average_axis(x: np.ndarray, axis: int, step: int) -> np.ndarray:
    n_out = x.shape[axis] // step
    xm = np.moveaxis(x, axis, -1)[..., : n_out * step]
    xm = xm.reshape(xm.shape[:-1] + (n_out, step)).mean(axis=-1)
    return np.moveaxis(xm, -1, axis)


def _sample_shift_tuples(
    counts: Sequence[int], cap: int, sampling: str, seed: int
) -> list[tuple[int, ...]]:
    """Deterministic subset of the lexicographic shift enumeration."""
    total = int(np.prod(counts, dtype=np.int64))
    if total <= cap:
        flat = np.arange(total)
    elif sampling == "equidistant":
        flat = np.round(np.linspace(0, total - 1, cap)).astype(np.int64)
    else:
        rng = np.random.default_rng(seed)
        flat = np.sort(rng.choice(total, size=cap, replace=False))
    grids = np.unravel_index(flat, tuple(counts))
    return [tuple(int(g[i]) for g in grids) for i in range(len(flat))]


def compress(h: np.ndarray, plan: CompressionPlan) -> CompressedInput:
    """Apply ``plan`` to an M-way tensor.

    Non-snapshot plans return an M-way tensor; snapshot plans return an
    (M+1)-way tensor whose trailing mode stacks the shifted copies, the
    all-zero shift first.
    """
    h = np.asarray(h)
    if h.ndim != len(plan.schemes):
        raise ValueError(f"plan covers {len(plan.schemes)} dimensions, tensor has {h.ndim}")
    lengths = h.shape
    reduced = tuple(_reduced_length(n, s, f) for n, s, f in zip(lengths, plan.schemes, plan.factors))
    multipliers = tuple(1 if s in ("none", "smooth") else f for s, f in zip(plan.schemes, plan.factors))

    matrices = []
    for n, s, f in zip(lengths, plan.schemes, plan.factors):
        if s == "none":
            matrices.append(np.eye(n))
        elif s in ("decimate", "decimate_snapshots"):
            matrices.append(decimation_matrix(n, f))
        elif s == "average":
            matrices.append(averaging_matrix(n, f))
        else:
            matrices.append(_window_matrix(n, math.ceil(n / f)))

    if not plan.produces_snapshots:
        out = h
        for axis, (s, f) in enumerate(zip(plan.schemes, plan.factors)):
            if s == "decimate":
                out = _decimate_axis(out, axis, f)
            elif s == "average":
                out = _average_axis(out, axis, f)
        return CompressedInput(
            h_prime=out,
            snapshots=1,
            reduced_lengths=reduced,
            spacing_multipliers=multipliers,
            selection_matrices=tuple(matrices),
            plan=plan,
        )

    shift_counts = tuple(
        f if s == "decimate_snapshots" else n - w + 1
        for n, s, f, w in zip(lengths, plan.schemes, plan.factors, reduced)
    )
    shifts = _sample_shift_tuples(shift_counts, plan.max_snapshots, plan.snapshot_sampling, plan.sampling_seed)

    parts = []
    for shift in shifts:
        part = h
        for axis, (s, f, off, w) in enumerate(zip(plan.schemes, plan.factors, shift, reduced)):
            if s == "decimate_snapshots":
                part = _decimate_axis(part, axis, f, off)
            else:
                sel = (slice(None),) * axis + (slice(off, off + w),)
                part = part[sel]
        parts.append(part)
    out = concat_mode(parts, h.ndim)
    return CompressedInput(
        h_prime=out,
        snapshots=len(shifts),
        reduced_lengths=reduced,
        spacing_multipliers=multipliers,
        selection_matrices=tuple(matrices),
        plan=plan,
        snapshot_shifts=tuple(shifts),
    )


def downsample_response(u: np.ndarray, plan: CompressionPlan, m: int) -> np.ndarray:
    """Map a full-length dimension response onto the compressed grid.

    Decimation-like schemes (including averaging, which shares the decimated
    input-output model) keep every ``step``-th sample; smoothing keeps the
    leading window.
    """
    u = np.asarray(u)
    if not 0 <= m < len(plan.schemes):
        raise ValueError(f"dimension {m} outside the plan")
    scheme = plan.schemes[m]
    factor = plan.factors[m]
    n = u.shape[0]
    n_out = _reduced_length(n, scheme, factor)
    if scheme in ("none",):
        return u.copy()
    if scheme == "smooth":
        return u[:n_out].copy()
    return u[: n_out * factor : factor].copy()


def check_resolvability(compressed, n_paths: int) -> bool:
    """True iff every compressed dimension keeps at least ``n_paths`` samples."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    lengths = compressed.reduced_lengths if isinstance(compressed, CompressedInput) else tuple(compressed)
    return min(lengths) >= n_paths
