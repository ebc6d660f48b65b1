"""Reference pipelines the decoupled architecture is compared against.

``sequential_estimate`` first resolves angles with root-MUSIC on the
antenna mode, beamforms the tensor into per-angle time-frequency slices,
and picks the strongest oversampled 2-D DFT peak per slice; it therefore
inherits the DFT grid resolution and emits one object per distinct angle.

``tensor_esprit`` smooths the tensor into virtual snapshots, estimates
per-mode signal subspaces via a parallel truncated HOSVD, solves the
per-mode shift-invariance equations, and pairs the mode eigenvalues by
jointly triangularizing the three operators with a common unitary basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .compression import CompressionPlan, compress
from .estimation import DimensionSpec, _ic_order, dimension_specs, estimate_dimension
from .fusion import DetectedObject, DetectedObjectSet, _pinv
from .scenario import GridSpec, Scenario
from .tensor_core import mode_product, unfold

__all__ = [
    "EspritConfig",
    "sequential_estimate",
    "bic_order",
    "hosvd_subspaces",
    "joint_diagonalize",
    "tensor_esprit",
]


@dataclass(frozen=True)
class EspritConfig:
    """Knobs of the tensor subspace baseline.

    ``smoothing_factors`` control the per-dimension window shrinkage (a
    factor of one leaves a dimension whole); ``max_virtual_snapshots`` caps
    the stacked windows; ``max_sweeps`` bounds the joint-diagonalization
    refinement.
    """

    smoothing_factors: tuple[int, int, int] = (1, 2, 2)
    max_virtual_snapshots: int = 32
    max_sweeps: int = 20
    sampling_seed: int = 0

    def __post_init__(self) -> None:
        if any(f < 1 for f in self.smoothing_factors):
            raise ValueError("smoothing factors must be at least 1")
        if self.max_virtual_snapshots < 1:
            raise ValueError("max_virtual_snapshots must be at least 1")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be non-negative")


def bic_order(eigenvalues, n_samples: int, max_order: int | None = None) -> int:
    """Bayesian information criterion analogue of ``aic_order``.

    Uses the penalty ``k * (2n - k) * log(n_samples) / 2``, which grows with
    the sample count and therefore selects more conservatively.
    """
    return _ic_order(
        eigenvalues,
        n_samples,
        max_order,
        lambda k, n: 0.5 * k * (2 * n - k) * math.log(n_samples),
    )


def sequential_estimate(
    h: np.ndarray,
    grid: GridSpec,
    dft_oversampling: int = 4,
    use_fba: bool = False,
) -> DetectedObjectSet:
    """Two-stage baseline: angles first, then one 2-D DFT peak per angle."""
    if dft_oversampling < 1:
        raise ValueError("dft_oversampling must be at least 1")
    h = np.asarray(h)
    if h.shape != grid.shape:
        raise ValueError(f"tensor shape {h.shape} does not match the grid {grid.shape}")
    identity_plan = CompressionPlan.uniform("none", (1, 1, 1))
    comp = compress(h, identity_plan)
    specs = dimension_specs(grid, comp)
    angle_est = estimate_dimension(comp, 0, specs[0], algo="root_music", use_fba=use_fba)
    if angle_est.model_order == 0:
        return DetectedObjectSet(objects=(), estimated_count=0)

    pinv_a, _ = _pinv(angle_est.responses)
    h_tf = mode_product(h, pinv_a, 0)

    n_delay = dft_oversampling * grid.n_subcarriers
    n_doppler = dft_oversampling * grid.n_symbols
    objects = []
    for q, angle in enumerate(angle_est.params):
        tf_slice = h_tf[q]
        # Delay enters with a negative phase slope, so the inverse transform
        # matches it; Doppler is positive, matched by the forward transform.
        z = np.fft.fft(np.fft.ifft(tf_slice, n=n_delay, axis=0), n=n_doppler, axis=1)
        power = np.abs(z) ** 2
        u, v = np.unravel_index(int(np.argmax(power)), power.shape)
        delay = (u / n_delay) / grid.subcarrier_spacing
        doppler_cycles = v / n_doppler
        if doppler_cycles > 0.5:
            doppler_cycles -= 1.0
        doppler = doppler_cycles / grid.symbol_spacing
        gain = float(np.abs(z[u, v]) * n_delay / (grid.n_subcarriers * grid.n_symbols))
        objects.append(
            DetectedObject(params=(float(angle), float(delay), float(doppler)), gain_magnitude=gain)
        )
    return DetectedObjectSet(objects=tuple(objects), estimated_count=angle_est.model_order)


def hosvd_subspaces(
    h: np.ndarray,
    orders: Sequence[int],
    n_global: int | None = None,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Per-mode orthonormal bases and a global signal subspace.

    The first ``len(orders)`` modes are factored independently (left
    singular bases of the mode unfoldings, truncated per mode); any
    remaining trailing mode is treated as observations.  The global
    subspace has ``n_global`` columns (default: max of ``orders``) and is
    assembled by projecting onto the per-mode bases and expanding the
    dominant left singular vectors of the projected core.
    """
    h = np.asarray(h)
    orders = [int(o) for o in orders]
    if len(orders) not in (h.ndim, h.ndim - 1):
        raise ValueError("orders must cover all modes or all but a trailing snapshot mode")
    if any(o < 1 for o in orders):
        raise ValueError("per-mode orders must be at least 1 (degenerate mode)")
    bases = []
    for m, order in enumerate(orders):
        x = unfold(h, m)
        if order > x.shape[0]:
            raise ValueError(f"order {order} exceeds mode length {x.shape[0]}")
        gram = x @ x.conj().T
        _, vecs = np.linalg.eigh(gram)
        bases.append(vecs[:, ::-1][:, :order])
    core = h
    for m, basis in enumerate(bases):
        core = mode_product(core, basis.conj().T, m)
    core_mat = core.reshape(int(np.prod(core.shape[: len(orders)])), -1)
    if n_global is None:
        n_global = max(orders)
    if n_global > min(core_mat.shape):
        raise ValueError(
            f"global subspace of {n_global} columns needs a core with at least "
            f"that many rows and observations, got {core_mat.shape}"
        )
    w, _, _ = np.linalg.svd(core_mat, full_matrices=False)
    w = w[:, :n_global]
    subspace = np.empty((int(np.prod(h.shape[: len(orders)])), n_global), dtype=np.complex128)
    core_shape = tuple(core.shape[: len(orders)])
    for col in range(n_global):
        t = w[:, col].reshape(core_shape)
        for m, basis in enumerate(bases):
            t = mode_product(t, basis, m)
        subspace[:, col] = t.ravel()
    return bases, subspace


def _rotation_candidates(block: np.ndarray) -> list[complex]:
    """Roots of the 2x2 annihilation quadratic for one matrix."""
    a_pp, a_pq = block[0, 0], block[0, 1]
    a_qp, a_qq = block[1, 0], block[1, 1]
    coeffs = np.array([a_pq, -(a_qq - a_pp), -a_qp])
    if abs(coeffs[0]) < 1e-300:
        if abs(coeffs[1]) < 1e-300:
            return []
        return [complex(coeffs[2] / coeffs[1])] if abs(coeffs[1]) > 0 else []
    return [complex(r) for r in np.roots(coeffs)]


def _lower_energy(mats: Sequence[np.ndarray]) -> float:
    return float(sum(np.sum(np.abs(np.tril(m, -1)) ** 2) for m in mats))


def joint_diagonalize(
    mats: Sequence[np.ndarray],
    max_sweeps: int = 20,
    tol: float = 1e-24,
) -> tuple[np.ndarray, list[np.ndarray], list[float], bool]:
    """Common unitary basis triangularizing a family of matrices.

    Initializes with the Schur basis of a fixed complex-weighted combination
    (exact for commuting families) and refines with Jacobi-type sweeps: for
    every index pair the candidate Givens rotations annihilating one
    matrix's subdiagonal entry are tried and applied only when the family's
    strictly-lower energy decreases, so the recorded energy history is
    non-increasing.  Returns the basis, the transformed matrices, the
    per-sweep energy history, and a convergence flag.
    """
    mats = [np.asarray(m, dtype=np.complex128) for m in mats]
    if not mats:
        raise ValueError("need at least one matrix")
    n = mats[0].shape[0]
    for m in mats:
        if m.shape != (n, n):
            raise ValueError("all matrices must be square and equally sized")
    scale = sum(float(np.linalg.norm(m)) ** 2 for m in mats)
    weights = [np.exp(1j * 0.7390851332151607 * (i + 1)) for i in range(len(mats))]
    combo = sum(w * m for w, m in zip(weights, mats))
    _, q = scipy.linalg.schur(combo, output="complex")
    transformed = [q.conj().T @ m @ q for m in mats]
    energy = _lower_energy(transformed)
    history = [energy]
    threshold = tol * max(scale, 1e-300)
    for _ in range(max_sweeps):
        if energy <= threshold:
            break
        improved = False
        for p in range(n - 1):
            for r in range(p + 1, n):
                best_tau = None
                best_energy = energy
                candidates: list[complex] = []
                for mat in transformed:
                    block = mat[np.ix_([p, r], [p, r])]
                    candidates.extend(_rotation_candidates(block))
                for tau in candidates:
                    c = 1.0 / math.sqrt(1.0 + abs(tau) ** 2)
                    s = tau * c
                    giv = np.eye(n, dtype=np.complex128)
                    giv[p, p] = c
                    giv[r, r] = c
                    giv[p, r] = -np.conj(s)
                    giv[r, p] = s
                    trial = [giv.conj().T @ mmat @ giv for mmat in transformed]
                    e = _lower_energy(trial)
                    if e < best_energy - 1e-18 * max(scale, 1.0):
                        best_energy = e
                        best_tau = tau
                if best_tau is not None:
                    c = 1.0 / math.sqrt(1.0 + abs(best_tau) ** 2)
                    s = best_tau * c
                    giv = np.eye(n, dtype=np.complex128)
                    giv[p, p] = c
                    giv[r, r] = c
                    giv[p, r] = -np.conj(s)
                    giv[r, p] = s
                    transformed = [giv.conj().T @ mmat @ giv for mmat in transformed]
                    q = q @ giv
                    energy = best_energy
                    improved = True
        history.append(energy)
        if not improved:
            break
    converged = energy <= max(threshold, 1e-10 * max(scale, 1e-300))
    return q, transformed, history, converged


def _smoothing_shifts(shape, windows, cfg: EspritConfig):
    from .compression import _sample_shift_tuples

    counts = tuple(n - w + 1 for n, w in zip(shape, windows))
    return _sample_shift_tuples(counts, cfg.max_virtual_snapshots, "equidistant", cfg.sampling_seed)


def tensor_esprit(
    h: np.ndarray,
    grid: GridSpec,
    cfg: EspritConfig | None = None,
    true_np: int | None = None,
) -> DetectedObjectSet:
    """Tensor subspace baseline with automatic cross-dimension pairing.

    Smoothing windows are never materialized as one big tensor; per-mode
    Grams and projected cores are accumulated window by window.
    """
    if cfg is None:
        cfg = EspritConfig()
    h = np.asarray(h)
    if h.shape != grid.shape:
        raise ValueError(f"tensor shape {h.shape} does not match the grid {grid.shape}")
    windows = tuple(math.ceil(n / f) for n, f in zip(h.shape, cfg.smoothing_factors))
    if any(w < 2 for w in windows):
        raise ValueError("every smoothed window must keep at least two samples")
    shifts = _smoothing_shifts(h.shape, windows, cfg)
    n_snap = len(shifts)

    grams = [np.zeros((w, w), dtype=np.complex128) for w in windows]
    for shift in shifts:
        block = h[tuple(slice(o, o + w) for o, w in zip(shift, windows))]
        for m in range(3):
            x = unfold(block, m)
            grams[m] += x @ x.conj().T

    total = n_snap * int(np.prod(windows, dtype=np.int64))
    bases_full = []
    mode_orders = []
    eigars = []
    for m in range(3):
        n_cols = total // windows[m]
        vals, vecs = np.linalg.eigh(grams[m] / n_cols)
        vals = vals[::-1]
        vecs = vecs[:, ::-1]
        eigars.append(vals)
        bases_full.append(vecs)
        mode_orders.append(bic_order(vals, n_cols, max_order=windows[m] - 1))

    n_paths = int(true_np) if true_np is not None else max(mode_orders)
    if n_paths == 0:
        return DetectedObjectSet(objects=(), estimated_count=0)
    ranks = [max(o, 1) for o in mode_orders]
    ranks = [min(r, w) for r, w in zip(ranks, windows)]
    # The Kronecker basis must be able to carry n_paths columns.
    guard = 0
    while int(np.prod(ranks, dtype=np.int64)) < n_paths:
        m = guard % 3
        if ranks[m] < min(windows[m], n_paths):
            ranks[m] += 1
        guard += 1
        if guard > 3 * max(windows):
            raise RuntimeError("cannot assemble a signal subspace of the requested size")
    bases = [b[:, :r] for b, r in zip(bases_full, ranks)]

    core_cols = np.empty((int(np.prod(ranks, dtype=np.int64)), n_snap), dtype=np.complex128)
    for s_idx, shift in enumerate(shifts):
        block = h[tuple(slice(o, o + w) for o, w in zip(shift, windows))]
        core = block
        for m, basis in enumerate(bases):
            core = mode_product(core, basis.conj().T, m)
        core_cols[:, s_idx] = core.ravel()
    w_mat, _, _ = np.linalg.svd(core_cols, full_matrices=False)
    if w_mat.shape[1] < n_paths:
        raise RuntimeError("not enough virtual snapshots for the requested subspace size")
    w_mat = w_mat[:, :n_paths]

    subspace = np.empty((int(np.prod(windows, dtype=np.int64)), n_paths), dtype=np.complex128)
    for col in range(n_paths):
        t = w_mat[:, col].reshape(tuple(ranks))
        for m, basis in enumerate(bases):
            t = mode_product(t, basis, m)
        subspace[:, col] = t.ravel()

    sub_tensor = subspace.reshape(windows + (n_paths,))
    operators = []
    for m in range(3):
        first = [slice(None)] * 4
        second = [slice(None)] * 4
        first[m] = slice(0, windows[m] - 1)
        second[m] = slice(1, windows[m])
        g1 = sub_tensor[tuple(first)].reshape(-1, n_paths)
        g2 = sub_tensor[tuple(second)].reshape(-1, n_paths)
        psi, *_ = np.linalg.lstsq(g1, g2, rcond=None)
        operators.append(psi)

    _, transformed, _, converged = joint_diagonalize(operators, max_sweeps=cfg.max_sweeps)
    flags = () if converged else ("joint_diagonalization_not_converged",)

    base_spacings = (grid.antenna_spacing, grid.subcarrier_spacing, grid.symbol_spacing)
    kinds = ("angle", "delay", "doppler")
    specs = [
        DimensionSpec(kind=k, length=w, sample_spacing=sp,
                      wavelength=grid.wavelength if k == "angle" else None)
        for k, w, sp in zip(kinds, windows, base_spacings)
    ]
    params = np.empty((n_paths, 3))
    for m in range(3):
        eigs = np.diag(transformed[m])
        for p in range(n_paths):
            params[p, m] = specs[m].param_from_phase(float(np.angle(eigs[p])))[0]

    gains = _gain_magnitudes(h, grid, params)
    objects = tuple(
        DetectedObject(params=tuple(float(x) for x in params[p]), gain_magnitude=float(gains[p]))
        for p in range(n_paths)
    )
    return DetectedObjectSet(objects=objects, estimated_count=max(mode_orders), flags=flags)


def _gain_magnitudes(h: np.ndarray, grid: GridSpec, params: np.ndarray) -> np.ndarray:
    """Least-squares gain magnitudes via separable normal equations."""
    base_spacings = (grid.antenna_spacing, grid.subcarrier_spacing, grid.symbol_spacing)
    kinds = ("angle", "delay", "doppler")
    lengths = grid.shape
    cols = []
    for m in range(3):
        spec = DimensionSpec(kind=kinds[m], length=lengths[m], sample_spacing=base_spacings[m],
                             wavelength=grid.wavelength if kinds[m] == "angle" else None)
        cols.append(np.stack([spec.response(float(v)) for v in params[:, m]], axis=1))
    gram = (cols[0].conj().T @ cols[0]) * (cols[1].conj().T @ cols[1]) * (cols[2].conj().T @ cols[2])
    rhs = np.einsum("rp,kp,sp,rks->p", cols[0].conj(), cols[1].conj(), cols[2].conj(), h, optimize=True)
    amps, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    return np.abs(amps)
