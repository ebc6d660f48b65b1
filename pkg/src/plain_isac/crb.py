"""Deterministic Cramer-Rao bounds for the uncompressed channel tensor.

The observation model is the noise-free tensor plus circular white Gaussian
noise of per-element variance ``noise_var``; path parameters and complex
gains are treated as deterministic unknowns.  Every Jacobian column is a
rank-1 combination of per-dimension factors, so the Fisher information is
assembled from small per-dimension Gram matrices instead of the full
Jacobian.  The bound ignores compression and any estimator structure, which
makes it a lower reference for all pipelines in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import SPEED_OF_LIGHT, Scenario, steering_vectors

__all__ = ["CrbReport", "parameter_layout", "fim", "jacobian", "crb_evaluate"]

# Parameters per path, in column order: angle (radians), delay (seconds),
# doppler (Hz), Re(gain), Im(gain).
PARAMS_PER_PATH = 5

# Condition number beyond which the information matrix is reported singular.
MAX_CONDITION = 1e14


@dataclass(frozen=True)
class CrbReport:
    """Per-path standard-deviation bounds in physical units.

    Entries are ``inf`` when the information matrix is numerically
    singular; ``condition`` carries the diagnostic either way.
    """

    angle_deg: np.ndarray
    distance_m: np.ndarray
    velocity_kmh: np.ndarray
    noise_var: float
    condition: float
    singular: bool


def parameter_layout(n_paths: int) -> list[str]:
    """Column labels of the Fisher information / Jacobian."""
    labels = []
    for p in range(n_paths):
        labels += [f"angle_{p}", f"delay_{p}", f"doppler_{p}", f"re_gain_{p}", f"im_gain_{p}"]
    return labels


def _factor_matrices(sc: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-dimension factors of every Jacobian column, stacked column-wise."""
    grid = sc.grid
    r = np.arange(grid.n_antennas)
    k = np.arange(grid.n_subcarriers)
    s = np.arange(grid.n_symbols)
    fa, fd, fv = [], [], []
    for path in sc.paths:
        a, d, v = steering_vectors(path, grid)
        theta = math.radians(path.angle_deg)
        da = a * (-1j * 2.0 * np.pi / grid.wavelength * grid.antenna_spacing * math.sin(theta) * r)
        dd = d * (-1j * 2.0 * np.pi * grid.subcarrier_spacing * k)
        dv = v * (1j * 2.0 * np.pi * grid.symbol_spacing * s)
        beta = path.gain
        fa += [beta * da, beta * a, beta * a, a, 1j * a]
        fd += [d, dd, d, d, d]
        fv += [v, v, dv, v, v]
    return (
        np.stack(fa, axis=1),
        np.stack(fd, axis=1),
        np.stack(fv, axis=1),
    )


def jacobian(sc: Scenario) -> np.ndarray:
    """Explicit Jacobian of the vectorized tensor (row-major) vs. parameters.

    Materializes one column per parameter; intended for small grids and for
    validating :func:`fim` against finite differences.
    """
    xa, xd, xv = _factor_matrices(sc)
    n_cols = xa.shape[1]
    size = sc.grid.n_antennas * sc.grid.n_subcarriers * sc.grid.n_symbols
    j = np.empty((size, n_cols), dtype=np.complex128)
    for c in range(n_cols):
        j[:, c] = np.multiply.outer(np.multiply.outer(xa[:, c], xd[:, c]), xv[:, c]).ravel()
    return j


def fim(sc: Scenario, noise_var: float) -> np.ndarray:
    """Fisher information ``(2 / noise_var) * Re(J^H J)`` without forming J."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    if sc.n_paths == 0:
        raise ValueError("scenario has no paths")
    xa, xd, xv = _factor_matrices(sc)
    gram = (xa.conj().T @ xa) * (xd.conj().T @ xd) * (xv.conj().T @ xv)
    return (2.0 / noise_var) * np.real(gram)


def crb_evaluate(sc: Scenario, noise_var: float) -> CrbReport:
    """Standard-deviation bounds per path, mapped to degrees, meters, km/h.

    The information matrix mixes SI units whose scales differ by many
    orders of magnitude (seconds of delay against meters of antenna
    aperture), so it is equilibrated symmetrically by its diagonal before
    conditioning is judged or the inverse is taken.
    """
    info = fim(sc, noise_var)
    n = sc.n_paths
    diag = np.diag(info).copy()
    if np.any(diag <= 0) or not np.all(np.isfinite(diag)):
        inf_arr = np.full(n, np.inf)
        return CrbReport(inf_arr, inf_arr.copy(), inf_arr.copy(), float(noise_var), np.inf, True)
    scale = 1.0 / np.sqrt(diag)
    balanced = info * scale[:, None] * scale[None, :]
    condition = float(np.linalg.cond(balanced))
    singular = not math.isfinite(condition) or condition > MAX_CONDITION
    if singular:
        inf_arr = np.full(n, np.inf)
        return CrbReport(inf_arr, inf_arr.copy(), inf_arr.copy(), float(noise_var), condition, True)
    cov = np.linalg.solve(balanced, np.eye(balanced.shape[0]))
    variances = np.diag(cov) * scale**2
    idx = np.arange(n) * PARAMS_PER_PATH
    sigma_angle_rad = np.sqrt(np.maximum(variances[idx + 0], 0.0))
    sigma_delay = np.sqrt(np.maximum(variances[idx + 1], 0.0))
    sigma_doppler = np.sqrt(np.maximum(variances[idx + 2], 0.0))
    kmh_per_hz = SPEED_OF_LIGHT / sc.grid.carrier_frequency * 3.6
    return CrbReport(
        angle_deg=np.degrees(sigma_angle_rad),
        distance_m=sigma_delay * SPEED_OF_LIGHT,
        velocity_kmh=sigma_doppler * kmh_per_hz,
        noise_var=float(noise_var),
        condition=condition,
        singular=False,
    )
