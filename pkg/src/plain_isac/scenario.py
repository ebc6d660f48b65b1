"""Radar scene description and synthetic OFDM channel-state tensors.

Conventions used throughout the package:

- angles are azimuths in degrees within ``[0, 180)`` (array broadside at 90),
- delays are one-way propagation times in seconds, ``distance = c * delay``,
- Doppler shifts are one-way in Hz, ``doppler = speed * f_c / c``,
- complex path gains satisfy ``|gain| = sqrt(path_loss * rcs)``.

The channel entry at antenna ``r``, subcarrier ``k``, and symbol ``s`` is

    sum_p gain_p * exp(j*2*pi*(cos(theta_p)*r*da/lambda - tau_p*k*df + nu_p*s*dt))

with antenna spacing ``da``, subcarrier spacing ``df``, and symbol spacing
``dt``.  Indices count from zero, so the first entry of every steering
vector equals one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import k as BOLTZMANN

__all__ = [
    "SPEED_OF_LIGHT",
    "GridSpec",
    "PathParams",
    "Scenario",
    "free_space_path_loss",
    "steering_vectors",
    "synthesize_channel",
    "noise_power_thermal",
    "noise_parameters",
    "add_noise",
    "generate_equidistant_scenario",
    "generate_random_scenario",
    "param_map",
]


@dataclass(frozen=True)
class GridSpec:
    """Sampling grid of the antenna / subcarrier / symbol axes.

    ``symbol_spacing`` is the time between the sensing snapshots of one
    subcarrier, i.e. the total sensing duration divided by ``n_symbols``.
    """

    n_antennas: int
    n_subcarriers: int
    n_symbols: int
    antenna_spacing: float
    subcarrier_spacing: float
    symbol_spacing: float
    carrier_frequency: float

    def __post_init__(self) -> None:
        for name in ("n_antennas", "n_subcarriers", "n_symbols"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ("antenna_spacing", "subcarrier_spacing", "symbol_spacing", "carrier_frequency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_antennas, self.n_subcarriers, self.n_symbols)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def bandwidth(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing


@dataclass(frozen=True)
class PathParams:
    """Parameters of one propagation path (one sensed object)."""

    angle_deg: float
    delay_s: float
    doppler_hz: float
    gain: complex
    path_loss: float | None = None
    rcs: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.angle_deg < 180.0:
            raise ValueError(f"angle {self.angle_deg} deg outside [0, 180)")
        if self.delay_s < 0.0:
            raise ValueError("delay must be non-negative")
        if not np.isfinite(self.doppler_hz):
            raise ValueError("doppler must be finite")
        if self.path_loss is not None and self.rcs is not None:
            expected = math.sqrt(self.path_loss * self.rcs)
            if not math.isclose(abs(self.gain), expected, rel_tol=1e-9, abs_tol=0.0):
                raise ValueError(
                    f"|gain| = {abs(self.gain):.6e} inconsistent with "
                    f"sqrt(path_loss * rcs) = {expected:.6e}"
                )


@dataclass(frozen=True)
class Scenario:
    """A grid plus the set of paths observed on it."""

    grid: GridSpec
    paths: tuple[PathParams, ...]

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def total_gain_power(self) -> float:
        return float(sum(abs(p.gain) ** 2 for p in self.paths))


def free_space_path_loss(distance_m: float, wavelength: float) -> float:
    """One-way free-space power gain ``(lambda / (4*pi*d))**2``."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    return (wavelength / (4.0 * math.pi * distance_m)) ** 2


def steering_vectors(path: PathParams, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-dimension responses of ``path``: spatial, frequency, and time.

    Returns
    -------
    (a, d, v) : tuple of ndarray
        ``a[r] = exp(+j*2*pi/lambda * cos(theta) * r * da)``,
        ``d[k] = exp(-j*2*pi * tau * k * df)``,
        ``v[s] = exp(+j*2*pi * nu * s * dt)``.
    """
    r = np.arange(grid.n_antennas)
    k = np.arange(grid.n_subcarriers)
    s = np.arange(grid.n_symbols)
    a = np.exp(
        1j
        * (2.0 * np.pi / grid.wavelength)
        * math.cos(math.radians(path.angle_deg))
        * grid.antenna_spacing
        * r
    )
    d = np.exp(-1j * 2.0 * np.pi * path.delay_s * grid.subcarrier_spacing * k)
    v = np.exp(1j * 2.0 * np.pi * path.doppler_hz * grid.symbol_spacing * s)
    return a, d, v


def synthesize_channel(sc: Scenario) -> np.ndarray:
    """Noise-free channel-state tensor of shape ``grid.shape``."""
    h = np.zeros(sc.grid.shape, dtype=np.complex128)
    if not sc.paths:
        return h
    factors = [steering_vectors(p, sc.grid) for p in sc.paths]
    a = np.stack([f[0] for f in factors], axis=1)
    d = np.stack([f[1] for f in factors], axis=1)
    v = np.stack([f[2] for f in factors], axis=1)
    gains = np.array([p.gain for p in sc.paths], dtype=np.complex128)
    return np.einsum("rp,kp,sp,p->rks", a, d, v, gains, optimize=True)


def noise_power_thermal(grid: GridSpec, temperature: float = 296.0) -> float:
    """Thermal noise power ``k_B * T * B`` over the occupied bandwidth."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return BOLTZMANN * temperature * grid.bandwidth


def noise_parameters(
    sc: Scenario,
    snr_db: float,
    p_tx: float | None = None,
    temperature: float = 296.0,
) -> tuple[float, float]:
    """Transmit power and per-element noise power hitting a target SNR.

    The scenario SNR is defined as ``p_tx / p_no * sum_p |gain_p|**2``.
    When ``p_tx`` is given, the noise power is solved from it; otherwise the
    noise power is thermal for the grid bandwidth at ``temperature`` and the
    transmit power is solved.  Both paths produce the same ratio.
    """
    gain_power = sc.total_gain_power
    if gain_power <= 0:
        raise ValueError("scenario has no gain power; cannot set an SNR")
    snr = 10.0 ** (snr_db / 10.0)
    if p_tx is None:
        p_no = noise_power_thermal(sc.grid, temperature)
        p_tx = snr * p_no / gain_power
    else:
        if p_tx <= 0:
            raise ValueError("p_tx must be positive")
        p_no = p_tx * gain_power / snr
    return float(p_tx), float(p_no)


def add_noise(
    h: np.ndarray,
    sc: Scenario,
    snr_db: float | None,
    seed,
    p_tx: float | None = None,
    temperature: float = 296.0,
) -> np.ndarray:
    """Scale the channel by ``sqrt(p_tx)`` and add circular white Gaussian noise.

    ``snr_db=None`` (or ``+inf``) disables the noise entirely and returns
    ``sqrt(p_tx) * h`` with ``p_tx`` defaulting to one.  The generator is
    ``numpy.random.default_rng(seed)``, so equal seeds give equal noise.
    """
    h = np.asarray(h)
    if snr_db is None or math.isinf(snr_db):
        scale = math.sqrt(1.0 if p_tx is None else p_tx)
        return scale * h.astype(np.complex128)
    p_tx, p_no = noise_parameters(sc, snr_db, p_tx, temperature)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)
    return math.sqrt(p_tx) * h + math.sqrt(p_no / 2.0) * noise


def _build_paths(
    angles_deg: np.ndarray,
    distances_m: np.ndarray,
    velocities_kmh: np.ndarray,
    grid: GridSpec,
    rng: np.random.Generator,
    path_loss: Callable[[float], float] | None,
    rcs: float,
) -> tuple[PathParams, ...]:
    if path_loss is None:
        wavelength = grid.wavelength
        path_loss = lambda d: free_space_path_loss(d, wavelength)  # noqa: E731
    paths = []
    for angle, dist, vel in zip(angles_deg, distances_m, velocities_kmh):
        pl = float(path_loss(float(dist)))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        gain = math.sqrt(pl * rcs) * np.exp(1j * phase)
        paths.append(
            PathParams(
                angle_deg=float(angle),
                delay_s=float(param_map("delay", dist, grid, "to_internal")),
                doppler_hz=float(param_map("doppler", vel, grid, "to_internal")),
                gain=complex(gain),
                path_loss=pl,
                rcs=rcs,
            )
        )
    return tuple(paths)


def generate_equidistant_scenario(
    n_paths: int,
    angle_range_deg: Sequence[float],
    distance_range_m: Sequence[float],
    velocity_range_kmh: Sequence[float],
    grid: GridSpec,
    seed,
    path_loss: Callable[[float], float] | None = None,
    rcs: float = 1.0,
) -> Scenario:
    """Deterministic deployment: parameters equidistant over their ranges.

    Angles, distances, and velocities are placed on inclusive equidistant
    grids (a single path sits at each range start).  Velocities of the
    even-indexed paths are then forced to zero so roughly half the objects
    are static.  Gain phases are drawn uniformly from ``seed``; magnitudes
    follow the path-loss model (free space by default) and the common RCS.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    angles = np.linspace(angle_range_deg[0], angle_range_deg[1], n_paths)
    distances = np.linspace(distance_range_m[0], distance_range_m[1], n_paths)
    velocities = np.linspace(velocity_range_kmh[0], velocity_range_kmh[1], n_paths)
    velocities[0::2] = 0.0
    rng = np.random.default_rng(seed)
    return Scenario(grid=grid, paths=_build_paths(angles, distances, velocities, grid, rng, path_loss, rcs))


def generate_random_scenario(
    n_paths: int,
    angle_range_deg: Sequence[float],
    distance_range_m: Sequence[float],
    velocity_range_kmh: Sequence[float],
    grid: GridSpec,
    seed,
    path_loss: Callable[[float], float] | None = None,
    rcs: float = 1.0,
) -> Scenario:
    """Arbitrary deployment: parameters drawn uniformly from their ranges.

    Like :func:`generate_equidistant_scenario`, even-indexed paths are
    forced to zero velocity.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(angle_range_deg[0], angle_range_deg[1], n_paths)
    distances = rng.uniform(distance_range_m[0], distance_range_m[1], n_paths)
    velocities = rng.uniform(velocity_range_kmh[0], velocity_range_kmh[1], n_paths)
    velocities[0::2] = 0.0
    return Scenario(grid=grid, paths=_build_paths(angles, distances, velocities, grid, rng, path_loss, rcs))


def param_map(kind: str, value, grid: GridSpec, direction: str):
    """Convert between physical units and the internal estimation units.

    Physical units are degrees, meters, and km/h; internal units are
    degrees, seconds (one-way delay), and Hz (one-way Doppler).  Accepts
    scalars or arrays.
    """
    value = np.asarray(value, dtype=float)
    if direction not in ("to_internal", "to_physical"):
        raise ValueError(f"unknown direction {direction!r}")
    if kind == "angle":
        out = value
    elif kind == "delay":
        out = value / SPEED_OF_LIGHT if direction == "to_internal" else value * SPEED_OF_LIGHT
    elif kind == "doppler":
        hz_per_kmh = grid.carrier_frequency / SPEED_OF_LIGHT / 3.6
        out = value * hz_per_kmh if direction == "to_internal" else value / hz_per_kmh
    else:
        raise ValueError(f"unknown parameter kind {kind!r}")
    return out if out.ndim else float(out)
