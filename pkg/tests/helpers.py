"""Shared builders for the test suite."""

from __future__ import annotations

import math

import numpy as np

from plain_isac.scenario import GridSpec, PathParams, Scenario

C_LIGHT = 299792458.0
CARRIER = 26e9
WAVELENGTH = C_LIGHT / CARRIER


def make_grid(n_antennas=4, n_subcarriers=8, n_symbols=6, subcarrier_spacing=60e3,
              symbol_spacing=1e-4, carrier=CARRIER, spacing_factor=0.5):
    wavelength = C_LIGHT / carrier
    return GridSpec(
        n_antennas=n_antennas,
        n_subcarriers=n_subcarriers,
        n_symbols=n_symbols,
        antenna_spacing=spacing_factor * wavelength,
        subcarrier_spacing=subcarrier_spacing,
        symbol_spacing=symbol_spacing,
        carrier_frequency=carrier,
    )


def base_grid():
    """Full-size sampling grid used by the end-to-end checks."""
    return GridSpec(
        n_antennas=16,
        n_subcarriers=180,
        n_symbols=560,
        antenna_spacing=0.5 * WAVELENGTH,
        subcarrier_spacing=60e3,
        symbol_spacing=10e-3 / 560,
        carrier_frequency=CARRIER,
    )


def make_scenario(grid, triples, gains=None):
    """Scenario from (angle_deg, delay_s, doppler_hz) triples, unit gains by default."""
    paths = []
    for i, (angle, delay, doppler) in enumerate(triples):
        gain = 1.0 + 0.0j if gains is None else complex(gains[i])
        paths.append(PathParams(angle_deg=float(angle), delay_s=float(delay),
                                doppler_hz=float(doppler), gain=gain))
    return Scenario(grid=grid, paths=tuple(paths))


def separated_values(rng, n, low, high, min_sep, max_tries=500):
    """Draw n values uniformly in [low, high] with pairwise separation >= min_sep."""
    if (high - low) <= (n - 1) * min_sep:
        raise ValueError("interval too small for the requested separation")
    for _ in range(max_tries):
        vals = np.sort(rng.uniform(low, high, size=n))
        if n == 1 or float(np.min(np.diff(vals))) >= min_sep:
            return vals[rng.permutation(n)]
    raise AssertionError("could not draw separated values")


def fraction_scenario(rng, grid, n_paths, min_sep=0.1, unit_gains=False):
    """Random scenario with parameters drawn as phase fractions.

    The per-dimension phase advance per sample is kept inside the
    unambiguous band with a pairwise margin, so every dimension is
    resolvable on small grids regardless of absolute spacings.
    """
    cos_frac = separated_values(rng, n_paths, 0.08, 0.92, min_sep)
    delay_frac = separated_values(rng, n_paths, 0.04, 0.90, min_sep)
    doppler_frac = separated_values(rng, n_paths, -0.44, 0.44, min_sep)
    paths = []
    for p in range(n_paths):
        angle = math.degrees(math.acos(2.0 * cos_frac[p] - 1.0))
        delay = delay_frac[p] / grid.subcarrier_spacing
        doppler = doppler_frac[p] / grid.symbol_spacing
        if unit_gains:
            gain = complex(np.exp(2j * np.pi * rng.uniform()))
        else:
            gain = (0.5 + rng.uniform(0.0, 1.5)) * np.exp(2j * np.pi * rng.uniform())
        paths.append(PathParams(angle_deg=angle, delay_s=delay,
                                doppler_hz=doppler, gain=complex(gain)))
    return Scenario(grid=grid, paths=tuple(paths))


def crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def rel_err(actual, expected):
    actual = np.asarray(actual)
    expected = np.asarray(expected)
    denom = max(float(np.max(np.abs(expected))), 1e-300)
    return float(np.max(np.abs(actual - expected))) / denom
