"""Deterministic estimation bounds against finite-difference references."""

import numpy as np
import pytest

import helpers
import oracles
import property_checks
from plain_isac.crb import crb_evaluate, fim, jacobian, parameter_layout
from plain_isac.scenario import Scenario


def _tuples(sc):
    return [(p.angle_deg, p.delay_s, p.doppler_hz, p.gain) for p in sc.paths]


def test_parameter_layout_groups_by_path():
    layout = parameter_layout(2)
    assert layout == ["angle_0", "delay_0", "doppler_0", "re_gain_0", "im_gain_0",
                      "angle_1", "delay_1", "doppler_1", "re_gain_1", "im_gain_1"]


def test_jacobian_matches_finite_differences():
    grid = helpers.make_grid(4, 6, 5)
    sc = helpers.make_scenario(grid, [(60.0, 2.5e-7, 400.0), (112.0, 6.1e-7, -220.0)],
                               gains=[0.8 - 0.3j, 0.5j])
    analytic = jacobian(sc)
    numeric = oracles.fd_jacobian(grid, _tuples(sc))
    assert analytic.shape == numeric.shape == (4 * 6 * 5, 10)
    assert helpers.rel_err(analytic, numeric) < 1e-6


def test_fim_matches_finite_differences():
    grid = helpers.make_grid(4, 6, 5)
    sc = helpers.make_scenario(grid, [(75.0, 3.0e-7, 550.0)], gains=[1.2 - 0.1j])
    noise_var = 0.05
    analytic = fim(sc, noise_var)
    numeric = oracles.fd_fim(grid, _tuples(sc), noise_var)
    assert helpers.rel_err(analytic, numeric) < 1e-5


def test_single_path_bound_frozen_values():
    sc = helpers.make_scenario(helpers.make_grid(8, 32, 24),
                               [(75.0, 4.0e-7, 500.0)], gains=[0.9 - 0.4j])
    report = crb_evaluate(sc, 0.02)
    assert not report.singular
    assert report.noise_var == 0.02
    assert report.angle_deg[0] == pytest.approx(0.010674262022079451, rel=1e-6)
    assert report.distance_m[0] == pytest.approx(0.11156575780560296, rel=1e-6)
    assert report.velocity_kmh[0] == pytest.approx(0.012362753711630703, rel=1e-6)


def test_bound_scales_with_noise_power():
    sc = helpers.make_scenario(helpers.make_grid(6, 12, 10),
                               [(80.0, 3e-7, 600.0)], gains=[1.0])
    low = crb_evaluate(sc, 0.01)
    high = crb_evaluate(sc, 0.04)
    # variance bounds are linear in the noise power, deviations are sqrt(4) = 2
    assert high.angle_deg[0] == pytest.approx(2 * low.angle_deg[0], rel=1e-9)
    assert high.distance_m[0] == pytest.approx(2 * low.distance_m[0], rel=1e-9)
    assert high.velocity_kmh[0] == pytest.approx(2 * low.velocity_kmh[0], rel=1e-9)


def test_larger_apertures_tighten_their_dimension():
    base = helpers.make_scenario(helpers.make_grid(6, 12, 10),
                                 [(80.0, 3e-7, 600.0)], gains=[1.0])
    more_antennas = helpers.make_scenario(helpers.make_grid(12, 12, 10),
                                          [(80.0, 3e-7, 600.0)], gains=[1.0])
    more_symbols = helpers.make_scenario(helpers.make_grid(6, 12, 40),
                                         [(80.0, 3e-7, 600.0)], gains=[1.0])
    b0 = crb_evaluate(base, 0.02)
    b1 = crb_evaluate(more_antennas, 0.02)
    b2 = crb_evaluate(more_symbols, 0.02)
    assert b1.angle_deg[0] < b0.angle_deg[0] / 2
    assert b2.velocity_kmh[0] < b0.velocity_kmh[0] / 4


def test_duplicate_paths_reported_singular():
    grid = helpers.make_grid(4, 6, 5)
    sc = helpers.make_scenario(grid, [(70.0, 3e-7, 500.0), (70.0, 3e-7, 500.0)],
                               gains=[1.0, 1.0])
    report = crb_evaluate(sc, 0.02)
    assert report.singular
    assert np.all(np.isinf(report.angle_deg))
    assert report.condition > 1e12 or np.isinf(report.condition)


def test_two_path_bounds_match_finite_differences():
    grid = helpers.make_grid(6, 10, 8)
    sc = helpers.make_scenario(grid, [(60.0, 2.5e-7, 700.0), (115.0, 6.5e-7, -300.0)],
                               gains=[1.0, 0.7 + 0.4j])
    noise_var = 0.03
    report = crb_evaluate(sc, noise_var)
    assert not report.singular
    cov = np.linalg.inv(oracles.fd_fim(grid, _tuples(sc), noise_var))
    sd = np.sqrt(np.diag(cov))
    for p in range(2):
        angle = np.degrees(sd[5 * p])
        dist = sd[5 * p + 1] * oracles.C_LIGHT
        vel = sd[5 * p + 2] * oracles.C_LIGHT / grid.carrier_frequency * 3.6
        assert report.angle_deg[p] == pytest.approx(angle, rel=1e-4)
        assert report.distance_m[p] == pytest.approx(dist, rel=1e-4)
        assert report.velocity_kmh[p] == pytest.approx(vel, rel=1e-4)


@pytest.mark.parametrize("check", property_checks.ALL_CHECKS["crb"],
                         ids=lambda c: c.__name__)
def test_properties(check):
    property_checks.run_cases(check, 101)
