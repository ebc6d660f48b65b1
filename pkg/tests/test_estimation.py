"""Per-dimension estimation: covariance, order selection, root polynomial search."""

import math

import numpy as np
import pytest

import helpers
import oracles
import property_checks
from plain_isac.compression import CompressionPlan, compress
from plain_isac.estimation import (DimensionSpec, aic_order, dft_estimate,
                                   dimension_specs, estimate_dimension, fba,
                                   mode_autocorrelation, reconstruct_responses,
                                   root_music)
from plain_isac.scenario import synthesize_channel


def _none(h):
    return compress(h, CompressionPlan.uniform("none", (1, 1, 1)))


def test_mode_autocorrelation_matches_reference():
    rng = np.random.default_rng(17)
    t = helpers.crandn(rng, (4, 5, 6))
    for m in range(3):
        r = mode_autocorrelation(t, m)
        assert r.shape == (t.shape[m], t.shape[m])
        assert helpers.rel_err(r, oracles.naive_autocorrelation(t, m)) < 1e-13


def test_mode_autocorrelation_folds_snapshot_axis():
    # a 4th axis contributes extra columns, not a separate treatment
    rng = np.random.default_rng(18)
    t = helpers.crandn(rng, (4, 5, 6, 3))
    r = mode_autocorrelation(t, 1)
    assert r.shape == (5, 5)
    assert helpers.rel_err(r, oracles.naive_autocorrelation(t, 1)) < 1e-13


def test_fba_formula():
    rng = np.random.default_rng(19)
    x = helpers.crandn(rng, (5, 9))
    r = x @ x.conj().T / 9
    j = np.eye(5)[::-1]
    assert helpers.rel_err(fba(r), 0.5 * (r + j @ r.conj() @ j)) < 1e-14


def test_fba_lifts_coherent_rank():
    # two fully correlated tones are rank one until the backward pass splits them
    n = 8
    a = np.stack([oracles.response_vector(n, 0.8), oracles.response_vector(n, 2.0)], axis=1)
    x = a @ np.array([1.0, 1.0])
    r = np.outer(x, x.conj())
    before = np.linalg.matrix_rank(r, tol=1e-9)
    after = np.linalg.matrix_rank(fba(r), tol=1e-9)
    assert before == 1 and after == 2


def test_aic_frozen_example():
    """Two strong components among six eigenvalues, one thousand samples."""
    eigs = np.array([100.0, 100.0, 1.0, 1.0, 1.0, 1.0])
    assert aic_order(eigs, 1000) == 2
    values = oracles.aic_values(eigs, 1000)
    # all-ones tails make the likelihood term vanish; only the penalty remains
    assert values[2:] == pytest.approx([40.0, 54.0, 64.0, 70.0], abs=1e-9)
    assert values[0] == pytest.approx(23895.64555144157, rel=1e-12)
    assert values[1] == pytest.approx(21161.18949509654, rel=1e-12)


def test_aic_order_agrees_with_reference_sweep():
    rng = np.random.default_rng(23)
    for _ in range(60):
        n = int(rng.integers(4, 10))
        k = int(rng.integers(0, n - 1))
        eigs = np.concatenate([np.sort(rng.uniform(5, 50, size=k))[::-1],
                               np.sort(rng.uniform(0.9, 1.1, size=n - k))[::-1]])
        n_samples = int(rng.integers(50, 5000))
        assert aic_order(eigs, n_samples) == oracles.argmin_order(
            oracles.aic_values(eigs, n_samples))


def test_aic_max_order_clamp():
    eigs = np.array([50.0, 40.0, 30.0, 1.0, 1.0, 1.0])
    assert aic_order(eigs, 500, max_order=2) <= 2


def test_aic_handles_zero_eigenvalues():
    # exact zeros appear for noiseless rank-deficient covariances
    eigs = np.array([10.0, 5.0, 0.0, 0.0, 0.0])
    order = aic_order(eigs, 200)
    assert order == 2


def test_root_music_recovers_two_tones():
    n = 12
    mus = np.array([-2.2, -0.7])
    a = np.stack([oracles.response_vector(n, mu) for mu in mus], axis=1)
    r = a @ np.diag([2.0, 1.0]) @ a.conj().T + 0.01 * np.eye(n)
    spec = DimensionSpec(kind="delay", length=n, sample_spacing=60e3, wavelength=0.0115)
    params = np.sort(root_music(r, 2, spec))
    expected = np.sort(-mus / (2 * math.pi * 60e3))
    assert np.allclose(params, expected, rtol=1e-6)


def test_root_music_order_must_leave_noise_subspace():
    spec = DimensionSpec(kind="delay", length=4, sample_spacing=60e3, wavelength=0.0115)
    r = np.eye(4, dtype=complex)
    with pytest.raises(ValueError):
        root_music(r, 4, spec)


def test_dimension_specs_scale_sample_spacing():
    grid = helpers.base_grid()
    h = synthesize_channel(helpers.make_scenario(grid, [(75.0, 4e-7, 500.0)]))
    dec = compress(h, CompressionPlan.uniform("decimate", (1, 4, 14)))
    specs = dimension_specs(grid, dec)
    assert [s.kind for s in specs] == ["angle", "delay", "doppler"]
    assert specs[0].sample_spacing == pytest.approx(grid.antenna_spacing)
    assert specs[1].sample_spacing == pytest.approx(4 * grid.subcarrier_spacing)
    assert specs[2].sample_spacing == pytest.approx(14 * grid.symbol_spacing)
    smooth = compress(h, CompressionPlan.uniform("smooth", (1, 4, 14)))
    specs_s = dimension_specs(grid, smooth)
    # smoothing shrinks windows but keeps the original sample spacing
    assert specs_s[1].sample_spacing == pytest.approx(grid.subcarrier_spacing)
    assert specs_s[1].length == 45


def test_estimate_dimension_exact_on_noiseless_channel():
    grid = helpers.make_grid(8, 16, 12)
    triples = [(55.0, 2.1e-7, 900.0), (95.0, 5.3e-7, -400.0), (130.0, 8.0e-7, 1600.0)]
    sc = helpers.make_scenario(grid, triples)
    comp = _none(synthesize_channel(sc))
    specs = dimension_specs(grid, comp)
    expected = np.array(triples)
    for m in range(3):
        est = estimate_dimension(comp, m, specs[m])
        assert est.model_order == 3
        scale = np.max(np.abs(expected[:, m]))
        assert np.allclose(np.sort(est.params), np.sort(expected[:, m]),
                           atol=1e-6 * scale)
        assert est.responses.shape == (comp.reduced_lengths[m], 3)


def test_force_order_overrides_selection():
    grid = helpers.make_grid(8, 16, 12)
    sc = helpers.make_scenario(grid, [(55.0, 2.1e-7, 900.0), (95.0, 5.3e-7, -400.0)])
    comp = _none(synthesize_channel(sc))
    specs = dimension_specs(grid, comp)
    est = estimate_dimension(comp, 0, specs[0], force_order=1)
    assert est.model_order == 1
    assert est.params.shape == (1,)


def test_dft_estimate_peaks_on_bin():
    grid = helpers.make_grid(4, 32, 6)
    delay = (8 / (4 * 32)) / grid.subcarrier_spacing  # on an oversampled bin
    sc = helpers.make_scenario(grid, [(90.0, delay, 0.0)], gains=[1.0])
    comp = _none(synthesize_channel(sc))
    specs = dimension_specs(grid, comp)
    got = dft_estimate(comp.h_prime, 1, 1, specs[1], oversampling=4)
    assert got[0] == pytest.approx(delay, rel=1e-9)
    algo = estimate_dimension(comp, 1, specs[1], algo="dft", force_order=1)
    assert algo.params[0] == pytest.approx(delay, rel=1e-9)


def test_estimate_dimension_rejects_unknown_algorithm():
    grid = helpers.make_grid(4, 5, 6)
    comp = _none(helpers.crandn(np.random.default_rng(1), (4, 5, 6)))
    specs = dimension_specs(grid, comp)
    with pytest.raises(ValueError):
        estimate_dimension(comp, 0, specs[0], algo="esprit")


def test_reconstruct_responses_match_parameters():
    spec = DimensionSpec(kind="doppler", length=9, sample_spacing=2e-4, wavelength=0.0115)
    params = [350.0, -1200.0]
    resp = reconstruct_responses(params, spec)
    assert resp.shape == (9, 2)
    for col, f in enumerate(params):
        expected = oracles.response_vector(9, 2 * math.pi * f * 2e-4)
        assert helpers.rel_err(resp[:, col], expected) < 1e-12


@pytest.mark.parametrize("check", property_checks.ALL_CHECKS["estimation"],
                         ids=lambda c: c.__name__)
def test_properties(check):
    property_checks.run_cases(check, 101)
