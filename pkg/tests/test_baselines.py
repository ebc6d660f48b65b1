"""Reference pipelines: sequential search and the multilinear rotation method."""

import numpy as np
import pytest

import helpers
import oracles
import property_checks
from plain_isac.baselines import (EspritConfig, bic_order, hosvd_subspaces,
                                  joint_diagonalize, sequential_estimate,
                                  tensor_esprit)
from plain_isac.scenario import synthesize_channel

TRIPLES = [(55.0, 2.1e-7, 900.0), (95.0, 5.3e-7, -400.0), (130.0, 8.0e-7, 1600.0)]
GAINS = [1.5 - 0.5j, -0.8 + 0.2j, 0.6 + 1.1j]


@pytest.fixture(scope="module")
def noiseless_channel():
    grid = helpers.make_grid(8, 16, 12)
    sc = helpers.make_scenario(grid, TRIPLES, gains=GAINS)
    return synthesize_channel(sc), grid


def test_rotation_method_exact_on_noiseless_input(noiseless_channel):
    h, grid = noiseless_channel
    det = tensor_esprit(h, grid)
    assert det.estimated_count == 3
    truth = np.array(sorted(TRIPLES))
    got = np.array(sorted(o.params for o in det.objects))
    scales = np.max(np.abs(truth), axis=0)
    assert np.all(np.abs(got - truth) <= 1e-9 * scales)


def test_rotation_method_with_explicit_smoothing(noiseless_channel):
    h, grid = noiseless_channel
    cfg = EspritConfig(smoothing_factors=(2, 2, 2), max_virtual_snapshots=32)
    det = tensor_esprit(h, grid, cfg=cfg)
    truth = np.array(sorted(TRIPLES))
    got = np.array(sorted(o.params for o in det.objects))
    scales = np.max(np.abs(truth), axis=0)
    assert np.all(np.abs(got - truth) <= 1e-9 * scales)


def test_rotation_method_true_np_override(noiseless_channel):
    h, grid = noiseless_channel
    det = tensor_esprit(h, grid, true_np=2)
    assert len(det.objects) == 2


def test_sequential_two_stage_search(noiseless_channel):
    # angles come from the subspace stage; delay and Doppler from an
    # oversampled transform, so off-bin parameters land on the nearest bin
    grid = helpers.make_grid(6, 16, 12)
    over = 4
    delay = (12 / (over * 16)) / grid.subcarrier_spacing
    doppler = (7 / (over * 12)) / grid.symbol_spacing
    sc = helpers.make_scenario(grid, [(72.0, delay, doppler)], gains=[2.0])
    det = sequential_estimate(synthesize_channel(sc), grid, dft_oversampling=over)
    assert det.estimated_count == 1
    obj = det.objects[0]
    assert obj.params[0] == pytest.approx(72.0, abs=1e-6)
    assert obj.params[1] == pytest.approx(delay, rel=1e-9)
    assert obj.params[2] == pytest.approx(doppler, rel=1e-9)
    assert obj.gain_magnitude == pytest.approx(2.0, rel=1e-6)


def test_sequential_counts_paths_via_order_selection(noiseless_channel):
    h, grid = noiseless_channel
    det = sequential_estimate(h, grid)
    assert det.estimated_count == 3
    assert len(det.objects) == 3


def test_bic_frozen_example():
    eigs = np.array([100.0, 100.0, 1.0, 1.0, 1.0, 1.0])
    assert bic_order(eigs, 10000) == 2
    values = oracles.bic_values(eigs, 10000)
    assert values[0] == pytest.approx(238956.4555144157, rel=1e-12)
    assert values[1] == pytest.approx(211442.55182301125, rel=1e-12)
    # all-ones tail leaves only the penalty 0.5 k (2n - k) ln N
    assert values[2] == pytest.approx(92.10340371976184, rel=1e-12)
    assert values[5] == pytest.approx(161.1809565095832, rel=1e-12)


def test_bic_agrees_with_reference_sweep():
    rng = np.random.default_rng(31)
    for _ in range(60):
        n = int(rng.integers(4, 10))
        k = int(rng.integers(0, n - 1))
        eigs = np.concatenate([np.sort(rng.uniform(5, 50, size=k))[::-1],
                               np.sort(rng.uniform(0.9, 1.1, size=n - k))[::-1]])
        n_samples = int(rng.integers(50, 5000))
        assert bic_order(eigs, n_samples) == oracles.argmin_order(
            oracles.bic_values(eigs, n_samples))


def test_hosvd_bases_are_orthonormal():
    rng = np.random.default_rng(41)
    h = helpers.crandn(rng, (4, 5, 6, 10))
    bases, subspace = hosvd_subspaces(h, [2, 3, 2])
    assert [b.shape for b in bases] == [(4, 2), (5, 3), (6, 2)]
    for b in bases:
        assert helpers.rel_err(b.conj().T @ b, np.eye(b.shape[1])) < 1e-10
    assert subspace.shape == (120, 3)
    assert helpers.rel_err(subspace.conj().T @ subspace, np.eye(3)) < 1e-10


def test_hosvd_validates_orders_and_observations():
    rng = np.random.default_rng(42)
    h = helpers.crandn(rng, (4, 5, 6, 10))
    with pytest.raises(ValueError):
        hosvd_subspaces(h, [2, 2])
    with pytest.raises(ValueError):
        hosvd_subspaces(h, [5, 2, 2])
    with pytest.raises(ValueError):
        hosvd_subspaces(h, [2, 2, 2], n_global=20)
    with pytest.raises(ValueError):
        # no trailing observation mode limits the global subspace to one column
        hosvd_subspaces(helpers.crandn(rng, (4, 5, 6)), [3, 3, 3], n_global=3)


def test_joint_diagonalization_exact_for_commuting_family():
    rng = np.random.default_rng(55)
    d = 5
    q0, _ = np.linalg.qr(helpers.crandn(rng, (d, d)))
    diags = [rng.uniform(-3, 3, size=d) + 1j * rng.uniform(-3, 3, size=d)
             for _ in range(3)]
    mats = [q0 @ np.diag(vals) @ q0.conj().T for vals in diags]
    q, transformed, history, converged = joint_diagonalize(mats)
    assert converged
    assert helpers.rel_err(q.conj().T @ q, np.eye(d)) < 1e-10
    lower = max(float(np.max(np.abs(np.tril(t, -1)))) for t in transformed)
    assert lower < 1e-8
    # one shared eigenvector order across the family
    perm = [int(np.argmin(np.abs(diags[0] - t))) for t in np.diag(transformed[0])]
    assert sorted(perm) == list(range(d))
    for vals, t in zip(diags, transformed):
        assert np.allclose(np.diag(t), vals[perm], atol=1e-8)


def test_joint_diagonalization_history_shrinks_for_generic_family():
    rng = np.random.default_rng(56)
    mats = [helpers.crandn(rng, (4, 4)) for _ in range(3)]
    q, transformed, history, _ = joint_diagonalize(mats, max_sweeps=15)
    assert helpers.rel_err(q.conj().T @ q, np.eye(4)) < 1e-10
    for before, after in zip(history, history[1:]):
        assert after <= before + 1e-12 * max(history[0], 1.0)
    # the transforms stay similarity images of the inputs
    for m, t in zip(mats, transformed):
        assert helpers.rel_err(q @ t @ q.conj().T, m) < 1e-10


@pytest.mark.parametrize("check", property_checks.ALL_CHECKS["baselines"],
                         ids=lambda c: c.__name__)
def test_properties(check):
    property_checks.run_cases(check, 101)
