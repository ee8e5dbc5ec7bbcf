import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import ortho_group

from graphquilt import (InsufficientOverlapError, ObservedCovariance,
                        bsvd_complete, procrustes_align)
from graphquilt.bsvd import chain_order

import oracles
from conftest import chained_observation, low_rank_instance


def test_recovers_generating_matrix_small():
    cov, u = low_rank_instance(6, 2, seed=4)
    # genericity: the overlap rows of the factor have full rank
    assert np.linalg.matrix_rank(u[2:4]) == 2
    obs = chained_observation(cov, [range(0, 4), range(2, 6)])
    out = bsvd_complete(obs, 2)
    assert np.max(np.abs(out.sigma_tilde - cov)) <= 1e-8
    assert out.rank_used == 2 and out.model_kind == "exact"


def test_full_observation_gives_best_rank_r_approximation():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 6))
    s = a @ a.T
    obs = ObservedCovariance(s, np.ones((6, 6), dtype=bool))
    w, q = np.linalg.eigh(s)
    want = (q[:, -3:] * w[-3:]) @ q[:, -3:].T
    np.testing.assert_allclose(bsvd_complete(obs, 3).sigma_tilde, want, atol=1e-10)


def test_short_overlap_raises():
    cov, _ = low_rank_instance(6, 3, seed=1)
    obs = chained_observation(cov, [range(0, 4), range(2, 6)])
    with pytest.raises(InsufficientOverlapError):
        bsvd_complete(obs, 3)


def test_spiked_mode_removes_and_restores_noise():
    cov, _ = low_rank_instance(8, 2, seed=5)
    sigma = cov + 0.7 * np.eye(8)
    obs = chained_observation(sigma, [range(0, 5), range(3, 8)])
    out = bsvd_complete(obs, 2, mode="spiked", sigma2=0.7)
    assert out.sigma2_hat == 0.7
    np.testing.assert_allclose(out.sigma_tilde, sigma, atol=1e-9)


def test_preserve_observed_copies_entries():
    cov, _ = low_rank_instance(6, 2, seed=2)
    noisy = cov + 0.01 * np.diag(np.arange(6))
    obs = chained_observation(noisy, [range(0, 4), range(2, 6)])
    out = bsvd_complete(obs, 2, preserve_observed=True)
    assert np.array_equal(out.sigma_tilde[obs.mask], obs.values[obs.mask])
    assert out.factor is None


@given(st.integers(0, 1000))
def test_output_does_not_depend_on_first_block_rotation(seed):
    cov, _ = low_rank_instance(9, 3, seed=seed)
    obs = chained_observation(cov + np.diag(np.linspace(0, 0.1, 9)),
                              [range(0, 6), range(3, 9)])
    rot = ortho_group.rvs(3, random_state=seed)
    a = bsvd_complete(obs, 3).sigma_tilde
    b = bsvd_complete(obs, 3, first_rotation=rot).sigma_tilde
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_procrustes_beats_rotation_grid(frozen):
    a, b = oracles.procrustes_instance()
    w = procrustes_align(a, b)
    np.testing.assert_allclose(w.T @ w, np.eye(2), atol=1e-12)
    assert np.linalg.norm(a - b @ w) <= frozen["procrustes_min"] + 1e-8


@given(st.integers(0, 10_000))
def test_procrustes_recovers_known_rotation(seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=(6, 3))
    w = ortho_group.rvs(3, random_state=seed)
    np.testing.assert_allclose(procrustes_align(b @ w, b), w, atol=1e-8)


def test_chain_order_reorders_by_overlap():
    sets = [np.array([0, 1, 2]), np.array([5, 6, 7]), np.array([2, 3, 4, 5])]
    with pytest.raises(InsufficientOverlapError):
        chain_order(sets, 1)
    assert chain_order(sets, 1, reorder=True) == [0, 2, 1]
