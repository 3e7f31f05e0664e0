import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import P_U, SIGMA2, random_stats
from hcfmimo.channel import LinkCorrelations, NodeGroup
from hcfmimo.estimation import (
    assign_pilots,
    draw_channels,
    estimation_error_cov,
    gamma_matrix,
    simulate_training,
    training_statistics,
)


def test_round_robin_cosets():
    a = assign_pilots(8, 4)
    assert list(a.coset(0)) == [0, 4]
    assert list(a.coset(1)) == [1, 5]
    assert all(len(assign_pilots(5, 5).coset(k)) == 1 for k in range(5))
    assert all(list(assign_pilots(3, 1).coset(k)) == [0, 1, 2] for k in range(3))
    with pytest.raises(ValueError):
        assign_pilots(3, 0)


@given(K=st.integers(1, 20), tau_p=st.integers(1, 20))
def test_cosets_partition_users(K, tau_p):
    a = assign_pilots(K, tau_p)
    mask = a.couser_mask
    assert np.all(np.diag(mask))
    assert np.array_equal(mask, mask.T)
    # transitivity: an equivalence relation has a block structure
    assert np.array_equal((mask.astype(int) @ mask.astype(int) > 0), mask)


def test_gamma_scalar_reductions():
    beta, tau_p = 2e-11, 4
    G = gamma_matrix(beta * np.eye(3), P_U, tau_p, SIGMA2)
    np.testing.assert_allclose(G, (P_U * tau_p * beta + SIGMA2) * np.eye(3))
    G2 = gamma_matrix(np.stack([beta * np.eye(3)] * 2), P_U, tau_p, SIGMA2)
    np.testing.assert_allclose(G2, (2 * P_U * tau_p * beta + SIGMA2) * np.eye(3))
    with pytest.raises(ValueError):
        gamma_matrix(np.zeros((2, 3, 4)), P_U, tau_p, SIGMA2)


def test_scalar_error_variance():
    beta, tau_p = 3e-12, 4
    gamma = P_U * tau_p * beta + SIGMA2
    theta = estimation_error_cov(np.array([[beta]]), np.array([[gamma]]), P_U, tau_p)
    assert theta[0, 0] == pytest.approx(beta * SIGMA2 / gamma, rel=1e-12)
    # no information at all: error equals the prior
    huge = estimation_error_cov(np.array([[beta]]), np.array([[1e30]]), P_U, tau_p)
    assert huge[0, 0] == pytest.approx(beta, rel=1e-12)


def _scalar_stats(beta, tau_p=4, K=1, sigma2=SIGMA2):
    R = np.full((1, K, 1, 1), beta, complex)
    corr = LinkCorrelations([NodeGroup("ap", R, np.full((1, K), beta), 0.2)])
    return training_statistics(corr, assign_pilots(K, tau_p), P_U, tau_p, sigma2)


def test_scalar_estimate_variance_by_sampling():
    beta, tau_p = 3e-13, 4
    stats = _scalar_stats(beta, tau_p)
    rng = np.random.default_rng(2)
    est = simulate_training(draw_channels(stats, rng, 100_000), stats, rng)
    expected = P_U * tau_p * beta ** 2 / (P_U * tau_p * beta + SIGMA2)
    assert np.var(est.h_hat[0]) == pytest.approx(expected, rel=0.02)
    assert stats.groups[0].est_cov[0, 0, 0, 0].real == pytest.approx(expected, rel=1e-12)


def test_noiseless_uncontaminated_estimate_recovers_channel():
    stats = random_stats(np.random.default_rng(0), K=2, tau_p=2, n_aps=2, n_ap_ant=1)
    stats = training_statistics(
        LinkCorrelations([NodeGroup(g.kind, g.R, np.ones(g.R.shape[:2]), g.power) for g in stats.groups]),
        stats.assignment, P_U, 2, 1e-40,
    )
    rng = np.random.default_rng(1)
    h = draw_channels(stats, rng)
    est = simulate_training(h, stats, rng)
    assert np.max(np.abs(est.h_hat[0] - h[0])) < 1e-6 * np.max(np.abs(h[0]))


@given(seed=st.integers(0, 2 ** 32 - 1), K=st.integers(1, 6), tau_p=st.integers(1, 4))
def test_error_plus_estimate_covariance_is_prior(seed, K, tau_p):
    stats = random_stats(np.random.default_rng(seed), K, tau_p, n_cbs_ant=6, n_aps=3, n_ap_ant=3)
    for g in stats.groups:
        scale = np.max(np.abs(g.R))
        assert np.max(np.abs(g.theta + g.est_cov - g.R)) <= 1e-9 * scale
        lam_max = np.linalg.eigvalsh(g.R)[..., -1]
        eig = np.linalg.eigvalsh(g.theta)
        assert np.all(eig >= -1e-9 * lam_max[..., None])
        assert np.all(eig <= lam_max[..., None] * (1 + 1e-9))
        # Gamma - sigma2 I is PSD
        G = g.gamma - SIGMA2 * np.eye(g.gamma.shape[-1])
        assert np.all(np.linalg.eigvalsh(G) >= -1e-9 * np.abs(G).max())


@pytest.fixture(scope="module")
def sampled():
    """Joint channel/estimate draws of a small contaminated instance (K=4, tau_p=2)."""
    rng = np.random.default_rng(42)
    stats = random_stats(rng, K=4, tau_p=2, n_aps=2, n_ap_ant=3, beta_db=(-115.0, -100.0))
    h = draw_channels(stats, rng, n_draws=20_000)
    est = simulate_training(h, stats, rng)
    return stats, h[0], est.h_hat[0]


def test_estimate_energy_matches_closed_form(sampled):
    stats, h, hh = sampled
    g = stats.groups[0]
    energy = np.mean(np.sum(np.abs(hh) ** 2, axis=-1), axis=0)
    closed = P_U * stats.tau_p * np.real(np.trace(g.R @ np.linalg.solve(g.gamma[:, stats.assignment.pilot_of], g.R),
                                                  axis1=-2, axis2=-1))
    np.testing.assert_allclose(energy, closed, rtol=0.03)


def test_estimate_is_orthogonal_to_error(sampled):
    stats, h, hh = sampled
    err = h - hh
    cross = np.einsum("dnki,dnkj->nkij", hh, err.conj()) / h.shape[0]
    norm_R = np.linalg.norm(stats.groups[0].R, axis=(-2, -1))
    assert np.all(np.linalg.norm(cross, axis=(-2, -1)) <= 0.05 * norm_R)


def test_cross_gain_second_moments(sampled):
    """Second moment of h_k^T conj(h_hat_j) with and without pilot sharing."""
    stats, h, hh = sampled
    g, a = stats.groups[0], stats.assignment
    tau_p = stats.tau_p
    ginv = np.linalg.inv(g.gamma[:, a.pilot_of])
    for node in range(g.n_nodes):
        for k in range(stats.K):
            for j in range(stats.K):
                x = np.einsum("di,di->d", h[:, node, k], hh[:, node, j].conj())
                Rk, Rj, Gj = g.R[node, k], g.R[node, j], ginv[node, j]
                expected = P_U * tau_p * np.trace(Rk @ Rj @ Gj @ Rj).real
                if a.pilot_of[j] == a.pilot_of[k]:
                    expected += P_U ** 2 * tau_p ** 2 * abs(np.trace(Rk @ Gj @ Rj)) ** 2
                assert np.mean(np.abs(x) ** 2) == pytest.approx(expected, rel=0.05), (node, k, j)
