"""Uplink SINR and spectral efficiency under matched-filter combining.

Every architecture's SINR has the same rational structure in the power
coefficients ``eta``::

    gamma_k = eta_k S_k / (sum_j eta_j I[k, j] + N_k)

so the three builders below only differ in how they assemble ``S``, ``I`` and
``N`` from the channel estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import EstimationSet


@dataclass
class UplinkSinrCoefficients:
    """``signal`` (K,), ``interference`` (K, K) and ``noise`` (K,).

    A leading draw axis is allowed on all three.
    """

    signal: np.ndarray
    interference: np.ndarray
    noise: np.ndarray

    @property
    def K(self) -> int:
        return self.signal.shape[-1]

    def draw(self, i: int) -> "UplinkSinrCoefficients":
        return UplinkSinrCoefficients(self.signal[i], self.interference[i], self.noise[i])


def _node_sums(h_hat: list[np.ndarray], theta: list[np.ndarray]):
    """Per-user estimate energy, estimate cross products and error quadratic forms.

    ``h_hat[g]`` is ``(..., n, K, N)`` and ``theta[g]`` is ``(n, K, N, N)``.
    Returns ``energy (..., K)``, ``cross (..., K, K)`` with
    ``cross[k, j] = sum_n h_hat[n,k]^H h_hat[n,j]`` and ``err (..., K, K)``
    with ``err[k, j] = sum_n h_hat[n,k]^H Theta[n,j] h_hat[n,k]``.
    """
    energy = cross = err = 0.0
    for h, th in zip(h_hat, theta):
        energy = energy + np.sum(np.abs(h) ** 2, axis=(-3, -1))
        cross = cross + np.einsum("...nki,...nji->...kj", h.conj(), h)
        # T[..., n, j, :, k] = Theta[n, j] @ h_hat[n, k]
        T = th @ np.swapaxes(h, -1, -2)[..., :, None, :, :]
        err = err + np.real(np.einsum("...nki,...njik->...kj", h.conj(), T))
    return energy, cross, err


def ul_coeffs_hcf(est: EstimationSet) -> UplinkSinrCoefficients:
    """Coefficients of the hierarchical (cBS + eAPs) matched-filter SINR.

    Works for any mix of node groups, so a cBS-only or AP-only estimation set
    yields the cellular and cell-free coefficients respectively.
    """
    stats = est.stats
    energy, cross, err = _node_sums(est.h_hat, est.theta)
    K = stats.K
    off = ~np.eye(K, dtype=bool)
    interference = err + np.where(off, np.abs(cross) ** 2, 0.0)
    return UplinkSinrCoefficients(energy ** 2, interference, stats.sigma2 / stats.p_u * energy)


def ul_coeffs_cellular_arrays(g_hat: np.ndarray, theta: np.ndarray, p_u: float, sigma2: float) -> UplinkSinrCoefficients:
    """Cellular coefficients from ``g_hat`` (K, M) and ``theta`` (K, M, M).

    Evaluates the quadratic form ``g_k^H (sum_j eta_j (g_j g_j^H [j != k] + Theta_j)
    + sigma2/p_u I) g_k`` term by term.
    """
    K, M = g_hat.shape
    norms = np.real(np.einsum("km,km->k", g_hat.conj(), g_hat))
    interference = np.empty((K, K))
    for k in range(K):
        g = g_hat[k]
        for j in range(K):
            outer = 0.0 if j == k else np.abs(np.vdot(g, g_hat[j])) ** 2
            interference[k, j] = outer + np.real(np.vdot(g, theta[j] @ g))
    return UplinkSinrCoefficients(norms ** 2, interference, sigma2 / p_u * norms)


def ul_coeffs_cf_arrays(g_hat: np.ndarray, theta: np.ndarray, p_u: float, sigma2: float) -> UplinkSinrCoefficients:
    """Cell-free coefficients from per-AP estimates ``g_hat`` (A, K, N), ``theta`` (A, K, N, N).

    The AP estimates are stacked into collective ``A*N`` vectors for the
    coherent cross terms.
    """
    A, K, N = g_hat.shape
    collective = np.transpose(g_hat, (1, 0, 2)).reshape(K, A * N)
    gram = collective.conj() @ collective.T
    energy = np.real(np.diag(gram))
    err = np.zeros((K, K))
    for a in range(A):
        # quad[k, j] = g_ka^H Theta_ja g_ka
        err += np.real(np.einsum("ki,jil,kl->kj", g_hat[a].conj(), theta[a], g_hat[a]))
    off = ~np.eye(K, dtype=bool)
    interference = err + np.where(off, np.abs(gram) ** 2, 0.0)
    return UplinkSinrCoefficients(energy ** 2, interference, sigma2 / p_u * energy)


def ul_coeffs_cellular(est: EstimationSet) -> UplinkSinrCoefficients:
    (g,) = est.stats.groups
    if g.n_nodes != 1:
        raise ValueError("cellular coefficients need a single co-located array")
    return ul_coeffs_cellular_arrays(est.h_hat[0][0], g.theta[0], est.stats.p_u, est.stats.sigma2)


def ul_coeffs_cf(est: EstimationSet) -> UplinkSinrCoefficients:
    (g,) = est.stats.groups
    return ul_coeffs_cf_arrays(est.h_hat[0], g.theta, est.stats.p_u, est.stats.sigma2)


def ul_sinr(coeffs: UplinkSinrCoefficients, eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0) or np.any(eta > 1 + 1e-12):
        raise ValueError("power coefficients must lie in [0, 1]")
    denom = np.einsum("...kj,...j->...k", coeffs.interference, eta) + coeffs.noise
    return eta * coeffs.signal / denom


def ul_se(gamma, tau_p: int, tau_u: int) -> np.ndarray:
    """Pilot-overhead-scaled ``log2(1 + gamma)`` in bit/s/Hz."""
    if tau_p >= tau_u:
        raise ValueError("tau_p must be smaller than tau_u")
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be nonnegative")
    return (1.0 - tau_p / tau_u) * np.log2(1.0 + gamma)
