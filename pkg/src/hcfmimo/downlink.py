"""Closed-form downlink SINR under conjugate beamforming.

The downlink SINR depends only on channel statistics. All node groups are
flattened into one node axis so the cBS, eAPs, CF APs and the cellular BS are
handled by the same coefficient table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import TrainingStatistics, draw_channels, simulate_training

IMAG_RTOL = 1e-9


@dataclass
class DownlinkCoefficients:
    """Signal and interference amplitudes of the downlink SINR.

    ``A`` is ``(n_nodes, K)``. ``B`` and ``C`` are ``(n_nodes, K, K)`` with
    ``B[n, k, j]`` defined only for ``j`` sharing ``k``'s pilot, ``j != k``
    (``b_mask``); it is zero elsewhere. ``kinds`` labels each node ("cbs" or
    "ap").
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    sigma2: float
    kinds: np.ndarray
    b_mask: np.ndarray

    @property
    def sigma_z(self) -> float:
        return float(np.sqrt(self.sigma2))

    @property
    def K(self) -> int:
        return self.A.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.A.shape[0]

    @property
    def W(self) -> np.ndarray:
        """Squared interference weights ``B**2 + C**2``."""
        return self.B ** 2 + self.C ** 2

    def subset(self, nodes) -> "DownlinkCoefficients":
        nodes = np.asarray(nodes)
        return DownlinkCoefficients(self.A[nodes], self.B[nodes], self.C[nodes], self.sigma2,
                                    self.kinds[nodes], self.b_mask)

    def normalized(self) -> "DownlinkCoefficients":
        """Same SINRs with every amplitude divided by ``sigma_z`` (unit noise)."""
        s = self.sigma_z
        return DownlinkCoefficients(self.A / s, self.B / s, self.C / s, 1.0, self.kinds, self.b_mask)


def pair_traces(R: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``T[n, k, j] = tr(R[n, k] @ X[n, j])`` for stacks of shape ``(n, K, N, N)``."""
    n, K, N, _ = R.shape
    Rf = R.reshape(n, K, N * N)
    Xt = np.swapaxes(X, -1, -2).reshape(n, K, N * N)
    return Rf @ np.swapaxes(Xt, -1, -2)


def _real(values: np.ndarray, what: str) -> np.ndarray:
    scale = np.max(np.abs(values), initial=0.0)
    if np.max(np.abs(values.imag), initial=0.0) > IMAG_RTOL * max(scale, 1e-300):
        raise FloatingPointError(f"{what}: imaginary residue above tolerance")
    return values.real


def _sqrt_checked(x: np.ndarray, what: str) -> np.ndarray:
    scale = np.max(np.abs(x), initial=0.0)
    if np.any(x < -IMAG_RTOL * max(scale, 1e-300)):
        raise FloatingPointError(f"{what}: negative radicand")
    return np.sqrt(np.clip(x, 0.0, None))


def dl_coefficients(stats: TrainingStatistics) -> DownlinkCoefficients:
    """Build ``A``, ``B`` and ``C`` for every node of every group."""
    p_u, tau_p = stats.p_u, stats.tau_p
    mask = stats.assignment.couser_mask & ~np.eye(stats.K, dtype=bool)
    As, Bs, Cs, kinds = [], [], [], []
    for g in stats.groups:
        # tr(R_k Gamma_k^-1 R_k)
        self_tr = _real(np.trace(g.est_cov, axis1=-2, axis2=-1), "self trace") / (p_u * tau_p)
        # tr(R_k Gamma_j^-1 R_j), with Gamma_j^-1 R_j = (R_j Gamma_j^-1)^H
        gr = np.swapaxes(g.r_gamma_inv.conj(), -1, -2)
        cross = pair_traces(g.R, gr)
        # tr(R_k R_j Gamma_j^-1 R_j)
        q = pair_traces(g.R, g.est_cov / (p_u * tau_p))
        q = _real(q, "C trace")
        denom = self_tr[:, None, :]
        As.append(_sqrt_checked(g.power * p_u * tau_p * self_tr, "A"))
        b2 = g.power * p_u * tau_p * np.abs(cross) ** 2 / denom
        Bs.append(np.where(mask[None], np.sqrt(b2), 0.0))
        Cs.append(_sqrt_checked(g.power * q / denom, "C"))
        kinds.extend([g.kind] * g.n_nodes)
    return DownlinkCoefficients(
        np.concatenate(As), np.concatenate(Bs), np.concatenate(Cs), stats.sigma2, np.array(kinds), mask
    )


def check_power_constraints(nu: np.ndarray, tol: float = 1e-9) -> None:
    if np.any(nu < -tol):
        raise ValueError("power amplitudes must be nonnegative")
    load = np.sum(nu ** 2, axis=-1)
    if np.any(load > 1.0 + tol):
        raise ValueError(f"per-node power constraint violated (max load {load.max():.6g})")


def equal_power_nu(coeffs: DownlinkCoefficients) -> np.ndarray:
    """Uniform split ``nu**2 = 1/K`` at every node."""
    return np.full((coeffs.n_nodes, coeffs.K), 1.0 / np.sqrt(coeffs.K))


def dl_signal(coeffs: DownlinkCoefficients, nu: np.ndarray) -> np.ndarray:
    return np.einsum("nk,nk->k", nu, coeffs.A)


def dl_denominator(coeffs: DownlinkCoefficients, nu: np.ndarray) -> np.ndarray:
    """``D_k(nu)``, the interference-plus-noise power of every user."""
    return np.einsum("nkj,nj->k", coeffs.W, nu ** 2) + coeffs.sigma2


def dl_sinr_hcf(coeffs: DownlinkCoefficients, nu) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    check_power_constraints(nu)
    return dl_signal(coeffs, nu) ** 2 / dl_denominator(coeffs, nu)


def f_vector(coeffs: DownlinkCoefficients, nu: np.ndarray, k: int) -> np.ndarray:
    """Stacked amplitudes whose squared norm equals ``D_k(nu)``."""
    b = (nu * coeffs.B[:, k, :])[:, coeffs.b_mask[k]]
    c = nu * coeffs.C[:, k, :]
    return np.concatenate([b.ravel(), c.ravel(), [coeffs.sigma_z]])


def _closed_form_single_node_sums(stats: TrainingStatistics, zeta: np.ndarray, power: float):
    """Numerator and denominator of the per-AP closed-form SINR, accumulated over APs.

    Evaluated directly from ``R`` and ``Gamma`` with explicit traces; returns
    ``(num_amp (K,), denom (K,))`` where the SINR is ``num_amp**2 / denom``.
    """
    (g,) = stats.groups
    p_u, tau_p, sigma2 = stats.p_u, stats.tau_p, stats.sigma2
    a = stats.assignment
    n, K = g.R.shape[:2]
    num_amp = np.zeros(K)
    denom = np.full(K, sigma2 / power)
    for node in range(n):
        R = g.R[node]
        gamma = g.gamma[node][a.pilot_of]
        ginv_r = [np.linalg.solve(gamma[j], R[j]) for j in range(K)]
        self_tr = np.array([np.trace(R[j] @ ginv_r[j]).real for j in range(K)])
        for k in range(K):
            num_amp[k] += np.sqrt(zeta[node, k] * self_tr[k])
            for j in range(K):
                if j != k and a.pilot_of[j] == a.pilot_of[k]:
                    denom[k] += zeta[node, j] * p_u * tau_p * abs(np.trace(R[k] @ ginv_r[j])) ** 2 / self_tr[j]
                denom[k] += zeta[node, j] * np.trace(R[k] @ R[j] @ ginv_r[j]).real / self_tr[j]
    return np.sqrt(p_u * tau_p) * num_amp, denom


def dl_sinr_cellular(stats: TrainingStatistics, zeta) -> np.ndarray:
    """Cellular downlink SINR evaluated straight from the correlation statistics."""
    (g,) = stats.groups
    if g.n_nodes != 1:
        raise ValueError("cellular SINR needs a single co-located array")
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    check_power_constraints(np.sqrt(np.clip(zeta, 0, None)))
    num, den = _closed_form_single_node_sums(stats, zeta, g.power)
    return num ** 2 / den


def dl_sinr_cf(stats: TrainingStatistics, zeta) -> np.ndarray:
    """Cell-free downlink SINR, ``zeta`` of shape ``(A, K)``."""
    (g,) = stats.groups
    zeta = np.asarray(zeta, dtype=float)
    check_power_constraints(np.sqrt(np.clip(zeta, 0, None)))
    num, den = _closed_form_single_node_sums(stats, zeta, g.power)
    return num ** 2 / den


def dl_se(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("SINR must be nonnegative")
    return np.log2(1.0 + xi)


def split_nu(stats: TrainingStatistics, nu: np.ndarray) -> list[np.ndarray]:
    out, start = [], 0
    for g in stats.groups:
        out.append(nu[start:start + g.n_nodes])
        start += g.n_nodes
    return out


def dl_sinr_monte_carlo_oracle(stats: TrainingStatistics, nu, n_draws: int, rng: np.random.Generator,
                               mode: str = "per_term", chunk: int = 10_000) -> np.ndarray:
    """Estimate the downlink SINR by simulating training and conjugate beamforming.

    Each draw realizes every channel and its estimate; the received gain of
    symbol ``j`` at user ``k`` through node ``n`` is
    ``sqrt(p_n) nu[n, j] h_kn^T conj(h_hat_jn) / sqrt(E||h_hat_jn||^2)``.

    ``mode="per_term"`` forms the ratio from per-node, per-interferer second
    moments (signal mean, beamforming-gain variance, interference powers),
    summing them as independent contributions. ``mode="coherent"`` uses the
    exact moments of the aggregate received gains, which additionally keeps
    the cross-node coupling of pilot-sharing interferers.
    """
    if mode not in ("per_term", "coherent"):
        raise ValueError(f"unknown mode {mode!r}")
    nu = np.asarray(nu, dtype=float)
    nus = split_nu(stats, nu)
    K = stats.K
    amps = [np.sqrt(g.power) * v for g, v in zip(stats.groups, nus)]
    scale = [np.sqrt(g.est_energy()) for g in stats.groups]

    sum_x = [np.zeros((g.n_nodes, K, K), complex) for g in stats.groups]
    sum_x2 = [np.zeros((g.n_nodes, K, K)) for g in stats.groups]
    sum_y = np.zeros((K, K), complex)
    sum_y2 = np.zeros((K, K))
    done = 0
    while done < n_draws:
        d = min(chunk, n_draws - done)
        h = draw_channels(stats, rng, n_draws=d)
        est = simulate_training(h, stats, rng)
        y = np.zeros((d, K, K), complex)
        for i, (hg, hh) in enumerate(zip(h, est.h_hat)):
            # x[d, n, k, j] = h_kn^T conj(h_hat_jn) / sqrt(E||h_hat_jn||^2)
            x = np.einsum("dnki,dnji->dnkj", hg, hh.conj()) / scale[i][None, :, None, :]
            sum_x[i] += x.sum(axis=0)
            sum_x2[i] += np.sum(np.abs(x) ** 2, axis=0)
            y += np.einsum("dnkj,nj->dkj", x, amps[i])
        sum_y += y.sum(axis=0)
        sum_y2 += np.sum(np.abs(y) ** 2, axis=0)
        done += d

    eye = np.eye(K, dtype=bool)
    if mode == "coherent":
        mean_y = sum_y / n_draws
        second = sum_y2 / n_draws
        signal = np.abs(np.diag(mean_y)) ** 2
        uncertainty = np.diag(second) - signal
        leakage = np.where(eye, 0.0, second).sum(axis=1)
        return signal / (uncertainty + leakage + stats.sigma2)

    signal_amp = np.zeros(K, complex)
    uncertainty = np.zeros(K)
    leakage = np.zeros(K)
    for i in range(len(stats.groups)):
        mean_x = sum_x[i] / n_draws
        second = sum_x2[i] / n_draws
        a2 = amps[i] ** 2
        diag_mean = np.einsum("nkk->nk", mean_x)
        diag_second = np.einsum("nkk->nk", second)
        signal_amp += np.sum(amps[i] * diag_mean, axis=0)
        uncertainty += np.sum(a2 * (diag_second - np.abs(diag_mean) ** 2), axis=0)
        leakage += np.einsum("nkj,nj->k", np.where(eye[None], 0.0, second), a2)
    return np.abs(signal_amp) ** 2 / (uncertainty + leakage + stats.sigma2)
