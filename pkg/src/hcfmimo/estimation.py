"""Pilot assignment, uplink training and MMSE channel estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import LinkCorrelations, NodeGroup, _matvec, complex_normal, hermitian_sqrt


@dataclass(frozen=True)
class PilotAssignment:
    """Zero-based pilot index per user."""

    pilot_of: np.ndarray
    tau_p: int

    @property
    def K(self) -> int:
        return len(self.pilot_of)

    def coset(self, k: int) -> np.ndarray:
        """Users sharing user ``k``'s pilot, ``k`` included."""
        return np.flatnonzero(self.pilot_of == self.pilot_of[k])

    @property
    def couser_mask(self) -> np.ndarray:
        """``mask[k, j]`` is True when ``j`` shares ``k``'s pilot (diagonal included)."""
        return self.pilot_of[:, None] == self.pilot_of[None, :]


def assign_pilots(K: int, tau_p: int) -> PilotAssignment:
    """Round-robin assignment: user ``k`` gets pilot ``k mod tau_p``."""
    if tau_p < 1:
        raise ValueError("tau_p must be >= 1")
    if K < 1:
        raise ValueError("K must be >= 1")
    return PilotAssignment(np.arange(K) % tau_p, tau_p)


def gamma_matrix(R_set, p_u: float, tau_p: int, sigma2: float) -> np.ndarray:
    """``p_u tau_p sum(R) + sigma2 I`` over the correlation matrices of one pilot group."""
    R_set = np.asarray(R_set)
    if R_set.ndim == 2:
        R_set = R_set[None]
    if R_set.ndim != 3 or R_set.shape[1] != R_set.shape[2]:
        raise ValueError(f"expected a stack of square matrices, got shape {R_set.shape}")
    N = R_set.shape[-1]
    return p_u * tau_p * R_set.sum(axis=0) + sigma2 * np.eye(N)


def estimation_error_cov(R, gamma, p_u: float, tau_p: int) -> np.ndarray:
    """Error covariance ``R - p_u tau_p R Gamma^-1 R``."""
    R = np.asarray(R)
    try:
        X = np.linalg.solve(gamma, R)
    except np.linalg.LinAlgError as err:
        raise ValueError("singular Gamma") from err
    return R - p_u * tau_p * R @ X


@dataclass
class GroupStatistics:
    """Second-order training statistics of one node group.

    Shapes: ``gamma`` is ``(n, tau_p, N, N)``; ``r_gamma_inv``, ``est_cov``,
    ``theta`` and ``sqrt_R`` are ``(n, K, N, N)``.
    """

    kind: str
    power: float
    R: np.ndarray
    gamma: np.ndarray
    r_gamma_inv: np.ndarray
    est_cov: np.ndarray
    theta: np.ndarray
    sqrt_R: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.R.shape[0]

    def est_energy(self) -> np.ndarray:
        """``E||h_hat||^2`` per (node, user)."""
        return np.real(np.trace(self.est_cov, axis1=-2, axis2=-1))


@dataclass
class TrainingStatistics:
    groups: list[GroupStatistics]
    assignment: PilotAssignment
    p_u: float
    tau_p: int
    sigma2: float

    @property
    def K(self) -> int:
        return self.assignment.K

    def group(self, kind: str) -> GroupStatistics | None:
        for g in self.groups:
            if g.kind == kind:
                return g
        return None


def _hermitize(X):
    return 0.5 * (X + np.swapaxes(X.conj(), -1, -2))


def group_statistics(group: NodeGroup, assignment: PilotAssignment, p_u: float, tau_p: int,
                     sigma2: float, with_sqrt: bool = True) -> GroupStatistics:
    R = group.R
    n, K, N, _ = R.shape
    pilots = assignment.pilot_of
    # Gamma is shared by all users on the same pilot: one per (node, pilot)
    gamma = np.empty((n, assignment.tau_p, N, N), dtype=complex)
    for p in range(assignment.tau_p):
        gamma[:, p] = p_u * tau_p * R[:, pilots == p].sum(axis=1) + sigma2 * np.eye(N)
    gamma_k = gamma[:, pilots]
    # R Gamma^-1 = (Gamma^-1 R)^H since both are Hermitian
    r_gamma_inv = np.swapaxes(np.linalg.solve(gamma_k, R).conj(), -1, -2)
    est_cov = _hermitize(p_u * tau_p * r_gamma_inv @ R)
    theta = _hermitize(R - est_cov)
    sqrt_R = hermitian_sqrt(R) if with_sqrt else None
    return GroupStatistics(group.kind, group.power, R, gamma, r_gamma_inv, est_cov, theta, sqrt_R)


def training_statistics(corr: LinkCorrelations, assignment: PilotAssignment, p_u: float, tau_p: int,
                        sigma2: float, with_sqrt: bool = True) -> TrainingStatistics:
    groups = [group_statistics(g, assignment, p_u, tau_p, sigma2, with_sqrt) for g in corr.groups]
    return TrainingStatistics(groups, assignment, p_u, tau_p, sigma2)


@dataclass
class EstimationSet:
    """Channel estimates of one coherence block, one ``(n, K, N)`` array per group."""

    stats: TrainingStatistics
    h_hat: list[np.ndarray]

    @property
    def theta(self) -> list[np.ndarray]:
        return [g.theta for g in self.stats.groups]

    @property
    def gamma(self) -> list[np.ndarray]:
        return [g.gamma for g in self.stats.groups]

    @property
    def est_cov(self) -> list[np.ndarray]:
        return [g.est_cov for g in self.stats.groups]


def draw_channels(stats: TrainingStatistics, rng: np.random.Generator, n_draws: int | None = None) -> list[np.ndarray]:
    """Correlated Rayleigh realizations for every link, one array per group."""
    out = []
    for g in stats.groups:
        S = g.sqrt_R if g.sqrt_R is not None else hermitian_sqrt(g.R)
        shape = S.shape[:-1] if n_draws is None else (n_draws, *S.shape[:-1])
        out.append(_matvec(S, complex_normal(rng, shape)))
    return out


def simulate_training(channels: list[np.ndarray], stats: TrainingStatistics, rng: np.random.Generator) -> EstimationSet:
    """Uplink training and MMSE estimation for every link.

    The received pilot projection of each (node, pilot) pair is formed
    directly; its noise term has covariance ``tau_p sigma2 I``. Channels may
    carry a leading draw axis.
    """
    a = stats.assignment
    p_u, tau_p, sigma2 = stats.p_u, stats.tau_p, stats.sigma2
    h_hat = []
    for g, h in zip(stats.groups, channels):
        # h: (..., n, K, N)
        lead = h.shape[:-3]
        n, K, N = h.shape[-3:]
        psi = np.zeros((*lead, n, a.tau_p, N), dtype=complex)
        for p in range(a.tau_p):
            psi[..., p, :] = np.sqrt(p_u) * tau_p * h[..., a.pilot_of == p, :].sum(axis=-2)
        psi += np.sqrt(tau_p * sigma2) * complex_normal(rng, psi.shape)
        psi_k = psi[..., a.pilot_of, :]
        h_hat.append(np.sqrt(p_u) * _matvec(g.r_gamma_inv, psi_k))
    return EstimationSet(stats, h_hat)
