"""Large-scale fading, spatial correlation and correlated Rayleigh channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import D_MIN_M, CostHataParams, PathLossModel, Placement, ScenarioConfig

#: Eigenvalues below ``-EIG_CLAMP_RTOL * trace`` are a genuine PSD violation;
#: anything above that but negative is clamped to zero.
EIG_CLAMP_RTOL = 1e-10


def path_loss_umi(d, d_min: float = D_MIN_M):
    """3GPP urban-microcell path loss in dB (negative gain) at ``d`` meters."""
    d = np.asarray(d, dtype=float)
    if np.any(d < d_min):
        raise ValueError(f"distance below d_min = {d_min} m")
    out = -30.5 - 36.7 * np.log10(d)
    return float(out) if out.ndim == 0 else out


def cost_hata_l0(params: CostHataParams = CostHataParams()) -> float:
    # the closed form expects the carrier in MHz
    f = params.f_c_ghz * 1e3
    lf = math.log10(f)
    return (
        46.3 + 33.9 * lf - 13.82 * math.log10(params.h_ap)
        - (1.1 * lf - 0.7) * params.h_ue
        + (1.56 * lf - 0.8)
    )


def path_loss_cost_hata(d_km, params: CostHataParams = CostHataParams(), d_min_km: float = D_MIN_M / 1e3):
    """Three-slope COST-Hata path loss in dB at ``d_km`` kilometers."""
    d = np.asarray(d_km, dtype=float)
    if np.any(d < d_min_km):
        raise ValueError(f"distance below d_min = {d_min_km} km")
    l0 = cost_hata_l0(params)
    d0, d1 = params.d0_km, params.d1_km
    far = -l0 - 35.0 * np.log10(np.maximum(d, d1))
    mid = -l0 - 10.0 * np.log10(d1 ** 1.5 * np.maximum(d, d0) ** 2)
    near = -l0 - 10.0 * np.log10(d1 ** 1.5 * d0 ** 2)
    out = np.where(d > d1, far, np.where(d > d0, mid, near))
    return float(out) if out.ndim == 0 else out


def local_scattering_correlation(N: int, angle, asd: float, beta=1.0) -> np.ndarray:
    """Gaussian local-scattering correlation of a half-wavelength ULA.

    Uses the small-ASD closed form. ``angle`` and ``beta`` broadcast against
    each other, so a batch of links yields an array of shape
    ``(*batch, N, N)``.
    """
    if N < 1 or not asd > 0:
        raise ValueError("need N >= 1 and asd > 0")
    angle = np.asarray(angle, dtype=float)[..., None, None]
    beta = np.asarray(beta, dtype=float)[..., None, None]
    idx = np.arange(N)
    diff = (idx[:, None] - idx[None, :]).astype(float)
    phase = np.exp(1j * np.pi * diff * np.sin(angle))
    spread = np.exp(-0.5 * asd ** 2 * (np.pi * diff * np.cos(angle)) ** 2)
    return beta * phase * spread


def _check_hermitian(R: np.ndarray, rtol: float = 1e-10) -> None:
    scale = np.max(np.abs(R)) if R.size else 0.0
    if np.max(np.abs(R - np.swapaxes(R.conj(), -1, -2)), initial=0.0) > rtol * max(scale, 1e-300):
        raise ValueError("matrix is not Hermitian")


def hermitian_sqrt(R: np.ndarray) -> np.ndarray:
    """Hermitian square root ``S`` with ``S @ S^H == R`` (batched over leading axes)."""
    R = np.asarray(R)
    _check_hermitian(R)
    R = 0.5 * (R + np.swapaxes(R.conj(), -1, -2))
    w, V = np.linalg.eigh(R)
    trace = np.abs(np.trace(R, axis1=-2, axis2=-1))[..., None]
    if np.any(w < -EIG_CLAMP_RTOL * np.maximum(trace, 1e-300)):
        raise ValueError("matrix is not positive semidefinite")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)[..., None, :]) @ np.swapaxes(V.conj(), -1, -2)


def _matvec(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Batched ``A @ x`` over matching leading axes (x broadcasts)."""
    return (A @ x[..., None])[..., 0]


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channel(S: np.ndarray, rng: np.random.Generator, n_draws: int | None = None) -> np.ndarray:
    """Draw ``h = S h'`` with ``h' ~ CN(0, I)``.

    With ``n_draws`` the result gains a leading axis of that length.
    """
    S = np.asarray(S)
    shape = S.shape[:-1] if n_draws is None else (n_draws, *S.shape[:-1])
    white = complex_normal(rng, shape)
    return _matvec(S, white)


@dataclass
class NodeGroup:
    """Links from a set of identical nodes (the cBS, or all eAPs) to every UE.

    ``R`` has shape ``(n, K, N, N)`` and ``beta`` shape ``(n, K)``; ``power``
    is the per-node transmit budget in watts.
    """

    kind: str
    R: np.ndarray
    beta: np.ndarray
    power: float

    @property
    def n_nodes(self) -> int:
        return self.R.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.R.shape[-1]


@dataclass
class LinkCorrelations:
    groups: list[NodeGroup]

    @property
    def K(self) -> int:
        return self.groups[0].R.shape[1]

    def group(self, kind: str) -> NodeGroup | None:
        for g in self.groups:
            if g.kind == kind:
                return g
        return None

    def eigenvalue_rows(self):
        """Rows of (group, node, user, beta, eigenvalues...) for debug dumps."""
        for g in self.groups:
            eig = np.linalg.eigvalsh(g.R)
            for n in range(g.n_nodes):
                for k in range(g.R.shape[1]):
                    yield (g.kind, n, k, g.beta[n, k], *eig[n, k][::-1])


def large_scale_db(config: ScenarioConfig, distances_m: np.ndarray, d_min: float = D_MIN_M) -> np.ndarray:
    if config.path_loss is PathLossModel.UMI:
        return path_loss_umi(distances_m, d_min=d_min)
    return path_loss_cost_hata(distances_m / 1e3, config.cost_hata_params, d_min_km=d_min / 1e3)


def build_link_correlations(config: ScenarioConfig, placement: Placement, d_min: float = D_MIN_M) -> LinkCorrelations:
    """Correlation matrices for every (node, UE) pair of a placement."""
    has_cbs = config.has_cbs
    nodes = placement.node_positions(has_cbs)
    orient = placement.node_orientations(has_cbs)
    delta = placement.ue_positions[None, :, :] - nodes[:, None, :]
    dist = np.linalg.norm(delta, axis=-1)
    bearing = np.arctan2(delta[..., 1], delta[..., 0])
    angle = bearing - orient[:, None]
    pl_db = large_scale_db(config, dist, d_min=d_min)
    beta = 10.0 ** ((pl_db + placement.shadow_db) / 10.0)
    asd = np.deg2rad(config.asd_deg)

    groups = []
    start = 0
    if has_cbs:
        R = local_scattering_correlation(config.N_b, angle[:1], asd, beta[:1])
        groups.append(NodeGroup("cbs", R, beta[:1], config.p_b))
        start = 1
    if config.L:
        R = local_scattering_correlation(config.N_a, angle[start:], asd, beta[start:])
        groups.append(NodeGroup("ap", R, beta[start:], config.p_a))
    return LinkCorrelations(groups)
