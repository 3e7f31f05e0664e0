"""Experiment configurations and random network geometry."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

#: Minimum UE-to-node distance in meters, applied to every path-loss model.
D_MIN_M = 10.0

#: Transmit power budget per service antenna (W).
PER_ANTENNA_POWER_W = 0.05

MAX_REJECTIONS = 1000


class ConfigurationError(ValueError):
    """A scenario configuration violates one of its invariants."""


class GeometryError(RuntimeError):
    """Placement sampling could not satisfy the minimum-distance constraint."""


class Architecture(str, enum.Enum):
    HCF = "hcf"
    HCF_HALF = "hcf-half"
    CF = "cf"
    CELLULAR = "cellular"


class Preset(str, enum.Enum):
    MICRO = "micro"
    MACRO = "macro"


class PathLossModel(str, enum.Enum):
    UMI = "umi"
    COST_HATA = "cost-hata"


@dataclass(frozen=True)
class CostHataParams:
    f_c_ghz: float = 1.9
    h_ap: float = 15.0
    h_ue: float = 1.65
    d0_km: float = 0.01
    d1_km: float = 0.05


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulated deployment.

    The antenna budget is split as ``N_b + L * N_a == M``; a cellular system is
    the degenerate case ``L == 0`` and a cell-free system the case ``N_b == 0``.
    """

    coverage_radius: float
    M: int
    K: int
    architecture: Architecture
    N_b: int
    L: int
    N_a: int
    tau_p: int
    tau_c: int = 200
    tau_u: int = 200
    p_u: float = 0.2
    per_antenna_power: float = PER_ANTENNA_POWER_W
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 9.0
    bandwidth_hz: float = 5e6
    path_loss: PathLossModel = PathLossModel.UMI
    shadow_sigma_db: float = 4.0
    asd_deg: float = 30.0
    cost_hata_params: CostHataParams = field(default_factory=CostHataParams)

    def __post_init__(self):
        # accept plain strings from config files
        object.__setattr__(self, "architecture", Architecture(self.architecture))
        object.__setattr__(self, "path_loss", PathLossModel(self.path_loss))
        if isinstance(self.cost_hata_params, dict):
            object.__setattr__(self, "cost_hata_params", CostHataParams(**self.cost_hata_params))
        self.validate()

    def validate(self) -> None:
        for name in ("M", "K", "N_b", "L", "N_a", "tau_p", "tau_c", "tau_u"):
            value = getattr(self, name)
            if int(value) != value:
                raise ConfigurationError(f"{name} must be an integer, got {value!r}")
        if self.N_b < 0 or self.L < 0 or self.N_a < 1:
            raise ConfigurationError("N_b and L must be >= 0 and N_a >= 1")
        if self.N_b + self.L * self.N_a != self.M:
            raise ConfigurationError(
                f"antenna budget violated: N_b + L*N_a = {self.N_b} + {self.L}*{self.N_a}"
                f" = {self.N_b + self.L * self.N_a} != M = {self.M}"
            )
        if self.N_b == 0 and self.L == 0:
            raise ConfigurationError("no service antennas: N_b == 0 and L == 0")
        if self.K < 1:
            raise ConfigurationError("K must be >= 1")
        if self.K > self.tau_c:
            raise ConfigurationError(f"K = {self.K} exceeds tau_c = {self.tau_c}")
        if not 1 <= self.tau_p <= self.tau_c:
            raise ConfigurationError(f"tau_p = {self.tau_p} must satisfy 1 <= tau_p <= tau_c")
        if self.tau_p >= self.tau_u:
            raise ConfigurationError(f"tau_p = {self.tau_p} must be < tau_u = {self.tau_u}")
        for name in ("coverage_radius", "p_u", "per_antenna_power", "bandwidth_hz", "asd_deg"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be strictly positive")
        if self.shadow_sigma_db < 0:
            raise ConfigurationError("shadow_sigma_db must be >= 0")

    @property
    def has_cbs(self) -> bool:
        return self.N_b > 0

    @property
    def n_nodes(self) -> int:
        return int(self.has_cbs) + self.L

    @property
    def p_b(self) -> float:
        """cBS (or cellular BS) power budget in watts."""
        return self.N_b * self.per_antenna_power

    @property
    def p_a(self) -> float:
        """Per-eAP power budget in watts."""
        return self.N_a * self.per_antenna_power

    @property
    def p_c(self) -> float:
        """Power budget of an M-antenna co-located array."""
        return self.M * self.per_antenna_power

    @property
    def sigma2(self) -> float:
        return noise_power(self.noise_density_dbm_hz, self.bandwidth_hz, self.noise_figure_db)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["architecture"] = self.architecture.value
        out["path_loss"] = self.path_loss.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        return cls(**data)


_PRESETS = {
    Preset.MICRO: dict(
        coverage_radius=500.0, M=128, K=8, tau_p=4, asd_deg=30.0,
        path_loss=PathLossModel.UMI, shadow_sigma_db=4.0,
    ),
    Preset.MACRO: dict(
        coverage_radius=2000.0, M=384, K=16, tau_p=8, asd_deg=10.0,
        path_loss=PathLossModel.COST_HATA, shadow_sigma_db=8.0,
    ),
}

# (N_b, L) per architecture; every AP/eAP carries 4 antennas
_SPLITS = {
    Preset.MICRO: {
        Architecture.HCF: (32, 24),
        Architecture.HCF_HALF: (64, 16),
        Architecture.CF: (0, 32),
        Architecture.CELLULAR: (128, 0),
    },
    Preset.MACRO: {
        Architecture.HCF: (96, 72),
        Architecture.HCF_HALF: (192, 48),
        Architecture.CF: (0, 96),
        Architecture.CELLULAR: (384, 0),
    },
}


def build_scenario(preset, architecture, **overrides) -> ScenarioConfig:
    """Return the full-scale preset configuration for ``preset`` x ``architecture``.

    Field-level ``overrides`` are applied before validation, so an inconsistent
    override raises :class:`ConfigurationError`.
    """
    preset = Preset(preset)
    architecture = Architecture(architecture)
    n_b, n_eap = _SPLITS[preset][architecture]
    params = dict(_PRESETS[preset], architecture=architecture, N_b=n_b, L=n_eap, N_a=4)
    unknown = set(overrides) - {f.name for f in dataclasses.fields(ScenarioConfig)}
    if unknown:
        raise ConfigurationError(f"unknown configuration fields: {sorted(unknown)}")
    params.update(overrides)
    return ScenarioConfig(**params)


def noise_power(density_dbm_hz: float, bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise power in watts over ``bandwidth_hz``."""
    if not bandwidth_hz > 0:
        raise ValueError("bandwidth must be positive")
    dbm = density_dbm_hz + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class Placement:
    """One random drop of eAPs and users.

    ``shadow_db`` has shape ``(n_nodes, K)`` with the cBS (when present) in
    row 0 followed by the eAPs in order.
    """

    cbs_position: np.ndarray
    eap_positions: np.ndarray
    ue_positions: np.ndarray
    eap_array_orientations: np.ndarray
    cbs_array_orientation: float
    shadow_db: np.ndarray

    def node_positions(self, has_cbs: bool) -> np.ndarray:
        if has_cbs:
            return np.vstack([self.cbs_position[None, :], self.eap_positions])
        return self.eap_positions

    def node_orientations(self, has_cbs: bool) -> np.ndarray:
        if has_cbs:
            return np.concatenate([[self.cbs_array_orientation], self.eap_array_orientations])
        return self.eap_array_orientations

    def distances(self, has_cbs: bool) -> np.ndarray:
        """UE-to-node distances in meters, shape ``(n_nodes, K)``."""
        nodes = self.node_positions(has_cbs)
        return np.linalg.norm(nodes[:, None, :] - self.ue_positions[None, :, :], axis=-1)


def uniform_disk(rng: np.random.Generator, radius: float, n: int) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def sample_placement(config: ScenarioConfig, rng: np.random.Generator, d_min: float = D_MIN_M) -> Placement:
    """Draw eAP/UE positions, array orientations and per-link shadowing.

    UEs closer than ``d_min`` to any node are redrawn; each UE gets at most
    :data:`MAX_REJECTIONS` attempts.
    """
    cbs = np.zeros(2)
    eaps = uniform_disk(rng, config.coverage_radius, config.L)
    eap_orient = rng.uniform(0.0, 2.0 * np.pi, config.L)
    cbs_orient = float(rng.uniform(0.0, 2.0 * np.pi))
    nodes = np.vstack([cbs[None, :], eaps]) if config.has_cbs else eaps

    ues = np.empty((config.K, 2))
    for k in range(config.K):
        for _ in range(MAX_REJECTIONS):
            candidate = uniform_disk(rng, config.coverage_radius, 1)[0]
            if np.min(np.linalg.norm(nodes - candidate, axis=1)) >= d_min:
                ues[k] = candidate
                break
        else:
            raise GeometryError(
                f"UE {k}: no position at least {d_min} m from every node after {MAX_REJECTIONS} draws"
            )

    shadow = config.shadow_sigma_db * rng.standard_normal((config.n_nodes, config.K))
    return Placement(
        cbs_position=cbs,
        eap_positions=eaps,
        ue_positions=ues,
        eap_array_orientations=eap_orient,
        cbs_array_orientation=cbs_orient,
        shadow_db=shadow,
    )
