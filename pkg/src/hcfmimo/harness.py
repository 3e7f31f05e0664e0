"""Seeded Monte Carlo epochs and summary statistics of per-user SE."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import build_link_correlations
from .downlink import dl_coefficients, dl_se, dl_sinr_hcf, equal_power_nu
from .estimation import assign_pilots, draw_channels, simulate_training, training_statistics
from .power_control import (
    BisectionSettings,
    SolverError,
    maxmin_downlink,
    maxmin_uplink,
    power_saving,
)
from .scenario import ConfigurationError, ScenarioConfig, sample_placement
from .uplink import ul_coeffs_hcf, ul_se, ul_sinr

__version__ = "0.1.0"

#: Slack of the in-run check that max-min never loses to the baseline.
DOMINANCE_RTOL = 1e-6


class Link(str, enum.Enum):
    UL = "ul"
    DL = "dl"


class PowerMode(str, enum.Enum):
    """Full power (uplink) or equal split (downlink), versus max-min fairness."""

    EQUAL_OR_FULL = "equal"
    MAXMIN = "maxmin"


class EpochError(RuntimeError):
    def __init__(self, epoch: int, cause: Exception):
        super().__init__(f"epoch {epoch}: {cause}")
        self.epoch = epoch
        self.cause = cause


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig
    link: Link
    power_mode: PowerMode = PowerMode.EQUAL_OR_FULL
    epochs: int = 300
    small_scale_draws: int = 20
    master_seed: int = 0
    settings: BisectionSettings = field(default_factory=BisectionSettings)

    def __post_init__(self):
        self.link = Link(self.link)
        self.power_mode = PowerMode(self.power_mode)
        if isinstance(self.scenario, dict):
            self.scenario = ScenarioConfig.from_dict(self.scenario)
        if isinstance(self.settings, dict):
            self.settings = BisectionSettings(**self.settings)
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.link is Link.UL and self.small_scale_draws < 1:
            raise ConfigurationError("small_scale_draws must be >= 1 for the uplink")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        settings = {k: v for k, v in asdict(self.settings).items() if k != "trace"}
        return {
            "scenario": self.scenario.to_dict(),
            "link": self.link.value,
            "power_mode": self.power_mode.value,
            "epochs": self.epochs,
            "small_scale_draws": self.small_scale_draws,
            "master_seed": self.master_seed,
            "settings": settings,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return cls(**data)

    def run_id(self) -> str:
        """Content hash of the resolved spec and tool version."""
        blob = json.dumps({"spec": self.to_dict(), "version": __version__}, sort_keys=True)
        return hashlib.sha1(blob.encode()).hexdigest()[:12]


@dataclass
class EpochRecord:
    """Per-user SE of one placement, with the baseline evaluated on the same draws."""

    epoch: int
    se: np.ndarray
    baseline_se: np.ndarray
    power_saving: dict | None = None


def epoch_rng(master_seed: int, epoch: int) -> np.random.Generator:
    """Child stream of epoch ``epoch``: ``SeedSequence(master_seed, spawn_key=(epoch,))``."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(epoch,)))


def _dominates(new_min: float, base_min: float, delta: float) -> bool:
    return new_min >= base_min * (1.0 - DOMINANCE_RTOL) - delta


def _uplink_epoch(spec: ExperimentSpec, stats, rng) -> EpochRecord:
    cfg = spec.scenario
    S = spec.small_scale_draws
    h = draw_channels(stats, rng, n_draws=S)
    coeffs = ul_coeffs_hcf(simulate_training(h, stats, rng))
    full = np.ones(cfg.K)
    base_sinr = ul_sinr(coeffs, full)
    base_se = ul_se(base_sinr, cfg.tau_p, cfg.tau_u).mean(axis=0)
    if spec.power_mode is PowerMode.EQUAL_OR_FULL:
        return EpochRecord(-1, base_se, base_se)
    sinr = np.empty_like(base_sinr)
    savings = []
    for i in range(S):
        c = coeffs.draw(i)
        alloc = maxmin_uplink(c, spec.settings)
        sinr[i] = ul_sinr(c, alloc.eta)
        if not _dominates(sinr[i].min(), base_sinr[i].min(), spec.settings.feasibility_tolerance):
            raise SolverError(f"max-min min SINR {sinr[i].min():.6g} below full power {base_sinr[i].min():.6g}")
        savings.append(power_saving(alloc, full)["ue"])
    se = ul_se(sinr, cfg.tau_p, cfg.tau_u).mean(axis=0)
    return EpochRecord(-1, se, base_se, {"ue": float(np.mean(savings))})


def _downlink_epoch(spec: ExperimentSpec, stats) -> EpochRecord:
    coeffs = dl_coefficients(stats)
    base_nu = equal_power_nu(coeffs)
    base_sinr = dl_sinr_hcf(coeffs, base_nu)
    base_se = dl_se(base_sinr)
    if spec.power_mode is PowerMode.EQUAL_OR_FULL:
        return EpochRecord(-1, base_se, base_se)
    alloc = maxmin_downlink(coeffs, spec.settings)
    sinr = dl_sinr_hcf(coeffs, alloc.nu)
    if not _dominates(sinr.min(), base_sinr.min(), spec.settings.feasibility_tolerance):
        raise SolverError(f"max-min min SINR {sinr.min():.6g} below equal split {base_sinr.min():.6g}")
    return EpochRecord(-1, dl_se(sinr), base_se, power_saving(alloc, base_nu))


def run_epoch(spec: ExperimentSpec, epoch: int) -> EpochRecord:
    """One placement: geometry, statistics, then the link-specific evaluation."""
    cfg = spec.scenario
    rng = epoch_rng(spec.master_seed, epoch)
    try:
        placement = sample_placement(cfg, rng)
        corr = build_link_correlations(cfg, placement)
        stats = training_statistics(corr, assign_pilots(cfg.K, cfg.tau_p), cfg.p_u, cfg.tau_p, cfg.sigma2,
                                    with_sqrt=spec.link is Link.UL)
        if spec.link is Link.UL:
            rec = _uplink_epoch(spec, stats, rng)
        else:
            rec = _downlink_epoch(spec, stats)
    except SolverError as err:
        raise EpochError(epoch, err) from err
    rec.epoch = epoch
    return rec


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    records: list[EpochRecord]

    @property
    def K(self) -> int:
        return self.spec.scenario.K

    @property
    def samples(self) -> np.ndarray:
        """Per-user SE in epoch-major order, ``epochs * K`` values."""
        return np.concatenate([r.se for r in self.records])

    @property
    def baseline_samples(self) -> np.ndarray:
        return np.concatenate([r.baseline_se for r in self.records])

    @property
    def provenance(self) -> tuple[np.ndarray, np.ndarray]:
        """``(epoch, user)`` of every entry of ``samples``."""
        epochs = np.repeat([r.epoch for r in self.records], self.K)
        users = np.tile(np.arange(self.K), len(self.records))
        return epochs, users

    def per_epoch(self) -> np.ndarray:
        return np.stack([r.se for r in self.records])

    def sum_throughput(self, bandwidth_hz: float | None = None) -> np.ndarray:
        return sum_throughput(self.per_epoch(), bandwidth_hz)

    def power_stats(self) -> dict[str, np.ndarray]:
        """Per-epoch saving percentages keyed by node kind ("ue", "cbs", "ap")."""
        keys = sorted({k for r in self.records if r.power_saving for k in r.power_saving})
        return {k: np.array([r.power_saving[k] for r in self.records if r.power_saving]) for k in keys}

    def likely_rate(self, level: float = 0.95) -> float:
        return likely_rate(self.samples, level)

    @property
    def metadata(self) -> dict:
        return {"run_id": self.spec.run_id(), "version": __version__, "spec": self.spec.to_dict(),
                "fronthaul": fronthaul_load(self.spec.scenario)}


def fronthaul_load(config) -> dict[str, int]:
    """Scalars per coherence block sent from the eAPs to the cBS (counted, not simulated).

    Forwarding the received pilot signals costs ``L N_a tau_p`` scalars, while
    forwarding per-user channel estimates would cost ``L N_a K``.
    """
    return {
        "connected_eaps": config.L,
        "pilot_signal_scalars": config.L * config.N_a * config.tau_p,
        "estimate_scalars": config.L * config.N_a * config.K,
    }


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentResult:
    """Run every epoch; records are merged in epoch order regardless of ``workers``."""
    epochs = range(spec.epochs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_epoch, [spec] * spec.epochs, epochs))
    else:
        records = [run_epoch(spec, e) for e in epochs]
    records.sort(key=lambda r: r.epoch)
    return ExperimentResult(spec, records)


def _nonempty(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("no samples")
    return x


def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and probabilities ``i / N`` (1-based ``i``); duplicates are kept."""
    x = np.sort(_nonempty(samples))
    return x, np.arange(1, x.size + 1) / x.size


def likely_rate(samples, level: float = 0.95) -> float:
    """The rate exceeded with probability ``level``: sorted sample ``ceil((1 - level) N)`` (1-based)."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    x = np.sort(_nonempty(samples))
    # round first so that e.g. 0.05 * 100 lands on 5, not 6
    idx = math.ceil(round((1.0 - level) * x.size, 9))
    return float(x[max(idx, 1) - 1])


def sum_throughput(per_epoch_se, bandwidth_hz: float | None = None) -> np.ndarray:
    """Per-epoch ``sum_k SE`` in bit/s/Hz, or bit/s when ``bandwidth_hz`` is given."""
    se = np.asarray(per_epoch_se, dtype=float)
    if se.ndim != 2 or se.shape[1] == 0:
        raise ValueError("expected a nonempty (epochs, K) array")
    total = se.sum(axis=1)
    return total if bandwidth_hz is None else total * bandwidth_hz
