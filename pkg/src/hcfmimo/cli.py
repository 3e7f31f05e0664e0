"""Command-line entry point and result files.

Exit codes: 0 success, 2 usage or configuration error, 3 solver error,
4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .harness import (
    EpochError,
    ExperimentResult,
    ExperimentSpec,
    Link,
    PowerMode,
    __version__,
    empirical_cdf,
    likely_rate,
    run_experiment,
)
from .power_control import BisectionSettings, SolverError
from .scenario import ConfigurationError, Preset, build_scenario

log = logging.getLogger("hcfmimo")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

DESK_EPOCHS = {Preset.MICRO: 300, Preset.MACRO: 150}
FULL_EPOCHS = 2000


class UsageError(ValueError):
    pass


@dataclass
class RunManifest:
    spec: ExperimentSpec
    version: str = __version__
    timestamp: str = ""
    outputs: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "version": self.version,
                "timestamp": self.timestamp, "outputs": dict(self.outputs)}

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(ExperimentSpec.from_dict(data["spec"]), data["version"], data["timestamp"], dict(data["outputs"]))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hcfmimo",
        description="Monte Carlo per-user SE of hierarchical cell-free, cell-free and cellular massive MIMO.",
        epilog="On the uplink --power equal means full power; on the downlink --power full means equal split.",
    )
    p.add_argument("--scenario", choices=[v.value for v in Preset], default=None)
    p.add_argument("--arch", choices=["hcf", "hcf-half", "cf", "cellular"], default=None)
    p.add_argument("--link", choices=["ul", "dl"], default=None)
    p.add_argument("--power", choices=["equal", "full", "maxmin"], default=None)
    p.add_argument("--epochs", type=int, default=None, help="default: 300 micro, 150 macro")
    p.add_argument("--full", action="store_true", help=f"run {FULL_EPOCHS} epochs")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sf-draws", type=int, default=None, help="uplink small-scale draws per epoch")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file: a manifest 'spec', or overrides {scenario: {...}, epochs, ...}")
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--emit", choices=["csv", "json", "both"], default="both")
    p.add_argument("--trace-solver", action="store_true", help="write bisection steps as JSON lines")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_config(path: Path) -> dict:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise UsageError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data.get("spec", data)


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    """Resolve a spec: preset defaults, then the config file, then explicit flags."""
    cfg = _load_config(args.config) if args.config else {}
    scen = dict(cfg.get("scenario", {}))
    preset = Preset(args.scenario or cfg.get("preset", "micro"))
    cfg_arch = scen.pop("architecture", None)
    arch = args.arch or cfg_arch or "hcf"
    if args.arch and cfg_arch and args.arch != cfg_arch:
        # the antenna split follows the architecture chosen on the command line
        scen.pop("N_b", None)
        scen.pop("L", None)
    # a full scenario dict (e.g. from a manifest) overrides every preset field
    try:
        scenario = build_scenario(preset, arch, **scen)
    except TypeError as err:
        raise UsageError(f"bad scenario override: {err}") from err

    link = Link(args.link or cfg.get("link", "dl"))
    power = args.power or cfg.get("power_mode", "equal")
    power_mode = PowerMode.MAXMIN if power == "maxmin" else PowerMode.EQUAL_OR_FULL
    if args.full:
        epochs = FULL_EPOCHS
    elif args.epochs is not None:
        epochs = args.epochs
    else:
        epochs = cfg.get("epochs", DESK_EPOCHS[preset])
    if epochs < 1:
        raise UsageError("--epochs must be >= 1")
    draws = args.sf_draws if args.sf_draws is not None else cfg.get("small_scale_draws", 20)
    if draws < 1:
        raise UsageError("--sf-draws must be >= 1")
    seed = args.seed if args.seed is not None else cfg.get("master_seed", 0)
    settings = BisectionSettings(**cfg.get("settings", {}))
    return ExperimentSpec(scenario, link, power_mode, epochs, draws, seed, settings)


def parse_cli(argv: list[str] | None = None) -> tuple[ExperimentSpec, argparse.Namespace]:
    args = build_parser().parse_args(argv)
    return spec_from_args(args), args


def _fmt(x: float) -> str:
    return repr(float(x))


def summarize(result: ExperimentResult) -> dict:
    samples = result.samples
    sums = result.sum_throughput()
    return {
        "run_id": result.spec.run_id(),
        "likely_rate_95": likely_rate(samples, 0.95),
        "median_se": float(np.median(samples)),
        "mean_se": float(np.mean(samples)),
        "baseline_likely_rate_95": likely_rate(result.baseline_samples, 0.95),
        "mean_sum_throughput_bps_hz": float(np.mean(sums)),
        "median_sum_throughput_bps_hz": float(np.median(sums)),
        "mean_sum_throughput_bps": float(np.mean(sums) * result.spec.scenario.bandwidth_hz),
        "power_saving_percent": {k: float(np.mean(v)) for k, v in result.power_stats().items()},
        "n_samples": int(samples.size),
        "fronthaul": result.metadata["fronthaul"],
        "spec": result.spec.to_dict(),
    }


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_results(result: ExperimentResult, manifest: RunManifest, fmt: str, out_dir: Path) -> dict[str, Path]:
    """Write samples.csv and cdf.csv (csv), summary.json (json) and manifest.json (always)."""
    if fmt not in ("csv", "json", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    out_dir = Path(out_dir)
    paths: dict[str, Path] = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if fmt in ("csv", "both"):
            epochs, users = result.provenance
            paths["samples"] = out_dir / "samples.csv"
            _write_csv(paths["samples"], ["epoch", "user", "se_bps_hz"],
                       ((int(e), int(u), _fmt(s)) for e, u, s in zip(epochs, users, result.samples)))
            values, probs = empirical_cdf(result.samples)
            paths["cdf"] = out_dir / "cdf.csv"
            _write_csv(paths["cdf"], ["value", "prob"], ((_fmt(v), _fmt(p)) for v, p in zip(values, probs)))
        if fmt in ("json", "both"):
            paths["summary"] = out_dir / "summary.json"
            paths["summary"].write_text(json.dumps(summarize(result), indent=2) + "\n", encoding="utf-8")
        paths["manifest"] = out_dir / "manifest.json"
        manifest.outputs = {k: str(v) for k, v in paths.items()}
        paths["manifest"].write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    except OSError as err:
        raise OSError(f"cannot write results to {err.filename or out_dir}: {err.strerror or err}") from err
    return paths


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        spec = spec_from_args(args)
    except (UsageError, ConfigurationError, ValueError, TypeError) as err:
        parser.print_usage(sys.stderr)
        print(f"hcfmimo: error: {err}", file=sys.stderr)
        return EXIT_USAGE

    workers = args.workers
    if args.trace_solver:
        spec.settings.trace = []
        workers = 1
    log.info("running %s", json.dumps(spec.to_dict()))
    try:
        result = run_experiment(spec, workers=workers)
    except (SolverError, EpochError) as err:
        print(f"hcfmimo: solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER

    manifest = RunManifest(spec, timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    try:
        paths = emit_results(result, manifest, args.emit, args.out)
        if args.trace_solver:
            trace_path = args.out / "solver_trace.jsonl"
            with trace_path.open("w", encoding="utf-8") as fh:
                for row in spec.settings.trace:
                    fh.write(json.dumps(row) + "\n")
            paths["trace"] = trace_path
    except OSError as err:
        print(f"hcfmimo: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    print(f"95%-likely SE {result.likely_rate():.4f} bit/s/Hz over {result.samples.size} samples -> {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
