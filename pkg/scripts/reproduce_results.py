"""Run every headline configuration and print 95%-likely rates, sum throughput and power savings.

Usage: python scripts/reproduce_results.py [--epochs-micro 300] [--epochs-macro 150]
                                           [--seed 0] [--workers 1] [--only micro-dl ...]
                                           [--json results/headline.json]
"""

import argparse
import json
import time
from pathlib import Path

import numpy as np

from hcfmimo import ExperimentSpec, build_scenario, likely_rate, run_experiment, sum_throughput

ARCHS = ("hcf", "hcf-half", "cf", "cellular")
GROUPS = {
    "micro-dl": ("micro", "dl"),
    "micro-ul": ("micro", "ul"),
    "macro-dl": ("macro", "dl"),
    "macro-ul": ("macro", "ul"),
}


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--epochs-micro", type=int, default=300)
    p.add_argument("--epochs-macro", type=int, default=150)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--only", nargs="*", choices=sorted(GROUPS), default=sorted(GROUPS))
    p.add_argument("--json", type=Path, default=None)
    args = p.parse_args()

    epochs = {"micro": args.epochs_micro, "macro": args.epochs_macro}
    rows = []
    print(f"{'scenario':8} {'link':4} {'arch':9} {'base 95%':>9} {'maxmin 95%':>10} {'med sumSE':>9} "
          f"{'saving %':>18} {'time s':>7}")
    for name in args.only:
        preset, link = GROUPS[name]
        for arch in ARCHS:
            spec = ExperimentSpec(build_scenario(preset, arch), link, "maxmin", epochs=epochs[preset],
                                  master_seed=args.seed)
            t0 = time.perf_counter()
            res = run_experiment(spec, workers=args.workers)
            elapsed = time.perf_counter() - t0
            base_sum = sum_throughput(np.stack([r.baseline_se for r in res.records]))
            row = {
                "scenario": preset, "link": link, "arch": arch, "epochs": spec.epochs, "seed": args.seed,
                "baseline_likely_rate": likely_rate(res.baseline_samples),
                "maxmin_likely_rate": res.likely_rate(),
                "baseline_median_sum_se": float(np.median(base_sum)),
                "power_saving_percent": {k: float(v.mean()) for k, v in res.power_stats().items()},
                "seconds": elapsed,
            }
            rows.append(row)
            saving = " ".join(f"{k}={v:.1f}" for k, v in row["power_saving_percent"].items())
            print(f"{preset:8} {link:4} {arch:9} {row['baseline_likely_rate']:9.4f} "
                  f"{row['maxmin_likely_rate']:10.4f} {row['baseline_median_sum_se']:9.2f} "
                  f"{saving:>18} {elapsed:7.0f}", flush=True)
    if args.json:
        args.json.parent.mkdir(parents=True, exist_ok=True)
        args.json.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
