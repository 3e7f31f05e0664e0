"""Compare the downlink closed-form SINR with the Monte Carlo oracle on random small instances.

Both oracle modes are reported: "per_term" sums per-node second moments as
independent terms, "coherent" keeps the cross-node coupling of pilot-sharing
interferers that the closed form leaves out.

Usage: python scripts/validate_closed_form.py [--instances 20] [--draws 100000] [--seed 0]
"""

import argparse

import numpy as np

from hcfmimo.channel import LinkCorrelations, NodeGroup, local_scattering_correlation
from hcfmimo.downlink import dl_coefficients, dl_sinr_hcf, dl_sinr_monte_carlo_oracle
from hcfmimo.estimation import assign_pilots, training_statistics

SIGMA2 = 1.5812e-13
P_U = 0.2


def random_instance(rng, K=3, tau_p=2, n_cbs_ant=4, n_aps=2, n_ap_ant=2):
    def group(kind, n, N):
        beta = 10.0 ** (rng.uniform(-115.0, -100.0, (n, K)) / 10.0)
        R = local_scattering_correlation(N, rng.uniform(-np.pi, np.pi, (n, K)), rng.uniform(0.1, 0.6), beta)
        return NodeGroup(kind, R, beta, 0.05 * N)

    corr = LinkCorrelations([group("cbs", 1, n_cbs_ant), group("ap", n_aps, n_ap_ant)])
    return training_statistics(corr, assign_pilots(K, tau_p), P_U, tau_p, SIGMA2)


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    worst = {"per_term": 0.0, "coherent": 0.0}
    for i in range(args.instances):
        stats = random_instance(rng)
        c = dl_coefficients(stats)
        nu = np.sqrt(rng.dirichlet(np.ones(c.K), size=c.n_nodes))
        closed = dl_sinr_hcf(c, nu)
        errs = {}
        for mode in worst:
            mc = dl_sinr_monte_carlo_oracle(stats, nu, args.draws, rng, mode=mode)
            errs[mode] = np.max(np.abs(mc / closed - 1))
            worst[mode] = max(worst[mode], errs[mode])
        print(f"instance {i:2d}: per_term {errs['per_term']:7.3%}  coherent {errs['coherent']:7.3%}", flush=True)
    print(f"worst: per_term {worst['per_term']:.3%}  coherent {worst['coherent']:.3%}")


if __name__ == "__main__":
    main()
