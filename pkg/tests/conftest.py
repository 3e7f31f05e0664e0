import numpy as np
from hypothesis import HealthCheck, settings

from hcfmimo.channel import LinkCorrelations, NodeGroup, local_scattering_correlation
from hcfmimo.estimation import assign_pilots, training_statistics

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SIGMA2 = 1.5812e-13
P_U = 0.2


def random_group(rng, kind, n, K, N, power, beta_db=(-125.0, -95.0), asd=None):
    """Local-scattering links with random angles and path gains."""
    angle = rng.uniform(-np.pi, np.pi, (n, K))
    beta = 10.0 ** (rng.uniform(*beta_db, (n, K)) / 10.0)
    asd = rng.uniform(0.1, 0.6) if asd is None else asd
    return NodeGroup(kind, local_scattering_correlation(N, angle, asd, beta), beta, power)


def random_links(rng, K, n_cbs_ant=0, n_aps=0, n_ap_ant=2, beta_db=(-125.0, -95.0)):
    groups = []
    if n_cbs_ant:
        groups.append(random_group(rng, "cbs", 1, K, n_cbs_ant, 0.05 * n_cbs_ant, beta_db))
    if n_aps:
        groups.append(random_group(rng, "ap", n_aps, K, n_ap_ant, 0.05 * n_ap_ant, beta_db))
    return LinkCorrelations(groups)


def random_stats(rng, K, tau_p, n_cbs_ant=0, n_aps=0, n_ap_ant=2, beta_db=(-125.0, -95.0)):
    corr = random_links(rng, K, n_cbs_ant, n_aps, n_ap_ant, beta_db)
    return training_statistics(corr, assign_pilots(K, tau_p), P_U, tau_p, SIGMA2)


def random_psd(rng, N, rank=None):
    rank = N if rank is None else rank
    X = rng.standard_normal((N, rank)) + 1j * rng.standard_normal((N, rank))
    return X @ X.conj().T


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
