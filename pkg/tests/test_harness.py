import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hcfmimo.harness import (
    EpochError,
    ExperimentSpec,
    Link,
    PowerMode,
    empirical_cdf,
    epoch_rng,
    fronthaul_load,
    likely_rate,
    run_epoch,
    run_experiment,
    sum_throughput,
)
from hcfmimo.power_control import BisectionSettings
from hcfmimo.scenario import ConfigurationError, build_scenario


def _small(arch="hcf", **kw):
    # a reduced micro deployment keeps these runs fast
    return build_scenario("micro", arch, M=32, N_b=8 if arch != "cf" else 0,
                          L=6 if arch != "cf" else 8, K=4, tau_p=2, **kw)


def test_empirical_cdf_examples():
    v, p = empirical_cdf([3, 1, 2])
    assert list(v) == [1, 2, 3]
    np.testing.assert_allclose(p, [1 / 3, 2 / 3, 1])
    v, p = empirical_cdf([2, 2])
    assert list(v) == [2, 2] and list(p) == [0.5, 1.0]
    v, p = empirical_cdf([7.0])
    assert list(v) == [7.0] and list(p) == [1.0]
    with pytest.raises(ValueError):
        empirical_cdf([])


def test_likely_rate_examples():
    assert likely_rate(np.arange(1, 101)) == 5
    assert likely_rate(np.full(37, 0.4)) == 0.4
    with pytest.raises(ValueError):
        likely_rate([])
    with pytest.raises(ValueError):
        likely_rate([1.0], level=1.0)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=300))
def test_likely_rate_is_below_median(samples):
    assert likely_rate(samples) <= np.median(samples) + 1e-12
    assert likely_rate(samples) in samples


def test_sum_throughput_examples():
    np.testing.assert_allclose(sum_throughput(np.ones((3, 8))), 8.0)
    np.testing.assert_allclose(sum_throughput(np.ones((1, 8)), 5e6), 40e6)
    with pytest.raises(ValueError):
        sum_throughput(np.ones((2, 0)))


def test_spec_invariants():
    with pytest.raises(ConfigurationError):
        ExperimentSpec(_small(), Link.DL, epochs=0)
    with pytest.raises(ConfigurationError):
        ExperimentSpec(_small(), Link.UL, small_scale_draws=0)
    spec = ExperimentSpec(_small(), "dl", "maxmin", epochs=2, master_seed=9)
    assert ExperimentSpec.from_dict(spec.to_dict()).to_dict() == spec.to_dict()
    assert spec.run_id() == ExperimentSpec.from_dict(spec.to_dict()).run_id()


def test_epoch_streams_are_independent_of_order():
    a = epoch_rng(5, 3).standard_normal(4)
    epoch_rng(5, 1).standard_normal(100)
    np.testing.assert_array_equal(epoch_rng(5, 3).standard_normal(4), a)
    assert not np.array_equal(epoch_rng(5, 2).standard_normal(4), a)


@pytest.mark.parametrize("link", ["ul", "dl"])
def test_run_is_deterministic(link):
    spec = ExperimentSpec(_small(), link, "maxmin", epochs=2, small_scale_draws=3, master_seed=1)
    a, b = run_experiment(spec), run_experiment(spec)
    np.testing.assert_array_equal(a.samples, b.samples)
    np.testing.assert_array_equal(a.baseline_samples, b.baseline_samples)


def test_downlink_cardinality_and_provenance():
    cfg = build_scenario("micro", "hcf")
    res = run_experiment(ExperimentSpec(cfg, Link.DL, PowerMode.EQUAL_OR_FULL, epochs=2, master_seed=0))
    assert res.samples.size == 2 * 8
    epochs, users = res.provenance
    assert list(epochs) == [0] * 8 + [1] * 8
    assert list(users) == list(range(8)) * 2
    assert np.all(res.samples >= 0)
    np.testing.assert_allclose(res.sum_throughput(), res.per_epoch().sum(axis=1))


def test_doubling_epochs_keeps_prefix():
    spec = ExperimentSpec(_small(), Link.UL, PowerMode.EQUAL_OR_FULL, epochs=2, small_scale_draws=2, master_seed=4)
    short = run_experiment(spec)
    spec.epochs = 4
    long = run_experiment(spec)
    np.testing.assert_array_equal(long.samples[: short.samples.size], short.samples)


@pytest.mark.parametrize("link", ["ul", "dl"])
@pytest.mark.parametrize("arch", ["hcf", "cf", "cellular"])
def test_maxmin_dominates_baseline_every_epoch(link, arch):
    cfg = _small(arch) if arch != "cellular" else build_scenario("micro", "cellular", M=16, N_b=16, K=4, tau_p=2)
    spec = ExperimentSpec(cfg, link, PowerMode.MAXMIN, epochs=3, small_scale_draws=2, master_seed=2)
    res = run_experiment(spec)
    for rec in res.records:
        if link == "dl":
            assert rec.se.min() >= rec.baseline_se.min() - 1e-9
        assert rec.power_saving is not None
    stats = res.power_stats()
    nodes = {"hcf": {"cbs", "ap"}, "cf": {"ap"}, "cellular": {"cbs"}}[arch]
    assert set(stats) == ({"ue"} if link == "ul" else nodes)


def test_solver_failure_reports_epoch():
    spec = ExperimentSpec(_small(), Link.DL, PowerMode.MAXMIN, epochs=1, master_seed=0,
                          settings=BisectionSettings(max_iters=1))
    with pytest.raises(EpochError, match="epoch 0"):
        run_epoch(spec, 0)


def test_parallel_run_matches_serial():
    spec = ExperimentSpec(_small(), Link.DL, PowerMode.EQUAL_OR_FULL, epochs=3, master_seed=8)
    np.testing.assert_array_equal(run_experiment(spec, workers=2).samples, run_experiment(spec).samples)


def test_fronthaul_counts():
    load = fronthaul_load(build_scenario("micro", "hcf"))
    assert load == {"connected_eaps": 24, "pilot_signal_scalars": 24 * 4 * 4, "estimate_scalars": 24 * 4 * 8}
    assert fronthaul_load(build_scenario("micro", "cellular"))["pilot_signal_scalars"] == 0
