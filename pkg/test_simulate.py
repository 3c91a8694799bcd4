"""
Test the delay model, the event-driven simulator, Staircase and the closed forms.
"""
import inspect
import itertools
import math

import numpy as np
import pytest

from src.exceptions import ConfigurationError, FieldDomainError
from src.schemas import AdversaryRule, DelayModel, RunManifest, Scenario, Scheme, SimConfig
from src.simulate import batch, delays, engine, records, staircase, theory


def _config(**overrides):
    fields = dict(n=4, z=1, b=10, m=10, ell=20, scenario="homogeneous", lam=2.0, seed=3)
    fields.update(overrides)
    return SimConfig(**fields)


# -- configuration ---------------------------------------------------------

def test_config_rejects_z_not_below_n():
    with pytest.raises(ValueError):
        _config(n=4, z=4)


def test_custom_scenario_needs_one_rate_per_worker():
    with pytest.raises(ValueError):
        _config(scenario="custom", lambdas=[1.0, 2.0])
    config = _config(scenario="custom", lambdas=[1.0, 2.0, 3.0, 4.0])
    model = delays.build_delay_model(config, trial=0)
    assert model.lambdas == [1.0, 2.0, 3.0, 4.0]


def test_scenario_rate_multisets_for_fifty_workers():
    rng = np.random.default_rng(0)
    one = delays.scenario_lambdas(_config(n=50, z=13, scenario="1"), rng)
    assert sorted(one.tolist()) == sorted([3.0] * 25 + [1.0] * 12 + [9.0] * 13)
    two = delays.scenario_lambdas(_config(n=50, z=13, scenario="2"), rng)
    assert sorted(two.tolist()) == sorted([1.0] * 16 + [3.0] * 16 + [9.0] * 18)
    three = delays.scenario_lambdas(_config(n=50, z=13, scenario="3"), rng)
    assert three.min() >= 0.5 and three.max() <= 9.0


def test_clustered_scenario_puts_colluders_first():
    lambdas = delays.scenario_lambdas(_config(n=10, z=4, scenario="clustered"), np.random.default_rng(0))
    assert lambdas.tolist() == [9.0, 9.0, 3.0, 3.0] + [1.0] * 6


def test_shift_is_inverse_rate():
    model = delays.build_delay_model(_config(scenario="1", n=8), trial=2)
    assert model.shifts == pytest.approx([1.0 / lam for lam in model.lambdas])
    assert all(10e6 <= c <= 20e6 for c in model.capacities)


# -- delay sampling --------------------------------------------------------

def _single_worker(lam=2.0, capacity=15e6):
    return DelayModel(lambdas=[lam], shifts=[1.0 / lam], capacities=[capacity])


def test_packet_service_has_shift_floor_and_mean():
    model = _single_worker(lam=2.0)
    rng = np.random.default_rng(1)
    b = 10
    draws = np.array([delays.sample_packet_service(model, 0, b, rng) for _ in range(100_000)])
    assert draws.min() >= 0.5 / b
    assert draws.mean() == pytest.approx((0.5 + 0.5) / b, rel=0.01)
    assert delays.expected_packet_service(model, b)[0] == pytest.approx(0.1)


def test_transmission_time_matches_capacity():
    model = _single_worker(capacity=15e6)
    rng = np.random.default_rng(2)
    times = np.array([delays.sample_transmission(model, 0, 8000, rng) for _ in range(2000)])
    assert np.all(np.isfinite(times))
    assert times.mean() == pytest.approx(8000 / 15e6, rel=0.01)
    doubled = np.array([delays.sample_transmission(model, 0, 16000, rng) for _ in range(2000)])
    assert doubled.mean() == pytest.approx(2 * times.mean(), rel=0.01)


def test_transmission_rate_floor():
    model = _single_worker(capacity=1e-9)
    rng = np.random.default_rng(3)
    assert all(delays.sample_transmission(model, 0, 8, rng) == 8.0 for _ in range(100))


def test_transmission_needs_bits():
    with pytest.raises(ConfigurationError):
        delays.sample_transmission(_single_worker(), 0, 0, np.random.default_rng(0))


def test_streams_are_reproducible_and_distinct():
    a = delays.stream_rng(7, 3, delays.STREAM_SERVICE, worker=1).random()
    b = delays.stream_rng(7, 3, delays.STREAM_SERVICE, worker=1).random()
    c = delays.stream_rng(7, 3, delays.STREAM_SERVICE, worker=2).random()
    d = delays.stream_rng(7, 3, delays.STREAM_SERVICE, worker=1, salt=0).random()
    assert a == b and a != c and a != d


# -- adaptive schemes ------------------------------------------------------

def test_minimal_private_topology_completes():
    record, outcome = engine.run_adaptive(_config(n=2, z=1, b=1, m=1), Scheme.PRAC)
    assert outcome.correct
    assert record.completion_time_s > 0
    assert record.packets_sent >= 2


def test_prac_decodes_exactly_and_respects_gate():
    config = _config(n=6, z=2, b=12, m=24, scenario="1")
    for trial in range(10):
        _, outcome = engine.run_adaptive(config, Scheme.PRAC, trial)
        assert outcome.correct
        assert outcome.trace.respects_gate()
        assert outcome.trace.sends_before_stop()
        assert outcome.epsilon >= 0


def test_zero_colluders_prac_equals_c3p():
    config = _config(n=5, z=0, b=8, m=8)
    prac = engine.run_prac(config, trial=1)
    c3p = engine.run_c3p(config, trial=1)
    assert prac.completion_time_s == c3p.completion_time_s
    assert prac.packets_sent == c3p.packets_sent


def test_gc3p_drops_adversaries_by_rule():
    config = _config(n=6, z=2, scenario="custom", lambdas=[1.0, 9.0, 3.0, 9.0, 1.0, 2.0])
    model = delays.build_delay_model(config, trial=0)
    rng = np.random.default_rng(0)
    slowest = engine.select_workers(config.copy(update={"adversary_rule": AdversaryRule.SLOWEST}), Scheme.GC3P, model, rng)
    fastest = engine.select_workers(config.copy(update={"adversary_rule": AdversaryRule.FASTEST}), Scheme.GC3P, model, rng)
    assert slowest == [1, 2, 3, 5]
    assert fastest == [0, 2, 4, 5]
    randomly = engine.select_workers(config, Scheme.GC3P, model, rng)
    assert len(randomly) == 4


def test_c3p_on_n_minus_z_workers():
    config = _config(n=6, z=2, c3p_workers="n_minus_z")
    model = delays.build_delay_model(config, trial=0)
    assert engine.select_workers(config, Scheme.C3P, model, np.random.default_rng(0)) == [0, 1, 2, 3]


def test_staircase_is_not_adaptive():
    with pytest.raises(ConfigurationError):
        engine.run_adaptive(_config(), Scheme.STAIRCASE)


# -- Staircase -------------------------------------------------------------

def test_threshold_completion_small_fixture():
    assert staircase.threshold_completion_time([1.0, 2.0, 3.0, 4.0], k=3, z=1) == pytest.approx(8.0 / 3.0)
    assert staircase.threshold_completion_time([1.0, 2.0, 3.0, 4.0], k=4, z=1) == pytest.approx(4.0)


def test_threshold_completion_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(2, 9))
        z = int(rng.integers(0, n))
        times = np.sort(rng.exponential(1.0, size=n))
        for k in range(z + 1, n + 1):
            brute = min((k - z) / (d - z) * times[d - 1] for d in range(k, n + 1))
            assert staircase.threshold_completion_time(times, k, z) == pytest.approx(brute)
            assert staircase.threshold_completion_time(times, k, z) <= times[k - 1]


def test_staircase_outer_min_over_k():
    config = _config(n=6, z=2, b=12, m=12)
    by_k = staircase.staircase_trial(config, trial=0)
    assert sorted(by_k) == [3, 4, 5, 6]
    record = staircase.run_staircase(config, trial=0)
    assert record.completion_time_s == min(by_k.values())
    assert staircase.run_staircase(config, trial=0, k=6).completion_time_s == by_k[6]
    with pytest.raises(ConfigurationError):
        staircase.run_staircase(config, trial=0, k=2)


# -- closed forms ----------------------------------------------------------

def test_completion_estimate_fixture():
    assert theory.prac_completion_estimate([0.25, 0.5, 1.0, 1.0], z=2, b=100, epsilon=5) == pytest.approx(52.5)


def test_completion_estimate_single_term():
    betas = [0.1, 0.3, 0.7]
    assert theory.prac_completion_estimate(betas, z=2, b=100, epsilon=5) == pytest.approx(105 * 0.7)


def test_homogeneous_estimate():
    assert theory.homogeneous_estimate(0.2, n=10, z=3, b=100, epsilon=5) == pytest.approx(105 * 0.2 / 7)
    assert theory.prac_completion_estimate([0.2] * 10, 3, 100, 5) == pytest.approx(105 * 0.2 / 7)


def test_completion_estimate_with_rtt():
    base = theory.prac_completion_estimate([1.0, 1.0], 0, 10, 0)
    assert theory.prac_completion_estimate([1.0, 1.0], 0, 10, 0, rtt=[0.1, 0.3]) == pytest.approx(base + 0.3)


def test_gap_bound_fixture():
    assert theory.staircase_gap_bound([0.5, 1.0, 1.0, 1.0], z=1, b=100, d_star=2, epsilon=5) == pytest.approx(65.0)


def test_gap_bound_at_d_equal_n_is_negative():
    bound = theory.staircase_gap_bound([0.5, 1.0, 2.0, 4.0], z=1, b=100, d_star=4, epsilon=5)
    assert bound == pytest.approx(-5 / (3 / 4.0))


def test_gap_bound_domain():
    with pytest.raises(FieldDomainError):
        theory.staircase_gap_bound([1.0, 1.0, 1.0], z=1, b=10, d_star=1, epsilon=1)


def test_optimal_d():
    betas = [1.0, 1.0, 1.0, 10.0]
    assert theory.optimal_d(betas, z=1, b=100) == 3
    assert theory.staircase_expected(betas, z=1, b=100) == pytest.approx(50.0)


def test_config_estimate_uses_analytic_means():
    config = _config(n=4, z=2, b=100, m=100, lam=1.0)
    assert theory.config_completion_estimate(config, epsilon=5) == pytest.approx(105 * 0.02 / 2)


def test_config_gap_bound_uses_analytic_means():
    config = _config(n=4, z=2, b=100, m=100, lam=1.0)
    assert theory.config_gap_bound(config, d_star=3, epsilon=5) == pytest.approx(0.95)


# -- batches, sweeps and CSV -----------------------------------------------

def test_batch_is_deterministic():
    config = _config(n=4, z=1, b=6, m=6, scenario="1")
    first = batch.batch(config, trials=3)
    second = batch.batch(config, trials=3)
    assert records.records_to_csv(first.records) == records.records_to_csv(second.records)
    assert [r.scheme for r in first.records[:4]] == list(batch.SCHEME_ORDER)
    assert first.gate_violations == 0 and first.incorrect == 0


def test_batch_summary_interval():
    config = _config(n=4, z=1, b=6, m=6)
    result = batch.batch(config, trials=5, schemes=[Scheme.PRAC])
    summary = result.summaries[Scheme.PRAC]
    assert summary.trials == 5
    assert summary.ci_low <= summary.mean <= summary.ci_high
    assert summary.mean_epsilon is not None


def test_staircase_summary_records_k():
    result = batch.batch(_config(n=5, z=1, b=8, m=8), trials=3, schemes=[Scheme.STAIRCASE])
    summary = result.summaries[Scheme.STAIRCASE]
    assert 2 <= summary.staircase_k <= 5
    assert all(r.epsilon_observed is None for r in result.records)


def test_unpaired_batch_changes_draws():
    config = _config(n=4, z=0, b=6, m=6)
    paired = batch.batch(config, trials=2, schemes=[Scheme.PRAC, Scheme.C3P], paired=True)
    unpaired = batch.batch(config, trials=2, schemes=[Scheme.PRAC, Scheme.C3P], paired=False)
    times = lambda res, s: [r.completion_time_s for r in res.records if r.scheme == s]
    assert times(paired, Scheme.PRAC) == times(paired, Scheme.C3P)
    assert times(unpaired, Scheme.PRAC) != times(unpaired, Scheme.C3P)


def test_batch_needs_trials():
    with pytest.raises(ConfigurationError):
        batch.batch(_config(), trials=0)


def test_parse_sweep():
    assert batch.parse_sweep("z:1..4") == ("z", [1, 2, 3, 4])
    assert batch.parse_sweep("b:10,20") == ("b", [10, 20])
    for bad in ("q:1..2", "lam:1..2", "z", "z:a..b", "z:"):
        with pytest.raises(ConfigurationError):
            batch.parse_sweep(bad)


def test_package_keeps_batch_submodule():
    import src.simulate

    assert inspect.ismodule(src.simulate.batch)
    assert src.simulate.run_batch is batch.batch
    assert src.simulate.parse_sweep is batch.parse_sweep


def test_sweep_rejects_invalid_point():
    with pytest.raises(ConfigurationError):
        batch.run_sweep(_config(n=4), "z", [4], trials=1)


def test_sweep_long_format():
    runs = batch.run_sweep(_config(n=5, b=6, m=6), "z", [1, 2], trials=2, schemes=[Scheme.PRAC])
    assert [point for point, _ in runs] == [1, 2]
    assert [r.z for _, res in runs for r in res.records] == [1, 1, 2, 2]


def test_csv_layout(tmp_path):
    config = _config()
    result = batch.batch(config, trials=2, schemes=[Scheme.PRAC, Scheme.STAIRCASE])
    manifest = RunManifest(subcommand="simulate", params={"n": 4, "trials": 2}, seed=3, out="x.csv")
    path = tmp_path / "out.csv"
    records.save_records(path, result.records, manifest)

    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    assert RunManifest.from_comment(lines[0]).params == {"n": 4, "trials": 2}
    assert "x.csv" not in lines[0]
    assert lines[1] == ",".join(records.CSV_COLUMNS)
    rows = records.read_records(path)
    assert len(rows) == 4
    assert {row["scheme"] for row in rows} == {"PRAC", "Staircase"}
    assert all(float(row["completion_time_s"]) > 0 for row in rows)
    assert [row["epsilon_observed"] == "" for row in rows if row["scheme"] == "Staircase"] == [True, True]
