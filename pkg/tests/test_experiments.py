import dataclasses
import math

import numpy as np
import pytest

from contractclear import (
    ConfigurationError,
    ContractParams,
    FeeSchedule,
    InvalidArgument,
    MechanismKind,
    ShockConfig,
    allocate,
    calibrate_flat_fee,
    capacity_statics,
    clear_bisection,
    compare_mechanisms,
    convergence_series,
    draw_user_beta,
    efficiency,
    fee_sweep,
    load_movielens,
    movielens_comparison,
    regret_experiment,
    run_replications,
    sample_population,
    scaling_sweep,
    scenario_from_dict,
    sensitivity_grid,
    shock_run,
)


def two_agent_scenario(**experiment):
    return scenario_from_dict({
        'population': {'agents': [[10, 1], [10, 1]]},
        'contract': {'m': 8, 'tau': 0, 'g': 0},
        'experiment': experiment,
    })


class TestSampling:
    def test_substreams(self, small_scenario):
        a = sample_population(small_scenario, 3)
        assert a == sample_population(small_scenario, 3)
        assert a != sample_population(small_scenario, 4)
        assert len(a) == 20
        assert np.all((a.alpha >= 5) & (a.alpha <= 20))

    def test_fixed_population(self):
        cfg = two_agent_scenario()
        assert sample_population(cfg, 0) == sample_population(cfg, 9)

    def test_fee_schedule_validation(self):
        with pytest.raises(InvalidArgument):
            FeeSchedule(3, [0.5, 0.5], [0, 0, 0], [1, 1, 1])
        with pytest.raises(InvalidArgument):
            FeeSchedule.shock(10, 12, 0.5, 1.5, 0.0)
        schedule = FeeSchedule.shock(10, 4, 0.5, 1.5, 1.0)
        assert schedule.contract(3, 100).tau == 0.5
        assert schedule.contract(4, 100).tau == 1.5


class TestReplications:
    def test_single_replication_has_no_spread(self, small_scenario):
        row = run_replications(small_scenario, 'proposed', replications=1)
        assert row.replications == 1
        assert all(std == 0 for std in row.stds.values())
        assert row.extras['nonconverged'] == 0

    def test_compare_is_reproducible(self, small_scenario):
        a = compare_mechanisms(small_scenario).to_table()
        b = compare_mechanisms(small_scenario).to_table()
        assert a.rows == b.rows
        assert a.metadata['config_digest'] == b.metadata['config_digest']

    def test_worker_count_does_not_change_results(self, small_scenario):
        serial = compare_mechanisms(small_scenario)
        parallel = compare_mechanisms(small_scenario.replace(n_jobs=2))
        assert [row.means for row in serial.rows] == [row.means for row in parallel.rows]

    def test_compare_rows(self, small_scenario):
        result = compare_mechanisms(small_scenario)
        assert [row.mechanism for row in result.rows] == [
            'no_enforcement', 'proportional', 'flat_contract', 'proposed_equilibrium',
        ]
        proposed = result.filter('proposed_equilibrium')[0]
        proportional = result.filter('proportional')[0]
        no_enforcement = result.filter('no_enforcement')[0]
        assert proposed.mean('efficiency') >= proportional.mean('efficiency') - 1e-6
        assert proposed.mean('gini') <= no_enforcement.mean('gini') + 1e-4
        assert no_enforcement.mean('rel_eff') == pytest.approx(1.0)
        assert proposed.mean('pof') >= 1 - 1e-9

    def test_scarce_capacity(self, small_scenario):
        result = compare_mechanisms(small_scenario.replace(m=50.0, g=0.0))
        assert result.filter('no_enforcement')[0].mean('feasible') < 1
        for name in ('proportional', 'flat_contract', 'proposed_equilibrium'):
            assert result.filter(name)[0].mean('feasible') == 1


class TestSweeps:
    def test_fee_sweep_trends(self, small_scenario):
        result = fee_sweep(small_scenario)
        assert [row.grid['tau'] for row in result.rows] == [0, 0.5, 1.0, 1.5, 2.0]
        efficiency = [row.mean('efficiency') for row in result.rows]
        participation = [row.mean('participation') for row in result.rows]
        assert all(b <= a for a, b in zip(efficiency, efficiency[1:]))
        assert all(b <= a for a, b in zip(participation, participation[1:]))
        assert len(result.to_table()) == 5

    @pytest.mark.slow
    def test_fee_sweep_defaults(self, default_scenario):
        rows = fee_sweep(default_scenario).rows
        efficiency = [row.mean('efficiency') for row in rows]
        participation = [row.mean('participation') for row in rows]
        avg_cost = [row.mean('avg_cost') for row in rows]
        fairness = [row.mean('fairness') for row in rows]
        assert all(b <= a for a, b in zip(efficiency, efficiency[1:]))
        assert all(b <= a for a, b in zip(participation, participation[1:]))
        assert all(b > a for a, b in zip(avg_cost, avg_cost[1:]))
        # exits at high fees count as zero quantities and pull 1 - Gini back down
        assert fairness[0] < fairness[2]
        assert fairness[-1] < max(fairness)

    def test_fee_sweep_per_mechanism(self, small_scenario):
        result = fee_sweep(small_scenario, [MechanismKind.proportional(), 'proposed'], tau_grid=[0, 1])
        assert [(row.grid['tau'], row.mechanism) for row in result.rows] == [
            (0, 'proportional'), (0, 'proposed_equilibrium'), (1, 'proportional'), (1, 'proposed_equilibrium'),
        ]

    def test_sensitivity_grid(self, small_scenario):
        cfg = small_scenario.replace(tau_grid=(0.0, 1.0, 2.0), g_grid=(0.0, 1.0, 2.0))
        result = sensitivity_grid(cfg)
        assert len(result) == 9
        by_point = {(row.grid['tau'], row.grid['g']): row for row in result.rows}
        assert math.isnan(by_point[0.0, 1.0].extras['d_eff_d_tau'])
        assert by_point[1.0, 1.0].extras['d_eff_d_tau'] < 0
        assert math.isnan(by_point[1.0, 0.0].extras['d_fair_d_g'])
        assert not math.isnan(by_point[1.0, 1.0].extras['d_fair_d_g'])

    def test_scaling(self, small_scenario):
        result = scaling_sweep(small_scenario.replace(n_grid=(5, 10)), replications=2)
        assert len(result) == 8
        assert {row.grid['n'] for row in result.rows} == {5, 10}

    def test_scaling_needs_sampling(self):
        with pytest.raises(ConfigurationError):
            scaling_sweep(two_agent_scenario())


class TestShock:
    def test_no_shock_keeps_efficiency(self, small_scenario):
        cfg = small_scenario.replace(shock=ShockConfig(tau_pre=0.5, tau_post=0.5))
        result = shock_run(cfg)
        assert result.summary['resilience'] == pytest.approx(1.0, abs=1e-9)
        assert result.allocations.shape == (200, 20)

    def test_fee_shock(self, small_scenario):
        result = shock_run(small_scenario)
        summary = result.summary
        assert summary['resilience'] < 1
        assert summary['reconvergence_time'] is not None
        assert summary['mu_final'] == pytest.approx(summary['mu_oracle_post'], abs=1e-4)
        table = result.to_table()
        assert len(table) == 200
        assert table.metadata['experiment'] == 'shock'

    def test_binding_fee_shock(self, default_scenario):
        cfg = default_scenario.replace(m=30.0, g=0.0)
        summary = shock_run(cfg).summary
        oracle = clear_bisection(sample_population(cfg, 0), ContractParams(30.0, 1.5, 0.0))
        assert summary['mu_oracle_post'] > 0
        assert summary['mu_oracle_post'] == pytest.approx(oracle.mu_star)
        assert summary['mu_final'] == pytest.approx(oracle.mu_star, abs=1e-4)
        assert summary['reconvergence_time'] is not None
        assert 1 < summary['reconvergence_time'] < 150
        assert 0 < summary['resilience'] < 1

    def test_short_horizon(self, small_scenario):
        with pytest.raises(InvalidArgument):
            shock_run(small_scenario, FeeSchedule.shock(40, 20, 0.5, 1.5, 1.0))


class TestRegret:
    def test_stationary_play_from_equilibrium(self):
        cfg = two_agent_scenario(regret={'horizon': 200, 'amplitude': 0, 'start_at_equilibrium': True})
        result = regret_experiment(cfg)
        assert abs(result.at(200)) <= 1e-6 * 200

    def test_drifting_demand(self):
        cfg = two_agent_scenario(regret={'horizon': 1000, 'amplitude': 0.1, 'period': 250})
        result = regret_experiment(cfg)
        assert np.all(result.terms >= -1e-6)
        assert result.at(1000) > 0
        assert result.slope is not None
        assert len(result.to_table()) == 1000

    def test_stationary_regret_stops_growing(self, default_scenario):
        cfg = default_scenario.replace(m=50.0, g=0.0)
        cfg = cfg.replace(regret=dataclasses.replace(cfg.regret, horizon=2000, amplitude=0.0))
        result = regret_experiment(cfg)
        assert result.at(100) > 0
        assert result.at(2000) / result.at(1000) < 1.9

    def test_constant_step_tracks_drift(self, default_scenario):
        cfg = default_scenario.replace(m=50.0, g=0.0)
        cfg = cfg.replace(regret=dataclasses.replace(cfg.regret, horizon=2000, period=500, step_power=0.0))
        result = regret_experiment(cfg)
        assert result.at(2000) > 0
        assert result.slope is not None
        assert result.slope <= 0.6

    @pytest.mark.slow
    def test_decaying_step_lags_drift(self, default_scenario):
        cfg = default_scenario.replace(m=50.0, g=0.0)
        result = regret_experiment(cfg)
        assert result.slope > 1


class TestStatics:
    def test_two_agents(self):
        result = capacity_statics(two_agent_scenario(), [2, 8, 25])
        np.testing.assert_allclose(result.prices, [4, 1, 0], atol=1e-9)
        assert result.monotone

    def test_sampled_population(self, small_scenario):
        result = capacity_statics(small_scenario.replace(g=0.0), [10, 20, 40, 80])
        assert result.monotone
        assert np.all(np.diff(result.prices) < 0)

    def test_unsorted_grid(self):
        with pytest.raises(InvalidArgument):
            capacity_statics(two_agent_scenario(), [8, 2])


def test_convergence_series(two_agents, canonical):
    series = convergence_series(two_agents, canonical)
    assert series.converged
    assert series.mu_star == pytest.approx(1.0, abs=1e-4)
    assert set(series.series) >= {'t', 'mu', 'efficiency', 'gini', 'x_0', 'x_1'}
    assert series.series['efficiency'][-1] == pytest.approx(2 * (10 * math.log(5) - 4), abs=1e-3)
    table = series.to_table({'master_seed': 0})
    assert table.metadata['converged'] is True


class TestMovieLens:
    def test_all_mechanisms(self, ratings_path, small_scenario):
        cfg = small_scenario.replace(g=0.0)
        pop, _ = load_movielens(ratings_path, seed=cfg.master_seed)
        result = movielens_comparison(pop, cfg, replications=2)
        assert len(result) == 4
        assert result.rows[0].grid == {'n': 20, 'm': 4.0}
        for name in ('proportional', 'proposed_equilibrium'):
            assert result.filter(name)[0].mean('feasible') == 1
        assert result.filter('no_enforcement')[0].mean('rel_eff') == 1

    def test_first_replication_is_loaded_population(self, ratings_path, small_scenario):
        cfg = small_scenario.replace(g=0.0)
        pop, _ = load_movielens(ratings_path, seed=cfg.master_seed, beta_dist=cfg.beta_dist)
        np.testing.assert_array_equal(draw_user_beta(pop.ids, cfg.beta_dist, cfg.master_seed), pop.beta)
        assert not np.array_equal(draw_user_beta(pop.ids, cfg.beta_dist, cfg.master_seed, 1), pop.beta)

        result = movielens_comparison(pop, cfg, replications=1)
        c = ContractParams(len(pop) / 5.0, cfg.tau, cfg.g)
        expected = efficiency(allocate('no_enforcement', pop, c).quantities, pop, c, eps_part=cfg.eps_part)
        assert result.filter('no_enforcement')[0].mean('efficiency') == pytest.approx(expected)

    def test_flat_fee_calibrated_on_users(self, ratings_path, small_scenario):
        cfg = small_scenario.replace(g=0.0, mechanisms=(MechanismKind.flat_contract(),))
        pop, _ = load_movielens(ratings_path, seed=cfg.master_seed)
        c = ContractParams(len(pop) / 5.0, cfg.tau, cfg.g)
        result = movielens_comparison(pop, cfg, replications=1)
        assert result.rows[0].mean('mu') == pytest.approx(calibrate_flat_fee(pop, c))


def test_contract_override(small_scenario):
    row = run_replications(small_scenario, 'proportional', contract=ContractParams(100, 2.0, 0.0), replications=2)
    assert row.mean('mu') == 0
