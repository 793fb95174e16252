import math

import numpy as np
import pytest

from contractclear import (
    AgentParams,
    ContractParams,
    InvalidArgument,
    LogLinearAgent,
    Population,
    best_response,
    cost,
    demand_upper_bound,
    payoff,
    proximal_best_response,
    valuation,
)


def random_agents(rng, size):
    return [AgentParams(float(a), float(b), i) for i, (a, b) in enumerate(zip(rng.uniform(5, 20, size), rng.uniform(0.5, 5, size)))]


class TestParams:
    @pytest.mark.parametrize('alpha, beta', [(0, 1), (-1, 1), (1, 0), (math.inf, 1), (math.nan, 1)])
    def test_rejects_non_positive_or_non_finite(self, alpha, beta):
        with pytest.raises(InvalidArgument):
            AgentParams(alpha, beta)

    def test_contract_rejects_negative_fees(self):
        with pytest.raises(InvalidArgument):
            ContractParams(10, fee_tau=-1)
        with pytest.raises(InvalidArgument):
            ContractParams(10, fee_g=-0.5)
        with pytest.raises(InvalidArgument):
            ContractParams(0)

    def test_contract_aliases(self):
        c = ContractParams(100, 0.5, 1.0)
        assert (c.m, c.tau, c.g) == (100, 0.5, 1.0)
        assert c.replace(fee_g=0).g == 0


class TestPrimitives:
    @pytest.mark.parametrize('alpha, x, expected', [
        (10, 9, 10 * math.log(10)),
        (5, 0, 0.0),
        (20, 1, 20 * math.log(2)),
    ])
    def test_valuation(self, alpha, x, expected):
        assert valuation(AgentParams(alpha, 1), x) == pytest.approx(expected)

    @pytest.mark.parametrize('beta, x, expected', [(1, 9, 9), (0.5, 4, 2), (5, 0, 0)])
    def test_cost(self, beta, x, expected):
        assert cost(AgentParams(10, beta), x) == pytest.approx(expected)

    def test_negative_x_rejected(self):
        a = AgentParams(10, 1)
        with pytest.raises(InvalidArgument):
            valuation(a, -1)
        with pytest.raises(InvalidArgument):
            cost(a, -0.1)

    def test_payoff_examples(self):
        assert payoff(AgentParams(10, 1), ContractParams(10, 0, 1), 0, 9) == pytest.approx(13.02585, abs=1e-5)
        assert payoff(AgentParams(10, 1), ContractParams(10, 0.5, 0), 0.5, 4) == pytest.approx(8.09438, abs=1e-5)

    def test_payoff_at_zero_is_exactly_zero(self):
        rng = np.random.default_rng(3)
        for a in random_agents(rng, 50):
            c = ContractParams(10, float(rng.uniform(0, 2)), float(rng.uniform(0, 5)))
            assert payoff(a, c, float(rng.uniform(0, 10)), 0.0) == 0.0

    def test_upper_bound(self):
        assert demand_upper_bound(AgentParams(10, 1)) == 9
        assert demand_upper_bound(AgentParams(1, 2)) == 0
        assert demand_upper_bound(AgentParams(5, 5)) == 0


class TestBestResponse:
    def test_examples(self):
        assert best_response(AgentParams(10, 1), ContractParams(10, 0, 1), 0) == pytest.approx(9)
        assert best_response(AgentParams(2, 1), ContractParams(10, 1, 0), 1) == 0
        # interior candidate x=2 loses money once the execution fee is paid
        assert best_response(AgentParams(6, 1), ContractParams(10, 0.5, 20), 0.5) == 0

    def test_monotone_and_bounded(self):
        rng = np.random.default_rng(11)
        mus = np.sort(rng.uniform(0, 1000, 200))
        for a in random_agents(rng, 30):
            c = ContractParams(100, float(rng.uniform(0, 2)), 0)
            xs = np.array([best_response(a, c, mu) for mu in mus])
            assert np.all(np.diff(xs) <= 0)
            assert np.all(xs >= 0)
            assert np.all(xs <= demand_upper_bound(a))
            positive = xs[:-1] > 0
            assert np.all(np.diff(xs)[positive & (xs[1:] > 0)] < 0)

    def test_first_order_condition(self):
        rng = np.random.default_rng(5)
        for a in random_agents(rng, 100):
            c = ContractParams(100, float(rng.uniform(0, 2)), 0)
            mu = float(rng.uniform(0, 5))
            x = best_response(a, c, mu)
            if x > 0:
                agent = LogLinearAgent(a)
                assert abs(agent.marginal_value(x) - agent.marginal_cost(x) - (c.tau + mu)) <= 1e-9

    def test_zero_payoff_tie_participates(self):
        a = AgentParams(10, 1)
        c0 = ContractParams(10, 0, 0)
        x = best_response(a, c0, 0)
        fee = payoff(a, c0, 0, x)
        assert best_response(a, c0.replace(fee_g=fee), 0) == pytest.approx(x)


class TestProximal:
    def test_vanishing_weight_recovers_best_response(self):
        a = AgentParams(10, 1)
        c = ContractParams(10, 0, 0)
        assert proximal_best_response(a, c, 0, 3.0, 1e-9) == pytest.approx(9, abs=1e-4)

    def test_anchor_at_optimum_is_fixed(self):
        a = AgentParams(10, 1)
        c = ContractParams(10, 0, 0)
        for gamma in (1e-3, 1.0, 50.0):
            assert proximal_best_response(a, c, 0, 9.0, gamma) == pytest.approx(9)

    def test_closed_form_root(self):
        x = proximal_best_response(AgentParams(10, 1), ContractParams(10, 0, 0), 0, 0, 1)
        assert x == pytest.approx((-2 + math.sqrt(40)) / 2, abs=1e-5)

    def test_rejects_bad_gamma(self):
        with pytest.raises(InvalidArgument):
            proximal_best_response(AgentParams(10, 1), ContractParams(10), 0, 0, 0)

    def test_matches_best_response_in_the_limit(self):
        rng = np.random.default_rng(17)
        for a in random_agents(rng, 100):
            c = ContractParams(100, float(rng.uniform(0, 2)), 0)
            mu = float(rng.uniform(0, 5))
            prox = proximal_best_response(a, c, mu, float(rng.uniform(0, 10)), 1e-9)
            assert abs(prox - best_response(a, c, mu)) <= 1e-4

    def test_matches_grid_search(self):
        rng = np.random.default_rng(23)
        for a in random_agents(rng, 10):
            c = ContractParams(100, 0.5, 0)
            gamma, mu = float(rng.uniform(0.1, 2)), 0.3
            # anchored below the optimum the payoff stays non-negative, so the gate never binds
            x_prev = float(rng.uniform(0, 1)) * best_response(a, c, mu)
            grid = np.arange(0, demand_upper_bound(a) + 1e-4, 1e-4)
            objective = a.alpha * np.log1p(grid) - (a.beta + c.tau + mu) * grid - 0.5 * gamma * (grid - x_prev) ** 2
            expected = grid[np.argmax(objective)]
            assert proximal_best_response(a, c, mu, x_prev, gamma) == pytest.approx(expected, abs=1e-3)


class TestPopulation:
    def test_vector_kernels_match_scalars(self):
        rng = np.random.default_rng(29)
        agents = random_agents(rng, 25)
        pop = Population.from_agents(agents)
        c = ContractParams(100, 0.5, 1.0)
        x_prev = rng.uniform(0, 5, 25)
        np.testing.assert_allclose(pop.best_responses(c, 0.7), [best_response(a, c, 0.7) for a in agents])
        np.testing.assert_allclose(
            pop.proximal_best_responses(c, 0.7, x_prev, 0.5),
            [proximal_best_response(a, c, 0.7, xp, 0.5) for a, xp in zip(agents, x_prev)],
        )

    def test_round_trip_and_protocols(self, two_agents):
        pop = Population.from_agents(two_agents)
        assert len(pop) == 2
        assert pop.agents() == two_agents
        assert pop[1] == two_agents[1]
        assert pop == Population([10, 10], [1, 1])

    def test_arrays_are_read_only(self, two_agent_pop):
        with pytest.raises(ValueError):
            two_agent_pop.alpha[0] = 1.0

    def test_mismatched_lengths(self):
        with pytest.raises(InvalidArgument):
            Population([1, 2], [1])

    def test_with_alpha_scales(self, two_agent_pop):
        scaled = two_agent_pop.with_alpha(1.5)
        np.testing.assert_allclose(scaled.alpha, [15, 15])
        np.testing.assert_array_equal(scaled.beta, two_agent_pop.beta)

    def test_subset_keeps_ids(self):
        pop = Population([5, 6, 7], [1, 1, 1], [10, 11, 12])
        assert pop.subset([True, False, True]).ids.tolist() == [10, 12]

    def test_log_linear_agent_model(self):
        agent = LogLinearAgent(AgentParams(10, 1))
        c = ContractParams(10, 0, 1)
        assert agent.best_response(c, 0) == pytest.approx(9)
        assert agent.payoff(c, 0, 9) == pytest.approx(13.02585, abs=1e-5)
        assert agent.payoff(c, 0, 0) == 0.0
        assert agent.demand_upper_bound() == pytest.approx(9)
        assert agent.proximal_best_response(c, 0, 0, 1) == pytest.approx(2.16228, abs=1e-5)
