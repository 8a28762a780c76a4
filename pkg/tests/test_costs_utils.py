# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import json
import numpy as np
import pytest
import gradflow.costs.costs_utils as cu
from gradflow.utils.utilities import NotStrictlyConvexError, ValidationError


def test_line3_values_at_targets():
    cost, topology = cu.build_line3()
    assert topology.edges == ((0, 1), (1, 2))
    assert cost.agents[0].value([1.0, 1.0]) == pytest.approx(0)
    assert cost.agents[1].value([3.0, 3.0]) == pytest.approx(0)
    assert cost.agents[2].value([6.0, 6.0]) == pytest.approx(0)
    assert [agent.value([0.0, 0.0]) for agent in cost.agents] == pytest.approx([1, 9, 36])
    # coupling term 1/3 (x1 - x2)^2
    assert cost.agents[0].value([1.0, 4.0]) == pytest.approx(3)


def test_evaluate_returns_value_and_gradient():
    cost, _ = cu.build_line3()
    value, gradient = cu.evaluate(cost, 0, [0.0, 0.0])
    assert value == pytest.approx(1)
    np.testing.assert_allclose(gradient, [-2, 0])
    _, gradient = cu.evaluate(cost, 2, [6.0, 3.0])
    np.testing.assert_allclose(gradient, [2, -2])


def test_evaluate_rejects_bad_input():
    cost, _ = cu.build_line3()
    with pytest.raises(ValueError):
        cu.evaluate(cost, 0, [0.0, np.nan])
    with pytest.raises(ValueError):
        cu.evaluate(cost, 0, [0.0, 1.0, 2.0])


@pytest.mark.parametrize('builder', [cu.build_line3, cu.build_pair2, cu.build_ring20])
def test_gradients_match_finite_differences(builder):
    cost = builder()[0]
    rng = np.random.default_rng(1)
    for x in rng.uniform(-10, 10, (100, cost.variable_count)):
        for agent in range(cost.agent_count):
            assert cu.check_gradient(cost, agent, x) <= 1e-6


@pytest.mark.parametrize('builder', [cu.build_line3, cu.build_ring20])
def test_cost_ignores_variables_outside_dependency_set(builder):
    cost = builder()[0]
    rng = np.random.default_rng(3)
    for agent in range(cost.agent_count):
        outside = np.setdiff1d(np.arange(cost.variable_count), cost.dep(agent))
        x = rng.uniform(-10, 10, cost.variable_count)
        perturbed = x.copy()
        perturbed[outside] += rng.uniform(-100, 100, outside.size)
        assert cost.agents[agent].value(perturbed) == pytest.approx(cost.agents[agent].value(x), rel=1e-14)
        np.testing.assert_array_equal(cost.agents[agent].gradient(x)[outside], 0)


def test_convexity_inequality_holds():
    cost, _, _ = cu.build_ring20()
    rng = np.random.default_rng(2)
    for agent in (0, 7, 19):
        x, y = rng.uniform(-5, 5, (2, 20))
        assert cu.check_convexity(cost, agent, x, y, 0.3) >= -1e-9


def test_quadratic_cost_validation():
    with pytest.raises(ValidationError):
        cu.QuadraticAgentCost([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(ValidationError):
        cu.QuadraticAgentCost([[-1.0]], [0.0])
    with pytest.raises(ValidationError):
        cu.QuadraticAgentCost([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], dep=(0,))
    assert cu.QuadraticAgentCost([[2.0, 0.0], [0.0, 0.0]], [0.0, 0.0]).dep == (0,)


def test_ring20_dependency_map():
    cost, topology, dependency = cu.build_ring20()
    assert cost.agent_count == 20 and topology.edge_count == 20
    assert dependency[10] == [9, 10, 11]
    assert dependency[0] == [0, 1, 19]
    assert cost.dep(19) == (0, 18, 19)
    assert cu.dependency_map(cost) == dependency


def test_ring_needs_three_agents():
    with pytest.raises(ValidationError):
        cu.build_ring([1.0, 2.0])


def test_strict_convexity():
    cost, _ = cu.build_line3()
    assert cu.check_strict_convexity(cost) > 0
    flat = cu.SeparableCost([cu.QuadraticAgentCost([[2.0, 0.0], [0.0, 0.0]], [0.0, 0.0])] * 2)
    with pytest.raises(NotStrictlyConvexError):
        cu.check_strict_convexity(flat)


def test_function_cost_estimates_hessian():
    agent = cu.FunctionAgentCost(2, lambda x: x @ x + x[0] * x[1], lambda x: 2 * x + x[::-1])
    np.testing.assert_allclose(agent.hessian(np.array([0.3, -1.2])), [[2, 1], [1, 2]], atol=1e-6)
    assert not cu.SeparableCost([agent]).is_quadratic


def test_load_problem_from_file(tmp_path):
    problem = {'name': 'pair', 'variables': 1,
               'agents': [{'Q': [[2.0]], 'b': [-2.0], 'c': 1.0}, {'Q': [[2.0]], 'b': [2.0], 'c': 1.0}],
               'topology': {'nodes': 2, 'edges': [[0, 1]]}}
    path = tmp_path / 'pair.json'
    path.write_text(json.dumps(problem))
    cost, topology = cu.load_problem(str(path))
    assert cost.agent_count == 2 and topology.edge_count == 1
    assert cost.total_value(np.array([0.0])) == pytest.approx(2)


def test_load_problem_ring_shorthand():
    cost, topology = cu.load_problem({'ring_desired': [1.0, 2.0, 3.0, 4.0]})
    assert cost.agent_count == 4 and topology.edge_count == 4
    with pytest.raises(ValidationError):
        cu.load_problem({'variables': 2, 'agents': [{'Q': [[1.0]], 'b': [0.0]}]})
