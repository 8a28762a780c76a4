# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import json
import numpy as np
import pytest
import gradflow.algorithms.algorithms_utils as algo
import gradflow.costs.costs_utils as cu
import gradflow.graph.graph_utils as gr
import gradflow.simulation.simulation_utils as simu
from gradflow.dynamics.dynamics_utils import GainSchedule, GradientFlow, MethodSpec
from gradflow.utils.utilities import NotStrictlyConvexError


def test_line3_optimum():
    result = algo.solve_consensus_optimum(cu.build_line3()[0])
    np.testing.assert_allclose(result.x_star, [3.4, 3.2], atol=1e-12)
    assert result.method == 'analytic'
    assert result.residual < 1e-8


def test_single_agent_optimum():
    center = np.array([1.5, -2.0, 0.25])
    cost = cu.SeparableCost([cu.QuadraticAgentCost(2 * np.eye(3), -2 * center, center @ center)])
    result = algo.solve_consensus_optimum(cost)
    np.testing.assert_allclose(result.x_star, center)
    assert result.f_star == pytest.approx(0, abs=1e-12)


def test_ring20_optimum_solves_cyclic_system():
    cost, _, _ = cu.build_ring20()
    x = algo.solve_consensus_optimum(cost).x_star
    desired = np.arange(1, 21)
    np.testing.assert_allclose(5 * x - 2 * np.roll(x, 1) - 2 * np.roll(x, -1), desired, atol=1e-10)


@pytest.mark.parametrize('builder', [cu.build_line3, cu.build_pair2, cu.build_ring20])
def test_analytic_and_numeric_agree(builder):
    cost = builder()[0]
    analytic = algo.solve_consensus_optimum(cost)
    numeric = algo.solve_consensus_optimum(cost, numeric=True)
    assert numeric.method == 'numeric'
    np.testing.assert_allclose(numeric.x_star, analytic.x_star, atol=1e-6)


@pytest.mark.parametrize('builder', [cu.build_line3, cu.build_ring20])
def test_descent_reaches_tight_tolerance(builder):
    # below |grad| ~ 1e-8 the decrease of f is lost in rounding
    result = algo.solve_consensus_optimum(builder()[0], numeric=True, max_iterations=20000)
    assert result.residual < algo.gradient_tolerance
    assert result.iterations < 20000


def test_singular_sum_is_rejected():
    cost = cu.SeparableCost([cu.QuadraticAgentCost([[2.0, 0.0], [0.0, 0.0]], [1.0, 0.0])] * 2)
    with pytest.raises(NotStrictlyConvexError):
        algo.solve_consensus_optimum(cost)


def test_oracle_json(tmp_path):
    result = algo.solve_consensus_optimum(cu.build_pair2()[0])
    path = tmp_path / 'oracle.json'
    result.save(str(path))
    saved = json.loads(path.read_text())
    assert saved['x_star'] == pytest.approx([0.0])
    assert set(saved) >= {'x_star', 'f_star', 'residual'}


def test_p_steady_state_line3(line3):
    cost, _, layout = line3
    z_bar = algo.predict_P_steady_state(cost, layout, kP=1.0, kG=1.0)
    flow = GradientFlow(cost, MethodSpec('p', GainSchedule(), layout))
    residual = layout.laplacian_dot(z_bar) + flow.aggregate_gradient(z_bar)
    assert np.linalg.norm(residual) < 1e-10
    # worst percent error from z(0) = 0, attained by agent 3 on x_1
    x_star = np.array([3.4, 3.2])[layout.z_variable]
    error = 100 * np.abs(x_star - z_bar) / x_star
    assert error.max() == pytest.approx(43.58, abs=2)
    assert np.argmax(error) == layout.z_index(2, 0)
    assert gr.consensus_residual(layout, z_bar) > 1e-2


def test_p_steady_state_consensus_improves_with_gain(line3):
    cost, _, layout = line3
    residuals = [gr.consensus_residual(layout, algo.predict_P_steady_state(cost, layout, kP=kP)) for kP in (1, 10, 100)]
    assert residuals[0] > residuals[1] > residuals[2]


def test_p_steady_state_of_identical_agents():
    agent = cu.QuadraticAgentCost([[2.0, 0.5], [0.5, 1.0]], [-1.0, 2.0])
    cost = cu.SeparableCost([agent] * 4)
    layout = gr.aggregate_full(gr.build_incidence(gr.ring_topology(4)), 2)
    x_star = algo.solve_consensus_optimum(cost).x_star
    np.testing.assert_allclose(algo.predict_P_steady_state(cost, layout, kP=3.0), x_star[layout.z_variable],
                               atol=1e-10)


def test_p_steady_state_newton_path(line3):
    cost, _, layout = line3
    wrapped = cu.SeparableCost([cu.FunctionAgentCost(2, agent.value, agent.gradient, agent.hessian)
                                for agent in cost.agents])
    np.testing.assert_allclose(algo.predict_P_steady_state(wrapped, layout),
                               algo.predict_P_steady_state(cost, layout), atol=1e-9)


def test_kkt_residual_separates_conditions(line3):
    cost, _, layout = line3
    gains = GainSchedule()
    consensus, stationarity = algo.kkt_residual(cost, layout, np.zeros(6), np.zeros(4), gains)
    assert consensus == 0
    assert stationarity == pytest.approx(np.linalg.norm([2, 0, 12, 0, 6, 0]))
    consensus, stationarity = algo.kkt_residual(cost, layout, np.full(6, 1.0), np.zeros(4), gains)
    assert consensus == 0 and stationarity > 0


def test_recovered_multipliers_certify_optimum(ring20_reduced):
    cost, _, layout = ring20_reduced
    x_star = algo.solve_consensus_optimum(cost).x_star
    z_star, mu = algo.recover_multipliers(cost, layout, x_star, GainSchedule())
    consensus, stationarity = algo.kkt_residual(cost, layout, z_star, mu, GainSchedule())
    assert consensus == 0
    assert stationarity < 1e-8


@pytest.mark.parametrize('method', ['i', 'pi'])
def test_converged_run_satisfies_kkt(line3, method):
    cost, _, layout = line3
    flow = GradientFlow(cost, MethodSpec(method, GainSchedule(), layout))
    config = simu.IntegratorConfig(dt=0.01, horizon=2000.0, stop=1e-9, record_stride=1000)
    final = simu.integrate(flow, flow.initial_state(0.0), config).final_state()
    assert max(algo.kkt_residual(cost, layout, final.z, final.mu, flow.gains)) <= 1e-3
    np.testing.assert_allclose(final.z, np.array([3.4, 3.2])[layout.z_variable], atol=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize('method', ['i', 'pi'])
def test_converged_ring20_full_run_satisfies_kkt(ring20_full, method):
    cost, _, layout = ring20_full
    flow = GradientFlow(cost, MethodSpec(method, GainSchedule(), layout))
    config = simu.IntegratorConfig(dt=0.05, horizon=10000.0, stop=1e-9, record_stride=1000)
    final = simu.integrate(flow, flow.initial_state(0.0), config).final_state()
    assert max(algo.kkt_residual(cost, layout, final.z, final.mu, flow.gains)) <= 1e-3
    x_star = algo.solve_consensus_optimum(cost).x_star
    assert np.abs(final.z - x_star[layout.z_variable]).max() <= 1e-3
