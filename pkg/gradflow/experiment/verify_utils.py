# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import time
import networkx as nx
import numpy as np
from scipy import sparse
import gradflow.algorithms.algorithms_utils as algo
import gradflow.costs.costs_utils as cu
import gradflow.graph.graph_utils as gr
import gradflow.postprocessing.postprocessing_utils as pu
import gradflow.simulation.simulation_utils as simu
from gradflow.dynamics.dynamics_utils import FlowState, GainSchedule, GradientFlow, MethodSpec, count_communication
from gradflow.utils.utilities import ValidationError

faults = ('corrupt-gradient',)


class CheckResult(object):
    """
    Outcome of one check of the verification suite.
    """
    def __init__(self, name, passed, detail, duration=0.0):
        self.name = name
        self.passed = bool(passed)
        self.detail = detail
        self.duration = duration

    def __repr__(self):
        return '%s %s: %s' % ('PASS' if self.passed else 'FAIL', self.name, self.detail)


def _builtin_problems():
    line3_cost, line3_topology = cu.build_line3()
    ring_cost, ring_topology, _ = cu.build_ring20()
    pair_cost, pair_topology = cu.build_pair2()
    return {'line3': (line3_cost, line3_topology), 'ring20': (ring_cost, ring_topology),
            'pair2': (pair_cost, pair_topology)}


def _corrupt(cost, offset=1e-3):
    # shifts the first component of every analytic gradient
    def shifted(agent):
        def gradient(x):
            grad = agent.gradient(x)
            grad[0] += offset
            return grad
        return gradient
    agents = [cu.FunctionAgentCost(agent.variable_count, agent.value, shifted(agent), agent.hessian, agent.dep)
              for agent in cost.agents]
    return cu.SeparableCost(agents, name=cost.name)


def _full_layout(cost, topology):
    return gr.aggregate_full(gr.build_incidence(topology), cost.variable_count)


def _run(flow, config, initial=0.0):
    return simu.integrate(flow, flow.initial_state(initial), config)


def check_graph_identities():
    topologies = [gr.line3_topology(), gr.ring20_topology(), gr.random_connected_topology(6, seed=1),
                  gr.random_connected_topology(8, 0.3, seed=2)]
    worst = 0.0
    for topology in topologies:
        ems = gr.build_incidence(topology)
        reference = nx.laplacian_matrix(topology.to_networkx(), nodelist=range(topology.node_count))
        worst = max(worst, abs(ems.laplacian - reference).max())
        flipped = gr.Topology(topology.node_count, [(head, tail) for tail, head in topology.edges], orient=False)
        worst = max(worst, abs(gr.build_incidence(flipped).laplacian - ems.laplacian).max())
        eigenvalues = np.linalg.eigvalsh(ems.laplacian.toarray())
        if eigenvalues[0] < -1e-10 or eigenvalues[1] <= 1e-10:
            return False, '%s: Laplacian spectrum %s' % (topology, eigenvalues[:2])
        layout = gr.aggregate_full(ems, 3)
        worst = max(worst, abs(layout.incidence - sparse.kron(sparse.identity(3), ems.incidence)).max())
        z = np.random.default_rng(0).standard_normal(layout.z_dim)
        worst = max(worst, np.abs(layout.laplacian @ z - layout.laplacian_dot(z)).max(),
                    np.abs(layout.laplacian_dot(gr.consensus_projection(layout, z))).max())
    return worst < 1e-12, 'max deviation %.2e on %d graphs' % (worst, len(topologies))


def check_spanning_tree():
    triangle = gr.Topology(3, [(0, 1), (1, 2), (2, 0)], orient=False)
    for topology in (triangle, gr.ring20_topology(), gr.random_connected_topology(8, seed=3)):
        tree = gr.spanning_tree(topology)
        if tree.edge_count != topology.node_count - 1 or not tree.is_connected():
            return False, 'invalid spanning tree of ' + str(topology)
        if not set(tree.edges) <= set(topology.edges):
            return False, 'the tree of %s uses edges outside the graph' % topology
        incidence = gr.build_incidence(topology).incidence.toarray()
        kept = [topology.edges.index(edge) for edge in tree.edges]
        rank = np.linalg.matrix_rank(incidence[:, kept])
        if rank != topology.node_count - 1:
            return False, 'the tree of %s has incidence rank %d' % (topology, rank)
        # every removed edge is a combination of the tree edges
        for removed in set(range(topology.edge_count)) - set(kept):
            if np.linalg.matrix_rank(incidence[:, kept + [removed]]) != rank:
                return False, 'edge %s of %s is independent of the tree' % (topology.edges[removed], topology)
    return True, 'N-1 edges of rank N-1, connected, subset of the graph'


def check_gradients(fault=None, points=100):
    rng = np.random.default_rng(4)
    worst = 0.0
    for cost, _ in _builtin_problems().values():
        if fault == 'corrupt-gradient':
            cost = _corrupt(cost)
        for x in rng.uniform(-10, 10, (points, cost.variable_count)):
            for agent in range(cost.agent_count):
                worst = max(worst, cu.check_gradient(cost, agent, x))
    return worst <= 1e-6, 'max deviation from central differences %.2e at %d points per problem' % (worst, points)


def check_convexity():
    rng = np.random.default_rng(5)
    worst = np.inf
    for cost, _ in _builtin_problems().values():
        for agent in range(cost.agent_count):
            for _ in range(20):
                x, y = rng.uniform(-10, 10, (2, cost.variable_count))
                worst = min(worst, cu.check_convexity(cost, agent, x, y, rng.uniform(0.01, 0.99)))
    return worst >= -1e-9, 'smallest convexity slack %.2e' % worst


def check_oracle():
    worst = 0.0
    for cost, _ in _builtin_problems().values():
        analytic = algo.solve_consensus_optimum(cost)
        numeric = algo.solve_consensus_optimum(cost, numeric=True)
        worst = max(worst, np.abs(analytic.x_star - numeric.x_star).max())
    line3 = algo.solve_consensus_optimum(cu.build_line3()[0]).x_star
    if np.abs(line3 - [3.4, 3.2]).max() > 1e-9:
        return False, 'line3 optimum %s' % line3
    return worst <= 1e-6, 'analytic/numeric deviation %.2e, line3 x* = %s' % (worst, np.round(line3, 12))


def check_method_reductions(trials=50):
    rng = np.random.default_rng(6)
    worst = 0.0
    config = simu.IntegratorConfig(dt=0.01, horizon=1.0)
    for trial in range(trials):
        cost, topology = cu.build_random(int(rng.integers(2, 9)), int(rng.integers(1, 4)), seed=trial)
        layout = _full_layout(cost, topology)
        kP, kIp = rng.uniform(0.5, 2.0, 2)
        initial = rng.standard_normal(layout.z_dim)
        flows = {key: GradientFlow(cost, MethodSpec(method, GainSchedule(kP=p, kIp=i), layout,
                                                    allow_degenerate=True))
                 for key, method, p, i in (('pi0', 'pi', 0.0, kIp), ('i', 'i', kP, kIp),
                                           ('pi1', 'pi', kP, 0.0), ('p', 'p', kP, kIp))}
        runs = {key: _run(flow, config, initial) for key, flow in flows.items()}
        worst = max(worst, np.abs(runs['pi0'].z - runs['i'].z).max(), np.abs(runs['pi0'].mu - runs['i'].mu).max(),
                    np.abs(runs['pi1'].z - runs['p'].z).max())
    return worst <= 1e-12, 'PI(kP=0) vs I and PI(kIp=0) vs P over %d random graphs: %.2e' % (trials, worst)


def check_lyapunov():
    cost, topology = cu.build_line3()
    layout = _full_layout(cost, topology)
    worst = -np.inf
    for method in ('i', 'pi'):
        flow = GradientFlow(cost, MethodSpec(method, GainSchedule(), layout))
        trajectory = _run(flow, simu.IntegratorConfig(dt=0.01, horizon=20.0))
        values = np.array([flow.lyapunov(trajectory.state(k)) for k in range(trajectory.sample_count)])
        worst = max(worst, np.diff(values).max())
    return worst <= 1e-6, 'largest increase of V per step %.2e' % worst


def check_kkt():
    line3_cost, line3_topology = cu.build_line3()
    ring_cost, ring_topology, dependency = cu.build_ring20()
    problems = ((line3_cost, _full_layout(line3_cost, line3_topology), 0.01),
                (ring_cost, _full_layout(ring_cost, ring_topology), 0.05),
                (ring_cost, gr.aggregate_reduced(ring_topology, dependency), 0.01))
    worst = 0.0
    for cost, layout, dt in problems:
        for method in ('i', 'pi'):
            flow =GradientFlow(cost, MethodSpec(method, GainSchedule(), layout))
            final = _run(flow, simu.IntegratorConfig(dt=dt, horizon=10000.0, stop=1e-9,
                                                     record_stride=1000)).final_state()
            worst = max(worst, *algo.kkt_residual(cost, layout, final.z, final.mu, flow.gains))
        x_star = algo.solve_consensus_optimum(cost).x_star
        z_star, mu = algo.recover_multipliers(cost, layout, x_star, GainSchedule())
        worst = max(worst, *algo.kkt_residual(cost, layout, z_star, mu, GainSchedule()))
    return worst <= 1e-3, 'largest consensus/stationarity residual %.2e' % worst


def check_reduced_full():
    cost, topology, dependency = cu.build_ring20()
    full = _full_layout(cost, topology)
    reduced = gr.aggregate_reduced(topology, dependency)
    config = simu.IntegratorConfig(dt=0.05, horizon=10000.0, stop=1e-9, record_stride=1000)
    finals = {}
    for layout in (full, reduced):
        flow = GradientFlow(cost, MethodSpec('pi', GainSchedule(), layout))
        finals[layout.mode] = _run(flow, config).final_state().z
    gap = max(abs(finals['full'][full.z_index(i, j)] - finals['reduced'][reduced.z_index(i, j)])
              for i, j in zip(reduced.z_agent, reduced.z_variable))

    flow = GradientFlow(cost, MethodSpec('pi', GainSchedule(kP=0.7, kIp=1.3), reduced))
    rng = np.random.default_rng(7)
    state = FlowState(rng.standard_normal(reduced.z_dim), rng.standard_normal(reduced.mu_dim))
    form_gap = np.abs(flow.rhs_reduced('pi', state, 0.0).as_vector() - flow.rhs_PI(state, 0.0).as_vector()).max()
    return gap <= 1e-4 and form_gap <= 1e-10, \
        'final state gap %.2e, per-variable vs aggregate derivative %.2e' % (gap, form_gap)


def check_integrator_orders():
    decay = FlowState([1.0, -2.0])
    orders = {scheme: simu.convergence_order(lambda t, y: -y, decay, scheme) for scheme in ('euler', 'rk4')}
    cost, topology = cu.build_line3()
    flow = GradientFlow(cost, MethodSpec('pi', GainSchedule(), _full_layout(cost, topology)))
    line3 = simu.convergence_order(flow, flow.initial_state(0.0), 'rk4')
    passed = abs(orders['euler'] - 1) <= 0.2 and abs(orders['rk4'] - 4) <= 0.3 and line3 >= 3.5
    return passed, 'euler %.2f, rk4 %.2f, line3 PI rk4 %.2f' % (orders['euler'], orders['rk4'], line3)


def check_communication():
    ratios = []
    for topology in (gr.line3_topology(), gr.ring20_topology(), gr.random_connected_topology(7, seed=8)):
        layout = gr.aggregate_full(gr.build_incidence(topology), 2)
        pi, pil = count_communication('pi', layout), count_communication('pil', layout)
        ratios.extend(pil['per_edge'] / pi['per_edge'])
    ratios = np.array(ratios)
    return bool(np.all(ratios == 2)), 'PI-L / PI scalars per message in [%g, %g]' % (ratios.min(), ratios.max())


def check_p_steady_state():
    cost, topology = cu.build_line3()
    layout = _full_layout(cost, topology)
    flow = GradientFlow(cost, MethodSpec('p', GainSchedule(), layout))
    final = _run(flow, simu.IntegratorConfig(dt=0.01, horizon=2000.0, stop=1e-11, record_stride=1000)).final_state()
    predicted = algo.predict_P_steady_state(cost, layout, kP=1.0, kG=1.0)
    gap = np.abs(final.z - predicted).max()
    residual = gr.consensus_residual(layout, final.z)
    return gap <= 1e-4 and residual > 1e-2, 'gap to prediction %.2e, consensus residual %.3f' % (gap, residual)


def check_integral_form():
    cost, topology = cu.build_line3()
    flow = GradientFlow(cost, MethodSpec('pi', GainSchedule(), _full_layout(cost, topology)))
    config = simu.IntegratorConfig(dt=0.01, horizon=50.0)
    saddle = _run(flow, config)
    integral = simu.integrate(flow.integral_form, FlowState(np.zeros(flow.z_dim), np.zeros(flow.z_dim)), config)
    gap = np.abs(saddle.z - integral.z).max()
    return gap <= 1e-6, 'max deviation between the two PI forms %.2e' % gap


def check_metrics():
    times = np.arange(0, 10.0001, 0.01)
    metrics = pu.scalar_metrics(times, 2.0 * (1 - np.exp(-times)), 2.0)
    passed = metrics.overshoot_pct == 0 and abs(metrics.settle10 - np.log(10)) <= 0.01 \
        and metrics.settle10 <= metrics.settle1
    return passed, 'M_p %.2f, t_10 %.3f (ln 10 = %.3f)' % (metrics.overshoot_pct, metrics.settle10, np.log(10))


checks = (('graph identities', check_graph_identities),
          ('spanning tree', check_spanning_tree),
          ('gradients', check_gradients),
          ('convexity', check_convexity),
          ('oracle', check_oracle),
          ('method reductions', check_method_reductions),
          ('Lyapunov monotonicity', check_lyapunov),
          ('KKT residuals', check_kkt),
          ('reduced/full equivalence', check_reduced_full),
          ('integrator orders', check_integrator_orders),
          ('communication', check_communication),
          ('P steady state', check_p_steady_state),
          ('PI integral form', check_integral_form),
          ('metrics', check_metrics))


def verify(fault=None, verbose=True):
    """
    Run the verification suite and print one PASS/FAIL line per check.

    :param fault: None, or 'corrupt-gradient' to shift the analytic gradients seen by the gradient check
    :param verbose: False to print nothing
    :return: True if every check passed, and the list of CheckResult
    """
    if fault is not None and fault not in faults:
        raise ValidationError('unknown fault %r, expected one of %s' % (fault, faults))
    results = []
    for name, check in checks:
        start = time.perf_counter()
        try:
            passed, detail = check(fault) if check is check_gradients else check()
        except (ArithmeticError, ValueError) as err:
            passed, detail = False, '%s: %s' % (type(err).__name__, err)
        result = CheckResult(name, passed, detail, time.perf_counter() - start)
        results.append(result)
        if verbose:
            print('%s  %-26s %s (%.1f s)' % ('PASS' if passed else 'FAIL', name, detail, result.duration))
    all_passed = all(result.passed for result in results)
    if verbose:
        print('%d/%d checks passed' % (sum(result.passed for result in results), len(results)))
    return all_passed, results
