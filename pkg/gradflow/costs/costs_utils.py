# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import numpy as np
from gradflow.graph import graph_utils as gr
from gradflow.utils.utilities import NotStrictlyConvexError, ValidationError, load_file

convexity_tolerance = 1e-12  # smallest accepted eigenvalue of the reduced Hessian


class AgentCost(object):
    """
    Base class for the individual cost f_i of one agent. Subclasses implement value(), gradient() and hessian().
    """
    is_quadratic = False

    def __init__(self, variable_count, dep):
        """
        :param variable_count: dimension n of the parameter vector
        :param dep: indices of the variables the cost depends on
        """
        self.variable_count = int(variable_count)
        dep = sorted(set(int(j) for j in dep))
        if dep and (dep[0] < 0 or dep[-1] >= self.variable_count):
            raise ValidationError('dependency set %s outside [0, %d)' % (dep, self.variable_count))
        self.dep = tuple(dep)

    def check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.variable_count,):
            raise ValueError('x should have shape (%d,), got %s' % (self.variable_count, x.shape))
        if not np.all(np.isfinite(x)):
            raise ValueError('x should be finite, got ' + str(x))
        return x

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError


class QuadraticAgentCost(AgentCost):
    """
    Quadratic cost f_i(x) = 1/2 x^T Q x + b^T x + c with Q symmetric positive semidefinite.
    """
    is_quadratic = True

    def __init__(self, Q, b, c=0.0, dep=None):
        """
        :param Q: n x n symmetric positive semidefinite matrix
        :param b: linear term, vector of length n
        :param c: constant term
        :param dep: dependency set, by default the variables appearing in Q or b
        """
        Q = np.array(Q, dtype=float)
        b = np.array(b, dtype=float).ravel()
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != b.size:
            raise ValidationError('Q should be n x n and b of length n, got %s and %s' % (Q.shape, b.shape))
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
            raise ValidationError('Q should be symmetric')
        if np.linalg.eigvalsh(Q).min(initial=0.0) < -1e-10:
            raise ValidationError('Q should be positive semidefinite')
        used = np.flatnonzero(np.any(Q != 0, axis=0) | (b != 0))
        if dep is None:
            dep = used
        super().__init__(b.size, dep)
        if set(int(j) for j in used) - set(self.dep):
            raise ValidationError('Q or b has entries outside the dependency set ' + str(list(self.dep)))
        self.Q = Q
        self.b = b
        self.c = float(c)
        for array in (self.Q, self.b):
            array.flags.writeable = False

    def value(self, x):
        x = self.check_input(x)
        return float(0.5 * x @ self.Q @ x + self.b @ x + self.c)

    def gradient(self, x):
        x = self.check_input(x)
        return self.Q @ x + self.b

    def hessian(self, x=None):
        return np.array(self.Q)

    def to_dict(self):
        return {'Q': self.Q.tolist(), 'b': self.b.tolist(), 'c': self.c, 'dep': list(self.dep)}


class FunctionAgentCost(AgentCost):
    """
    Cost defined by user callables. Without a Hessian callable, the Hessian is estimated by central differences
    of the gradient.
    """
    def __init__(self, variable_count, value_fn, gradient_fn, hessian_fn=None, dep=None):
        """
        :param variable_count: dimension n of the parameter vector
        :param value_fn: callable x -> f_i(x)
        :param gradient_fn: callable x -> gradient of f_i, vector of length n
        :param hessian_fn: optional callable x -> Hessian of f_i, n x n matrix
        :param dep: dependency set, all variables by default
        """
        super().__init__(variable_count, range(variable_count) if dep is None else dep)
        self.value_fn = value_fn
        self.gradient_fn = gradient_fn
        self.hessian_fn = hessian_fn

    def value(self, x):
        return float(self.value_fn(self.check_input(x)))

    def gradient(self, x):
        return np.asarray(self.gradient_fn(self.check_input(x)), dtype=float)

    def hessian(self, x, step=1e-5):
        x = self.check_input(x)
        if self.hessian_fn is not None:
            return np.asarray(self.hessian_fn(x), dtype=float)
        hessian = np.zeros((self.variable_count, self.variable_count))
        for j in self.dep:
            shift = np.zeros(self.variable_count)
            shift[j] = step
            hessian[:, j] = (self.gradient_fn(x + shift) - self.gradient_fn(x - shift)) / (2 * step)
        return 0.5 * (hessian + hessian.T)


class SeparableCost(object):
    """
    Class to handle the separable objective f(x) = sum_i f_i(x) split among N agents.
    """
    def __init__(self, agents, name=None):
        """
        :param agents: list of AgentCost instances, one per agent, all with the same number of variables
        :param name: optional name of the problem
        """
        agents = list(agents)
        if not agents:
            raise ValidationError('a separable cost needs at least one agent')
        sizes = set(agent.variable_count for agent in agents)
        if len(sizes) != 1:
            raise ValidationError('all agent costs should have the same number of variables, got ' + str(sizes))
        self.agents = tuple(agents)
        self.variable_count = sizes.pop()
        self.name = name

    @property
    def agent_count(self):
        return len(self.agents)

    @property
    def is_quadratic(self):
        return all(agent.is_quadratic for agent in self.agents)

    def dep(self, agent):
        return self.agents[agent].dep

    def evaluate(self, agent, x):
        """
        :param agent: index of the agent
        :param x: parameter vector of length n
        :return: the value and the gradient of f_agent at x
        """
        cost = self.agents[agent]
        return cost.value(x), cost.gradient(x)

    def total_gradient(self, x):
        return np.sum([agent.gradient(x) for agent in self.agents], axis=0)

    def total_hessian(self, x):
        return np.sum([agent.hessian(x) for agent in self.agents], axis=0)

    def total_value(self, x):
        return float(sum(agent.value(x) for agent in self.agents))

    def to_dict(self):
        if not self.is_quadratic:
            raise TypeError('only quadratic costs can be exported')
        return {'variables': self.variable_count, 'agents': [agent.to_dict() for agent in self.agents]}


def build_line3():
    """
    Three agents on a line graph sharing two variables:
    f_1 = (x_1 - 1)^2 + 1/3 (x_1 - x_2)^2, f_2 = (x_2 - 3)^2 + 1/3 (x_1 - x_2)^2,
    f_3 = (x_1 - 6)^2 + 1/3 (x_1 - x_2)^2. The constrained optimum is x* = (3.4, 3.2).

    :return: the SeparableCost and the line Topology
    """
    coupling = np.array([[1.0, -1.0], [-1.0, 1.0]]) * 2.0 / 3.0
    agents = []
    for variable, target in ((0, 1.0), (1, 3.0), (0, 6.0)):
        Q = coupling.copy()
        Q[variable, variable] += 2.0
        b = np.zeros(2)
        b[variable] = -2.0 * target
        agents.append(QuadraticAgentCost(Q, b, target ** 2, dep=(0, 1)))
    return SeparableCost(agents, name='line3'), gr.line3_topology()


def build_pair2():
    """
    Two agents with one shared scalar, f_1 = (x - 1)^2 and f_2 = (x + 1)^2, optimum x* = 0.

    :return: the SeparableCost and the two-node Topology
    """
    agents = [QuadraticAgentCost([[2.0]], [-2.0 * target], target ** 2) for target in (1.0, -1.0)]
    return SeparableCost(agents, name='pair2'), gr.path_topology(2, name='pair2')


def build_random(node_count, variable_count, seed=None, probability=0.5):
    """
    Random strictly convex quadratic costs f_i(x) = 1/2 x^T (A_i A_i^T + 0.1 I) x + b_i^T x on a random connected
    graph.

    :param node_count: number of agents
    :param variable_count: number of variables
    :param seed: seed of the random generator
    :param probability: edge probability of the graph
    :return: the SeparableCost and the Topology
    """
    rng = np.random.default_rng(seed)
    agents = []
    for _ in range(node_count):
        factor = rng.standard_normal((variable_count, variable_count))
        Q = factor @ factor.T + 0.1 * np.eye(variable_count)
        agents.append(QuadraticAgentCost((Q + Q.T) / 2, rng.standard_normal(variable_count)))
    topology = gr.random_connected_topology(node_count, probability, seed=int(rng.integers(2 ** 31)))
    return SeparableCost(agents, name='random'), topology


def build_ring(desired, name=None):
    """
    Ring problem where agent i owns variable i and balances it between its neighbors and a desired value:
    f_i = (x_{i-1} - x_i)^2 + (x_i - d_i)^2 + (x_i - x_{i+1})^2, indices modulo N.

    :param desired: the desired values d_i, one per agent (N >= 3)
    :param name: optional name of the problem
    :return: the SeparableCost, the ring Topology and the dependency map j -> {j-1, j, j+1}
    """
    desired = np.asarray(desired, dtype=float).ravel()
    nb_agents = desired.size
    if nb_agents < 3:
        raise ValidationError('the ring problem needs at least 3 agents')
    agents = []
    for idx in range(nb_agents):
        prev_idx, next_idx = (idx - 1) % nb_agents, (idx + 1) % nb_agents
        Q = np.zeros((nb_agents, nb_agents))
        for other in (prev_idx, next_idx):
            Q[[idx, other], [idx, other]] += 2.0
            Q[idx, other] -= 2.0
            Q[other, idx] -= 2.0
        Q[idx, idx] += 2.0
        b = np.zeros(nb_agents)
        b[idx] = -2.0 * desired[idx]
        agents.append(QuadraticAgentCost(Q, b, desired[idx] ** 2, dep=(prev_idx, idx, next_idx)))
    cost = SeparableCost(agents, name=name)
    return cost, gr.ring_topology(nb_agents, name=name), dependency_map(cost)


def build_ring20():
    """
    Ring problem with 20 agents and desired values 1, 2, ..., 20.

    :return: the SeparableCost, the ring Topology and the dependency map
    """
    return build_ring(np.arange(1, 21), name='ring20')


def check_convexity(cost, agent, x, y, theta):
    """
    Sample test of the convexity inequality f(theta x + (1 - theta) y) <= theta f(x) + (1 - theta) f(y).

    :return: the slack theta f(x) + (1 - theta) f(y) - f(theta x + (1 - theta) y), non-negative for convex costs
    """
    if not 0 < theta < 1:
        raise ValueError('theta should be in ]0, 1[')
    func = cost.agents[agent].value
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return theta * func(x) + (1 - theta) * func(y) - func(theta * x + (1 - theta) * y)


def check_gradient(cost, agent, x, h=1e-4):
    """
    Compare the analytic gradient with central differences.

    :param cost: the SeparableCost
    :param agent: index of the agent
    :param x: point where to compare
    :param h: finite difference step
    :return: the maximum absolute deviation over the coordinates
    """
    if h <= 0:
        raise ValueError('h should be strictly positive')
    agent_cost = cost.agents[agent]
    x = agent_cost.check_input(x)
    analytic = agent_cost.gradient(x)
    numeric = np.zeros_like(x)
    for j in range(x.size):
        shift = np.zeros_like(x)
        shift[j] = h
        numeric[j] = (agent_cost.value(x + shift) - agent_cost.value(x - shift)) / (2 * h)
    return float(np.max(np.abs(numeric - analytic)))


def check_strict_convexity(cost, x=None):
    """
    Smallest eigenvalue of the Hessian of sum_i f_i (the Hessian restricted to the consensus subspace).

    :param cost: the SeparableCost
    :param x: point where to evaluate the Hessian, ignored for quadratic costs
    :return: the smallest eigenvalue, raise NotStrictlyConvexError if it is below convexity_tolerance
    """
    if x is None:
        x = np.zeros(cost.variable_count)
    smallest = float(np.linalg.eigvalsh(cost.total_hessian(x)).min())
    if smallest <= convexity_tolerance:
        raise NotStrictlyConvexError('the sum of the costs is not strictly convex, smallest Hessian eigenvalue '
                                     '= %.3e' % smallest)
    return smallest


def dependency_map(cost):
    """
    For each variable j, the set I_j of agents whose cost depends on j.

    :param cost: the SeparableCost
    :return: dictionary j -> sorted list of agents
    """
    mapping = {j: [] for j in range(cost.variable_count)}
    for agent, agent_cost in enumerate(cost.agents):
        for j in agent_cost.dep:
            mapping[j].append(agent)
    return mapping


def evaluate(cost, agent, x):
    """
    Value and gradient of the cost of one agent.

    :param cost: the SeparableCost
    :param agent: index of the agent
    :param x: parameter vector of length n, finite
    :return: (value, gradient)
    """
    return cost.evaluate(agent, x)


def load_problem(source):
    """
    Load a quadratic problem.

    The JSON object lists the agents {"variables": n, "agents": [{"Q": ..., "b": ..., "c": ..., "dep": ...}],
    "topology": {"nodes": N, "edges": [...]}}, or uses the ring shorthand {"ring_desired": [d_0, ..., d_N-1]}.

    :param source: file path or dictionary
    :return: the SeparableCost and the Topology (None if the problem does not define one)
    """
    if isinstance(source, str):
        name = source
        source, _ = load_file(source)
    else:
        name = None
    if not isinstance(source, dict):
        raise ValidationError('a problem should be a JSON object')
    if 'ring_desired' in source:
        cost, topology, _ = build_ring(source['ring_desired'], name=source.get('name', name))
        return cost, topology
    try:
        variables = int(source['variables'])
        agents = [QuadraticAgentCost(agent['Q'], agent['b'], agent.get('c', 0.0), agent.get('dep'))
                  for agent in source['agents']]
    except (KeyError, TypeError) as err:
        raise ValidationError('malformed problem, expected "variables" and "agents" with Q, b: ' + str(err))
    cost = SeparableCost(agents, name=source.get('name', name))
    if cost.variable_count != variables:
        raise ValidationError('"variables" is %d but the agent costs have %d variables'
                              % (variables, cost.variable_count))
    topology = gr.load_topology(source['topology']) if 'topology' in source else None
    if topology is not None and topology.node_count != cost.agent_count:
        raise ValidationError('the topology has %d nodes but the problem has %d agents'
                              % (topology.node_count, cost.agent_count))
    return cost, topology
