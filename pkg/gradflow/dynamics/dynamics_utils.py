# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import numpy as np
from scipy import sparse
from gradflow.utils.utilities import UnsupportedConfigurationError, ValidationError

methods = ('p', 'i', 'pi', 'pil')
method_labels = {'p': 'P', 'i': 'I', 'pi': 'PI', 'pil': 'PI-L'}
default_fading = (1.0, 0.1)  # k_G(t) = a / (1 + b t)


class GainSchedule(object):
    """
    Gains of the flows: gradient gain k_G (constant or fading a / (1 + b t)), proportional gain k_P and
    integral gain k_I' (k_I = k_I'^2).
    """
    def __init__(self, kG=1.0, kP=1.0, kIp=1.0, fading=None):
        """
        :param kG: constant gradient gain, ignored when fading is given
        :param kP: proportional (consensus) gain, non-negative
        :param kIp: integral (multiplier) gain k_I', non-negative
        :param fading: None for a constant k_G, or a tuple (a, b) for k_G(t) = a / (1 + b t)
        """
        if fading is not None:
            a, b = (float(value) for value in fading)
            if a <= 0 or b < 0:
                raise ValidationError('fading gain needs a > 0 and b >= 0, got ' + str(fading))
            self.fading = (a, b)
            kG = a
        else:
            self.fading = None
        if kG <= 0:
            raise ValidationError('kG should be strictly positive, got ' + str(kG))
        if kP < 0 or kIp < 0:
            raise ValidationError('kP and kIp should be non-negative, got %s and %s' % (kP, kIp))
        self.kG = float(kG)
        self.kP = float(kP)
        self.kIp = float(kIp)

    @classmethod
    def from_dict(cls, block):
        """
        Build the schedule from a gain block {"kG": 1.0 | {"fading": {"a": 1.0, "b": 0.1}}, "kP": 1.0, "kIp": 1.0}.
        """
        if block is None:
            return cls()
        if not isinstance(block, dict):
            raise ValidationError('the gain block should be a JSON object, got ' + repr(block))
        unknown = set(block) - {'kG', 'kP', 'kIp'}
        if unknown:
            raise ValidationError('unknown gain keys: ' + str(sorted(unknown)))
        kG = block.get('kG', 1.0)
        fading = None
        if isinstance(kG, dict):
            try:
                fading = (kG['fading'].get('a', default_fading[0]), kG['fading'].get('b', default_fading[1]))
            except (KeyError, AttributeError):
                raise ValidationError('kG should be a number or {"fading": {"a": ..., "b": ...}}')
            kG = fading[0]
        try:
            kG, kP, kIp = float(kG), float(block.get('kP', 1.0)), float(block.get('kIp', 1.0))
        except (TypeError, ValueError) as err:
            raise ValidationError('gains should be numbers: ' + str(err))
        return cls(kG=kG, kP=kP, kIp=kIp, fading=fading)

    @property
    def is_constant(self):
        return self.fading is None

    @property
    def kI(self):
        return self.kIp ** 2

    def kG_at(self, t):
        """
        :param t: time
        :return: the gradient gain at time t
        """
        if self.fading is None:
            return self.kG
        a, b = self.fading
        return a / (1.0 + b * t)

    def to_dict(self):
        kG = self.kG if self.fading is None else {'fading': {'a': self.fading[0], 'b': self.fading[1]}}
        return {'kG': kG, 'kP': self.kP, 'kIp': self.kIp}

    def __repr__(self):
        return 'GainSchedule(%s)' % self.to_dict()


class MethodSpec(object):
    """
    Which flow to run (P, I, PI or PI-L), with which gains, on which aggregate layout.
    """
    def __init__(self, method, gains, layout, allow_degenerate=False):
        """
        :param method: 'p', 'i', 'pi' or 'pil'
        :param gains: the GainSchedule
        :param layout: the AggregateLayout
        :param allow_degenerate: True to accept PI with k_P = 0 or k_I' = 0, used by the method-reduction checks
        """
        self.method = validate_method(method, gains, layout.mode, allow_degenerate)
        self.gains = gains
        self.layout = layout

    @property
    def mu_dim(self):
        if self.method == 'p':
            return 0
        if self.method == 'pil':
            return self.layout.z_dim
        return self.layout.mu_dim

    def __repr__(self):
        return 'MethodSpec(method=%r, gains=%r, layout=%r)' % (self.method, self.gains, self.layout)


class FlowState(object):
    """
    Aggregate primal state z and multipliers mu.
    """
    def __init__(self, z, mu=()):
        self.z = np.array(z, dtype=float).ravel()
        self.mu = np.array(mu, dtype=float).ravel()

    @classmethod
    def from_vector(cls, vector, z_dim):
        """
        :param vector: packed state [z, mu]
        :param z_dim: dimension of z
        :return: the FlowState
        """
        vector = np.asarray(vector, dtype=float)
        return cls(vector[:z_dim], vector[z_dim:])

    def as_vector(self):
        return np.concatenate((self.z, self.mu))

    def __repr__(self):
        return 'FlowState(z_dim=%d, mu_dim=%d)' % (self.z.size, self.mu.size)


class GradientFlow(object):
    """
    Right-hand sides of the distributed optimization flows for a separable cost on an aggregate layout:

    - P:    dz/dt = -k_G grad f(z) - k_P L z
    - I:    dz/dt = -k_G grad f(z) - k_I' D mu,              dmu/dt = k_I' D^T z
    - PI:   dz/dt = -k_G grad f(z) - k_P L z - k_I' D mu,    dmu/dt = k_I' D^T z
    - PI-L: dz/dt = -grad f(z) - L z - L mu,                 dmu/dt = L z

    An instance is callable as flow(t, y) on packed vectors y = [z, mu], which is what the integrator expects.
    """
    def __init__(self, cost, spec):
        """
        :param cost: the SeparableCost
        :param spec: the MethodSpec
        """
        layout = spec.layout
        if cost.agent_count != layout.node_count or cost.variable_count != layout.variable_count:
            raise ValidationError('the cost has %d agents and %d variables but the layout has %d agents and %d '
                                  'variables' % (cost.agent_count, cost.variable_count, layout.node_count,
                                                 layout.variable_count))
        self.cost = cost
        self.spec = spec
        self.layout = layout
        self.gains = spec.gains
        self.z_dim = layout.z_dim
        self.mu_dim = spec.mu_dim

        # tracked variables and their flat positions, per agent
        self._tracked = []
        for agent in range(cost.agent_count):
            variables = np.array(layout.tracked_variables(agent), dtype=int)
            missing = set(cost.dep(agent)) - set(variables.tolist())
            if missing:
                raise ValidationError('agent %d depends on variables %s that it does not track'
                                      % (agent, sorted(missing)))
            positions = np.array([layout.z_index(agent, j) for j in variables], dtype=int)
            self._tracked.append((variables, positions))

        self._hessian = None
        self._linear = None
        if cost.is_quadratic:
            self._hessian, self._linear = self._assemble_quadratic()
        self._blocks = None
        self._split = None

    def __call__(self, t, y):
        split = self.affine_split()
        if split is not None:
            gradient, offset, rest = split
            return self.gains.kG_at(t) * (gradient @ y + offset) + rest @ y
        z = y[:self.z_dim]
        mu = y[self.z_dim:]
        dz, dmu = self._derivative(z, mu, t)
        return np.concatenate((dz, dmu))

    def affine_split(self):
        """
        Affine form of the flow for quadratic costs on packed vectors y = [z, mu]:
        flow(t, y) = k_G(t) (G y + g) + R y, with G and g the gradient part and R the consensus and multiplier
        part. Zero gains leave no entry in R.

        :return: (G, g, R), sparse matrices and a vector, or None when the cost is not quadratic
        """
        if self._hessian is None:
            return None
        if self._split is None:
            size = self.z_dim + self.mu_dim
            gradient = _placed(-self._hessian, 0, 0, size)
            offset = np.concatenate((-self._linear, np.zeros(self.mu_dim)))
            laplacian, incidence = self.layout.laplacian, self.layout.incidence
            method = self.spec.method
            if method == 'pil':
                rest = (_placed(-laplacian, 0, 0, size) + _placed(-laplacian, 0, self.z_dim, size)
                        + _placed(laplacian, self.z_dim, 0, size))
            else:
                kP = self.gains.kP if method in ('p', 'pi') else 0.0
                kIp = self.gains.kIp if method in ('i', 'pi') else 0.0
                rest = sparse.csr_matrix((size, size))
                if kP != 0:
                    rest = rest + _placed(-kP * laplacian, 0, 0, size)
                if kIp != 0:
                    rest = (rest + _placed(-kIp * incidence, 0, self.z_dim, size)
                            + _placed(kIp * incidence.T, self.z_dim, 0, size))
            self._split = (gradient, offset, rest.tocsr())
        return self._split

    def _assemble_quadratic(self):
        rows, cols, values = [], [], []
        linear = np.zeros(self.z_dim)
        for agent_cost, (variables, positions) in zip(self.cost.agents, self._tracked):
            block = agent_cost.Q[np.ix_(variables, variables)]
            rows.append(np.repeat(positions, positions.size))
            cols.append(np.tile(positions, positions.size))
            values.append(block.ravel())
            linear[positions] += agent_cost.b[variables]
        hessian = sparse.coo_matrix((np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
                                    shape=(self.z_dim, self.z_dim)).tocsr()
        hessian.eliminate_zeros()
        return hessian, linear

    def _check_state(self, state, mu_dim):
        if state.z.size != self.z_dim:
            raise ValueError('z should have %d entries, got %d' % (self.z_dim, state.z.size))
        if state.mu.size != mu_dim:
            raise ValueError('mu should have %d entries, got %d' % (mu_dim, state.mu.size))

    def _derivative(self, z, mu, t):
        method = self.spec.method
        if method == 'pil':
            return self._pil_terms(z, mu)
        kP = self.gains.kP if method in ('p', 'pi') else 0.0
        kIp = self.gains.kIp if method in ('i', 'pi') else 0.0
        return self._saddle_terms(z, mu, t, kP, kIp)

    def _pil_terms(self, z, mu):
        laplacian_z = self.layout.laplacian_dot(z)
        dz = -self.aggregate_gradient(z) - laplacian_z - self.layout.laplacian_dot(mu)
        return dz, laplacian_z

    def _saddle_terms(self, z, mu, t, kP, kIp):
        # P, I and PI share this path, so that PI with a zero gain reproduces P or I exactly
        dz = -self.gains.kG_at(t) * self.aggregate_gradient(z)
        if kP != 0:
            dz = dz - kP * self.layout.laplacian_dot(z)
        if kIp != 0:
            dz = dz - kIp * self.layout.incidence_dot(mu)
            dmu = kIp * self.layout.incidence_transpose_dot(z)
        else:
            dmu = np.zeros(mu.size)
        return dz, dmu

    def agent_vector(self, z, agent):
        """
        Parameter vector of one agent, with zeros for the variables it does not track.
        """
        variables, positions = self._tracked[agent]
        x = np.zeros(self.cost.variable_count)
        x[variables] = z[positions]
        return x

    def aggregate_gradient(self, z):
        """
        Gradient of f(z) = sum_i f_i(x_i) with respect to the aggregate state.
        """
        if self._hessian is not None:
            return self._hessian @ z + self._linear
        gradient = np.zeros(self.z_dim)
        for agent, (variables, positions) in enumerate(self._tracked):
            gradient[positions] = self.cost.agents[agent].gradient(self.agent_vector(z, agent))[variables]
        return gradient

    def aggregate_hessian(self, z=None):
        """
        Hessian of f(z) as a sparse matrix.
        """
        if self._hessian is not None:
            return self._hessian
        rows, cols, values = [], [], []
        for agent, (variables, positions) in enumerate(self._tracked):
            block = self.cost.agents[agent].hessian(self.agent_vector(z, agent))[np.ix_(variables, variables)]
            rows.append(np.repeat(positions, positions.size))
            cols.append(np.tile(positions, positions.size))
            values.append(block.ravel())
        return sparse.coo_matrix((np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(self.z_dim, self.z_dim)).tocsr()

    def augmented_lagrangian(self, state, t=0.0):
        """
        k_G f(z) + k_I' z^T D mu + k_P/2 z^T L z. The PI flow descends it in z and ascends it in mu.
        """
        self._check_state(state, self.layout.mu_dim)
        z, mu = state.z, state.mu
        return (self.gains.kG_at(t) * self.objective(z) + self.gains.kIp * z @ self.layout.incidence_dot(mu)
                + 0.5 * self.gains.kP * z @ self.layout.laplacian_dot(z))

    def initial_state(self, z0=0.0):
        """
        Initial FlowState with mu(0) = 0.

        :param z0: a scalar (every copy), a vector of length n (copy of x(0) for every tracker), or a full
         aggregate vector
        :return: the FlowState
        """
        z0 = np.asarray(z0, dtype=float)
        if z0.ndim == 0:
            z = np.full(self.z_dim, float(z0))
        elif z0.shape == (self.z_dim,):
            z = z0.copy()
        elif z0.shape == (self.cost.variable_count,):
            z = z0[self.layout.z_variable]
        else:
            raise ValidationError('the initial condition should be a scalar, a vector of length %d or of length %d'
                                  % (self.cost.variable_count, self.z_dim))
        return FlowState(z, np.zeros(self.mu_dim))

    def integral_form(self, t, y):
        """
        PI control form dz/dt = -k_G grad f(z) - k_I L w - k_P L z, dw/dt = z, on packed vectors y = [z, w]
        where w is the integral of z.
        """
        z, w = y[:self.z_dim], y[self.z_dim:]
        dz = (-self.gains.kG_at(t) * self.aggregate_gradient(z) - self.gains.kI * self.layout.laplacian_dot(w)
              - self.gains.kP * self.layout.laplacian_dot(z))
        return np.concatenate((dz, z))

    def lyapunov(self, state, t=0.0):
        """
        V = 1/2 (||dz/dt||^2 + ||dmu/dt||^2), non-increasing along the I and PI flows with constant gains.
        """
        derivative = self.rhs(state, t)
        return 0.5 * (derivative.z @ derivative.z + derivative.mu @ derivative.mu)

    def objective(self, z):
        """
        f(z) = sum_i f_i(x_i).
        """
        return float(sum(agent_cost.value(self.agent_vector(z, agent))
                         for agent, agent_cost in enumerate(self.cost.agents)))

    def rhs(self, state, t):
        """
        Derivative of the flow selected by the MethodSpec.
        """
        return {'p': self.rhs_P, 'i': self.rhs_I, 'pi': self.rhs_PI, 'pil': self.rhs_PIL}[self.spec.method](state, t)

    def rhs_I(self, state, t):
        """
        Dual decomposition: dz/dt = -k_G grad f(z) - k_I' D mu, dmu/dt = k_I' D^T z.
        """
        self._check_state(state, self.layout.mu_dim)
        return FlowState(*self._saddle_terms(state.z, state.mu, t, 0.0, self.gains.kIp))

    def rhs_P(self, state, t):
        """
        Consensus method: dz/dt = -k_G(t) grad f(z) - k_P L z, no multipliers.
        """
        if state.z.size != self.z_dim:
            raise ValueError('z should have %d entries, got %d' % (self.z_dim, state.z.size))
        dz, _ = self._saddle_terms(state.z, np.zeros(0), t, self.gains.kP, 0.0)
        return FlowState(dz, np.zeros(state.mu.size))

    def rhs_PI(self, state, t):
        """
        PI distributed optimization: dz/dt = -k_G grad f(z) - k_P L z - k_I' D mu, dmu/dt = k_I' D^T z.
        """
        self._check_state(state, self.layout.mu_dim)
        return FlowState(*self._saddle_terms(state.z, state.mu, t, self.gains.kP, self.gains.kIp))

    def rhs_PIL(self, state, t):
        """
        Laplacian-constrained variant with unit gains: dz/dt = -grad f(z) - L z - L mu, dmu/dt = L z, with mu
        living on the nodes.
        """
        if self.layout.mode != 'full':
            raise UnsupportedConfigurationError('the PI-L method only runs on the full layout')
        self._check_state(state, self.layout.z_dim)
        return FlowState(*self._pil_terms(state.z, state.mu))

    def rhs_reduced(self, method, state, t):
        """
        Per-variable form of the P, I and PI flows on the reduced layout: for every variable j,
        dz_j/dt = -k_G df/dz_j - k_P L_j z_j - k_I' D_j mu_j and dmu_j/dt = k_I' D_j^T z_j.

        :param method: 'p', 'i' or 'pi'
        :param state: the FlowState
        :param t: time
        :return: the derivative as a FlowState
        """
        method = str(method).lower()
        if method == 'pil':
            raise UnsupportedConfigurationError('the PI-L method has no reduced form')
        if method not in ('p', 'i', 'pi'):
            raise ValidationError('method should be "p", "i" or "pi", got %r' % method)
        if self.layout.mode != 'reduced':
            raise UnsupportedConfigurationError('rhs_reduced needs a reduced layout')
        mu_dim = 0 if method == 'p' else self.layout.mu_dim
        self._check_state(state, mu_dim)
        kP = self.gains.kP if method in ('p', 'pi') else 0.0
        kIp = self.gains.kIp if method in ('i', 'pi') else 0.0
        if self._blocks is None:
            self._blocks = [(self.layout.z_slice(j), self.layout.mu_slice(j),
                             self.layout.incidence[self.layout.z_slice(j), self.layout.mu_slice(j)].tocsr())
                            for j in range(self.layout.variable_count)]
        gradient = -self.gains.kG_at(t) * self.aggregate_gradient(state.z)
        dz = np.empty(self.z_dim)
        dmu = np.zeros(mu_dim)
        for z_block, mu_block, incidence in self._blocks:
            z_j = state.z[z_block]
            edge_error = incidence.T @ z_j
            dz_j = gradient[z_block] - kP * (incidence @ edge_error)
            if kIp != 0:
                dz_j = dz_j - kIp * (incidence @ state.mu[mu_block])
                dmu[mu_block] = kIp * edge_error
            dz[z_block] = dz_j
        return FlowState(dz, dmu)


def _placed(block, row, col, size):
    # block at offset (row, col) of a size x size matrix
    block = sparse.coo_matrix(block)
    return sparse.csr_matrix((block.data, (block.row + row, block.col + col)), shape=(size, size))


def agent_multipliers(layout, mu, agent):
    """
    Signed per-agent view of the edge multipliers: mu_i^k = d_{i,e} mu_e for the edge e joining agent i and its
    neighbor k, so that mu_i^k = -mu_k^i.

    :param layout: the AggregateLayout
    :param mu: aggregate multipliers, one per edge and variable
    :param agent: index i of the agent
    :return: dictionary (neighbor, variable) -> mu_i^neighbor for that variable
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (layout.mu_dim,):
        raise ValueError('mu should have shape (%d,), got %s' % (layout.mu_dim, mu.shape))
    topology = layout.topology
    view = {}
    for pos, (edge, variable) in enumerate(zip(layout.mu_edge, layout.mu_variable)):
        tail, head = topology.edges[edge]
        if agent == head:
            view[(tail, int(variable))] = mu[pos]
        elif agent == tail:
            view[(head, int(variable))] = -mu[pos]
    return view


def count_communication(method, layout):
    """
    Number of scalars an agent sends to a neighbor at each step. P, I and PI exchange the shared state only
    (n scalars in the full layout, the variables tracked by both agents in the reduced layout); PI-L also sends
    its node multipliers, twice as many scalars.

    :param method: 'p', 'i', 'pi' or 'pil'
    :param layout: the AggregateLayout
    :return: dictionary with 'per_edge' (scalars per message on each parent edge), 'per_agent' (scalars sent by
     each agent per step) and 'per_message' (largest message)
    """
    method = str(method).lower()
    if method not in methods:
        raise ValidationError('method should be one of %s, got %r' % (methods, method))
    if method == 'pil' and layout.mode != 'full':
        raise UnsupportedConfigurationError('the PI-L method only runs on the full layout')
    shared = np.bincount(layout.mu_edge, minlength=layout.edge_count).astype(int)
    per_edge = 2 * shared if method == 'pil' else shared
    topology = layout.topology
    per_agent = (np.bincount(topology.tails, weights=per_edge, minlength=layout.node_count)
                 + np.bincount(topology.heads, weights=per_edge, minlength=layout.node_count)).astype(int)
    return {'per_edge': per_edge, 'per_agent': per_agent,
            'per_message': int(per_edge.max()) if per_edge.size else 0}


def lyapunov(flow, state, t=0.0):
    """
    V = 1/2 (||dz/dt||^2 + ||dmu/dt||^2) for the flow at state.
    """
    return flow.lyapunov(state, t)


def augmented_lagrangian(flow, state, t=0.0):
    return flow.augmented_lagrangian(state, t)


def validate_method(method, gains, mode, allow_degenerate=False):
    """
    Check a method against its gains and the layout mode.

    :param method: 'p', 'i', 'pi' or 'pil'
    :param gains: the GainSchedule
    :param mode: layout mode, 'full' or 'reduced'
    :param allow_degenerate: True to accept PI with k_P = 0 or k_I' = 0
    :return: the method in lower case
    """
    method = str(method).lower()
    if method not in methods:
        raise ValidationError('method should be one of %s, got %r' % (methods, method))
    if method == 'p' and gains.kP <= 0:
        raise ValidationError('the P method needs kP > 0')
    if method == 'i' and gains.kIp <= 0:
        raise ValidationError('the I method needs kIp > 0')
    if method == 'pi' and not allow_degenerate and (gains.kP <= 0 or gains.kIp <= 0):
        raise ValidationError('the PI method needs kP > 0 and kIp > 0')
    if method == 'pil' and mode != 'full':
        raise UnsupportedConfigurationError('the PI-L method only runs on the full layout, its multipliers '
                                            'live on the nodes')
    if method == 'pil' and (not gains.is_constant or (gains.kG, gains.kP, gains.kIp) != (1.0, 1.0, 1.0)):
        raise ValidationError('the PI-L method runs with constant unit gains, got ' + str(gains.to_dict()))
    return method
