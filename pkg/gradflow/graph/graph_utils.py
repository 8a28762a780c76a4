# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import networkx as nx
import numpy as np
from scipy import sparse
from gradflow.utils.utilities import DisconnectedGraphError, ValidationError, load_file, save_json

layout_modes = ('full', 'reduced')


class Topology(object):
    """
    Class to handle an undirected communication graph with an oriented edge list.
    """
    def __init__(self, node_count, edges, orient=True, name=None):
        """
        Initialize and validate the topology.

        :param node_count: number of agents N
        :param edges: sequence of (tail, head) pairs of node indices in [0, N)
        :param orient: True to orient every edge from the smaller to the larger node index, False to keep the
         orientation as given
        :param name: optional name of the topology, e.g. 'line3'
        """
        if isinstance(node_count, bool) or not isinstance(node_count, (int, np.integer)) or node_count < 1:
            raise ValidationError('node_count should be a positive integer, got ' + repr(node_count))
        node_count = int(node_count)
        oriented = []
        seen = set()
        for edge in edges:
            try:
                tail, head = (int(idx) for idx in edge)
            except (TypeError, ValueError):
                raise ValidationError('edges should be pairs of node indices, got ' + repr(edge))
            if tail == head:
                raise ValidationError('self-loop on node ' + str(tail))
            if not (0 <= tail < node_count and 0 <= head < node_count):
                raise ValidationError('edge ' + str((tail, head)) + ' has an index outside [0, ' +
                                      str(node_count) + ')')
            key = (min(tail, head), max(tail, head))
            if key in seen:
                raise ValidationError('duplicate undirected edge ' + str(key))
            seen.add(key)
            oriented.append(key if orient else (tail, head))

        self.node_count = node_count
        self.edges = tuple(oriented)
        self.name = name
        self.tails = np.array([edge[0] for edge in oriented], dtype=int)
        self.heads = np.array([edge[1] for edge in oriented], dtype=int)
        self.tails.flags.writeable = False
        self.heads.flags.writeable = False

    @property
    def edge_count(self):
        return len(self.edges)

    def components(self, nodes=None):
        """
        Connected components of the graph, or of the subgraph induced by nodes.

        :param nodes: optional subset of nodes
        :return: list of sorted node lists, ordered by their smallest node
        """
        graph = self.to_networkx()
        if nodes is not None:
            graph = graph.subgraph(nodes)
        return sorted((sorted(comp) for comp in nx.connected_components(graph)), key=lambda comp: comp[0])

    def is_connected(self, nodes=None):
        return len(self.components(nodes)) == 1

    def neighbors(self, node):
        """
        :param node: index of the agent
        :return: sorted list of the neighbors of node
        """
        return sorted(self.to_networkx().neighbors(node))

    def require_connected(self):
        """
        Raise a DisconnectedGraphError naming the components if the graph is not connected.
        """
        components = self.components()
        if len(components) > 1:
            raise DisconnectedGraphError('the graph is not connected, components: ' + str(components),
                                         components=components)

    def to_dict(self):
        return {'nodes': self.node_count, 'edges': [list(edge) for edge in self.edges]}

    def to_networkx(self):
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        graph.add_edges_from(self.edges)
        return graph

    def save(self, file_path):
        save_json(file_path, self.to_dict())

    def __repr__(self):
        return 'Topology(name=%r, nodes=%d, edges=%d)' % (self.name, self.node_count, self.edge_count)


class EdgeMatrixSet(object):
    """
    Incidence matrix D and graph Laplacian L = D D^T of a topology.
    """
    def __init__(self, topology, incidence, laplacian):
        """
        :param topology: the Topology instance
        :param incidence: N x M sparse matrix, +1 at the head and -1 at the tail of each edge
        :param laplacian: N x N sparse matrix
        """
        self.topology = topology
        self.incidence = incidence
        self.laplacian = laplacian


class AggregateLayout(object):
    """
    Class to handle the aggregate state z (stacked agent copies, variable-major) and the aggregate multipliers mu
    (one entry per edge and variable), with the aggregate incidence matrix and Laplacian.
    """
    def __init__(self, mode, topology, node_sets, edge_sets):
        """
        Initialize the layout. Use aggregate_full() or aggregate_reduced() rather than this constructor.

        :param mode: 'full' or 'reduced'
        :param topology: the parent Topology
        :param node_sets: for each variable j, the sorted array of agents tracking it (I_j)
        :param edge_sets: for each variable j, the array of parent edge indices whose endpoints both track j
        """
        if mode not in layout_modes:
            raise ValidationError('layout mode should be "full" or "reduced", got ' + repr(mode))
        if len(node_sets) != len(edge_sets) or not node_sets:
            raise ValidationError('node_sets and edge_sets should be non-empty and of the same length')
        self.mode = mode
        self.topology = topology
        self.node_count = topology.node_count
        self.edge_count = topology.edge_count
        self.variable_count = len(node_sets)
        self.node_sets = tuple(np.asarray(nodes, dtype=int) for nodes in node_sets)
        self.edge_sets = tuple(np.asarray(edges, dtype=int) for edges in edge_sets)
        self.z_offsets = np.concatenate(([0], np.cumsum([len(nodes) for nodes in self.node_sets]))).astype(int)
        self.mu_offsets = np.concatenate(([0], np.cumsum([len(edges) for edges in self.edge_sets]))).astype(int)
        self.z_dim = int(self.z_offsets[-1])
        self.mu_dim = int(self.mu_offsets[-1])

        self.z_agent = np.concatenate(self.node_sets)
        self.z_variable = np.repeat(np.arange(self.variable_count), np.diff(self.z_offsets))
        self._z_lookup = {}
        for pos, (agent, variable) in enumerate(zip(self.z_agent, self.z_variable)):
            self._z_lookup[(int(agent), int(variable))] = pos

        self.mu_edge = np.concatenate(self.edge_sets).astype(int) if self.mu_dim else np.zeros(0, dtype=int)
        self.mu_variable = np.repeat(np.arange(self.variable_count), np.diff(self.mu_offsets))
        self._mu_lookup = {(int(edge), int(variable)): pos
                           for pos, (edge, variable) in enumerate(zip(self.mu_edge, self.mu_variable))}

        # flat z positions of the tail and head of every aggregate edge
        self.edge_tail = np.array([self._z_lookup[(int(topology.tails[k]), int(j))]
                                   for k, j in zip(self.mu_edge, self.mu_variable)], dtype=int)
        self.edge_head = np.array([self._z_lookup[(int(topology.heads[k]), int(j))]
                                   for k, j in zip(self.mu_edge, self.mu_variable)], dtype=int)

        columns = np.arange(self.mu_dim)
        self.incidence = sparse.csc_matrix(
            (np.concatenate((-np.ones(self.mu_dim), np.ones(self.mu_dim))),
             (np.concatenate((self.edge_tail, self.edge_head)), np.concatenate((columns, columns)))),
            shape=(self.z_dim, self.mu_dim))
        self.laplacian = (self.incidence @ self.incidence.T).tocsr()
        for array in (self.z_agent, self.z_variable, self.mu_edge, self.mu_variable, self.edge_tail,
                      self.edge_head, self.z_offsets, self.mu_offsets):
            array.flags.writeable = False

    def incidence_dot(self, mu):
        """
        Matrix-free aggregate incidence product D mu.
        """
        mu = np.asarray(mu, dtype=float)
        if mu.shape != (self.mu_dim,):
            raise ValueError('mu should have shape (%d,), got %s' % (self.mu_dim, mu.shape))
        return (np.bincount(self.edge_head, weights=mu, minlength=self.z_dim)
                - np.bincount(self.edge_tail, weights=mu, minlength=self.z_dim))

    def incidence_transpose_dot(self, z):
        """
        Matrix-free edge differences D^T z (head minus tail, per edge and variable).
        """
        z = self.check_z(z)
        return z[self.edge_head] - z[self.edge_tail]

    def laplacian_dot(self, z):
        """
        Matrix-free aggregate Laplacian product L z = D (D^T z).
        """
        return self.incidence_dot(self.incidence_transpose_dot(z))

    def check_z(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.z_dim,):
            raise ValueError('z should have shape (%d,), got %s' % (self.z_dim, z.shape))
        return z

    def mu_index(self, edge, variable):
        """
        :param edge: index k of the parent edge
        :param variable: index j of the variable
        :return: flat position of mu_k^j in mu
        """
        try:
            return self._mu_lookup[(int(edge), int(variable))]
        except KeyError:
            raise KeyError('edge %d does not carry variable %d in this layout' % (edge, variable))

    def mu_slice(self, variable):
        return slice(int(self.mu_offsets[variable]), int(self.mu_offsets[variable + 1]))

    def tracked_variables(self, agent):
        """
        :param agent: index of the agent
        :return: sorted list of the variables that agent keeps a copy of
        """
        return sorted(int(j) for j in self.z_variable[self.z_agent == agent])

    def trackers(self, variable):
        """
        :param variable: index of the variable
        :return: sorted array of the agents keeping a copy of variable (I_j)
        """
        return self.node_sets[variable]

    def z_index(self, agent, variable):
        """
        :param agent: index i of the agent
        :param variable: index j of the variable
        :return: flat position of x_ij in z
        """
        try:
            return self._z_lookup[(int(agent), int(variable))]
        except KeyError:
            raise KeyError('agent %d does not track variable %d in this layout' % (agent, variable))

    def z_slice(self, variable):
        return slice(int(self.z_offsets[variable]), int(self.z_offsets[variable + 1]))

    def describe(self):
        """
        Index maps of the layout, JSON-serializable.
        """
        return {'mode': self.mode,
                'topology': self.topology.to_dict(),
                'node_sets': [nodes.tolist() for nodes in self.node_sets],
                'edge_sets': [edges.tolist() for edges in self.edge_sets],
                'node_count': self.node_count,
                'variable_count': self.variable_count,
                'z_dim': self.z_dim,
                'mu_dim': self.mu_dim,
                'z_index': [[int(i), int(j)] for i, j in zip(self.z_agent, self.z_variable)],
                'mu_index': [[int(k), int(j)] for k, j in zip(self.mu_edge, self.mu_variable)]}

    def __repr__(self):
        return 'AggregateLayout(mode=%r, N=%d, n=%d, z_dim=%d, mu_dim=%d)' % (
            self.mode, self.node_count, self.variable_count, self.z_dim, self.mu_dim)


def aggregate_full(ems, n):
    """
    Aggregate layout where every agent keeps the whole parameter vector: D_agg = I_n kron D and
    L_agg = I_n kron L.

    :param ems: the EdgeMatrixSet of the communication graph
    :param n: number of variables
    :return: an AggregateLayout in full mode, z of dimension N*n and mu of dimension M*n
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError('the number of variables should be a positive integer, got ' + repr(n))
    topology = ems.topology
    nodes = np.arange(topology.node_count)
    edges = np.arange(topology.edge_count)
    return AggregateLayout('full', topology, [nodes] * int(n), [edges] * int(n))


def aggregate_reduced(topology, dependency, verbose=False):
    """
    Aggregate layout where each variable j is only kept by the agents in I_j. The constraint of variable j lives
    on the subgraph induced by I_j, and D_agg = diag(D_1, ..., D_n).

    :param topology: the parent Topology
    :param dependency: mapping (dict or sequence) from variable j to the node set I_j, for j = 0 .. n-1
    :param verbose: True to print the size of every induced subgraph
    :return: an AggregateLayout in reduced mode
    """
    topology.require_connected()
    if isinstance(dependency, dict):
        keys = sorted(dependency)
        if keys != list(range(len(keys))):
            raise ValidationError('dependency keys should be the variables 0 .. n-1, got ' + str(keys))
        node_sets = [dependency[key] for key in keys]
    else:
        node_sets = list(dependency)
    if not node_sets:
        raise ValidationError('dependency should describe at least one variable')

    sorted_sets = []
    edge_sets = []
    failures = []
    for variable, nodes in enumerate(node_sets):
        nodes = sorted(set(int(node) for node in nodes))
        if not nodes:
            raise ValidationError('variable %d is not tracked by any agent' % variable)
        if nodes[0] < 0 or nodes[-1] >= topology.node_count:
            raise ValidationError('variable %d is tracked by an unknown agent: %s' % (variable, nodes))
        members = set(nodes)
        edges = [k for k, (tail, head) in enumerate(topology.edges) if tail in members and head in members]
        components = topology.components(nodes)
        if len(components) > 1:
            failures.append((variable, components))
        if verbose:
            print('variable', variable, ':', len(nodes), 'agents,', len(edges), 'edges')
        sorted_sets.append(nodes)
        edge_sets.append(edges)

    if failures:
        message = '; '.join('variable %d: components %s' % (variable, comps) for variable, comps in failures)
        raise DisconnectedGraphError('induced subgraphs are not connected (' + message +
                                     '), see augment_to_connected()',
                                     components=failures[0][1], variable=failures[0][0])
    return AggregateLayout('reduced', topology, sorted_sets, edge_sets)


def augment_to_connected(topology, node_set, verbose=False):
    """
    Extend a node set with connector nodes of the parent graph until its induced subgraph is connected.
    Components are joined greedily along BFS shortest paths; the result is not guaranteed to be minimal.

    :param topology: the parent Topology, connected
    :param node_set: non-empty set of nodes
    :param verbose: True to print the nodes added at each step
    :return: a superset of node_set whose induced subgraph is connected
    """
    nodes = set(int(node) for node in node_set)
    if not nodes:
        raise ValidationError('node_set should not be empty')
    topology.require_connected()
    graph = topology.to_networkx()
    while True:
        components = topology.components(nodes)
        if len(components) == 1:
            return nodes
        base = set(components[0])
        others = set(nodes) - base
        distances, paths = nx.multi_source_dijkstra(graph, sources=base)
        target = min(others, key=lambda node: (distances[node], node))
        added = set(paths[target]) - nodes
        if verbose:
            print('joining component', components[0], 'to node', target, 'through', sorted(added))
        nodes.update(paths[target])


def build_incidence(topology):
    """
    Incidence matrix and graph Laplacian of a connected topology.

    :param topology: the Topology instance
    :return: an EdgeMatrixSet, D has +1 at the head and -1 at the tail of each edge and L = D D^T
    """
    topology.require_connected()
    nb_nodes, nb_edges = topology.node_count, topology.edge_count
    columns = np.arange(nb_edges)
    incidence = sparse.csc_matrix(
        (np.concatenate((-np.ones(nb_edges), np.ones(nb_edges))),
         (np.concatenate((topology.tails, topology.heads)), np.concatenate((columns, columns)))),
        shape=(nb_nodes, nb_edges))
    laplacian = (incidence @ incidence.T).tocsr()
    return EdgeMatrixSet(topology, incidence, laplacian)


def consensus_projection(layout, z):
    """
    Project z on the consensus set: every copy of variable j is replaced by the average of the copies.
    This is the limit of dz/dt = -L_agg z started at z.

    :param layout: the AggregateLayout
    :param z: aggregate vector
    :return: the projected aggregate vector
    """
    z = layout.check_z(z)
    projected = np.empty_like(z)
    for variable in range(layout.variable_count):
        block = layout.z_slice(variable)
        projected[block] = z[block].mean()
    return projected


def consensus_residual(layout, z):
    """
    Norm of the constraint violation ||D_agg^T z||, zero iff every variable is in consensus on its (sub)graph.

    :param layout: the AggregateLayout
    :param z: aggregate vector
    :return: the residual
    """
    return float(np.linalg.norm(layout.incidence_transpose_dot(z)))


def laplacian_quadratic_form(layout, z):
    """
    z^T L_agg z computed as the sum of the squared edge differences.
    """
    return float(np.sum(layout.incidence_transpose_dot(z) ** 2))


def layout_from_description(description):
    """
    Rebuild an AggregateLayout from the dictionary returned by AggregateLayout.describe().
    """
    try:
        topology = Topology(description['topology']['nodes'], description['topology']['edges'], orient=False)
        return AggregateLayout(description['mode'], topology, description['node_sets'], description['edge_sets'])
    except (KeyError, TypeError) as err:
        raise ValidationError('malformed layout description: ' + str(err))


def line3_topology():
    """
    Line graph 0 - 1 - 2.
    """
    return path_topology(3, name='line3')


def load_topology(source):
    """
    Load a topology from a JSON file, a dictionary {"nodes": N, "edges": [[tail, head], ...]} or a built-in name.

    :param source: file path, dictionary or one of 'line3', 'ring20'
    :return: the Topology
    """
    if isinstance(source, Topology):
        return source
    if isinstance(source, str):
        if source in named_topologies:
            return named_topologies[source]()
        source, _ = load_file(source)
    if not isinstance(source, dict) or 'nodes' not in source or 'edges' not in source:
        raise ValidationError('a topology should be a JSON object {"nodes": N, "edges": [[tail, head], ...]}')
    return Topology(source['nodes'], source['edges'], name=source.get('name'))


def path_topology(node_count, name=None):
    return Topology(node_count, [(idx, idx + 1) for idx in range(node_count - 1)], name=name)


def random_connected_topology(node_count, probability=0.5, seed=None, max_tries=1000):
    """
    Erdos-Renyi graph resampled until it is connected.

    :param node_count: number of nodes
    :param probability: probability of each edge
    :param seed: seed of the random generator
    :param max_tries: maximum number of samples
    :return: a connected Topology
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        graph = nx.erdos_renyi_graph(node_count, probability, seed=int(rng.integers(2 ** 31)))
        if nx.is_connected(graph):
            return Topology(node_count, sorted(graph.edges()), name='random%d' % node_count)
    raise ValidationError('no connected graph found after %d tries, increase the probability' % max_tries)


def ring_topology(node_count, name=None):
    """
    Ring graph where node i communicates with i-1 and i+1 (modulo node_count).
    """
    if node_count < 3:
        raise ValidationError('a ring needs at least 3 nodes')
    return Topology(node_count, [(idx, (idx + 1) % node_count) for idx in range(node_count)], name=name)


def ring20_topology():
    return ring_topology(20, name='ring20')


def spanning_tree(topology):
    """
    Spanning tree of a connected topology, keeping the orientation and order of the retained edges.

    :param topology: the connected Topology
    :return: a Topology with N-1 edges, subset of the input edges
    """
    topology.require_connected()
    tree = nx.minimum_spanning_tree(topology.to_networkx(), algorithm='kruskal')
    kept = [edge for edge in topology.edges if tree.has_edge(*edge)]
    return Topology(topology.node_count, kept, orient=False,
                    name=None if topology.name is None else topology.name + '-tree')


named_topologies = {'line3': line3_topology, 'ring20': ring20_topology}
