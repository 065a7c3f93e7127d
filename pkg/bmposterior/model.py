"""
Boltzmann machines, their parameter vectors, data sets and priors.

A `Model` is a pairwise binary model over ``k`` nodes with states in {0, 1}:

    log p(s | W, b) = sum_{i<j} W_ij s_i s_j + sum_i b_i s_i - log Z(W, b)

Samplers work on the flat `ParamVector` view: edge weights in
lexicographic (i, j) order, then biases by node index.
"""
import json
import math
from dataclasses import dataclass

import numpy as np

from bmposterior._checks import _check_type, _check_positive
from bmposterior.exceptions import InvalidModel, InvalidState, LayoutMismatch, HiddenEntriesPresent, \
    MalformedData

#: Marker for an unobserved entry in a `DataSet` row.
HIDDEN = -1


class Layout:
    """
    Binds coordinates of a `ParamVector` to edges and nodes.

    Attributes
    ----------

    k:
        Node count
    pairs:
        Tuple of ``(i, j)`` pairs with ``i < j`` in lexicographic order
    """

    def __init__(self, k, pairs=()):
        _check_type(int, k, 'k')
        if k < 1:
            raise InvalidModel("Node count must be positive, got %d" % k)
        pairs = tuple((int(i), int(j)) for i, j in pairs)
        for i, j in pairs:
            if not 0 <= i < j < k:
                raise InvalidModel("Edge (%d, %d) is not a valid pair for %d nodes" % (i, j, k))
        if list(pairs) != sorted(set(pairs)):
            raise InvalidModel("Layout pairs must be unique and in lexicographic order")
        self._k = k
        self._pairs = pairs
        self._index = {p: n for n, p in enumerate(pairs)}
        idx = np.array(pairs, dtype=np.intp).reshape(-1, 2)
        self._i = idx[:, 0].copy()
        self._j = idx[:, 1].copy()
        self._i.setflags(write=False)
        self._j.setflags(write=False)

    @property
    def k(self):
        return self._k

    @property
    def pairs(self):
        return self._pairs

    @property
    def n_edges(self):
        return len(self._pairs)

    @property
    def size(self):
        return len(self._pairs) + self._k

    @property
    def edge_i(self):
        return self._i

    @property
    def edge_j(self):
        return self._j

    def edge_index(self, i, j):
        """
        Position of the weight for pair ``(i, j)`` (either order) in the vector.
        """
        if i > j:
            i, j = j, i
        try:
            return self._index[(i, j)]
        except KeyError:
            raise LayoutMismatch("Pair (%d, %d) is not part of the layout" % (i, j)) from None

    def bias_index(self, i):
        if not 0 <= i < self._k:
            raise LayoutMismatch("Node %d is not part of the layout" % i)
        return len(self._pairs) + i

    def names(self, node_names=None):
        """
        Human readable coordinate names: ``W[i,j]`` then ``b[i]``, or
        ``W_AB`` / ``b_A`` style when node names are given.
        """
        if node_names is None:
            return ['W[%d,%d]' % p for p in self._pairs] + ['b[%d]' % i for i in range(self._k)]
        if len(node_names) != self._k:
            raise LayoutMismatch("Expected %d node names, got %d" % (self._k, len(node_names)))
        return ['W_%s%s' % (node_names[i], node_names[j]) for i, j in self._pairs] + \
            ['b_%s' % n for n in node_names]

    def neighbors(self):
        """
        Adjacency lists: for every node, a list of ``(neighbor, edge_position)``.
        """
        adj = [[] for _ in range(self._k)]
        for e, (i, j) in enumerate(self._pairs):
            adj[i].append((j, e))
            adj[j].append((i, e))
        return adj

    def to_dict(self):
        return {'k': self._k, 'pairs': [list(p) for p in self._pairs]}

    def __eq__(self, other):
        return isinstance(other, Layout) and self._k == other._k and self._pairs == other._pairs

    def __hash__(self):
        return hash((self._k, self._pairs))

    def __repr__(self):
        return 'Layout(k=%d, n_edges=%d)' % (self._k, len(self._pairs))


class Model:
    """
    A Boltzmann machine with pairwise weights and per-node biases.

    Edges are stored in lexicographic order whatever order they were given
    in, so two models with the same edge set compare equal.
    """

    def __init__(self, k, edges=(), biases=None):
        """
        Create a model.

        Parameters
        ----------

        k: int
            Number of binary nodes
        edges: sequence of (i, j, w)
            Pairwise weights; each unordered pair at most once, no self-edges
        biases: sequence of float, optional
            Length-k bias vector, zeros when omitted
        """
        _check_type(int, k, 'k')
        if k < 1:
            raise InvalidModel("Node count must be positive, got %d" % k)
        by_pair = {}
        for edge in edges:
            if len(edge) != 3:
                raise InvalidModel("Edges are (i, j, w) triples, got %r" % (edge,))
            i, j, w = int(edge[0]), int(edge[1]), float(edge[2])
            if i == j:
                raise InvalidModel("Self-edge on node %d" % i)
            if i > j:
                i, j = j, i
            if i < 0 or j >= k:
                raise InvalidModel("Edge (%d, %d) references a node outside 0..%d" % (i, j, k - 1))
            if (i, j) in by_pair:
                raise InvalidModel("Pair (%d, %d) appears more than once" % (i, j))
            if not math.isfinite(w):
                raise InvalidModel("Weight on (%d, %d) is not finite" % (i, j))
            by_pair[(i, j)] = w
        pairs = sorted(by_pair)
        self._layout = Layout(k, pairs)
        self._weights = np.array([by_pair[p] for p in pairs], dtype=float)
        if biases is None:
            self._biases = np.zeros(k)
        else:
            self._biases = np.array(biases, dtype=float).reshape(-1)
            if self._biases.shape != (k,):
                raise InvalidModel("Expected %d biases, got %d" % (k, self._biases.size))
            if not np.all(np.isfinite(self._biases)):
                raise InvalidModel("Biases must be finite")
        self._weights.setflags(write=False)
        self._biases.setflags(write=False)
        self._dense = None

    @classmethod
    def _from_arrays(cls, layout, weights, biases):
        self = cls.__new__(cls)
        self._layout = layout
        self._weights = np.array(weights, dtype=float)
        self._biases = np.array(biases, dtype=float)
        if not (np.all(np.isfinite(self._weights)) and np.all(np.isfinite(self._biases))):
            raise InvalidModel("Weights and biases must be finite")
        self._weights.setflags(write=False)
        self._biases.setflags(write=False)
        self._dense = None
        return self

    @property
    def k(self):
        return self._layout.k

    @property
    def layout(self):
        return self._layout

    @property
    def weights(self):
        return self._weights

    @property
    def biases(self):
        return self._biases

    @property
    def edges(self):
        return [(i, j, float(w)) for (i, j), w in zip(self._layout.pairs, self._weights)]

    def weight_matrix(self):
        """
        Dense symmetric k x k weight matrix with a zero diagonal.
        """
        if self._dense is None:
            dense = np.zeros((self.k, self.k))
            dense[self._layout.edge_i, self._layout.edge_j] = self._weights
            dense[self._layout.edge_j, self._layout.edge_i] = self._weights
            dense.setflags(write=False)
            self._dense = dense
        return self._dense

    def with_params(self, weights=None, biases=None):
        """
        Copy of this model on the same layout with new weights and/or biases.
        """
        return Model._from_arrays(self._layout,
                                  self._weights if weights is None else weights,
                                  self._biases if biases is None else biases)

    def permuted(self, perm):
        """
        Relabel nodes: node ``i`` of this model becomes node ``perm[i]``.
        """
        perm = [int(p) for p in perm]
        if sorted(perm) != list(range(self.k)):
            raise InvalidModel("Not a permutation of 0..%d" % (self.k - 1))
        edges = [(perm[i], perm[j], w) for i, j, w in self.edges]
        biases = np.empty(self.k)
        biases[perm] = self._biases
        return Model(self.k, edges, biases)

    def to_json(self):
        """
        JSON text ``{k, edges: [[i, j, w], ...], biases: [...], layout: [...]}``;
        ``layout`` names the `ParamVector` coordinates in order.
        """
        return json.dumps({
            'k': self.k,
            'edges': [[i, j, w] for i, j, w in self.edges],
            'biases': self._biases.tolist(),
            'layout': self._layout.names(),
        }, indent=1)

    @staticmethod
    def from_json(text):
        try:
            d = json.loads(text)
            return Model(int(d['k']), [tuple(e) for e in d['edges']], d['biases'])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InvalidModel):
                raise
            raise MalformedData("Malformed model JSON: %s" % e) from e

    def __eq__(self, other):
        return isinstance(other, Model) and self._layout == other._layout and \
            np.array_equal(self._weights, other._weights) and np.array_equal(self._biases, other._biases)

    def __repr__(self):
        return 'Model(k=%d, n_edges=%d)' % (self.k, self._layout.n_edges)


class ParamVector:
    """
    Flat coordinate view of a model's free parameters.

    Attributes
    ----------

    layout: Layout
        Coordinate binding
    values: numpy.ndarray
        Edge weights in layout order followed by the k biases
    """

    def __init__(self, layout, values):
        _check_type(Layout, layout, 'layout')
        values = np.array(values, dtype=float).reshape(-1)
        if values.size != layout.size:
            raise LayoutMismatch("Layout has %d coordinates but %d values were given" % (layout.size, values.size))
        values.setflags(write=False)
        self._layout = layout
        self._values = values

    @property
    def layout(self):
        return self._layout

    @property
    def values(self):
        return self._values

    @property
    def weights(self):
        return self._values[:self._layout.n_edges]

    @property
    def biases(self):
        return self._values[self._layout.n_edges:]

    def replace(self, values):
        return ParamVector(self._layout, values)

    def __len__(self):
        return self._values.size

    def __eq__(self, other):
        return isinstance(other, ParamVector) and self._layout == other._layout and \
            np.array_equal(self._values, other._values)

    def __repr__(self):
        return 'ParamVector(size=%d)' % self._values.size


def vectorize(model):
    """
    Flatten a model into a `ParamVector`.
    """
    _check_type(Model, model, 'model')
    return ParamVector(model.layout, np.concatenate([model.weights, model.biases]))


def devectorize(layout, values):
    """
    Rebuild the model described by ``values`` on ``layout``.
    """
    if isinstance(values, ParamVector):
        if values.layout != layout:
            raise LayoutMismatch("ParamVector layout does not match the requested layout")
        values = values.values
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size != layout.size:
        raise LayoutMismatch("Layout has %d coordinates but %d values were given" % (layout.size, values.size))
    return Model._from_arrays(layout, values[:layout.n_edges], values[layout.n_edges:])


class DataSet:
    """
    Binary observations, optionally with hidden entries and row multiplicities.

    Rows hold 0, 1 or `HIDDEN`. ``n_rows`` is the total count N, so a
    contingency table with 64 distinct patterns can describe 1841 cases.
    """

    def __init__(self, rows, counts=None):
        rows = np.array(rows, dtype=np.int8)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)
        if rows.ndim != 2:
            raise MalformedData("Rows must form a 2-D table")
        if not np.all(np.isin(rows, (0, 1, HIDDEN))):
            raise MalformedData("Row entries must be 0, 1 or hidden")
        if counts is None:
            counts = np.ones(rows.shape[0], dtype=np.int64)
        else:
            counts = np.array(counts).reshape(-1)
            if counts.shape != (rows.shape[0],):
                raise MalformedData("Expected one count per row")
            if not np.all(np.equal(np.mod(counts, 1), 0)) or np.any(counts < 1):
                raise MalformedData("Row multiplicities must be positive integers")
            counts = counts.astype(np.int64)
        rows.setflags(write=False)
        counts.setflags(write=False)
        self._rows = rows
        self._counts = counts

    @property
    def rows(self):
        return self._rows

    @property
    def counts(self):
        return self._counts

    @property
    def k(self):
        return self._rows.shape[1]

    @property
    def n_rows(self):
        return int(self._counts.sum())

    @property
    def n_distinct(self):
        return self._rows.shape[0]

    def is_fully_observed(self):
        return not np.any(self._rows == HIDDEN)

    def hidden_mask(self):
        return self._rows == HIDDEN

    def expanded(self):
        """
        One row per case, multiplicities unrolled.
        """
        return np.repeat(self._rows, self._counts, axis=0)

    def merged(self):
        """
        Equivalent data set with duplicate patterns merged into counts, in
        first-appearance order.
        """
        order = {}
        for row, count in zip(map(tuple, self._rows.tolist()), self._counts.tolist()):
            order[row] = order.get(row, 0) + count
        return DataSet(list(order.keys()), list(order.values()))

    def __repr__(self):
        return 'DataSet(n_rows=%d, k=%d)' % (self.n_rows, self.k)


class GaussianPrior:
    """
    Independent zero-mean Gaussians on weights and biases.
    """

    def __init__(self, weight_variance=1.0, bias_variance=1.0):
        _check_positive(weight_variance, 'weight_variance')
        _check_positive(bias_variance, 'bias_variance')
        self.weight_variance = float(weight_variance)
        self.bias_variance = float(bias_variance)

    def variances(self, layout):
        """
        Per-coordinate prior variances in `ParamVector` order.
        """
        return np.concatenate([np.full(layout.n_edges, self.weight_variance),
                               np.full(layout.k, self.bias_variance)])

    def __repr__(self):
        return 'GaussianPrior(weight_variance=%g, bias_variance=%g)' % (self.weight_variance, self.bias_variance)


@dataclass(frozen=True)
class SuffStats:
    """
    Data sufficient statistics: per-edge co-activation and per-node counts.
    """
    edge_sums: np.ndarray
    node_sums: np.ndarray
    n_rows: int

    def vector(self):
        """
        Statistics stacked in `ParamVector` order.
        """
        return np.concatenate([self.edge_sums, self.node_sums])


def _as_states(model, state):
    state = np.asarray(state)
    if state.shape[-1] != model.k:
        raise InvalidState("State length %d does not match %d nodes" % (state.shape[-1], model.k))
    if not np.all((state == 0) | (state == 1)):
        raise InvalidState("States must be binary")
    return state.astype(float)


def log_unnorm(model, state):
    """
    Unnormalised log probability of a binary state:
    ``sum_{i<j} W_ij s_i s_j + sum_i b_i s_i``.

    A 2-D array of states returns one value per row.
    """
    s = _as_states(model, state)
    layout = model.layout
    pair = s[..., layout.edge_i] * s[..., layout.edge_j]
    value = pair @ model.weights + s @ model.biases
    return float(value) if np.ndim(value) == 0 else value


def state_statistics(layout, states):
    """
    Per-state statistics in `ParamVector` order: ``s_i s_j`` per edge, then ``s_i``.
    """
    s = np.asarray(states, dtype=float)
    return np.concatenate([s[..., layout.edge_i] * s[..., layout.edge_j], s], axis=-1)


def suff_stats(data, layout):
    """
    Exact sufficient statistics of a fully observed data set.

    Raises `HiddenEntriesPresent` when any entry is hidden; hidden data goes
    through `bmposterior.semisup` instead.
    """
    _check_type(DataSet, data, 'data')
    if data.k != layout.k:
        raise LayoutMismatch("Data has %d columns but the layout has %d nodes" % (data.k, layout.k))
    if not data.is_fully_observed():
        raise HiddenEntriesPresent("Sufficient statistics need fully observed rows")
    rows = data.rows.astype(np.int64)
    counts = data.counts
    edge_sums = counts @ (rows[:, layout.edge_i] * rows[:, layout.edge_j]) if layout.n_edges else \
        np.zeros(0, dtype=np.int64)
    node_sums = counts @ rows
    return SuffStats(np.asarray(edge_sums, dtype=np.int64), np.asarray(node_sums, dtype=np.int64), data.n_rows)


def data_term(suff, params):
    """
    ``sum_n log_unnorm(s_n)`` written through the sufficient statistics.
    """
    return float(params.values @ suff.vector())


def log_prior(prior, params):
    """
    Gaussian log prior without its normalising constant.
    """
    _check_type(GaussianPrior, prior, 'prior')
    w, b = params.weights, params.biases
    return float(-(w @ w) / (2 * prior.weight_variance) - (b @ b) / (2 * prior.bias_variance))


def grad_log_prior(prior, params):
    return -params.values / prior.variances(params.layout)


def grad_log_joint(suff, prior, params, unclamped):
    """
    Gradient of ``log p(S, theta)`` in `ParamVector` order.

    Parameters
    ----------

    suff: SuffStats
        Data statistics
    prior: GaussianPrior
    params: ParamVector
        Point of evaluation
    unclamped:
        Any object with ``node_marginals`` and ``edge_moments`` arrays holding
        expectations under ``p(s | theta)``
    """
    layout = params.layout
    edge = np.asarray(unclamped.edge_moments, dtype=float).reshape(-1)
    node = np.asarray(unclamped.node_marginals, dtype=float).reshape(-1)
    if edge.size != layout.n_edges or node.size != layout.k:
        raise LayoutMismatch("Expectations do not match the parameter layout")
    if suff.edge_sums.size != layout.n_edges or suff.node_sums.size != layout.k:
        raise LayoutMismatch("Sufficient statistics do not match the parameter layout")
    expectations = np.concatenate([edge, node])
    tol = 1e-9
    if np.any(~np.isfinite(expectations)) or np.any(expectations < -tol) or np.any(expectations > 1 + tol):
        raise InvalidState("Expectations must lie in [0, 1]")
    return suff.vector() - suff.n_rows * expectations + grad_log_prior(prior, params)


def log_joint_unnorm(suff, prior, params, log_z):
    """
    ``log_prior + sum_n log_unnorm - N log Z``, the log joint up to a constant.
    """
    return log_prior(prior, params) + data_term(suff, params) - suff.n_rows * log_z


def empty_suff_stats(layout):
    return SuffStats(np.zeros(layout.n_edges, dtype=np.int64), np.zeros(layout.k, dtype=np.int64), 0)


def fully_connected_layout(k):
    return Layout(k, [(i, j) for i in range(k) for j in range(i + 1, k)])
