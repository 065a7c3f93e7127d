"""
Deterministic approximations to log Z and to the unclamped moments.

* `mean_field`: naive mean-field lower bound, sequential fixed-point sweeps.
* `tree_bound`: variational lower bound over tree-structured distributions.
* `loopy_bp`: sum-product on the model graph, scored by the Bethe free energy.
* `pseudo_log_likelihood`: product of single-node conditionals.

Each inference routine returns an `InferenceResult`. Its ``warm_start``
field can be fed back through ``init`` to continue from the previous
solution, which is how the samplers run these methods between nearby
parameter settings.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import expit, entr, logsumexp

from bmposterior._checks import _check_type, _check_positive, _check_fraction
from bmposterior.exceptions import NonFiniteValue, InvalidModel, InconsistentBeliefs, HiddenEntriesPresent, \
    LayoutMismatch
from bmposterior.model import Model, DataSet

_logger = logging.getLogger(__name__)

#: Node count up to which `tree_bound` scores candidates by enumeration.
TREE_ENUMERATION_CAP = 12


@dataclass(frozen=True)
class InferenceResult:
    """
    Outcome of an approximate inference run.

    Attributes
    ----------

    log_z_estimate:
        Approximation of log Z (a lower bound for mean-field and tree)
    node_marginals:
        Approximate ``<s_i>``
    edge_moments:
        Approximate ``<s_i s_j>`` in layout order
    converged:
        Whether the stopping tolerance was met within ``max_iter``
    iterations:
        Sweeps or message-passing rounds performed
    method:
        ``mean-field``, ``tree`` or ``bethe``
    trace:
        Bound value after every sweep (bounds) or message residual per
        round (BP)
    warm_start:
        Opaque state to pass back as ``init``
    """
    log_z_estimate: float
    node_marginals: np.ndarray
    edge_moments: np.ndarray
    converged: bool
    iterations: int
    method: str
    trace: Tuple[float, ...] = ()
    warm_start: object = field(default=None, repr=False, compare=False)

    def to_json(self):
        return json.dumps({
            'method': self.method,
            'log_z_estimate': float(self.log_z_estimate),
            'node_marginals': np.asarray(self.node_marginals).tolist(),
            'edge_moments': np.asarray(self.edge_moments).tolist(),
            'converged': bool(self.converged),
            'iterations': int(self.iterations),
        })


def _binary_entropy(m):
    return entr(m) + entr(1.0 - m)


def mean_field_bound(model, marginals):
    """
    ``F(W, q)`` for the factorised ``q`` with the given marginals.
    """
    m = np.asarray(marginals, dtype=float)
    layout = model.layout
    return float(model.weights @ (m[layout.edge_i] * m[layout.edge_j]) + model.biases @ m
                 + np.sum(_binary_entropy(m)))


def mean_field(model, init=None, damping=0.0, tol=1e-8, max_iter=1000):
    """
    Naive mean-field lower bound on log Z.

    Parameters
    ----------

    model: Model
    init: array, optional
        Starting marginals in [0, 1]; 1/2 everywhere when omitted
    damping: float, default=0
        Weight kept on the old marginal in each update; undamped sequential
        sweeps never decrease the bound
    tol: float, default=1e-8
        Converged when no marginal moves by ``tol`` or more in a sweep
    max_iter: int, default=1000
        Maximum number of sweeps
    """
    _check_type(Model, model, 'model')
    _check_fraction(damping, 'damping')
    _check_positive(tol, 'tol')
    k = model.k
    if init is None:
        m = np.full(k, 0.5)
    else:
        m = np.array(init, dtype=float).reshape(-1)
        if m.shape != (k,) or np.any(~np.isfinite(m)) or np.any(m < 0) or np.any(m > 1):
            raise ValueError("Initial marginals must be %d values in [0, 1]" % k)
    W = model.weight_matrix()
    b = model.biases
    trace = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        delta = 0.0
        for i in range(k):
            new = expit(W[i] @ m + b[i])
            new = damping * m[i] + (1.0 - damping) * new
            delta = max(delta, abs(new - m[i]))
            m[i] = new
        if not np.all(np.isfinite(m)):
            raise NonFiniteValue("Mean-field marginals became non-finite")
        trace.append(mean_field_bound(model, m))
        if delta < tol:
            converged = True
            break
    layout = model.layout
    return InferenceResult(trace[-1], m.copy(), m[layout.edge_i] * m[layout.edge_j], converged, iterations,
                           'mean-field', tuple(trace), m.copy())


class TreeStructure:
    """
    Spanning tree (or forest) over a model's nodes.

    Attributes
    ----------

    k:
        Node count
    edges:
        Tuple of ``(i, j)`` pairs with ``i < j``, sorted
    """

    def __init__(self, k, edges):
        edges = tuple(sorted((min(i, j), max(i, j)) for i, j in edges))
        if len(set(edges)) != len(edges):
            raise InvalidModel("Tree edges must be distinct")
        parent = list(range(k))
        for i, j in edges:
            if not 0 <= i < j < k:
                raise InvalidModel("Tree edge (%d, %d) is outside 0..%d" % (i, j, k - 1))
            ri, rj = _find(parent, i), _find(parent, j)
            if ri == rj:
                raise InvalidModel("Tree edges contain a cycle through (%d, %d)" % (i, j))
            parent[ri] = rj
        self.k = k
        self.edges = edges
        self._plan = None

    def validate_for(self, model):
        """
        Check every tree edge is a model edge and every model component is
        spanned.
        """
        pairs = set(model.layout.pairs)
        for edge in self.edges:
            if edge not in pairs:
                raise InvalidModel("Tree edge %s is not an edge of the model" % (edge,))
        if len(self.edges) != len(select_tree(model).edges):
            raise InvalidModel("Tree does not span every connected component of the model")

    def plan(self):
        """
        Breadth-first visiting order with parents, computed once.
        """
        if self._plan is None:
            adj = [[] for _ in range(self.k)]
            for e, (i, j) in enumerate(self.edges):
                adj[i].append((j, e))
                adj[j].append((i, e))
            parent = np.full(self.k, -1)
            parent_edge = np.full(self.k, -1)
            component = np.full(self.k, -1)
            order = []
            roots = []
            for root in range(self.k):
                if component[root] >= 0:
                    continue
                roots.append(root)
                component[root] = root
                queue = [root]
                while queue:
                    v = queue.pop(0)
                    order.append(v)
                    for u, e in adj[v]:
                        if component[u] < 0:
                            component[u] = root
                            parent[u] = v
                            parent_edge[u] = e
                            queue.append(u)
            self._plan = (order, parent.tolist(), parent_edge.tolist(), roots, component)
        return self._plan

    def __eq__(self, other):
        return isinstance(other, TreeStructure) and self.k == other.k and self.edges == other.edges

    def __repr__(self):
        return 'TreeStructure(k=%d, edges=%r)' % (self.k, self.edges)


def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def select_tree(model):
    """
    Maximum-|w| spanning tree or forest by greedy edge insertion.

    Ties are broken by lexicographic ``(i, j)``, so on a cycle of equal
    weights the lexicographically largest edge is left out.
    """
    _check_type(Model, model, 'model')
    candidates = sorted(zip(model.layout.pairs, np.abs(model.weights)), key=lambda pw: (-pw[1], pw[0]))
    parent = list(range(model.k))
    chosen = []
    for (i, j), _ in candidates:
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            chosen.append((i, j))
    return TreeStructure(model.k, chosen)


@dataclass(frozen=True)
class TreeParams:
    """
    Natural parameters of a tree-structured distribution: one coupling per
    tree edge and one field per node.
    """
    couplings: dict
    fields: np.ndarray


class _TreeObjective:
    """
    Evaluates ``F(W, q)`` and the moments of a tree-structured ``q``.

    Small models are scored by enumerating all states; larger ones by
    sum-product on the tree plus one clamped pass per node that starts a
    non-tree model edge.
    """

    def __init__(self, model, tree, enumeration_cap=TREE_ENUMERATION_CAP, strategy='auto'):
        self.model = model
        self.tree = tree
        layout = model.layout
        self.tree_i = np.array([e[0] for e in tree.edges], dtype=np.intp)
        self.tree_j = np.array([e[1] for e in tree.edges], dtype=np.intp)
        if strategy == 'auto':
            strategy = 'enumerate' if model.k <= enumeration_cap else 'messages'
        if strategy not in ('enumerate', 'messages'):
            raise ValueError("Unknown tree evaluation strategy '%s'" % strategy)
        self.strategy = strategy
        if strategy == 'enumerate':
            from bmposterior.exact import enumerate_states
            s = enumerate_states(model.k).astype(float)
            self.states = s
            self.model_pairs = s[:, layout.edge_i] * s[:, layout.edge_j]
            self.tree_pairs = s[:, self.tree_i] * s[:, self.tree_j]
            self.energies = self.model_pairs @ model.weights + s @ model.biases
        else:
            tree_index = {e: n for n, e in enumerate(tree.edges)}
            self.edge_in_tree = [tree_index.get(p, -1) for p in layout.pairs]

    def evaluate(self, couplings, fields):
        """
        Returns ``(F, node_marginals, model_edge_moments)``.
        """
        if self.strategy == 'enumerate':
            return self._evaluate_enumerated(couplings, fields)
        return self._evaluate_messages(couplings, fields)

    def _evaluate_enumerated(self, couplings, fields):
        log_q = self.tree_pairs @ couplings + self.states @ fields
        log_zq = logsumexp(log_q)
        q = np.exp(log_q - log_zq)
        bound = float(q @ (self.energies - log_q) + log_zq)
        return bound, q @ self.states, q @ self.model_pairs

    def _pass(self, couplings, fields, clamp=None):
        order, parent, parent_edge, roots, _ = self.tree.plan()
        k = self.model.k
        inc = np.zeros((k, 2))
        inc[:, 1] = fields
        if clamp is not None:
            inc[clamp, 0] = -np.inf
        up = np.zeros((k, 2))
        for v in reversed(order):
            p = parent[v]
            if p < 0:
                continue
            t = couplings[parent_edge[v]]
            up[v, 0] = np.logaddexp(inc[v, 0], inc[v, 1])
            up[v, 1] = np.logaddexp(inc[v, 0], inc[v, 1] + t)
            inc[p] += up[v]
        log_z = float(sum(np.logaddexp(inc[r, 0], inc[r, 1]) for r in roots))
        down = np.zeros((k, 2))
        pair = np.zeros(len(self.tree.edges))
        for v in order:
            p = parent[v]
            if p < 0:
                continue
            t = couplings[parent_edge[v]]
            cavity = inc[p] - up[v] + down[p]
            down[v, 0] = np.logaddexp(cavity[0], cavity[1])
            down[v, 1] = np.logaddexp(cavity[0], cavity[1] + t)
            table = np.array([[inc[v, 0] + cavity[0], inc[v, 0] + cavity[1]],
                              [inc[v, 1] + cavity[0], inc[v, 1] + cavity[1] + t]])
            pair[parent_edge[v]] = np.exp(table[1, 1] - logsumexp(table))
        belief = inc + down
        node = np.exp(belief[:, 1] - np.logaddexp(belief[:, 0], belief[:, 1]))
        return log_z, node, pair

    def _evaluate_messages(self, couplings, fields):
        model = self.model
        layout = model.layout
        component = self.tree.plan()[4]
        log_zq, node, tree_pair = self._pass(couplings, fields)
        edge = np.empty(layout.n_edges)
        conditional = {}
        for e, (i, j) in enumerate(layout.pairs):
            t = self.edge_in_tree[e]
            if t >= 0:
                edge[e] = tree_pair[t]
            elif component[i] != component[j]:
                edge[e] = node[i] * node[j]
            else:
                if i not in conditional:
                    conditional[i] = self._pass(couplings, fields, clamp=i)[1]
                edge[e] = node[i] * conditional[i][j]
        entropy = log_zq - couplings @ tree_pair - fields @ node
        bound = float(model.weights @ edge + model.biases @ node + entropy)
        return bound, node, edge


def _as_tree_params(init, tree, k):
    couplings = np.zeros(len(tree.edges))
    if isinstance(init, TreeParams):
        for n, edge in enumerate(tree.edges):
            couplings[n] = init.couplings.get(edge, 0.0)
        return couplings, np.array(init.fields, dtype=float)
    m = np.clip(np.asarray(init, dtype=float), 1e-12, 1 - 1e-12)
    if m.shape != (k,):
        raise ValueError("Initial marginals must have %d entries" % k)
    return couplings, np.log(m) - np.log1p(-m)


def _coordinate_step(evaluate, x, c, current):
    """
    One monotone update of coordinate ``c``: a finite-difference Newton
    proposal with step halving. Returns the new point and value, unchanged
    when nothing better was found.
    """
    h = 1e-4
    best_x, best_f = x, current
    plus = x.copy()
    plus[c] += h
    minus = x.copy()
    minus[c] -= h
    f_plus, f_minus = evaluate(plus), evaluate(minus)
    grad = (f_plus - f_minus) / (2 * h)
    curv = (f_plus - 2 * current + f_minus) / (h * h)
    for candidate, value in ((plus, f_plus), (minus, f_minus)):
        if value > best_f:
            best_x, best_f = candidate, value
    step = -grad / curv if curv < -1e-12 else float(np.clip(grad, -1.0, 1.0))
    for _ in range(30):
        if abs(step) < 1e-14:
            break
        trial = x.copy()
        trial[c] += step
        value = evaluate(trial)
        if value > best_f:
            best_x, best_f = trial, value
            break
        step *= 0.5
    return best_x, best_f


def tree_bound(model, tree=None, init=None, tol=1e-10, max_iter=200, enumeration_cap=TREE_ENUMERATION_CAP,
               strategy='auto'):
    """
    Tree-structured variational lower bound on log Z.

    Maximises ``F(W, q) = <sum W_ij s_i s_j + sum b_i s_i>_q + H(q)`` over
    distributions ``q`` that factorise on ``tree``, by monotone coordinate
    ascent on the tree's couplings and node fields.

    Parameters
    ----------

    model: Model
    tree: TreeStructure, optional
        Defaults to `select_tree(model)`
    init: TreeParams or array of marginals, optional
        Warm start; the converged mean-field solution when omitted, so the
        result is never below the mean-field bound
    tol: float, default=1e-10
        Stop when a sweep improves the bound by less than ``tol``
    max_iter: int, default=200
        Maximum number of sweeps over all coordinates
    strategy: str, default='auto'
        ``enumerate`` or ``messages``; ``auto`` enumerates up to
        ``enumeration_cap`` nodes
    """
    _check_type(Model, model, 'model')
    _check_positive(tol, 'tol')
    if tree is None:
        tree = select_tree(model)
    _check_type(TreeStructure, tree, 'tree')
    if tree.k != model.k:
        raise LayoutMismatch("Tree has %d nodes but the model has %d" % (tree.k, model.k))
    pairs = set(model.layout.pairs)
    for edge in tree.edges:
        if edge not in pairs:
            raise InvalidModel("Tree edge %s is not an edge of the model" % (edge,))
    if init is None:
        init = mean_field(model).node_marginals
    couplings, fields = _as_tree_params(init, tree, model.k)
    objective = _TreeObjective(model, tree, enumeration_cap, strategy)
    n_tree = len(tree.edges)

    def evaluate(x):
        value = objective.evaluate(x[:n_tree], x[n_tree:])[0]
        if not np.isfinite(value):
            raise NonFiniteValue("Tree bound became non-finite")
        return value

    x = np.concatenate([couplings, fields])
    current = evaluate(x)
    trace = [current]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        start = current
        for c in range(x.size):
            x, value = _coordinate_step(evaluate, x, c, current)
            if value < current:
                raise AssertionError("Tree bound decreased during coordinate ascent")
            current = value
        trace.append(current)
        if current - start < tol:
            converged = True
            break
    bound, node, edge = objective.evaluate(x[:n_tree], x[n_tree:])
    warm = TreeParams(dict(zip(tree.edges, x[:n_tree].tolist())), x[n_tree:].copy())
    return InferenceResult(bound, np.clip(node, 0, 1), np.clip(edge, 0, 1), converged, iterations, 'tree',
                           tuple(trace), warm)


def evaluate_tree_bound(model, tree, params, enumeration_cap=TREE_ENUMERATION_CAP, strategy='auto'):
    """
    Bound value and moments of a given tree distribution, without optimising.
    """
    couplings, fields = _as_tree_params(params, tree, model.k)
    return _TreeObjective(model, tree, enumeration_cap, strategy).evaluate(couplings, fields)


def _directed(model):
    layout = model.layout
    m = layout.n_edges
    src = np.empty(2 * m, dtype=np.intp)
    dst = np.empty(2 * m, dtype=np.intp)
    src[0::2], dst[0::2] = layout.edge_i, layout.edge_j
    src[1::2], dst[1::2] = layout.edge_j, layout.edge_i
    weights = np.repeat(model.weights, 2)
    reverse = np.arange(2 * m) ^ 1
    return src, dst, weights, reverse


def _bp_beliefs(model, messages):
    layout = model.layout
    k = model.k
    incoming = np.bincount(np.concatenate([layout.edge_j, layout.edge_i]),
                           weights=np.concatenate([messages[0::2], messages[1::2]]), minlength=k)
    node = expit(model.biases + incoming)
    h_i = model.biases[layout.edge_i] + incoming[layout.edge_i] - messages[1::2]
    h_j = model.biases[layout.edge_j] + incoming[layout.edge_j] - messages[0::2]
    log_table = np.zeros((layout.n_edges, 2, 2))
    log_table[:, 1, 0] = h_i
    log_table[:, 0, 1] = h_j
    log_table[:, 1, 1] = h_i + h_j + model.weights
    log_norm = logsumexp(log_table.reshape(-1, 4), axis=1)
    tables = np.exp(log_table - log_norm[:, None, None])
    return node, tables


def _bethe_log_z(model, node, tables):
    layout = model.layout
    degree = np.bincount(np.concatenate([layout.edge_i, layout.edge_j]), minlength=model.k)
    energy = model.weights @ tables[:, 1, 1] + model.biases @ node
    entropy = np.sum(entr(np.clip(tables, 0, 1))) - np.sum((degree - 1) * _binary_entropy(node))
    return float(energy + entropy)


def loopy_bp(model, schedule='parallel', damping=0.5, tol=1e-8, max_iter=500, init=None):
    """
    Loopy belief propagation with the Bethe free energy as the log Z estimate.

    Messages are stored as log-odds ``log m_{i->j}(1) - log m_{i->j}(0)``.
    Non-convergence is reported through ``converged``, never raised.

    Parameters
    ----------

    model: Model
    schedule: str, default='parallel'
        ``parallel`` (all messages from the previous round) or
        ``sequential`` (in directed-edge order, each update seen at once)
    damping: float, default=0.5
        Weight kept on the old message
    tol: float, default=1e-8
        Converged when the largest message change falls below ``tol``
    max_iter: int, default=500
    init: array, optional
        Messages from a previous run (``warm_start``) on the same layout
    """
    _check_type(Model, model, 'model')
    _check_fraction(damping, 'damping')
    _check_positive(tol, 'tol')
    if schedule not in ('parallel', 'sequential'):
        raise ValueError("Unknown BP schedule '%s'" % schedule)
    src, dst, weights, reverse = _directed(model)
    k = model.k
    b = model.biases
    if init is None:
        messages = np.zeros(src.size)
    else:
        messages = np.array(init, dtype=float).reshape(-1)
        if messages.size != src.size:
            raise LayoutMismatch("Warm-start messages do not match the model edges")
    trace = []
    converged = src.size == 0
    iterations = 0
    while not converged and iterations < max_iter:
        iterations += 1
        if schedule == 'parallel':
            incoming = np.bincount(dst, weights=messages, minlength=k)
            cavity = b[src] + incoming[src] - messages[reverse]
            new = np.logaddexp(0.0, cavity + weights) - np.logaddexp(0.0, cavity)
            new = damping * messages + (1.0 - damping) * new
            residual = float(np.max(np.abs(new - messages)))
            messages = new
        else:
            incoming = np.bincount(dst, weights=messages, minlength=k)
            residual = 0.0
            for d in range(src.size):
                cavity = b[src[d]] + incoming[src[d]] - messages[reverse[d]]
                new = np.logaddexp(0.0, cavity + weights[d]) - np.logaddexp(0.0, cavity)
                new = damping * messages[d] + (1.0 - damping) * new
                residual = max(residual, abs(new - messages[d]))
                incoming[dst[d]] += new - messages[d]
                messages[d] = new
        if not np.all(np.isfinite(messages)):
            raise NonFiniteValue("BP messages became non-finite")
        trace.append(residual)
        converged = residual < tol
    node, tables = _bp_beliefs(model, messages)
    log_z = _bethe_log_z(model, node, tables)
    if not converged:
        _logger.debug('Loopy BP stopped after %d rounds with residual %.3g', iterations, trace[-1])
    return InferenceResult(log_z, node, tables[:, 1, 1].copy(), converged, iterations, 'bethe', tuple(trace),
                           messages.copy())


def pairwise_tables(node_marginals, edge_moments, layout):
    """
    2 x 2 pairwise tables ``b_ij(s_i, s_j)`` implied by node marginals and
    edge moments.
    """
    m = np.asarray(node_marginals, dtype=float)
    mu = np.asarray(edge_moments, dtype=float)
    mi, mj = m[layout.edge_i], m[layout.edge_j]
    tables = np.empty((layout.n_edges, 2, 2))
    tables[:, 0, 0] = 1 - mi - mj + mu
    tables[:, 0, 1] = mj - mu
    tables[:, 1, 0] = mi - mu
    tables[:, 1, 1] = mu
    return tables


def bethe_free_energy(model, node_beliefs, edge_beliefs, tol=1e-6):
    """
    Bethe free energy of pairwise beliefs, an approximation to ``-log Z``.

    Parameters
    ----------

    model: Model
    node_beliefs: array
        ``b_i(s_i = 1)`` per node
    edge_beliefs: array
        Either (n_edges, 2, 2) tables or (n_edges,) moments ``b_ij(1, 1)``
    tol: float, default=1e-6
        Allowed violation of normalisation and marginal consistency
    """
    _check_type(Model, model, 'model')
    layout = model.layout
    node = np.asarray(node_beliefs, dtype=float).reshape(-1)
    if node.size != model.k:
        raise LayoutMismatch("Expected %d node beliefs" % model.k)
    edge = np.asarray(edge_beliefs, dtype=float)
    if edge.ndim == 1:
        edge = pairwise_tables(node, edge, layout)
    if edge.shape != (layout.n_edges, 2, 2):
        raise LayoutMismatch("Expected %d pairwise tables" % layout.n_edges)
    if np.any(node < -tol) or np.any(node > 1 + tol) or np.any(edge < -tol):
        raise InconsistentBeliefs("Beliefs must be probabilities")
    if np.any(np.abs(edge.sum(axis=(1, 2)) - 1) > tol):
        raise InconsistentBeliefs("Pairwise tables must sum to one")
    if np.any(np.abs(edge[:, 1, :].sum(axis=1) - node[layout.edge_i]) > tol) or \
            np.any(np.abs(edge[:, :, 1].sum(axis=1) - node[layout.edge_j]) > tol):
        raise InconsistentBeliefs("Pairwise tables do not marginalise to the node beliefs")
    return -_bethe_log_z(model, np.clip(node, 0, 1), edge)


def pseudo_log_likelihood(model, data):
    """
    ``sum_n sum_i log p(s_i | s_-i, W)`` over a fully observed data set.
    """
    _check_type(Model, model, 'model')
    _check_type(DataSet, data, 'data')
    if data.k != model.k:
        raise LayoutMismatch("Data has %d columns but the model has %d nodes" % (data.k, model.k))
    if not data.is_fully_observed():
        raise HiddenEntriesPresent("Pseudo-likelihood needs fully observed rows")
    s = data.rows.astype(float)
    fields = s @ model.weight_matrix() + model.biases
    signed = (2 * s - 1) * fields
    per_row = -np.logaddexp(0.0, -signed).sum(axis=1)
    return float(data.counts @ per_row)
