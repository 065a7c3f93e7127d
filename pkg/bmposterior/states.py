"""
MCMC over variable states at fixed parameters.

Gibbs sweeps work on a single state or on a batch of states (one row per
chain), drawing every uniform for the sweep up front so a batch of chains
consumes the generator in a fixed order. Swendsen-Wang runs on the
agreement form ``sum_{i<j} W_ij [s_i == s_j]`` with non-negative couplings.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import expit, logsumexp
from tqdm import tqdm

from bmposterior._checks import _check_type
from bmposterior.exceptions import InvalidState, HiddenEntriesPresent, NegativeCoupling, EmptyInput, \
    LayoutMismatch, InvalidConfiguration, InvalidModel, EnumerationCapExceeded
from bmposterior.model import Model, DataSet, state_statistics

_logger = logging.getLogger(__name__)

ORDERS = ('systematic', 'random')


@dataclass(frozen=True)
class StateChainConfig:
    """
    Settings of a long-run state chain.

    Attributes
    ----------

    n_sweeps:
        Retained sweeps after burn-in (before thinning)
    burn_in:
        Discarded initial sweeps
    seed:
        Seed of the chain's generator when none is passed in
    order:
        ``systematic`` (node order) or ``random`` (fresh permutation per sweep)
    thin:
        Keep every ``thin``-th retained sweep
    """
    n_sweeps: int = 1000
    burn_in: int = 100
    seed: Optional[int] = None
    order: str = 'systematic'
    thin: int = 1

    def __post_init__(self):
        if self.n_sweeps < 1:
            raise InvalidConfiguration("n_sweeps must be at least 1")
        if self.burn_in < 0:
            raise InvalidConfiguration("burn_in must be non-negative")
        if self.thin < 1:
            raise InvalidConfiguration("thin must be at least 1")
        if self.order not in ORDERS:
            raise InvalidConfiguration("Unknown scan order '%s'" % self.order)


@dataclass(frozen=True)
class MomentEstimate:
    """
    Node and edge expectations under ``p(s | W)`` with their provenance.

    ``source`` is one of ``brief``, ``long-run``, ``exact``, ``bp``,
    ``mean-field`` or ``tree``. Standard errors are filled in by the sampling
    estimators only.
    """
    node_marginals: np.ndarray
    edge_moments: np.ndarray
    n_samples: int
    source: str
    node_stderr: Optional[np.ndarray] = None
    edge_stderr: Optional[np.ndarray] = None
    warm_start: object = field(default=None, repr=False, compare=False)


def _scan(k, order, rng):
    if isinstance(order, str):
        if order == 'systematic':
            return np.arange(k)
        if order == 'random':
            return rng.permutation(k)
        raise InvalidConfiguration("Unknown scan order '%s'" % order)
    visit = np.asarray(order, dtype=np.intp)
    if visit.ndim != 1 or np.any(visit < 0) or np.any(visit >= k):
        raise InvalidConfiguration("Scan order must list node indices below %d" % k)
    return visit


def _check_states(model, state):
    state = np.asarray(state)
    if state.shape[-1] != model.k or state.ndim not in (1, 2):
        raise InvalidState("State length does not match %d nodes" % model.k)
    if not np.all((state == 0) | (state == 1)):
        raise InvalidState("States must be binary")
    return state


def gibbs_sweep(model, state, rng, order='systematic'):
    """
    Resample every node once from ``p(s_i = 1 | s_-i) = sigmoid(W_i . s + b_i)``.

    Parameters
    ----------

    model: Model
    state: array
        A binary state of length k, or an (n, k) batch of states
    rng: numpy.random.Generator
    order: str or sequence of int, default='systematic'
        ``systematic``, ``random`` or an explicit visiting order
    """
    state = _check_states(model, state)
    single = state.ndim == 1
    s = np.atleast_2d(state).astype(float)
    W = model.weight_matrix()
    b = model.biases
    visit = _scan(model.k, order, rng)
    u = rng.random((s.shape[0], visit.size))
    for n, i in enumerate(visit):
        p = expit(s @ W[:, i] + b[i])
        s[:, i] = u[:, n] < p
    out = s.astype(np.int8)
    return out[0] if single else out


def gibbs_transition_matrix(model, order='systematic'):
    """
    Exact one-sweep transition matrix over the 2^k enumerated states.

    Only deterministic visiting orders are supported.
    """
    from bmposterior.exact import enumerate_states, DEFAULT_CAP
    if isinstance(order, str) and order != 'systematic':
        raise InvalidConfiguration("The transition matrix needs a deterministic scan order")
    visit = np.arange(model.k) if isinstance(order, str) else _scan(model.k, order, None)
    if model.k > DEFAULT_CAP // 2:
        raise EnumerationCapExceeded("Transition matrix over %d nodes is too large" % model.k)
    states = enumerate_states(model.k).astype(float)
    W = model.weight_matrix()
    n_states = states.shape[0]
    index = np.arange(n_states)
    total = np.eye(n_states)
    for i in visit:
        p_on = expit(states @ W[:, i] + model.biases[i])
        bit = 1 << int(i)
        site = np.zeros((n_states, n_states))
        site[index, index | bit] += p_on
        site[index, index & ~bit] += 1 - p_on
        total = total @ site
    return total


def _moments_from_states(layout, states, weights=None):
    stats = state_statistics(layout, states)
    if weights is None:
        mean = stats.mean(axis=0)
        stderr = stats.std(axis=0, ddof=1) / np.sqrt(stats.shape[0]) if stats.shape[0] > 1 else \
            np.zeros(stats.shape[1])
    else:
        mean = weights @ stats / weights.sum()
        stderr = None
    return mean, stderr


def brief_moments(model, data, n_sweeps=1, rng=None, order='systematic'):
    """
    Brief sampling: one Gibbs chain per data case, started at the case, run
    for ``n_sweeps`` sweeps; moments average the final states.

    Low variance but biased towards the data moments for small ``n_sweeps``.
    """
    _check_type(Model, model, 'model')
    _check_type(DataSet, data, 'data')
    if data.k != model.k:
        raise LayoutMismatch("Data has %d columns but the model has %d nodes" % (data.k, model.k))
    if not data.is_fully_observed():
        raise HiddenEntriesPresent("Brief sampling starts from fully observed rows")
    if n_sweeps < 1:
        raise InvalidConfiguration("n_sweeps must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    states = data.expanded()
    for _ in range(n_sweeps):
        states = gibbs_sweep(model, states, rng, order)
    mean, stderr = _moments_from_states(model.layout, states)
    n_edges = model.layout.n_edges
    return MomentEstimate(mean[n_edges:], mean[:n_edges], states.shape[0], 'brief', stderr[n_edges:],
                          stderr[:n_edges])


def batch_means_stderr(samples, n_batches=20):
    """
    Batch-means standard error of the mean of each column of ``samples``.

    Falls back to the i.i.d. formula when there are too few rows to batch.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 2 * n_batches:
        if n < 2:
            return np.zeros(samples.shape[1:])
        return samples.std(axis=0, ddof=1) / np.sqrt(n)
    size = n // n_batches
    batches = samples[:size * n_batches].reshape(n_batches, size, *samples.shape[1:]).mean(axis=1)
    return batches.std(axis=0, ddof=1) / np.sqrt(n_batches)


def long_run_moments(model, config, rng=None, init=None, progress=False):
    """
    Moments from the post-burn-in sweeps of one persistent Gibbs chain.

    Parameters
    ----------

    model: Model
    config: StateChainConfig
    rng: numpy.random.Generator, optional
        Defaults to ``default_rng(config.seed)``
    init: array, optional
        Starting state, e.g. the ``warm_start`` of a previous estimate;
        all zeros when omitted
    progress: bool, default=False
        Show a progress bar
    """
    _check_type(Model, model, 'model')
    _check_type(StateChainConfig, config, 'config')
    rng = np.random.default_rng(config.seed) if rng is None else rng
    state = np.zeros(model.k, dtype=np.int8) if init is None else _check_states(model, init).astype(np.int8)
    for _ in range(config.burn_in):
        state = gibbs_sweep(model, state, rng, config.order)
    kept = []
    for sweep in tqdm(range(config.n_sweeps), disable=not progress, desc='gibbs', leave=False):
        state = gibbs_sweep(model, state, rng, config.order)
        if (sweep + 1) % config.thin == 0:
            kept.append(state)
    if not kept:
        kept.append(state)
    stats = state_statistics(model.layout, np.array(kept))
    mean = stats.mean(axis=0)
    stderr = batch_means_stderr(stats)
    n_edges = model.layout.n_edges
    return MomentEstimate(mean[n_edges:], mean[:n_edges], len(kept), 'long-run', stderr[n_edges:],
                          stderr[:n_edges], state.copy())


class AgreementModel:
    """
    Agreement model ``log p(s) = sum_{i<j} W_ij [s_i == s_j] - log Z``.

    Attributes
    ----------

    k:
        Node count
    pairs:
        ``(i, j)`` pairs with ``i < j`` in lexicographic order
    weights:
        Coupling per pair; Swendsen-Wang needs them non-negative
    """

    def __init__(self, k, edges):
        _check_type(int, k, 'k')
        if k < 1:
            raise InvalidModel("A model needs at least one node")
        table = {}
        for i, j, w in edges:
            i, j = int(i), int(j)
            if i == j or not (0 <= i < k and 0 <= j < k):
                raise InvalidModel("Invalid edge (%d, %d)" % (i, j))
            key = (min(i, j), max(i, j))
            if key in table:
                raise InvalidModel("Duplicate edge %s" % (key,))
            if not np.isfinite(w):
                raise InvalidModel("Edge weights must be finite")
            table[key] = float(w)
        self.k = k
        self.pairs = tuple(sorted(table))
        self.weights = np.array([table[p] for p in self.pairs], dtype=float)
        self.edge_i = np.array([p[0] for p in self.pairs], dtype=np.intp)
        self.edge_j = np.array([p[1] for p in self.pairs], dtype=np.intp)

    @classmethod
    def from_dense(cls, weights, threshold=0.0):
        """
        Build from a symmetric matrix, keeping entries above ``threshold``.
        """
        weights = np.asarray(weights, dtype=float)
        k = weights.shape[0]
        i, j = np.triu_indices(k, 1)
        keep = weights[i, j] > threshold
        return cls(k, zip(i[keep].tolist(), j[keep].tolist(), weights[i, j][keep].tolist()))

    def log_unnorm(self, states):
        s = np.asarray(states)
        agree = s[..., self.edge_i] == s[..., self.edge_j]
        return agree @ self.weights

    def to_boltzmann(self):
        """
        Equivalent Boltzmann machine and the constant it drops.

        ``W [s_i == s_j] = 2W s_i s_j - W s_i - W s_j + W``, so the edge
        weight doubles, each node's bias loses the sum of its couplings, and
        ``sum W`` is returned as the constant: ``log Z = log Z_bm + constant``.
        """
        biases = np.zeros(self.k)
        np.add.at(biases, self.edge_i, -self.weights)
        np.add.at(biases, self.edge_j, -self.weights)
        edges = [(i, j, 2.0 * w) for (i, j), w in zip(self.pairs, self.weights)]
        return Model(self.k, edges, biases), float(self.weights.sum())

    def __repr__(self):
        return 'AgreementModel(k=%d, n_edges=%d)' % (self.k, len(self.pairs))


def _clamp_mask(k, clamp):
    if clamp is None:
        return np.zeros(k, dtype=bool)
    clamp = np.asarray(clamp)
    if clamp.dtype == bool:
        if clamp.shape != (k,):
            raise InvalidState("Clamp mask must have %d entries" % k)
        return clamp
    mask = np.zeros(k, dtype=bool)
    mask[clamp.astype(np.intp)] = True
    return mask


def swendsen_wang_sweep(model, state, rng, clamp=None):
    """
    One Swendsen-Wang update of an `AgreementModel`.

    Agreeing neighbours are bonded with probability ``1 - exp(-W_ij)``; each
    bond cluster then takes a fresh uniform label. Clusters holding a
    clamped node keep their current label, which gives conditional
    Swendsen-Wang for clamped sampling.

    Parameters
    ----------

    model: AgreementModel
    state: array
        Binary state of length k
    rng: numpy.random.Generator
    clamp: array, optional
        Boolean mask or indices of nodes that must not change
    """
    _check_type(AgreementModel, model, 'model')
    if np.any(model.weights < 0):
        raise NegativeCoupling("Swendsen-Wang needs non-negative couplings")
    state = np.asarray(state)
    if state.shape != (model.k,) or not np.all((state == 0) | (state == 1)):
        raise InvalidState("Expected a binary state of length %d" % model.k)
    frozen = _clamp_mask(model.k, clamp)
    u = rng.random(model.weights.size)
    bonded = (state[model.edge_i] == state[model.edge_j]) & (u < -np.expm1(-model.weights))
    graph = coo_matrix((np.ones(int(bonded.sum())), (model.edge_i[bonded], model.edge_j[bonded])),
                       shape=(model.k, model.k))
    n_clusters, cluster = connected_components(graph, directed=False)
    labels = (rng.random(n_clusters) < 0.5).astype(np.int8)
    labels[cluster[frozen]] = state[frozen]
    return labels[cluster]


def log_ratio_estimate(model_w, model_w_prime, states, weights=None):
    """
    Log of the estimate of ``Z(W) / Z(W')`` from states drawn under ``W'``:
    the mean of ``exp(log_unnorm_W(s) - log_unnorm_W'(s))``.

    With ``weights`` the mean is weighted, so passing all enumerated states
    with their exact probabilities under ``W'`` gives the exact ratio.
    """
    _check_type(Model, model_w, 'model_w')
    _check_type(Model, model_w_prime, 'model_w_prime')
    if model_w.layout != model_w_prime.layout:
        raise LayoutMismatch("Both models must share a layout")
    states = np.asarray(states)
    if states.size == 0:
        raise EmptyInput("The ratio estimate needs at least one state")
    states = _check_states(model_w, np.atleast_2d(states))
    stats = state_statistics(model_w.layout, states)
    delta = np.concatenate([model_w.weights - model_w_prime.weights, model_w.biases - model_w_prime.biases])
    log_terms = stats @ delta
    if weights is None:
        return float(logsumexp(log_terms) - np.log(log_terms.size))
    weights = np.asarray(weights, dtype=float)
    if weights.shape != log_terms.shape or np.any(weights < 0):
        raise ValueError("Expected one non-negative weight per state")
    return float(logsumexp(log_terms, b=weights) - np.log(weights.sum()))


def ratio_estimate(model_w, model_w_prime, states, weights=None):
    return float(np.exp(log_ratio_estimate(model_w, model_w_prime, states, weights)))


def draw_training_states(model, n, rng, cap=None, burn_in=10000, thin=10, progress=False):
    """
    ``n`` states for synthetic training data.

    Exact i.i.d. draws when the model is small enough to enumerate, else a
    single long Gibbs chain after ``burn_in`` sweeps keeping every ``thin``-th
    state. Returns ``(states, note)`` where ``note`` describes the
    substitution, or is None for exact draws.
    """
    from bmposterior.exact import exact_sample, DEFAULT_CAP
    cap = DEFAULT_CAP if cap is None else cap
    if model.k <= cap:
        return exact_sample(model, rng, n, cap), None
    state = np.zeros(model.k, dtype=np.int8)
    for _ in range(burn_in):
        state = gibbs_sweep(model, state, rng)
    kept = []
    for sweep in tqdm(range(n * thin), disable=not progress, desc='training data', leave=False):
        state = gibbs_sweep(model, state, rng)
        if (sweep + 1) % thin == 0:
            kept.append(state)
    note = ('training data drawn by Gibbs sampling (burn-in %d sweeps, thinning %d) because k=%d exceeds '
            'the enumeration cap %d' % (burn_in, thin, model.k, cap))
    _logger.info(note)
    return np.array(kept, dtype=np.int8), note
