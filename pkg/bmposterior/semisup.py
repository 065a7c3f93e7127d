"""
Hidden variables and the two-parameter semi-supervised random field.

With hidden variables the likelihood of a row ``x`` is ``log Z_x - log Z``,
where ``Z_x`` sums over the hidden entries with the observed ones clamped.
The semi-supervised model couples point labels through Gaussian
similarities of their positions,

    log p(s | X, sigma) = sum_{i<j} W_ij(sigma) [s_i == s_j] - log Z(sigma)
    W_ij(sigma) = exp(-((x_i - x_j)^2 / sigma_x^2 + (y_i - y_j)^2 / sigma_y^2) / 2)

and is sampled in ``(log sigma_x, log sigma_y)`` under a flat prior on a box.
"""
import csv
import logging
from abc import abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp
from tqdm import tqdm

from bmposterior._checks import _check_type, _check_positive
from bmposterior.approximators import LogZApproximator, BetheLogZ, ExactLogZ
from bmposterior.exact import DEFAULT_CAP, exact_logZ, enumerate_states, GridAxis, normalize_grid, PosteriorGrid
from bmposterior.exceptions import EnumerationCapExceeded, InvalidState, MalformedData, LayoutMismatch, \
    InvalidConfiguration, NonFiniteValue, EmptyInput
from bmposterior.model import Model, DataSet, HIDDEN
from bmposterior.states import AgreementModel, swendsen_wang_sweep

_logger = logging.getLogger(__name__)

_LABEL_TOKENS = {'0': 0, '1': 1, '?': HIDDEN}


class PointSet:
    """
    Points in the plane with labels 0, 1 or `HIDDEN` (unlabelled).

    Attributes
    ----------

    x, y:
        Coordinates
    labels:
        int8 array of 0, 1 or `HIDDEN`
    """

    def __init__(self, x, y, labels):
        x = np.array(x, dtype=float).reshape(-1)
        y = np.array(y, dtype=float).reshape(-1)
        labels = np.array(labels, dtype=np.int8).reshape(-1)
        if not (x.size == y.size == labels.size) or x.size == 0:
            raise MalformedData("Coordinates and labels must be non-empty and of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise MalformedData("Point coordinates must be finite")
        if not np.all(np.isin(labels, (0, 1, HIDDEN))):
            raise InvalidState("Labels must be 0, 1 or unlabelled")
        for a in (x, y, labels):
            a.setflags(write=False)
        self.x, self.y, self.labels = x, y, labels

    @property
    def n(self):
        return self.x.size

    def labelled(self):
        return self.labels != HIDDEN

    def with_labels(self, labels):
        return PointSet(self.x, self.y, labels)

    def swapped(self):
        """
        The same set with x and y exchanged.
        """
        return PointSet(self.y, self.x, self.labels)

    @classmethod
    def from_csv(cls, path):
        """
        Read a CSV with header ``x,y,label``; labels are ``0``, ``1`` or ``?``.
        """
        xs, ys, labels = [], [], []
        with open(path, newline='') as fo:
            reader = csv.reader(row for row in fo if row.strip() and not row.startswith('#'))
            header = [h.strip() for h in next(reader, [])]
            if header != ['x', 'y', 'label']:
                raise MalformedData("Expected header x,y,label in %s" % path)
            for line, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise MalformedData("Line %d: expected 3 columns, got %d" % (line, len(row)))
                token = row[2].strip()
                if token not in _LABEL_TOKENS:
                    raise MalformedData("Line %d: label must be 0, 1 or ?, got '%s'" % (line, token))
                try:
                    xs.append(float(row[0]))
                    ys.append(float(row[1]))
                except ValueError:
                    raise MalformedData("Line %d: coordinates must be numbers" % line)
                labels.append(_LABEL_TOKENS[token])
        return cls(xs, ys, labels)

    def to_csv(self, path, header_lines=()):
        with open(path, 'w', newline='') as fo:
            for line in header_lines:
                fo.write('# %s\n' % line)
            writer = csv.writer(fo, lineterminator='\n')
            writer.writerow(['x', 'y', 'label'])
            for x, y, label in zip(self.x, self.y, self.labels):
                writer.writerow(['%.10g' % x, '%.10g' % y, '?' if label == HIDDEN else str(int(label))])

    def __repr__(self):
        return 'PointSet(n=%d, labelled=%d)' % (self.n, int(self.labelled().sum()))


def toy_points(n_per_cluster=(30, 25, 25), spread=0.3, seed=0):
    """
    Three clusters: unlabelled around (0, 3), class 1 around (3, 3) sharing
    its y, class 0 around (0, 0) sharing its x. The default gives 80 points.

    A large sigma_x links the unlabelled cluster to class 1; a large sigma_y
    links it to class 0.
    """
    rng = np.random.default_rng(seed)
    centres = ((0.0, 3.0, HIDDEN), (3.0, 3.0, 1), (0.0, 0.0, 0))
    xs, ys, labels = [], [], []
    for count, (cx, cy, label) in zip(n_per_cluster, centres):
        xs.append(cx + spread * rng.standard_normal(count))
        ys.append(cy + spread * rng.standard_normal(count))
        labels.append(np.full(count, label))
    return PointSet(np.concatenate(xs), np.concatenate(ys), np.concatenate(labels))


def small_toy_points(seed=0):
    """
    12-point version of `toy_points` (4 per cluster), small enough to
    enumerate.
    """
    return toy_points((4, 4, 4), seed=seed)


@dataclass(frozen=True)
class SigmaParams:
    log_sigma_x: float
    log_sigma_y: float

    def __post_init__(self):
        if not (np.isfinite(self.log_sigma_x) and np.isfinite(self.log_sigma_y)):
            raise NonFiniteValue("log sigma must be finite")

    @classmethod
    def from_sigma(cls, sigma_x, sigma_y):
        _check_positive(sigma_x, 'sigma_x')
        _check_positive(sigma_y, 'sigma_y')
        return cls(float(np.log(sigma_x)), float(np.log(sigma_y)))

    @property
    def sigma(self):
        return np.exp([self.log_sigma_x, self.log_sigma_y])

    def vector(self):
        return np.array([self.log_sigma_x, self.log_sigma_y])


def _pairs(n):
    return np.triu_indices(n, 1)


def _scaled_sq_distances(points, sigma):
    i, j = _pairs(points.n)
    sx, sy = sigma.sigma
    return (points.x[i] - points.x[j]) ** 2 / sx ** 2, (points.y[i] - points.y[j]) ** 2 / sy ** 2


def build_weights(points, sigma):
    """
    Symmetric (n, n) similarity matrix with zero diagonal.
    """
    _check_type(PointSet, points, 'points')
    _check_type(SigmaParams, sigma, 'sigma')
    dx, dy = _scaled_sq_distances(points, sigma)
    i, j = _pairs(points.n)
    weights = np.zeros((points.n, points.n))
    weights[i, j] = weights[j, i] = np.exp(-0.5 * (dx + dy))
    return weights


def agreement_model(points, sigma):
    """
    `AgreementModel` over every pair of points, in lexicographic pair order.
    """
    weights = build_weights(points, sigma)
    i, j = _pairs(points.n)
    return AgreementModel(points.n, zip(i.tolist(), j.tolist(), weights[i, j].tolist()))


@dataclass(frozen=True)
class ConvertedModel:
    """
    Boltzmann machine form of the semi-supervised model.

    ``log Z_agreement = log Z(model) + constant``; ``observed`` marks the
    labelled points.
    """
    model: Model
    constant: float
    observed: np.ndarray


def semisup_to_bm(points, sigma, labels=None):
    """
    Rewrite the agreement model as a Boltzmann machine: edge weight
    ``2 W_ij``, bias ``-sum_j W_ij`` and the dropped constant ``sum W_ij``.
    """
    if labels is None:
        labels = points.labels
    labels = np.asarray(labels)
    if labels.shape != (points.n,) or not np.all(np.isin(labels, (0, 1, HIDDEN))):
        raise InvalidState("Labels must be 0, 1 or unlabelled, one per point")
    model, constant = agreement_model(points, sigma).to_boltzmann()
    return ConvertedModel(model, constant, labels != HIDDEN)


def reduce_model(model, row):
    """
    Clamp the observed entries of ``row``.

    Returns ``(reduced, constant, hidden)``: the model over the hidden
    entries with observed values folded into its biases, the constant
    ``log_unnorm`` contribution of the observed part, and the hidden node
    indices. ``reduced`` is None when nothing is hidden.
    """
    row = np.asarray(row)
    if row.shape != (model.k,) or not np.all(np.isin(row, (0, 1, HIDDEN))):
        raise InvalidState("Row must have %d entries in 0, 1 or hidden" % model.k)
    hidden = np.flatnonzero(row == HIDDEN)
    observed = row != HIDDEN
    x = np.where(observed, row, 0).astype(float)
    W = model.weight_matrix()
    constant = float(0.5 * x @ W @ x + model.biases @ x)
    if hidden.size == 0:
        return None, constant, hidden
    position = -np.ones(model.k, dtype=np.intp)
    position[hidden] = np.arange(hidden.size)
    edges = [(position[i], position[j], w) for (i, j), w in zip(model.layout.pairs, model.weights)
             if position[i] >= 0 and position[j] >= 0]
    biases = model.biases[hidden] + W[hidden] @ x
    return Model(int(hidden.size), edges, biases), constant, hidden


def clamped_logZx(model, row, cap=DEFAULT_CAP, estimator=None):
    """
    ``log Z_x = log sum_h exp(log_unnorm(x, h))`` over the hidden entries ``h``
    of ``row``.

    Parameters
    ----------

    model: Model
    row: array
        Entries 0, 1 or `HIDDEN`
    cap: int
        Largest hidden count enumerated
    estimator: LogZApproximator, optional
        Used for the reduced model instead of enumeration
    """
    _check_type(Model, model, 'model')
    reduced, constant, hidden = reduce_model(model, row)
    if reduced is None:
        return constant
    if estimator is not None:
        _check_type(LogZApproximator, estimator, 'estimator')
        return estimator.evaluate(reduced).log_z + constant
    if hidden.size > cap:
        raise EnumerationCapExceeded("%d hidden entries exceed the cap of %d and no estimator was given"
                                     % (hidden.size, cap))
    return exact_logZ(reduced, cap) + constant


def hidden_loglik(model, row, cap=DEFAULT_CAP, estimator=None, log_z=None):
    """
    ``log p(x | W) = log Z_x - log Z``; never positive.
    """
    if log_z is None:
        log_z = estimator.evaluate(model).log_z if estimator is not None else exact_logZ(model, cap)
    value = clamped_logZx(model, row, cap, estimator) - log_z
    if value > 0.0:
        _logger.debug('Clipped positive hidden log-likelihood %.3g to 0', value)
        return 0.0
    return value


def hidden_loglik_dataset(model, data, cap=DEFAULT_CAP, estimator=None):
    """
    Count-weighted sum of `hidden_loglik` over a data set, log Z computed once.
    """
    _check_type(DataSet, data, 'data')
    if data.k != model.k:
        raise LayoutMismatch("Data has %d columns but the model has %d nodes" % (data.k, model.k))
    log_z = estimator.evaluate(model).log_z if estimator is not None else exact_logZ(model, cap)
    return float(sum(count * hidden_loglik(model, row, cap, estimator, log_z)
                     for row, count in zip(data.rows, data.counts.tolist())))


def semisup_log_likelihood(points, sigma, cap=DEFAULT_CAP, estimator=None):
    """
    ``log p(labels | X, sigma)`` of the labelled points; the conversion
    constant cancels between ``Z_x`` and ``Z``.
    """
    converted = semisup_to_bm(points, sigma)
    return hidden_loglik(converted.model, points.labels, cap, estimator)


@dataclass(frozen=True)
class AgreementExpectation:
    """
    Estimated ``<[s_i == s_j]>`` per pair and ``<s_i>`` per node.

    ``agreement_samples`` holds the per-sweep values when sampled.
    """
    agreement: np.ndarray
    node_marginals: np.ndarray
    n_samples: int
    agreement_samples: Optional[np.ndarray] = field(default=None, repr=False, compare=False)


class AgreementSource(object):
    """Interface for agreement expectations under the (optionally clamped) semi-supervised model"""

    @abstractmethod
    def expectations(self, model, labels, rng):
        """
        Return an `AgreementExpectation` for ``model``; entries of ``labels``
        other than `HIDDEN` are clamped, ``labels=None`` clamps nothing.
        """
        pass


class SwendsenWangSource(AgreementSource):
    """
    Swendsen-Wang estimates, conditional Swendsen-Wang when clamped.

    With ``persistent`` each call continues from the previous call's final
    state, so one source should serve one chain (clamped or unclamped).
    """

    def __init__(self, n_sweeps=5, persistent=True):
        if n_sweeps < 1:
            raise InvalidConfiguration("n_sweeps must be at least 1")
        self.n_sweeps = n_sweeps
        self.persistent = persistent
        self._state = None

    def expectations(self, model, labels, rng):
        _check_type(AgreementModel, model, 'model')
        if labels is None:
            clamp = np.zeros(model.k, dtype=bool)
            start = np.zeros(model.k, dtype=np.int8)
        else:
            labels = np.asarray(labels)
            clamp = labels != HIDDEN
            start = np.where(clamp, labels, 0).astype(np.int8)
        state = self._state if self.persistent and self._state is not None else start
        state = np.where(clamp, start, state).astype(np.int8)
        agreement = np.empty((self.n_sweeps, model.weights.size))
        nodes = np.empty((self.n_sweeps, model.k))
        for t in range(self.n_sweeps):
            state = swendsen_wang_sweep(model, state, rng, clamp)
            agreement[t] = state[model.edge_i] == state[model.edge_j]
            nodes[t] = state
        self._state = state
        return AgreementExpectation(agreement.mean(axis=0), nodes.mean(axis=0), self.n_sweeps, agreement)


class ExactAgreementSource(AgreementSource):
    """Enumeration over all label states consistent with the clamp"""

    def __init__(self, cap=DEFAULT_CAP):
        self.cap = cap

    def expectations(self, model, labels, rng=None):
        _check_type(AgreementModel, model, 'model')
        if model.k > self.cap:
            raise EnumerationCapExceeded("Enumerating %d nodes exceeds the cap of %d" % (model.k, self.cap))
        states = enumerate_states(model.k)
        log_w = model.log_unnorm(states)
        if labels is not None:
            labels = np.asarray(labels)
            clamp = labels != HIDDEN
            consistent = np.all(states[:, clamp] == labels[clamp], axis=1)
            log_w = np.where(consistent, log_w, -np.inf)
        p = np.exp(log_w - logsumexp(log_w))
        agreement = p @ (states[:, model.edge_i] == states[:, model.edge_j])
        return AgreementExpectation(agreement, p @ states, 0)


@dataclass(frozen=True)
class SigmaGradient:
    gradient: np.ndarray
    stderr: Optional[np.ndarray] = None


def semisup_grad_logsigma(points, sigma, clamped_source, unclamped_source, rng):
    """
    Gradient of ``log p(labels | X, sigma)`` with respect to
    ``(log sigma_x, log sigma_y)``:

        sum_{i<j} (<d_ij>_clamped - <d_ij>_free) W_ij (a_i - a_j)^2 / sigma_a^2

    with ``d_ij = [s_i == s_j]``.
    """
    _check_type(PointSet, points, 'points')
    _check_type(AgreementSource, clamped_source, 'clamped_source')
    _check_type(AgreementSource, unclamped_source, 'unclamped_source')
    model = agreement_model(points, sigma)
    clamped = clamped_source.expectations(model, points.labels, rng)
    free = unclamped_source.expectations(model, None, rng)
    dx, dy = _scaled_sq_distances(points, sigma)
    factors = np.stack([model.weights * dx, model.weights * dy], axis=1)
    gradient = (clamped.agreement - free.agreement) @ factors
    if not np.all(np.isfinite(gradient)):
        raise NonFiniteValue("Semi-supervised gradient is not finite")
    stderr = None
    if clamped.agreement_samples is not None or free.agreement_samples is not None:
        variance = np.zeros(2)
        for part in (clamped, free):
            if part.agreement_samples is not None and part.n_samples > 1:
                projected = part.agreement_samples @ factors
                variance += projected.var(axis=0, ddof=1) / part.n_samples
        stderr = np.sqrt(variance)
    return SigmaGradient(gradient, stderr)


def predict_labels(points, sigma_samples, source, rng=None):
    """
    Class-1 probability of every point, averaged over sigma samples.

    Parameters
    ----------

    points: PointSet
    sigma_samples: sequence of SigmaParams
    source: AgreementSource
        Clamped estimator, e.g. ``SwendsenWangSource(n_sweeps)`` or
        `ExactAgreementSource`
    rng: numpy.random.Generator, optional
    """
    sigma_samples = list(sigma_samples)
    if not sigma_samples:
        raise EmptyInput("Need at least one sigma sample")
    rng = np.random.default_rng() if rng is None else rng
    total = np.zeros(points.n)
    for sigma in sigma_samples:
        total += source.expectations(agreement_model(points, sigma), points.labels, rng).node_marginals
    marginals = total / len(sigma_samples)
    labelled = points.labelled()
    marginals[labelled] = points.labels[labelled]
    return marginals


def _reflect(values, lower, upper):
    period = 2.0 * (upper - lower)
    shifted = np.mod(values - lower, period)
    return lower + np.where(shifted > upper - lower, period - shifted, shifted)


@dataclass(frozen=True)
class SigmaChainConfig:
    """
    Settings of a chain over ``(log sigma_x, log sigma_y)``.

    Attributes
    ----------

    method:
        ``langevin`` or ``metropolis``
    approximator:
        ``sw`` or ``exact`` expectations for Langevin; ``bethe`` or ``exact``
        log-likelihood for Metropolis
    n_iterations:
        Number of steps
    epsilon:
        Langevin step size
    proposal_std:
        Metropolis random-walk std per coordinate
    box:
        Flat prior support ``[lower, upper]`` for both coordinates
    init:
        Starting ``(log sigma_x, log sigma_y)``
    n_sweeps:
        Swendsen-Wang sweeps per gradient
    persistent:
        Continue Swendsen-Wang chains across steps
    seed:
        Seed or ``SeedSequence`` of the chain
    """
    method: str = 'langevin'
    approximator: str = 'sw'
    n_iterations: int = 10000
    epsilon: float = 0.3
    proposal_std: float = 0.3
    box: Tuple[float, float] = (-4.0, 4.0)
    init: Tuple[float, float] = (0.0, 0.0)
    n_sweeps: int = 5
    persistent: bool = True
    seed: object = 0
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        valid = {'langevin': ('sw', 'exact'), 'metropolis': ('bethe', 'exact')}
        if self.method not in valid:
            raise InvalidConfiguration("Unknown sigma chain method '%s'" % self.method)
        if self.approximator not in valid[self.method]:
            raise InvalidConfiguration("Approximator '%s' does not fit method '%s'" % (self.approximator, self.method))
        if self.n_iterations < 1:
            raise InvalidConfiguration("A chain needs at least one iteration")
        if not self.box[0] < self.box[1]:
            raise InvalidConfiguration("Prior box needs lower < upper")
        if not all(self.box[0] <= v <= self.box[1] for v in self.init):
            raise InvalidConfiguration("Initial log sigma lies outside the prior box")
        _check_positive(self.epsilon, 'epsilon')
        _check_positive(self.proposal_std, 'proposal_std')


@dataclass(frozen=True)
class SigmaChain:
    """
    Samples of ``(log sigma_x, log sigma_y)``, one row per step.
    """
    log_sigma: np.ndarray
    accept_count: int
    propose_count: int
    nonconverged_count: int
    method: str
    approximator: str

    @property
    def sigma(self):
        return np.exp(self.log_sigma)

    @property
    def acceptance_rate(self):
        return self.accept_count / self.propose_count

    def params(self):
        return [SigmaParams(float(a), float(b)) for a, b in self.log_sigma]


def run_sigma_chain(points, config, rng=None, progress=False):
    """
    Sample the sigma posterior under the flat box prior.

    Langevin moves reflect off the box walls; Metropolis rejects proposals
    outside the box.
    """
    _check_type(PointSet, points, 'points')
    _check_type(SigmaChainConfig, config, 'config')
    if not np.any(points.labelled()):
        raise InvalidConfiguration("The point set has no labelled points")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    lower, upper = config.box
    theta = np.array(config.init, dtype=float)
    samples = np.empty((config.n_iterations, 2))
    accepted = nonconverged = 0
    _logger.info('Starting sigma %s chain (%s) for %d iterations', config.method, config.approximator,
                 config.n_iterations)
    if config.method == 'langevin':
        if config.approximator == 'sw':
            clamped, free = SwendsenWangSource(config.n_sweeps, config.persistent), \
                SwendsenWangSource(config.n_sweeps, config.persistent)
        else:
            clamped = free = ExactAgreementSource(config.cap)
        for step in tqdm(range(config.n_iterations), disable=not progress, desc='sigma langevin', leave=False):
            gradient = semisup_grad_logsigma(points, SigmaParams(*theta), clamped, free, rng).gradient
            theta = _reflect(theta + 0.5 * config.epsilon ** 2 * gradient + config.epsilon * rng.standard_normal(2),
                             lower, upper)
            samples[step] = theta
        accepted = config.n_iterations
    else:
        estimator = BetheLogZ() if config.approximator == 'bethe' else ExactLogZ(config.cap)

        def loglik(values):
            converted = semisup_to_bm(points, SigmaParams(*values))
            evaluation = estimator.evaluate(converted.model)
            reduced, constant, _ = reduce_model(converted.model, points.labels)
            if reduced is None:
                inner = None
                log_zx = constant
            else:
                inner = estimator.evaluate(reduced)
                log_zx = inner.log_z + constant
            converged = evaluation.converged and (inner is None or inner.converged)
            return log_zx - evaluation.log_z, converged

        current, _ = loglik(theta)
        for step in tqdm(range(config.n_iterations), disable=not progress, desc='sigma metropolis', leave=False):
            proposed = theta + config.proposal_std * rng.standard_normal(2)
            u = rng.random()
            if np.all((proposed >= lower) & (proposed <= upper)):
                value, converged = loglik(proposed)
                nonconverged += not converged
                if u < np.exp(min(0.0, value - current)):
                    theta, current = proposed, value
                    accepted += 1
            samples[step] = theta
    _logger.info('Finished sigma %s chain: acceptance %.3f', config.method, accepted / config.n_iterations)
    return SigmaChain(samples, accepted, config.n_iterations, nonconverged, config.method, config.approximator)


def sigma_posterior_grid(points, axis=GridAxis(-4.0, 4.0, 32), cap=DEFAULT_CAP):
    """
    Exact posterior of ``(log sigma_x, log sigma_y)`` on a square grid under
    the flat prior, by enumeration at every grid point.
    """
    values = axis.points()
    log_post = np.empty((values.size, values.size))
    for a, lx in enumerate(values):
        for b, ly in enumerate(values):
            log_post[a, b] = semisup_log_likelihood(points, SigmaParams(float(lx), float(ly)), cap)
    density, mass = normalize_grid(log_post, (axis, axis))
    return PosteriorGrid((0, 1), (values, values), log_post, density, mass)


def grid_cell_edges(axis):
    """
    Cell boundaries centred on the grid points, clipped to the axis range.
    """
    points = axis.points()
    mid = 0.5 * (points[1:] + points[:-1])
    return np.concatenate([[axis.lower], mid, [axis.upper]])


def sigma_total_variation(chain, grid, axis):
    """
    Total variation between the chain's histogram over the grid cells and
    the grid posterior's cell masses.
    """
    edges = grid_cell_edges(axis)
    hist, _, _ = np.histogram2d(chain.log_sigma[:, 0], chain.log_sigma[:, 1], bins=[edges, edges])
    hist /= max(hist.sum(), 1)
    return 0.5 * float(np.abs(hist - grid.mass).sum())


def region_masses(log_sigma, weights=None, threshold=2.0):
    """
    Mass where both sigmas exceed ``exp(threshold)`` (the corner) and where
    exactly one does (the x and y arms).
    """
    log_sigma = np.asarray(log_sigma, dtype=float).reshape(-1, 2)
    weights = np.full(log_sigma.shape[0], 1.0 / log_sigma.shape[0]) if weights is None else \
        np.asarray(weights, dtype=float).reshape(-1) / np.sum(weights)
    large_x = log_sigma[:, 0] > threshold
    large_y = log_sigma[:, 1] > threshold
    return {
        'corner': float(weights[large_x & large_y].sum()),
        'arm_x': float(weights[large_x & ~large_y].sum()),
        'arm_y': float(weights[large_y & ~large_x].sum()),
    }


def grid_region_masses(grid, threshold=2.0):
    gx, gy = np.meshgrid(grid.axes[0], grid.axes[1], indexing='ij')
    return region_masses(np.column_stack([gx.ravel(), gy.ravel()]), grid.mass.ravel(), threshold)
