"""
MCMC over Boltzmann machine parameters.

Steppers
--------

* `metropolis_step`: Metropolis with a plug-in log Z (exact, mean-field,
  tree or Bethe). With the exact approximator this is exact Metropolis.
* `ratio_metropolis_step`: Metropolis with the partition ratio estimated
  from states drawn at the proposed parameters.
* `langevin_step`: uncorrected Langevin driven by a moment estimator.
* `pseudo_metropolis_step`: Metropolis on the pseudo-likelihood.

`run_chain` strings steps together into a `Chain`.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from tqdm import tqdm

from bmposterior._checks import _check_type, _check_positive
from bmposterior.approximators import LogZApproximator, MomentEstimator, RatioStateSource, logz_approximator, \
    moment_estimator, ratio_source
from bmposterior.chain import Chain
from bmposterior.exceptions import InvalidConfiguration, NonFiniteValue, BMPosteriorException, LayoutMismatch, \
    EmptyInput
from bmposterior.inference import pseudo_log_likelihood
from bmposterior.model import ParamVector, SuffStats, GaussianPrior, DataSet, Model, devectorize, log_prior, \
    suff_stats, grad_log_joint, fully_connected_layout, vectorize
from bmposterior.states import log_ratio_estimate

_logger = logging.getLogger(__name__)

METHODS = ('metropolis', 'ratio-metropolis', 'langevin', 'pseudo-metropolis')
POLICIES = ('use', 'reject')


@dataclass(frozen=True)
class ProposalConfig:
    """
    Symmetric Gaussian random-walk proposal.

    Attributes
    ----------

    kind:
        ``single`` moves one coordinate per step, ``full`` moves all free
        coordinates
    std:
        Standard deviation of each move (0.1, i.e. variance 0.01, by default)
    schedule:
        Coordinate choice for ``single``: ``cyclic`` or ``random``
    free:
        Coordinates that may move; all when None
    """
    kind: str = 'single'
    std: float = 0.1
    schedule: str = 'cyclic'
    free: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.kind not in ('single', 'full'):
            raise InvalidConfiguration("Unknown proposal kind '%s'" % self.kind)
        if self.schedule not in ('cyclic', 'random'):
            raise InvalidConfiguration("Unknown coordinate schedule '%s'" % self.schedule)
        if not (np.isfinite(self.std) and self.std > 0):
            raise InvalidConfiguration("Proposal std must be positive")
        if self.free is not None and len(self.free) == 0:
            raise InvalidConfiguration("At least one coordinate must be free")

    def coordinates(self, layout):
        if self.free is None:
            return np.arange(layout.size)
        free = np.asarray(self.free, dtype=np.intp)
        if np.any(free < 0) or np.any(free >= layout.size):
            raise LayoutMismatch("Free coordinates fall outside the layout")
        return free


def propose(params, proposal, step, rng):
    """
    Draw ``W' ~ t(W' | W)``. Returns the proposed `ParamVector`.
    """
    values = params.values.copy()
    free = proposal.coordinates(params.layout)
    if proposal.kind == 'full':
        values[free] += proposal.std * rng.standard_normal(free.size)
    else:
        if proposal.schedule == 'cyclic':
            c = free[step % free.size]
        else:
            c = free[rng.integers(free.size)]
        values[c] += proposal.std * rng.standard_normal()
    return params.replace(values)


@dataclass(frozen=True)
class StepResult:
    """
    Outcome of one sampler step.

    ``carry`` is what the next step of the same chain needs: the cached
    `LogZEvaluation` of the current point for Metropolis, the moment
    estimator's warm start for Langevin.
    """
    params: ParamVector
    accepted: bool
    log_accept: float = 0.0
    log_z: Optional[float] = None
    converged: Optional[bool] = None
    carry: object = field(default=None, repr=False, compare=False)
    note: Optional[str] = None


def log_acceptance(suff, prior, params, proposed, log_z, log_z_proposed):
    """
    Plug-in log acceptance ratio of moving from ``params`` to ``proposed``:
    prior change plus data term change minus ``N`` times the log Z change.
    """
    delta = proposed.values - params.values
    return float(log_prior(prior, proposed) - log_prior(prior, params) + delta @ suff.vector()
                 - suff.n_rows * (log_z_proposed - log_z))


def _accept(log_a, u):
    return bool(u < np.exp(min(0.0, log_a)))


def metropolis_step(params, suff, prior, proposal, logz, rng, step=0, current=None, policy='use',
                    warm_start=True):
    """
    One plug-in Metropolis step.

    Parameters
    ----------

    params: ParamVector
        Current point
    suff: SuffStats
    prior: GaussianPrior
    proposal: ProposalConfig
    logz: LogZApproximator
    rng: numpy.random.Generator
    step: int, default=0
        Step index, picks the coordinate for cyclic proposals
    current: LogZEvaluation, optional
        Cached evaluation at ``params``; computed when omitted
    policy: str, default='use'
        What to do when the approximator did not converge at the proposal:
        ``use`` its final value, or ``reject`` the move
    warm_start: bool, default=True
        Start the approximator at the proposal from the current solution
    """
    _check_type(ParamVector, params, 'params')
    _check_type(LogZApproximator, logz, 'logz')
    if policy not in POLICIES:
        raise InvalidConfiguration("Unknown non-convergence policy '%s'" % policy)
    layout = params.layout
    if current is None:
        current = logz.evaluate(devectorize(layout, params))
    proposed = propose(params, proposal, step, rng)
    u = rng.random()
    try:
        evaluation = logz.evaluate(devectorize(layout, proposed), current.warm_start if warm_start else None)
    except NonFiniteValue as e:
        _logger.debug('Approximator failed at step %d: %s', step, e)
        return StepResult(params, False, -np.inf, current.log_z, False, current, str(e))
    if not evaluation.converged and policy == 'reject':
        return StepResult(params, False, -np.inf, current.log_z, False, current, 'not converged')
    log_a = log_acceptance(suff, prior, params, proposed, current.log_z, evaluation.log_z)
    if _accept(log_a, u):
        return StepResult(proposed, True, log_a, evaluation.log_z, evaluation.converged, evaluation)
    return StepResult(params, False, log_a, current.log_z, evaluation.converged, current)


def ratio_metropolis_step(params, suff, prior, proposal, source, rng, step=0):
    """
    Metropolis with ``(Z(W) / Z(W'))^N`` estimated from states drawn under
    the proposal by ``source``.

    An inner-sampler failure rejects the move and is reported in ``note``.
    """
    _check_type(ParamVector, params, 'params')
    _check_type(RatioStateSource, source, 'source')
    layout = params.layout
    proposed = propose(params, proposal, step, rng)
    model = devectorize(layout, params)
    model_proposed = devectorize(layout, proposed)
    try:
        states, weights = source.states(model_proposed, rng)
        log_ratio = log_ratio_estimate(model, model_proposed, states, weights)
    except BMPosteriorException as e:
        _logger.debug('Inner sampler failed at step %d: %s', step, e)
        rng.random()
        return StepResult(params, False, -np.inf, note=str(e))
    u = rng.random()
    delta = proposed.values - params.values
    log_a = float(log_prior(prior, proposed) - log_prior(prior, params) + delta @ suff.vector()
                  + suff.n_rows * log_ratio)
    if _accept(log_a, u):
        return StepResult(proposed, True, log_a)
    return StepResult(params, False, log_a)


def langevin_step(params, suff, prior, estimator, epsilon, rng, warm_start=None, free=None):
    """
    Uncorrected Langevin update
    ``theta' = theta + (epsilon^2 / 2) grad log p(S, theta) + epsilon n``
    with ``n`` standard normal, on the free coordinates; never rejects.

    Parameters
    ----------

    params: ParamVector
    suff: SuffStats
    prior: GaussianPrior
    estimator: MomentEstimator
        Supplies the unclamped moments in the gradient
    epsilon: float
        Step size
    rng: numpy.random.Generator
    warm_start: optional
        The previous step's ``carry``
    free: sequence of int, optional
        Coordinates to move; all when None
    """
    _check_type(ParamVector, params, 'params')
    _check_type(MomentEstimator, estimator, 'estimator')
    _check_positive(epsilon, 'epsilon')
    layout = params.layout
    estimate = estimator.estimate(devectorize(layout, params), rng, warm_start)
    gradient = grad_log_joint(suff, prior, params, estimate)
    if not np.all(np.isfinite(gradient)):
        raise NonFiniteValue("Langevin gradient is not finite")
    noise = rng.standard_normal(layout.size)
    values = params.values.copy()
    moved = slice(None) if free is None else np.asarray(free, dtype=np.intp)
    values[moved] += 0.5 * epsilon ** 2 * gradient[moved] + epsilon * noise[moved]
    return StepResult(params.replace(values), True, carry=estimate.warm_start)


def pseudo_metropolis_step(params, data, prior, proposal, rng, step=0, current=None):
    """
    Metropolis with the likelihood replaced by the pseudo-likelihood.

    ``current`` caches the pseudo-log-likelihood at ``params``.
    """
    layout = params.layout
    if current is None:
        current = pseudo_log_likelihood(devectorize(layout, params), data)
    proposed = propose(params, proposal, step, rng)
    u = rng.random()
    value = pseudo_log_likelihood(devectorize(layout, proposed), data)
    log_a = float(log_prior(prior, proposed) - log_prior(prior, params) + value - current)
    if _accept(log_a, u):
        return StepResult(proposed, True, log_a, carry=value)
    return StepResult(params, False, log_a, carry=current)


@dataclass(frozen=True)
class ChainConfig:
    """
    Everything `run_chain` needs besides the data.

    Attributes
    ----------

    method:
        ``metropolis``, ``ratio-metropolis``, ``langevin`` or
        ``pseudo-metropolis``
    approximator:
        Log Z approximator tag for ``metropolis`` (``exact``, ``mean-field``,
        ``tree``, ``bethe``), moment estimator tag for ``langevin`` (``exact``,
        ``brief``, ``long-run``, ``mean-field``, ``tree``, ``bethe``), state
        source tag for ``ratio-metropolis`` (``exhaustive``, ``gibbs``)
    n_iterations:
        Number of steps
    thin:
        Store every ``thin``-th state
    seed:
        Seed of the chain's generator, or a ``numpy.random.SeedSequence``
    proposal:
        Metropolis proposal
    epsilon:
        Langevin step size
    init:
        Starting values; zeros when None
    policy:
        Non-convergence policy for ``bethe`` plug-in Metropolis
    warm_start:
        Warm-start deterministic approximators between proposals
    options:
        Keyword options for the approximator
    """
    method: str = 'metropolis'
    approximator: str = 'exact'
    n_iterations: int = 100000
    thin: int = 1
    seed: object = 0
    proposal: ProposalConfig = ProposalConfig()
    epsilon: float = 0.01
    init: Optional[Tuple[float, ...]] = None
    policy: str = 'use'
    warm_start: bool = True
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidConfiguration("Unknown method '%s'. Expected one of: %s" % (self.method, ', '.join(METHODS)))
        if self.n_iterations < 1:
            raise InvalidConfiguration("A chain needs at least one iteration")
        if self.thin < 1:
            raise InvalidConfiguration("thin must be at least 1")
        if self.policy not in POLICIES:
            raise InvalidConfiguration("Unknown non-convergence policy '%s'" % self.policy)
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise InvalidConfiguration("epsilon must be positive")


def _seed_value(seed):
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.entropy) if not seed.spawn_key else None
    return seed


def run_chain(config, data, layout=None, prior=None, rng=None, progress=False, config_hash=None):
    """
    Run one parameter chain.

    Parameters
    ----------

    config: ChainConfig
    data: DataSet or SuffStats
        Fully observed training data; brief Langevin and pseudo-likelihood
        need the `DataSet`
    layout: Layout, optional
        Model structure; fully connected over the data columns by default
    prior: GaussianPrior, optional
        Unit variances by default
    rng: numpy.random.Generator, optional
        Defaults to ``default_rng(config.seed)``
    progress: bool, default=False
        Show a progress bar
    config_hash: str, optional
        Recorded in the chain
    """
    _check_type(ChainConfig, config, 'config')
    prior = GaussianPrior() if prior is None else prior
    if isinstance(data, DataSet):
        layout = fully_connected_layout(data.k) if layout is None else layout
        suff = suff_stats(data, layout)
    else:
        _check_type(SuffStats, data, 'data')
        if layout is None:
            raise InvalidConfiguration("A layout is needed when only sufficient statistics are given")
        suff = data
        if config.method == 'pseudo-metropolis' or (config.method == 'langevin' and config.approximator == 'brief'):
            raise InvalidConfiguration("Method %s needs the data set itself" % config.method)
    rng = np.random.default_rng(config.seed) if rng is None else rng
    init = np.zeros(layout.size) if config.init is None else np.asarray(config.init, dtype=float)
    if init.shape != (layout.size,):
        raise LayoutMismatch("Initial values must have %d entries" % layout.size)
    params = ParamVector(layout, init)

    if config.method == 'metropolis':
        approximator = logz_approximator(config.approximator, **config.options)
    elif config.method == 'ratio-metropolis':
        approximator = ratio_source(config.approximator, **config.options)
    elif config.method == 'langevin':
        approximator = moment_estimator(config.approximator, data if isinstance(data, DataSet) else None,
                                        **config.options)
    else:
        approximator = None

    _logger.info('Starting %s chain (%s) for %d iterations', config.method, config.approximator, config.n_iterations)
    samples, steps, diagnostics = [], [], []
    accepted_total = nonconverged = 0
    carry = None
    for step in tqdm(range(config.n_iterations), disable=not progress, desc=config.method, leave=False):
        if config.method == 'metropolis':
            result = metropolis_step(params, suff, prior, config.proposal, approximator, rng, step, carry,
                                     config.policy, config.warm_start)
        elif config.method == 'ratio-metropolis':
            result = ratio_metropolis_step(params, suff, prior, config.proposal, approximator, rng, step)
        elif config.method == 'langevin':
            result = langevin_step(params, suff, prior, approximator, config.epsilon, rng,
                                   carry if config.warm_start else None, config.proposal.free)
        else:
            result = pseudo_metropolis_step(params, data, prior, config.proposal, rng, step, carry)
        params = result.params
        carry = result.carry
        accepted_total += result.accepted
        if result.converged is False:
            nonconverged += 1
        if (step + 1) % config.thin == 0:
            samples.append(params.values)
            steps.append(step + 1)
            diagnostics.append({
                'accepted': bool(result.accepted),
                'log_z': None if result.log_z is None else float(result.log_z),
                'converged': None if result.converged is None else bool(result.converged),
            })
    chain = Chain(layout, np.array(samples).reshape(len(samples), layout.size), steps, diagnostics,
                  accepted_total, config.n_iterations, nonconverged, config.method,
                  None if config.method == 'pseudo-metropolis' else config.approximator,
                  _seed_value(config.seed), float(config.epsilon if config.method == 'langevin'
                                                  else config.proposal.std), config_hash)
    _logger.info('Finished %s chain (%s): acceptance %.3f, non-converged fraction %.3f', config.method,
                 config.approximator, chain.acceptance_rate, chain.nonconverged_fraction)
    return chain


def sample_prior(prior, layout, n, rng):
    """
    ``n`` independent draws from the Gaussian prior, as a chain.
    """
    if n < 1:
        raise EmptyInput("Need at least one prior sample")
    samples = rng.standard_normal((n, layout.size)) * np.sqrt(prior.variances(layout))
    return Chain(layout, samples, method='prior')


@dataclass(frozen=True)
class HistogramTable:
    """
    Per-coordinate histograms: ``counts[c]`` over bins ``edges[c]``.
    """
    names: Tuple[str, ...]
    edges: np.ndarray
    counts: np.ndarray

    def normalized(self):
        totals = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.where(totals > 0, totals, 1)


def shared_edges(chains, bins=50):
    """
    Bin edges per coordinate spanning every chain's range.
    """
    if bins < 2:
        raise InvalidConfiguration("Histograms need at least two bins")
    lower = np.min([c.samples.min(axis=0) for c in chains], axis=0)
    upper = np.max([c.samples.max(axis=0) for c in chains], axis=0)
    flat = upper <= lower
    lower = np.where(flat, lower - 0.5, lower)
    upper = np.where(flat, upper + 0.5, upper)
    return np.linspace(lower, upper, bins + 1, axis=1)


def chain_histograms(chain, bins=50, edges=None):
    """
    Histogram of every coordinate of ``chain``.

    Parameters
    ----------

    chain: Chain
    bins: int, default=50
        Bins per coordinate, at least 2
    edges: array, optional
        (n_params, bins + 1) edges, e.g. from `shared_edges`
    """
    if bins < 2:
        raise InvalidConfiguration("Histograms need at least two bins")
    if not len(chain):
        raise EmptyInput("Chain has no samples")
    edges = shared_edges([chain], bins) if edges is None else np.asarray(edges, dtype=float)
    counts = np.empty((edges.shape[0], edges.shape[1] - 1), dtype=np.int64)
    for c in range(edges.shape[0]):
        counts[c] = np.histogram(chain.samples[:, c], bins=edges[c])[0]
    return HistogramTable(tuple(chain.names), edges, counts)


def overlap_coefficients(chain_a, chain_b, bins=50):
    """
    Per-coordinate overlap ``sum_bins min(p_a, p_b)`` of normalised
    histograms over shared bins; 1 for identical histograms.
    """
    if chain_a.layout != chain_b.layout:
        raise LayoutMismatch("Chains have different layouts")
    edges = shared_edges([chain_a, chain_b], bins)
    a = chain_histograms(chain_a, bins, edges).normalized()
    b = chain_histograms(chain_b, bins, edges).normalized()
    return np.minimum(a, b).sum(axis=1)


@dataclass(frozen=True)
class FCurve:
    """
    Fractions of samples within ``tol`` of the truth, ascending, with the
    coordinate each fraction belongs to.
    """
    fractions: np.ndarray
    coordinates: np.ndarray
    names: Tuple[str, ...]
    tol: float


def f_curve(chain, true_params, tol=0.1):
    """
    Per-coordinate fraction of samples within ``+-tol`` of ``true_params``,
    sorted ascending.
    """
    if isinstance(true_params, Model):
        true_params = vectorize(true_params)
    _check_type(ParamVector, true_params, 'true_params')
    _check_positive(tol, 'tol')
    if true_params.layout != chain.layout:
        raise LayoutMismatch("True parameters and chain have different layouts")
    if not len(chain):
        raise EmptyInput("Chain has no samples")
    within = np.abs(chain.samples - true_params.values) <= tol
    fractions = within.mean(axis=0)
    order = np.argsort(fractions, kind='stable')
    return FCurve(fractions[order], order, tuple(chain.names[c] for c in order), float(tol))
