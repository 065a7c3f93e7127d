"""
Pluggable approximations used inside the parameter samplers.

Three things can be approximated when sampling parameters: log Z itself
(plug-in Metropolis), the ratio Z(W)/Z(W') (ratio Metropolis) and the
unclamped moments (Langevin). Each has an interface class here with one
implementation per method tag; `logz_approximator`, `moment_estimator`
and `ratio_source` build them from tags.
"""
from abc import abstractmethod
from dataclasses import dataclass, field

import numpy as np

from bmposterior.exact import DEFAULT_CAP, exact_logZ, exact_moments, exact_distribution, enumerate_states
from bmposterior.exceptions import InvalidConfiguration
from bmposterior.inference import mean_field, tree_bound, loopy_bp
from bmposterior.states import MomentEstimate, StateChainConfig, brief_moments, long_run_moments, gibbs_sweep


@dataclass(frozen=True)
class LogZEvaluation:
    """
    A log Z value with the approximator's bookkeeping.

    ``warm_start`` is passed back to the approximator for the next nearby
    model when warm starting is on.
    """
    log_z: float
    converged: bool = True
    iterations: int = 0
    warm_start: object = field(default=None, repr=False, compare=False)


class LogZApproximator(object):
    """Interface for log partition function approximations"""

    tag = None

    @abstractmethod
    def evaluate(self, model, warm_start=None):
        """Return a `LogZEvaluation` for ``model``"""
        pass


class ExactLogZ(LogZApproximator):
    """Enumeration; exact Metropolis"""

    tag = 'exact'

    def __init__(self, cap=DEFAULT_CAP):
        self.cap = cap

    def evaluate(self, model, warm_start=None):
        return LogZEvaluation(exact_logZ(model, self.cap))


class MeanFieldLogZ(LogZApproximator):
    tag = 'mean-field'

    def __init__(self, damping=0.0, tol=1e-8, max_iter=1000):
        self.damping = damping
        self.tol = tol
        self.max_iter = max_iter

    def evaluate(self, model, warm_start=None):
        result = mean_field(model, warm_start, self.damping, self.tol, self.max_iter)
        return LogZEvaluation(result.log_z_estimate, result.converged, result.iterations, result.warm_start)


class TreeLogZ(LogZApproximator):
    """
    Tree bound with the spanning tree reselected for every model, since the
    largest-|w| tree moves with the weights.
    """

    tag = 'tree'

    def __init__(self, tol=1e-8, max_iter=100):
        self.tol = tol
        self.max_iter = max_iter

    def evaluate(self, model, warm_start=None):
        result = tree_bound(model, None, warm_start, self.tol, self.max_iter)
        return LogZEvaluation(result.log_z_estimate, result.converged, result.iterations, result.warm_start)


class BetheLogZ(LogZApproximator):
    """Loopy BP scored by the Bethe free energy; loopy Metropolis"""

    tag = 'bethe'

    def __init__(self, schedule='parallel', damping=0.5, tol=1e-8, max_iter=500):
        self.schedule = schedule
        self.damping = damping
        self.tol = tol
        self.max_iter = max_iter

    def evaluate(self, model, warm_start=None):
        result = loopy_bp(model, self.schedule, self.damping, self.tol, self.max_iter, warm_start)
        return LogZEvaluation(result.log_z_estimate, result.converged, result.iterations, result.warm_start)


_LOGZ = {cls.tag: cls for cls in (ExactLogZ, MeanFieldLogZ, TreeLogZ, BetheLogZ)}


def logz_approximator(tag, **options):
    """
    Build a `LogZApproximator` from its tag: ``exact``, ``mean-field``,
    ``tree`` or ``bethe``.
    """
    if tag not in _LOGZ:
        raise InvalidConfiguration("Unknown log Z approximator '%s'. Expected one of: %s"
                                   % (tag, ', '.join(sorted(_LOGZ))))
    return _LOGZ[tag](**options)


class MomentEstimator(object):
    """Interface for estimates of the unclamped moments <s_i> and <s_i s_j>"""

    tag = None

    @abstractmethod
    def estimate(self, model, rng, warm_start=None):
        """Return a `MomentEstimate` under ``p(s | model)``"""
        pass


class ExactMomentEstimator(MomentEstimator):
    tag = 'exact'

    def __init__(self, cap=DEFAULT_CAP):
        self.cap = cap

    def estimate(self, model, rng, warm_start=None):
        moments = exact_moments(model, self.cap)
        return MomentEstimate(moments.node_marginals, moments.edge_moments, 0, 'exact')


class BriefMomentEstimator(MomentEstimator):
    """Brief sampling from the data cases; brief Langevin"""

    tag = 'brief'

    def __init__(self, data, n_sweeps=1, order='systematic'):
        self.data = data
        self.n_sweeps = n_sweeps
        self.order = order

    def estimate(self, model, rng, warm_start=None):
        return brief_moments(model, self.data, self.n_sweeps, rng, self.order)


class LongRunMomentEstimator(MomentEstimator):
    """
    One long Gibbs chain per call. With ``persistent`` the chain restarts
    from the previous call's final state.
    """

    tag = 'long-run'

    def __init__(self, n_sweeps=1000, burn_in=100, thin=1, order='systematic', persistent=True):
        self.config = StateChainConfig(n_sweeps=n_sweeps, burn_in=burn_in, thin=thin, order=order)
        self.persistent = persistent

    def estimate(self, model, rng, warm_start=None):
        init = warm_start if self.persistent else None
        return long_run_moments(model, self.config, rng, init)


class InferenceMomentEstimator(MomentEstimator):
    """Moments read off a deterministic approximation"""

    _SOURCES = {'mean-field': 'mean-field', 'tree': 'tree', 'bethe': 'bp'}

    def __init__(self, method, **options):
        if method not in self._SOURCES:
            raise InvalidConfiguration("Unknown inference method '%s'" % method)
        self.tag = method
        self.options = options

    def estimate(self, model, rng, warm_start=None):
        if self.tag == 'mean-field':
            result = mean_field(model, warm_start, **self.options)
        elif self.tag == 'tree':
            result = tree_bound(model, None, warm_start, **self.options)
        else:
            result = loopy_bp(model, init=warm_start, **self.options)
        return MomentEstimate(np.clip(result.node_marginals, 0, 1), np.clip(result.edge_moments, 0, 1), 0,
                              self._SOURCES[self.tag], warm_start=result.warm_start)


def moment_estimator(tag, data=None, **options):
    """
    Build a `MomentEstimator` from its tag: ``exact``, ``brief`` (needs
    ``data``), ``long-run``, ``mean-field``, ``tree`` or ``bethe``.
    """
    if tag == 'exact':
        return ExactMomentEstimator(**options)
    if tag == 'brief':
        if data is None:
            raise InvalidConfiguration("Brief sampling needs the data set")
        return BriefMomentEstimator(data, **options)
    if tag == 'long-run':
        return LongRunMomentEstimator(**options)
    if tag in InferenceMomentEstimator._SOURCES:
        return InferenceMomentEstimator(tag, **options)
    raise InvalidConfiguration("Unknown moment estimator '%s'" % tag)


class RatioStateSource(object):
    """Interface for the states (and weights) that feed the partition ratio estimate"""

    tag = None

    @abstractmethod
    def states(self, model_prime, rng):
        """Return ``(states, weights)`` representing ``p(s | model_prime)``; weights may be None"""
        pass


class ExhaustiveStates(RatioStateSource):
    """All 2^k states weighted by their exact probabilities"""

    tag = 'exhaustive'

    def __init__(self, cap=DEFAULT_CAP):
        self.cap = cap

    def states(self, model_prime, rng):
        return enumerate_states(model_prime.k), exact_distribution(model_prime, self.cap)


class GibbsStates(RatioStateSource):
    """A fresh Gibbs chain at the proposed parameters"""

    tag = 'gibbs'

    def __init__(self, n_samples=100, burn_in=100, thin=1, order='systematic'):
        if n_samples < 1:
            raise InvalidConfiguration("n_samples must be at least 1")
        self.n_samples = n_samples
        self.burn_in = burn_in
        self.thin = thin
        self.order = order

    def states(self, model_prime, rng):
        state = np.zeros(model_prime.k, dtype=np.int8)
        for _ in range(self.burn_in):
            state = gibbs_sweep(model_prime, state, rng, self.order)
        kept = np.empty((self.n_samples, model_prime.k), dtype=np.int8)
        for n in range(self.n_samples):
            for _ in range(self.thin):
                state = gibbs_sweep(model_prime, state, rng, self.order)
            kept[n] = state
        return kept, None


def ratio_source(tag, **options):
    if tag == 'exhaustive':
        return ExhaustiveStates(**options)
    if tag == 'gibbs':
        return GibbsStates(**options)
    raise InvalidConfiguration("Unknown ratio state source '%s'" % tag)
