"""
Brute-force enumeration over all 2^k states.

Serves as the exact inner loop of exact Metropolis and as the test oracle
for every approximation. States are enumerated in blocks so memory stays
bounded; the log-sum-exp reduction runs over blocks in a fixed order, so
results are deterministic.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from bmposterior._checks import _check_type
from bmposterior.exceptions import EnumerationCapExceeded, InvalidConfiguration, LayoutMismatch
from bmposterior.model import Model, ParamVector, GaussianPrior, DataSet, suff_stats, vectorize, devectorize, \
    log_joint_unnorm, state_statistics

_logger = logging.getLogger(__name__)

#: Largest node count enumerated unless the caller raises the cap.
DEFAULT_CAP = 20

_BLOCK_BITS = 16


@dataclass(frozen=True)
class ExactMoments:
    log_z: float
    node_marginals: np.ndarray
    edge_moments: np.ndarray


def _check_cap(k, cap):
    if k > cap:
        raise EnumerationCapExceeded("Enumerating %d nodes exceeds the cap of %d" % (k, cap))


def enumerate_states(k, start=0, stop=None):
    """
    States ``start .. stop-1`` of the enumeration as an (n, k) uint8 array;
    bit ``i`` of the state index is ``s_i``.
    """
    stop = 2 ** k if stop is None else stop
    index = np.arange(start, stop, dtype=np.int64)
    return ((index[:, None] >> np.arange(k, dtype=np.int64)) & 1).astype(np.uint8)


def _blocks(k):
    total = 2 ** k
    size = 2 ** min(k, _BLOCK_BITS)
    for start in range(0, total, size):
        yield enumerate_states(k, start, min(start + size, total))


def _block_energies(model, states):
    layout = model.layout
    s = states.astype(float)
    return (s[:, layout.edge_i] * s[:, layout.edge_j]) @ model.weights + s @ model.biases


def exact_logZ(model, cap=DEFAULT_CAP):
    """
    Exact log partition function by enumeration.

    Raises `EnumerationCapExceeded` when ``model.k > cap``.
    """
    _check_type(Model, model, 'model')
    _check_cap(model.k, cap)
    running = -np.inf
    for states in _blocks(model.k):
        running = np.logaddexp(running, logsumexp(_block_energies(model, states)))
    return float(running)


def exact_moments(model, cap=DEFAULT_CAP):
    """
    Exact log Z, node marginals and edge moments under ``p(s | W)``.
    """
    _check_type(Model, model, 'model')
    _check_cap(model.k, cap)
    log_z = exact_logZ(model, cap)
    layout = model.layout
    node = np.zeros(model.k)
    edge = np.zeros(layout.n_edges)
    for states in _blocks(model.k):
        p = np.exp(_block_energies(model, states) - log_z)
        s = states.astype(float)
        node += p @ s
        edge += p @ (s[:, layout.edge_i] * s[:, layout.edge_j])
    return ExactMoments(log_z, np.clip(node, 0.0, 1.0), np.clip(edge, 0.0, 1.0))


def exact_distribution(model, cap=DEFAULT_CAP):
    """
    The full probability vector over states in enumeration order.
    """
    _check_type(Model, model, 'model')
    _check_cap(model.k, cap)
    energies = _block_energies(model, enumerate_states(model.k))
    return np.exp(energies - logsumexp(energies))


def exact_sample(model, rng, n, cap=DEFAULT_CAP):
    """
    Draw ``n`` i.i.d. states from ``p(s | W)`` by inverse CDF over the
    enumerated distribution.
    """
    if n < 1:
        raise ValueError("Argument n is expected to be at least 1")
    p = exact_distribution(model, cap)
    cdf = np.cumsum(p)
    index = np.searchsorted(cdf, rng.random(n) * cdf[-1], side='right')
    index = np.minimum(index, p.size - 1)
    return ((index[:, None] >> np.arange(model.k)) & 1).astype(np.int8)


def state_index(states):
    """
    Enumeration index of each state (inverse of `enumerate_states`).
    """
    states = np.asarray(states, dtype=np.int64)
    return states @ (1 << np.arange(states.shape[-1], dtype=np.int64))


@dataclass(frozen=True)
class GridAxis:
    lower: float
    upper: float
    n_points: int

    def points(self):
        return np.linspace(self.lower, self.upper, self.n_points)

    def trapezoid_weights(self):
        w = np.ones(self.n_points)
        if self.n_points > 1:
            w[0] = w[-1] = 0.5
        return w * (self.upper - self.lower) / max(self.n_points - 1, 1)


@dataclass(frozen=True)
class PosteriorGrid:
    """
    Exact posterior evaluated on a 1-D or 2-D grid of free coordinates.

    ``density`` integrates to one under the trapezoid rule; ``mass`` is the
    density times each point's trapezoid weight and sums to one.
    """
    coordinates: Tuple[int, ...]
    axes: Tuple[np.ndarray, ...]
    log_posterior: np.ndarray
    density: np.ndarray
    mass: np.ndarray

    def mode(self):
        index = np.unravel_index(np.argmax(self.density), self.density.shape)
        return tuple(float(axis[i]) for axis, i in zip(self.axes, index))

    def bin_masses(self, edges):
        """
        Posterior mass per histogram bin (1-D grids): each grid point's mass
        goes to the bin containing it.
        """
        if len(self.axes) != 1:
            raise ValueError("bin_masses is defined for 1-D grids")
        edges = np.asarray(edges, dtype=float)
        which = np.clip(np.searchsorted(edges, self.axes[0], side='right') - 1, 0, edges.size - 2)
        inside = (self.axes[0] >= edges[0]) & (self.axes[0] <= edges[-1])
        return np.bincount(which[inside], weights=self.mass[inside], minlength=edges.size - 1)

    def bin_masses_2d(self, x_edges, y_edges):
        if len(self.axes) != 2:
            raise ValueError("bin_masses_2d is defined for 2-D grids")
        gx, gy = np.meshgrid(self.axes[0], self.axes[1], indexing='ij')
        hist, _, _ = np.histogram2d(gx.ravel(), gy.ravel(), bins=[x_edges, y_edges], weights=self.mass.ravel())
        return hist

    def to_csv(self, path, header_lines=()):
        """
        Dump ``theta1[, theta2], density`` rows for plotting.
        """
        if len(self.axes) == 1:
            table = np.column_stack([self.axes[0], self.density])
            names = 'theta1,density'
        else:
            gx, gy = np.meshgrid(self.axes[0], self.axes[1], indexing='ij')
            table = np.column_stack([gx.ravel(), gy.ravel(), self.density.ravel()])
            names = 'theta1,theta2,density'
        with open(path, 'w') as fo:
            for line in header_lines:
                fo.write('# %s\n' % line)
            fo.write(names + '\n')
            np.savetxt(fo, table, delimiter=',', fmt='%.10g')


def normalize_grid(log_values, axes):
    """
    Normalise log-density values on a tensor grid with trapezoid weights.
    """
    weights = axes[0].trapezoid_weights()
    for axis in axes[1:]:
        weights = np.multiply.outer(weights, axis.trapezoid_weights())
    shifted = np.exp(log_values - np.max(log_values))
    total = float(np.sum(shifted * weights))
    density = shifted / total
    mass = density * weights
    return density, mass / mass.sum()


def exact_posterior_grid(model_template, free_params, data, prior, grid, cap=DEFAULT_CAP):
    """
    Exact posterior over one or two free coordinates, other coordinates held
    at the template's values.

    Parameters
    ----------

    model_template: Model
        Supplies the layout and the fixed coordinates
    free_params: sequence of int
        One or two `ParamVector` coordinate indices
    data: DataSet or SuffStats
    prior: GaussianPrior
    grid: GridAxis or sequence of GridAxis
        One axis per free coordinate
    """
    _check_type(Model, model_template, 'model_template')
    _check_type(GaussianPrior, prior, 'prior')
    free = tuple(int(c) for c in free_params)
    if len(free) not in (1, 2):
        raise InvalidConfiguration("Exactly one or two free coordinates are supported")
    axes = (grid,) if isinstance(grid, GridAxis) else tuple(grid)
    if len(axes) != len(free):
        raise InvalidConfiguration("Need one grid axis per free coordinate")
    for axis in axes:
        if not (np.isfinite(axis.lower) and np.isfinite(axis.upper)) or axis.upper <= axis.lower:
            raise InvalidConfiguration("Grid bounds must be finite with lower < upper")
        if axis.n_points < 2:
            raise InvalidConfiguration("Grid axes need at least two points")
    layout = model_template.layout
    for c in free:
        if not 0 <= c < layout.size:
            raise LayoutMismatch("Coordinate %d is outside the layout" % c)
    _check_cap(model_template.k, cap)
    suff = data if not isinstance(data, DataSet) else suff_stats(data, layout)
    base = vectorize(model_template).values.copy()
    points = [axis.points() for axis in axes]
    shape = tuple(p.size for p in points)
    log_post = np.empty(shape)
    for index in np.ndindex(*shape):
        values = base.copy()
        for c, p, i in zip(free, points, index):
            values[c] = p[i]
        params = ParamVector(layout, values)
        log_z = exact_logZ(devectorize(layout, values), cap)
        log_post[index] = log_joint_unnorm(suff, prior, params, log_z)
    density, mass = normalize_grid(log_post, axes)
    return PosteriorGrid(free, tuple(points), log_post, density, mass)


def enumerated_statistics(model, cap=DEFAULT_CAP):
    """
    All states with their probabilities and `ParamVector`-ordered statistics.
    """
    _check_cap(model.k, cap)
    states = enumerate_states(model.k)
    return states, exact_distribution(model, cap), state_statistics(model.layout, states)
