"""
Experiment suites.

Each suite takes a validated `ExperimentConfig`, writes a bundle into
``config.output_dir`` and returns a `SuiteResult`. Chains of a suite draw
from independent ``SeedSequence`` children of ``config.seed``, so results do
not depend on ``workers``.
"""
import logging
import re
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from bmposterior.exact import GridAxis, exact_logZ, normalize_grid
from bmposterior.exceptions import InvalidConfiguration
from bmposterior.experiments.config import ExperimentConfig
from bmposterior.experiments.data import load_contingency, write_contingency, gen_synthetic, heart_standin, \
    HEART_NODE_NAMES
from bmposterior.experiments.output import OutputBundle
from bmposterior.experiments.plots import histogram_figure, f_curve_figure, scatter_figure, curves_figure
from bmposterior.model import GaussianPrior, Model, fully_connected_layout, vectorize
from bmposterior.samplers import ChainConfig, ProposalConfig, run_chain, sample_prior, shared_edges, \
    chain_histograms, overlap_coefficients, f_curve
from bmposterior.semisup import PointSet, toy_points, small_toy_points, SigmaChainConfig, run_sigma_chain, \
    predict_labels, SwendsenWangSource, sigma_posterior_grid, sigma_total_variation, region_masses, \
    grid_region_masses

_logger = logging.getLogger(__name__)

#: Overlap at or above which two histograms count as matching.
OVERLAP_THRESHOLD = 0.8

HEART_CHAINS = (
    ('exact', 'metropolis', 'exact'),
    ('exact-repeat', 'metropolis', 'exact'),
    ('mean-field', 'metropolis', 'mean-field'),
    ('tree', 'metropolis', 'tree'),
    ('loopy', 'metropolis', 'bethe'),
    ('brief-langevin', 'langevin', 'brief'),
)

SYNTHETIC_CHAINS = (
    ('loopy', 'metropolis', 'bethe'),
    ('brief-langevin', 'langevin', 'brief'),
)

# Largest point set for which the suite also enumerates the exact sigma posterior.
_SEMISUP_ORACLE_POINTS = 16


@dataclass(frozen=True)
class SuiteResult:
    manifest: object
    chains: dict


def _prior(config):
    return GaussianPrior(config.weight_variance, config.bias_variance)


def _approximator_options(config, method, approximator):
    if approximator == 'bethe':
        return {'damping': config.bp_damping, 'max_iter': config.bp_max_iter}
    if method == 'langevin' and approximator == 'brief':
        return {'n_sweeps': config.brief_sweeps}
    if method == 'ratio-metropolis' and approximator == 'gibbs':
        return {'n_samples': config.n_inner_samples, 'burn_in': config.inner_burn_in}
    return {}


def chain_config(config, method, approximator, seed):
    """
    `ChainConfig` for one chain of a suite.
    """
    proposal = ProposalConfig(config.proposal_kind, config.proposal_std, config.schedule)
    return ChainConfig(method=method, approximator=approximator, n_iterations=config.iterations, thin=config.thin,
                       seed=seed, proposal=proposal, epsilon=config.epsilon, policy=config.bp_policy,
                       warm_start=config.warm_start,
                       options=_approximator_options(config, method, approximator))


def _run_job(job):
    chain_cfg, data, layout, prior, config_hash, progress = job
    return run_chain(chain_cfg, data, layout, prior, progress=progress, config_hash=config_hash)


def run_chains(config, specs, data, layout, seeds=None):
    """
    Run ``(name, method, approximator)`` chains, in worker processes when
    ``config.workers > 1``.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(len(specs)) if seeds is None else seeds
    prior = _prior(config)
    config_hash = config.config_hash()
    progress = config.progress and config.workers == 1
    jobs = [(chain_config(config, method, approximator, seed), data, layout, prior, config_hash, progress)
            for (_, method, approximator), seed in zip(specs, seeds)]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chains = list(pool.map(_run_job, jobs))
    else:
        chains = [_run_job(job) for job in jobs]
    for chain in chains:
        chain.seed = config.seed
    return OrderedDict((name, chain) for (name, _, _), chain in zip(specs, chains))


def _file_name(name):
    return re.sub(r'[^A-Za-z0-9_]+', '_', name).strip('_')


def _write_histograms(bundle, chains, names, coordinates=None, markers=None):
    edges = shared_edges(list(chains.values()), bundle.config.bins)
    tables = OrderedDict((label, chain_histograms(chain, bundle.config.bins, edges)) for label, chain in chains.items())
    coordinates = range(len(names)) if coordinates is None else coordinates
    for c in coordinates:
        stem = _file_name(names[c])
        rows = [[edges[c, b], edges[c, b + 1]] + [int(t.counts[c, b]) for t in tables.values()]
                for b in range(bundle.config.bins)]
        bundle.write_csv('histograms/%s.csv' % stem, ['bin_lower', 'bin_upper'] + list(tables), rows)
        fig = histogram_figure([(label, edges[c], t.counts[c]) for label, t in tables.items()], names[c],
                               () if markers is None else (markers[c],))
        bundle.write_svg(fig, 'plots/%s.svg' % stem)
    return tables


def _record_chains(bundle, chains, names):
    for label, chain in chains.items():
        chain.names = list(names)
        bundle.write_chain(chain, 'chains/%s' % label)
        bundle.metric('acceptance.%s' % label, chain.acceptance_rate)
        if chain.approximator == 'bethe':
            bundle.metric('bp_nonconverged.%s' % label, chain.nonconverged_fraction)
            if chain.nonconverged_fraction > bundle.config.bp_flag_fraction:
                bundle.flag('%s: loopy BP did not converge on %.1f%% of steps (threshold %.1f%%)'
                            % (label, 100 * chain.nonconverged_fraction, 100 * bundle.config.bp_flag_fraction))


def run_heart_suite(config):
    """
    Exact, mean-field, tree and loopy Metropolis plus brief Langevin on the
    six-variable table, compared parameter by parameter with exact Metropolis.
    """
    bundle = OutputBundle(config)
    if config.data_path is not None:
        data = load_contingency(config.data_path)
    else:
        system = heart_standin()
        data = system.data
        bundle.note(system.note)
        write_contingency(bundle.path('data/heart_standin.csv'), data, bundle.header_lines())
    bundle.metric('n_cases', data.n_rows)
    layout = fully_connected_layout(data.k)
    names = layout.names(HEART_NODE_NAMES)
    chains = run_chains(config, HEART_CHAINS, data, layout)
    _record_chains(bundle, chains, names)
    _write_histograms(bundle, chains, names)

    exact = chains['exact']
    compared = [label for label in chains if label != 'exact']
    overlaps = OrderedDict((label, overlap_coefficients(exact, chains[label], config.bins)) for label in compared)
    bundle.write_csv('overlap.csv', ['parameter'] + compared,
                     [[names[c]] + [overlaps[label][c] for label in compared] for c in range(layout.size)])
    exact_variance = exact.samples.var(axis=0)
    for label in compared:
        bundle.metric('overlap_fraction.%s' % label, np.mean(overlaps[label] >= OVERLAP_THRESHOLD))
        ratio = chains[label].samples.var(axis=0) / np.where(exact_variance > 0, exact_variance, np.inf)
        bundle.metric('max_variance_ratio.%s' % label, ratio.max())
        shift = np.abs(chains[label].samples.mean(axis=0) - exact.samples.mean(axis=0)) \
            / np.sqrt(np.where(exact_variance > 0, exact_variance, np.inf))
        bundle.metric('max_mean_shift_sd.%s' % label, shift.max())
    return SuiteResult(bundle.finish(), chains)


def run_synthetic_suite(config):
    """
    Loopy Metropolis and brief Langevin on a generated system with known
    structure, scored by f-curves against the true parameters and the prior.
    """
    bundle = OutputBundle(config)
    system = gen_synthetic(config.n_nodes, config.n_edges, config.seed, config.n_rows, config.weight_scale,
                           progress=config.progress)
    bundle.note(system.note)
    bundle.write_text('true_model.json', system.model.to_json())
    layout = system.model.layout
    names = layout.names()
    seeds = np.random.SeedSequence(config.seed).spawn(len(SYNTHETIC_CHAINS) + 1)
    chains = run_chains(config, SYNTHETIC_CHAINS, system.data, layout, seeds[:-1])
    _record_chains(bundle, chains, names)

    truth = vectorize(system.model)
    baseline = sample_prior(_prior(config), layout, config.prior_samples, np.random.default_rng(seeds[-1]))
    baseline.names = list(names)
    curves = OrderedDict((label, f_curve(chain, truth, config.f_tol)) for label, chain in chains.items())
    curves['prior'] = f_curve(baseline, truth, config.f_tol)
    bundle.write_csv('f_curves.csv', ['rank'] + list(curves),
                     [[rank + 1] + [curve.fractions[rank] for curve in curves.values()]
                      for rank in range(layout.size)])
    for label, curve in curves.items():
        bundle.write_csv('f_curve_%s.csv' % _file_name(label), ['rank', 'parameter', 'f'],
                         [[rank + 1, curve.names[rank], curve.fractions[rank]] for rank in range(layout.size)])
        bundle.metric('median_f.%s' % label, np.median(curve.fractions))
    bundle.write_svg(f_curve_figure([(label, curve.fractions) for label, curve in curves.items()], config.f_tol),
                     'plots/f_curves.svg')
    prior_median = np.median(curves['prior'].fractions)
    for label in chains:
        if prior_median > 0:
            bundle.metric('median_f_ratio.%s' % label, np.median(curves[label].fractions) / prior_median)

    examples = sorted(set(list(range(min(2, layout.n_edges))) + list(range(layout.n_edges, layout.n_edges + 2))))
    _write_histograms(bundle, chains, names, examples, truth.values)
    bundle.write_csv('true_values.csv', ['parameter', 'true_value'],
                     [[names[c], truth.values[c]] for c in range(layout.size)])
    return SuiteResult(bundle.finish(), chains)


def run_semisup_suite(config):
    """
    Langevin (Swendsen-Wang gradients) and loopy Metropolis over
    ``(log sigma_x, log sigma_y)``, with label predictions averaged over
    the Langevin samples. Small point sets are also checked against the
    enumerated posterior.
    """
    bundle = OutputBundle(config)
    if config.points_path is not None:
        points = PointSet.from_csv(config.points_path)
    else:
        points = toy_points(seed=config.seed) if config.toy == 'full' else small_toy_points(seed=config.seed)
        bundle.note('generated %d-point toy set (seed %d)' % (points.n, config.seed))
    if not np.any(points.labelled()):
        raise InvalidConfiguration("The point set has no labelled points")
    points.to_csv(bundle.path('points.csv'), bundle.header_lines())

    box = (config.box_lower, config.box_upper)
    centre = 0.5 * (box[0] + box[1])
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    common = dict(n_iterations=config.sigma_iterations, epsilon=config.sigma_epsilon,
                  proposal_std=config.sigma_proposal_std, box=box, init=(centre, centre), n_sweeps=config.sw_sweeps)
    chains = OrderedDict([
        ('langevin', run_sigma_chain(points, SigmaChainConfig('langevin', 'sw', seed=seeds[0], **common),
                                     progress=config.progress)),
        ('loopy', run_sigma_chain(points, SigmaChainConfig('metropolis', 'bethe', seed=seeds[1], **common),
                                  progress=config.progress)),
    ])
    for label, chain in chains.items():
        sigma = chain.sigma
        bundle.write_csv('sigma_%s.csv' % label, ['step', 'sigma_x', 'sigma_y'],
                         [[step + 1, sx, sy] for step, (sx, sy) in enumerate(sigma)])
        bundle.metric('acceptance.%s' % label, chain.acceptance_rate)
        for region, mass in region_masses(chain.log_sigma).items():
            bundle.metric('%s.%s' % (region, label), mass)
    loopy = chains['loopy']
    fraction = loopy.nonconverged_count / loopy.propose_count
    bundle.metric('bp_nonconverged.loopy', fraction)
    if fraction > config.bp_flag_fraction:
        bundle.flag('loopy: BP did not converge on %.1f%% of steps' % (100 * fraction))
    bundle.write_svg(scatter_figure([(label, c.sigma[:, 0], c.sigma[:, 1]) for label, c in chains.items()],
                                    'sigma_x', 'sigma_y'), 'plots/sigma.svg')

    samples = chains['langevin'].params()[config.prediction_stride - 1::config.prediction_stride] or \
        chains['langevin'].params()[-1:]
    marginals = predict_labels(points, samples, SwendsenWangSource(config.sw_sweeps, persistent=False),
                               np.random.default_rng(seeds[2]))
    bundle.write_csv('predictions.csv', ['x', 'y', 'label', 'p_class1'],
                     [[x, y, '?' if label < 0 else int(label), p]
                      for x, y, label, p in zip(points.x, points.y, points.labels, marginals)])

    if points.n <= _SEMISUP_ORACLE_POINTS:
        axis = GridAxis(box[0], box[1], config.grid_points)
        grid = sigma_posterior_grid(points, axis)
        gx, gy = np.meshgrid(grid.axes[0], grid.axes[1], indexing='ij')
        bundle.write_csv('sigma_grid.csv', ['log_sigma_x', 'log_sigma_y', 'density'],
                         zip(gx.ravel(), gy.ravel(), grid.density.ravel()))
        for label, chain in chains.items():
            bundle.metric('tv_to_exact.%s' % label, sigma_total_variation(chain, grid, axis))
        for region, mass in grid_region_masses(grid).items():
            bundle.metric('%s.exact' % region, mass)
    return SuiteResult(bundle.finish(), chains)


def implied_prior(prior, n_rows, axis):
    """
    Normalised ``N(w; 0, sigma_w^2) Z(w)^N`` on a grid for the one-weight,
    two-node model: the prior a joint model over parameters and ``N`` data
    cases implies.
    """
    w = axis.points()
    log_z = np.array([exact_logZ(Model(2, [(0, 1, float(v))])) for v in w])
    density, _ = normalize_grid(-w ** 2 / (2 * prior.weight_variance) + n_rows * log_z, (axis,))
    return density


def run_flawed_joint_demo(config):
    """
    Show how the implied prior of a joint model over weights and data moves
    with the data set size.
    """
    bundle = OutputBundle(config)
    axis = GridAxis(-config.demo_range, config.demo_range, config.demo_points)
    prior = _prior(config)
    w = axis.points()
    curves = OrderedDict(('N=%d' % n, implied_prior(prior, n, axis)) for n in config.n_values)
    bundle.write_csv('implied_prior.csv', ['w'] + list(curves),
                     [[w[i]] + [curve[i] for curve in curves.values()] for i in range(w.size)])
    for label, curve in curves.items():
        bundle.metric('argmax_w.%s' % label, w[np.argmax(curve)])
    bundle.write_svg(curves_figure(w, list(curves.items()), 'w', 'implied prior density'),
                     'plots/implied_prior.svg')
    return SuiteResult(bundle.finish(), {})


def run_custom_suite(config):
    """
    One chain with the configured method and approximator, on a contingency
    table when ``data_path`` is set or on a generated system otherwise.
    """
    bundle = OutputBundle(config)
    truth = None
    if config.data_path is not None:
        data = load_contingency(config.data_path, n_columns=None)
        layout = fully_connected_layout(data.k)
    else:
        system = gen_synthetic(config.n_nodes, config.n_edges, config.seed, config.n_rows, config.weight_scale,
                               progress=config.progress)
        bundle.note(system.note)
        bundle.write_text('true_model.json', system.model.to_json())
        data, layout = system.data, system.model.layout
        truth = vectorize(system.model)
    names = layout.names()
    label = '%s-%s' % (config.method, config.approximator)
    chains = run_chains(config, ((label, config.method, config.approximator),), data, layout)
    _record_chains(bundle, chains, names)
    _write_histograms(bundle, chains, names, markers=None if truth is None else truth.values)
    if truth is not None:
        curve = f_curve(chains[label], truth, config.f_tol)
        bundle.write_csv('f_curve.csv', ['rank', 'parameter', 'f'],
                         [[rank + 1, curve.names[rank], curve.fractions[rank]] for rank in range(layout.size)])
        bundle.metric('median_f', np.median(curve.fractions))
    return SuiteResult(bundle.finish(), chains)


SUITES = {
    'heart': run_heart_suite,
    'synthetic': run_synthetic_suite,
    'semisup': run_semisup_suite,
    'flawed-joint-demo': run_flawed_joint_demo,
    'custom': run_custom_suite,
}


def run_suite(config):
    if not isinstance(config, ExperimentConfig):
        raise InvalidConfiguration("Expected an ExperimentConfig")
    config.validate()
    _logger.info('Running %s suite, config hash %s', config.experiment, config.config_hash())
    return SUITES[config.experiment](config)
