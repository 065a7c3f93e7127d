"""
Approximate Bayesian inference over the parameters of Boltzmann machines.

The posterior over weights and biases is doubly intractable: every
likelihood evaluation needs the partition function. The samplers here
(Metropolis, ratio Metropolis and uncorrected Langevin) take a pluggable
approximation of log Z or of the model moments, and exact enumeration is
available as an oracle for small models.

=================
Install from PyPI
=================

.. code-block:: shell

    pip install bmposterior

Binary chain files need the ``avro`` extra:

.. code-block:: shell

    pip install 'bmposterior[avro]'

=====
Usage
=====

.. code-block:: python

    import numpy as np
    from bmposterior import DataSet, ChainConfig, fully_connected_layout, run_chain

    data = DataSet([[1, 1, 0], [0, 1, 1]], counts=[5, 3])
    chain = run_chain(ChainConfig(approximator='bethe', n_iterations=5000, seed=1),
                      data, fully_connected_layout(3))
"""

from bmposterior.__about__ import __version__

from bmposterior.exceptions import *  # noqa: F401,F403

from bmposterior.log import LoggerLevel, ConsoleLogger, FileLogger  # noqa: F401

from bmposterior.model import HIDDEN, Layout, Model, ParamVector, DataSet, GaussianPrior, SuffStats, vectorize, \
    devectorize, suff_stats, log_unnorm, grad_log_joint, log_joint_unnorm, fully_connected_layout  # noqa: F401

from bmposterior.exact import exact_logZ, exact_moments, exact_distribution, exact_sample, GridAxis, \
    PosteriorGrid, exact_posterior_grid  # noqa: F401

from bmposterior.inference import InferenceResult, mean_field, mean_field_bound, TreeStructure, select_tree, \
    tree_bound, loopy_bp, bethe_free_energy, pseudo_log_likelihood  # noqa: F401

from bmposterior.states import StateChainConfig, MomentEstimate, gibbs_sweep, brief_moments, long_run_moments, \
    AgreementModel, swendsen_wang_sweep, log_ratio_estimate, ratio_estimate  # noqa: F401

from bmposterior.approximators import LogZApproximator, MomentEstimator, RatioStateSource, logz_approximator, \
    moment_estimator, ratio_source  # noqa: F401

from bmposterior.chain import Chain  # noqa: F401

from bmposterior.samplers import ProposalConfig, ChainConfig, metropolis_step, ratio_metropolis_step, \
    langevin_step, pseudo_metropolis_step, run_chain, sample_prior, chain_histograms, overlap_coefficients, \
    f_curve  # noqa: F401

from bmposterior.semisup import PointSet, SigmaParams, semisup_to_bm, hidden_loglik, semisup_grad_logsigma, \
    SigmaChainConfig, run_sigma_chain  # noqa: F401
