#!/usr/bin/env python3

import logging
import os
import tempfile
from unittest import TestCase, main

import numpy as np
from scipy.special import logsumexp

from bmposterior.approximators import BetheLogZ
from bmposterior.exact import GridAxis, enumerate_states, exact_logZ
from bmposterior.exceptions import MalformedData, InvalidState, InvalidConfiguration, EnumerationCapExceeded, \
    EmptyInput
from bmposterior.model import HIDDEN, Model, DataSet, log_unnorm
from bmposterior.semisup import PointSet, SigmaParams, SigmaChain, SigmaChainConfig, toy_points, small_toy_points, \
    build_weights, agreement_model, semisup_to_bm, reduce_model, clamped_logZx, hidden_loglik, \
    hidden_loglik_dataset, semisup_log_likelihood, SwendsenWangSource, ExactAgreementSource, \
    semisup_grad_logsigma, predict_labels, run_sigma_chain, sigma_posterior_grid, sigma_total_variation, \
    region_masses, grid_region_masses

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s %(levelname)-5s %(message)s')


def brute_force_logZx(model, row):
    row = np.asarray(row)
    states = enumerate_states(model.k)
    observed = row != HIDDEN
    consistent = np.all(states[:, observed] == row[observed], axis=1)
    return logsumexp(log_unnorm(model, states[consistent]))


class PointSetTest(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        path = os.path.join(self.tmp.name, 'points.csv')
        with open(path, 'w') as fo:
            fo.write(text)
        return path

    def test_csv_round_trip(self):
        points = PointSet([0.5, 1.0, -2.25], [3.0, 0.0, 1.5], [1, HIDDEN, 0])
        path = os.path.join(self.tmp.name, 'out.csv')
        points.to_csv(path, header_lines=['seed 3'])
        read = PointSet.from_csv(path)
        np.testing.assert_array_equal(read.x, points.x)
        np.testing.assert_array_equal(read.y, points.y)
        np.testing.assert_array_equal(read.labels, points.labels)

    def test_csv_errors(self):
        with self.assertRaises(MalformedData):
            PointSet.from_csv(self.write('a,b,c\n0,0,1\n'))
        with self.assertRaises(MalformedData):
            PointSet.from_csv(self.write('x,y,label\n0,0,2\n'))
        with self.assertRaises(MalformedData):
            PointSet.from_csv(self.write('x,y,label\n0,0\n'))
        with self.assertRaises(MalformedData):
            PointSet.from_csv(self.write('x,y,label\nzero,0,1\n'))
        with self.assertRaises(MalformedData):
            PointSet.from_csv(self.write('x,y,label\n'))

    def test_validation(self):
        with self.assertRaises(MalformedData):
            PointSet([0.0, 1.0], [0.0], [0, 1])
        with self.assertRaises(MalformedData):
            PointSet([float('inf')], [0.0], [0])
        with self.assertRaises(InvalidState):
            PointSet([0.0], [0.0], [3])

    def test_toy_layout(self):
        points = toy_points()
        self.assertEqual(points.n, 80)
        self.assertEqual(int(np.sum(points.labels == HIDDEN)), 30)
        self.assertEqual(int(np.sum(points.labels == 1)), 25)
        hidden = points.labels == HIDDEN
        self.assertAlmostEqual(points.y[hidden].mean(), 3.0, delta=0.2)
        self.assertAlmostEqual(points.x[points.labels == 1].mean(), 3.0, delta=0.2)
        self.assertEqual(small_toy_points().n, 12)
        swapped = points.swapped()
        np.testing.assert_array_equal(swapped.x, points.y)


class ConversionTest(TestCase):

    def setUp(self):
        self.points = small_toy_points(seed=1)
        self.sigma = SigmaParams(0.3, -0.2)

    def test_weights(self):
        weights = build_weights(self.points, self.sigma)
        np.testing.assert_array_equal(weights, weights.T)
        np.testing.assert_array_equal(np.diag(weights), 0.0)
        sx, sy = self.sigma.sigma
        dx = self.points.x[0] - self.points.x[5]
        dy = self.points.y[0] - self.points.y[5]
        self.assertAlmostEqual(weights[0, 5], np.exp(-0.5 * (dx ** 2 / sx ** 2 + dy ** 2 / sy ** 2)))

    def test_boltzmann_form(self):
        converted = semisup_to_bm(self.points, self.sigma)
        agreement = agreement_model(self.points, self.sigma)
        states = enumerate_states(self.points.n)
        np.testing.assert_allclose(agreement.log_unnorm(states),
                                   log_unnorm(converted.model, states) + converted.constant, atol=1e-10)
        np.testing.assert_array_equal(converted.observed, self.points.labelled())
        with self.assertRaises(InvalidState):
            semisup_to_bm(self.points, self.sigma, labels=[0, 1])

    def test_log_likelihood_by_enumeration(self):
        agreement = agreement_model(self.points, self.sigma)
        states = enumerate_states(self.points.n)
        log_w = agreement.log_unnorm(states)
        labelled = self.points.labelled()
        consistent = np.all(states[:, labelled] == self.points.labels[labelled], axis=1)
        expected = logsumexp(log_w[consistent]) - logsumexp(log_w)
        self.assertAlmostEqual(semisup_log_likelihood(self.points, self.sigma), expected, places=9)

    def test_sigma_params(self):
        sigma = SigmaParams.from_sigma(2.0, 0.5)
        np.testing.assert_allclose(sigma.sigma, [2.0, 0.5])
        np.testing.assert_allclose(sigma.vector(), np.log([2.0, 0.5]))
        with self.assertRaises(ValueError):
            SigmaParams.from_sigma(0.0, 1.0)


class HiddenLikelihoodTest(TestCase):

    def setUp(self):
        rng = np.random.default_rng(2)
        self.model = Model(6, [(i, j, rng.standard_normal()) for i in range(6) for j in range(i + 1, 6)
                               if rng.random() < 0.6], rng.standard_normal(6))

    def test_clamped_logZx_matches_enumeration(self):
        for row in ([1, HIDDEN, 0, HIDDEN, HIDDEN, 1], [HIDDEN] * 6, [0, 1, 1, 0, HIDDEN, 0]):
            self.assertAlmostEqual(clamped_logZx(self.model, row), brute_force_logZx(self.model, row), places=10)

    def test_reduce_model(self):
        reduced, constant, hidden = reduce_model(self.model, [1, HIDDEN, 0, HIDDEN, 1, HIDDEN])
        self.assertEqual(hidden.tolist(), [1, 3, 5])
        self.assertEqual(reduced.k, 3)
        full = np.array([1, 0, 0, 1, 1, 0])
        self.assertAlmostEqual(log_unnorm(reduced, full[hidden]) + constant, log_unnorm(self.model, full))
        none, constant, hidden = reduce_model(self.model, [1, 0, 0, 1, 1, 0])
        self.assertIsNone(none)
        self.assertAlmostEqual(constant, log_unnorm(self.model, [1, 0, 0, 1, 1, 0]))
        with self.assertRaises(InvalidState):
            reduce_model(self.model, [1, 0, 2, 1, 1, 0])

    def test_hidden_loglik(self):
        row = [1, HIDDEN, 0, HIDDEN, HIDDEN, 1]
        expected = brute_force_logZx(self.model, row) - exact_logZ(self.model)
        self.assertAlmostEqual(hidden_loglik(self.model, row), expected, places=10)
        self.assertLessEqual(hidden_loglik(self.model, row), 0.0)
        self.assertAlmostEqual(hidden_loglik(self.model, [HIDDEN] * 6), 0.0, places=10)

    def test_positive_estimate_is_clipped_and_logged(self):
        # An understated log Z makes log Z_x - log Z positive
        low = exact_logZ(self.model) - 2.0
        with self.assertLogs('bmposterior.semisup', level='DEBUG') as logs:
            self.assertEqual(hidden_loglik(self.model, [HIDDEN] * 6, log_z=low), 0.0)
        self.assertIn('Clipped positive hidden log-likelihood', logs.output[0])

    def test_dataset(self):
        rows = [[1, 0, 0, 1, 1, 0], [0, 0, 1, 1, 0, 1]]
        data = DataSet(rows, counts=[3, 2])
        expected = sum(c * (log_unnorm(self.model, r) - exact_logZ(self.model)) for r, c in zip(rows, (3, 2)))
        self.assertAlmostEqual(hidden_loglik_dataset(self.model, data), expected, places=9)
        with self.assertRaises(ValueError):
            hidden_loglik_dataset(self.model, DataSet([[0, 1]]))

    def test_cap_and_estimator(self):
        with self.assertRaises(EnumerationCapExceeded):
            clamped_logZx(Model(5), [HIDDEN] * 5, cap=3)
        tree = Model(5, [(0, 1, 0.8), (1, 2, -0.5), (1, 3, 1.2), (3, 4, 0.3)], [0.1, -0.2, 0.3, 0.0, 0.5])
        row = [1, HIDDEN, HIDDEN, HIDDEN, 0]
        self.assertAlmostEqual(clamped_logZx(tree, row, estimator=BetheLogZ()), brute_force_logZx(tree, row),
                               places=6)


class AgreementSourceTest(TestCase):

    def setUp(self):
        self.points = toy_points((2, 2, 2), seed=3)
        self.sigma = SigmaParams(0.5, 0.5)
        self.model = agreement_model(self.points, self.sigma)

    def test_swendsen_wang_matches_exact(self):
        exact = ExactAgreementSource()
        for labels in (None, self.points.labels):
            expected = exact.expectations(self.model, labels)
            sampled = SwendsenWangSource(n_sweeps=20000).expectations(self.model, labels, np.random.default_rng(4))
            self.assertEqual(sampled.n_samples, 20000)
            np.testing.assert_allclose(sampled.agreement, expected.agreement, atol=0.02)
            np.testing.assert_allclose(sampled.node_marginals, expected.node_marginals, atol=0.02)

    def test_clamped_nodes_keep_labels(self):
        expectation = ExactAgreementSource().expectations(self.model, self.points.labels)
        labelled = self.points.labelled()
        np.testing.assert_allclose(expectation.node_marginals[labelled], self.points.labels[labelled])
        sampled = SwendsenWangSource(n_sweeps=50).expectations(self.model, self.points.labels,
                                                               np.random.default_rng(5))
        np.testing.assert_array_equal(sampled.node_marginals[labelled], self.points.labels[labelled])

    def test_unclamped_symmetry(self):
        expectation = ExactAgreementSource().expectations(self.model, None)
        np.testing.assert_allclose(expectation.node_marginals, 0.5, atol=1e-12)

    def test_checks(self):
        with self.assertRaises(InvalidConfiguration):
            SwendsenWangSource(n_sweeps=0)
        with self.assertRaises(EnumerationCapExceeded):
            ExactAgreementSource(cap=4).expectations(self.model, None)


class GradientTest(TestCase):

    def test_matches_central_differences(self):
        points = small_toy_points(seed=4)
        source = ExactAgreementSource()
        h = 1e-5
        for theta in ((0.0, 0.0), (1.0, -0.5), (-0.7, 1.3)):
            gradient = semisup_grad_logsigma(points, SigmaParams(*theta), source, source, None)
            self.assertIsNone(gradient.stderr)
            numeric = np.empty(2)
            for c in range(2):
                step = np.zeros(2)
                step[c] = h
                up = semisup_log_likelihood(points, SigmaParams(*(np.array(theta) + step)))
                down = semisup_log_likelihood(points, SigmaParams(*(np.array(theta) - step)))
                numeric[c] = (up - down) / (2 * h)
            np.testing.assert_allclose(gradient.gradient, numeric, rtol=1e-5, atol=1e-6)

    def test_sampled_gradient_has_stderr(self):
        points = small_toy_points(seed=4)
        gradient = semisup_grad_logsigma(points, SigmaParams(0.0, 0.0), SwendsenWangSource(20),
                                         SwendsenWangSource(20), np.random.default_rng(6))
        self.assertEqual(gradient.stderr.shape, (2,))
        self.assertTrue(np.all(np.isfinite(gradient.gradient)))


class PredictionTest(TestCase):

    def test_wide_x_links_hidden_cluster_to_class_one(self):
        points = small_toy_points(seed=5)
        p = predict_labels(points, [SigmaParams(3.0, -1.0)], ExactAgreementSource())
        hidden = points.labels == HIDDEN
        self.assertTrue(np.all(p[hidden] > 0.5))
        labelled = points.labelled()
        np.testing.assert_array_equal(p[labelled], points.labels[labelled])

    def test_wide_y_links_hidden_cluster_to_class_zero(self):
        points = small_toy_points(seed=5)
        p = predict_labels(points, [SigmaParams(-1.0, 3.0)], ExactAgreementSource())
        self.assertTrue(np.all(p[points.labels == HIDDEN] < 0.5))

    def test_no_samples(self):
        with self.assertRaises(EmptyInput):
            predict_labels(small_toy_points(), [], ExactAgreementSource())


class SigmaChainTest(TestCase):

    def test_config_checks(self):
        with self.assertRaises(InvalidConfiguration):
            SigmaChainConfig(method='gibbs')
        with self.assertRaises(InvalidConfiguration):
            SigmaChainConfig(method='langevin', approximator='bethe')
        with self.assertRaises(InvalidConfiguration):
            SigmaChainConfig(box=(1.0, -1.0))
        with self.assertRaises(InvalidConfiguration):
            SigmaChainConfig(init=(5.0, 0.0))
        with self.assertRaises(InvalidConfiguration):
            SigmaChainConfig(n_iterations=0)

    def test_langevin_stays_in_box(self):
        config = SigmaChainConfig(n_iterations=200, epsilon=1.5, box=(-1.0, 1.0), seed=7)
        chain = run_sigma_chain(small_toy_points(), config)
        self.assertEqual(chain.log_sigma.shape, (200, 2))
        self.assertTrue(np.all((chain.log_sigma >= -1.0) & (chain.log_sigma <= 1.0)))
        self.assertEqual(chain.acceptance_rate, 1.0)

    def test_metropolis_is_deterministic(self):
        config = SigmaChainConfig(method='metropolis', approximator='exact', n_iterations=60, proposal_std=2.0,
                                  seed=8)
        points = small_toy_points()
        a = run_sigma_chain(points, config)
        b = run_sigma_chain(points, config)
        np.testing.assert_array_equal(a.log_sigma, b.log_sigma)
        self.assertTrue(np.all(np.abs(a.log_sigma) <= 4.0))
        self.assertTrue(0 <= a.accept_count <= 60)
        self.assertEqual(len(a.params()), 60)

    def test_bethe_metropolis(self):
        config = SigmaChainConfig(method='metropolis', approximator='bethe', n_iterations=30, seed=9)
        chain = run_sigma_chain(small_toy_points(), config)
        self.assertEqual(chain.propose_count, 30)
        self.assertLessEqual(chain.nonconverged_count, 30)

    def test_needs_labels(self):
        points = PointSet([0.0, 1.0], [0.0, 1.0], [HIDDEN, HIDDEN])
        with self.assertRaises(InvalidConfiguration):
            run_sigma_chain(points, SigmaChainConfig(n_iterations=5))


class SigmaGridTest(TestCase):

    def setUp(self):
        self.axis = GridAxis(-4.0, 4.0, 8)
        self.grid = sigma_posterior_grid(small_toy_points(), self.axis)

    def test_grid(self):
        self.assertEqual(self.grid.mass.shape, (8, 8))
        self.assertAlmostEqual(self.grid.mass.sum(), 1.0)
        masses = grid_region_masses(self.grid)
        self.assertLessEqual(sum(masses.values()), 1.0 + 1e-12)

    def test_total_variation_of_point_mass(self):
        values = self.axis.points()
        chain = SigmaChain(np.tile([values[5], values[2]], (10, 1)), 10, 10, 0, 'langevin', 'exact')
        self.assertAlmostEqual(sigma_total_variation(chain, self.grid, self.axis), 1.0 - self.grid.mass[5, 2])

    def test_region_masses(self):
        masses = region_masses([[3.0, 0.0], [0.0, 3.0], [3.0, 3.0], [0.0, 0.0]])
        self.assertEqual(masses, {'corner': 0.25, 'arm_x': 0.25, 'arm_y': 0.25})
        weighted = region_masses([[3.0, 0.0], [0.0, 0.0]], weights=[3.0, 1.0])
        self.assertAlmostEqual(weighted['arm_x'], 0.75)


class SigmaOracleTest(TestCase):

    @classmethod
    def setUpClass(cls):
        cls.points = small_toy_points()
        cls.axis = GridAxis(-4.0, 4.0, 32)
        cls.grid = sigma_posterior_grid(cls.points, cls.axis)

    def test_exact_posterior_shape(self):
        masses = grid_region_masses(self.grid)
        self.assertLess(masses['corner'], 0.05)
        self.assertGreater(masses['arm_x'], 0.10)
        self.assertGreater(masses['arm_y'], 0.10)

    def test_default_langevin_chain_matches_grid(self):
        chain = run_sigma_chain(self.points, SigmaChainConfig(n_iterations=10000))
        self.assertLess(sigma_total_variation(chain, self.grid, self.axis), 0.15)
        masses = region_masses(chain.log_sigma)
        self.assertLess(masses['corner'], 0.05)
        self.assertGreater(masses['arm_x'], 0.10)
        self.assertGreater(masses['arm_y'], 0.10)


if __name__ == '__main__':
    main()
