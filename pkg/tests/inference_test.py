#!/usr/bin/env python3

import json
import logging
import math
from unittest import TestCase, main

import numpy as np
from scipy.special import expit

from bmposterior.exact import exact_logZ, exact_moments
from bmposterior.exceptions import InvalidModel, InconsistentBeliefs, HiddenEntriesPresent
from bmposterior.inference import mean_field, mean_field_bound, select_tree, TreeStructure, TreeParams, \
    tree_bound, evaluate_tree_bound, loopy_bp, bethe_free_energy, pseudo_log_likelihood
from bmposterior.model import HIDDEN, Model, DataSet

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s %(levelname)-5s %(message)s')


def random_model(rng, k, density, scale=1.0):
    edges = [(i, j, scale * rng.standard_normal()) for i in range(k) for j in range(i + 1, k)
             if rng.random() < density]
    return Model(k, edges, scale * rng.standard_normal(k))


def random_tree(rng, k, scale=1.0):
    edges = [(int(rng.integers(0, j)), j, scale * rng.standard_normal()) for j in range(1, k)]
    return Model(k, edges, scale * rng.standard_normal(k))


class MeanFieldTest(TestCase):

    def test_lower_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            model = random_model(rng, 10, 0.3)
            result = mean_field(model)
            self.assertLessEqual(result.log_z_estimate, exact_logZ(model) + 1e-9)

    def test_exact_without_edges(self):
        model = Model(4, [], [0.5, -1.0, 2.0, 0.0])
        result = mean_field(model)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.log_z_estimate, exact_logZ(model), places=10)
        np.testing.assert_allclose(result.node_marginals, expit(model.biases), atol=1e-10)

    def test_trace_never_decreases(self):
        model = random_model(np.random.default_rng(5), 8, 0.6, scale=2.0)
        trace = np.array(mean_field(model).trace)
        self.assertTrue(np.all(np.diff(trace) >= -1e-12))

    def test_bound_matches_trace(self):
        model = random_model(np.random.default_rng(6), 6, 0.5)
        result = mean_field(model)
        self.assertAlmostEqual(mean_field_bound(model, result.node_marginals), result.log_z_estimate)

    def test_invalid_init(self):
        with self.assertRaises(ValueError):
            mean_field(Model(2), init=[0.5, 1.5])

    def test_to_json(self):
        d = json.loads(mean_field(Model(2, [(0, 1, 1.0)])).to_json())
        self.assertEqual(d['method'], 'mean-field')
        self.assertEqual(len(d['edge_moments']), 1)


class TreeTest(TestCase):

    def test_select_tree_prefers_strong_edges(self):
        model = Model(3, [(0, 1, 0.1), (0, 2, -2.0), (1, 2, 1.0)])
        self.assertEqual(select_tree(model).edges, ((0, 2), (1, 2)))

    def test_select_tree_breaks_ties_lexicographically(self):
        model = Model(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])
        self.assertEqual(select_tree(model).edges, ((0, 1), (0, 2)))

    def test_forest(self):
        model = Model(4, [(0, 1, 1.0), (2, 3, 1.0)])
        tree = select_tree(model)
        self.assertEqual(tree.edges, ((0, 1), (2, 3)))
        tree.validate_for(model)

    def test_structure_checks(self):
        with self.assertRaises(InvalidModel):
            TreeStructure(3, [(0, 1), (1, 2), (0, 2)])
        model = Model(3, [(0, 1, 1.0), (1, 2, 1.0)])
        with self.assertRaises(InvalidModel):
            TreeStructure(3, [(0, 2)]).validate_for(model)
        with self.assertRaises(InvalidModel):
            TreeStructure(3, [(0, 1)]).validate_for(model)
        with self.assertRaises(InvalidModel):
            tree_bound(model, TreeStructure(3, [(0, 2), (1, 2)]))

    def test_bound_properties(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            model = random_model(rng, 10, 0.3)
            exact = exact_logZ(model)
            mf = mean_field(model).log_z_estimate
            tree = tree_bound(model, max_iter=30).log_z_estimate
            self.assertLessEqual(tree, exact + 1e-9)
            self.assertGreaterEqual(tree, mf - 1e-9)

    def test_exact_on_trees(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            model = random_tree(rng, 6)
            result = tree_bound(model, max_iter=500, tol=1e-13)
            self.assertAlmostEqual(result.log_z_estimate, exact_logZ(model), delta=1e-4)

    def test_message_evaluation_matches_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            model = random_model(rng, 7, 0.7)
            tree = select_tree(model)
            params = TreeParams(dict((e, float(rng.standard_normal())) for e in tree.edges),
                                rng.standard_normal(7))
            a = evaluate_tree_bound(model, tree, params, strategy='enumerate')
            b = evaluate_tree_bound(model, tree, params, strategy='messages')
            self.assertAlmostEqual(a[0], b[0], places=9)
            np.testing.assert_allclose(a[1], b[1], atol=1e-9)
            np.testing.assert_allclose(a[2], b[2], atol=1e-9)

    def test_message_strategy_is_a_bound(self):
        model = random_model(np.random.default_rng(4), 8, 0.5)
        result = tree_bound(model, strategy='messages', max_iter=20)
        self.assertLessEqual(result.log_z_estimate, exact_logZ(model) + 1e-9)

    def test_warm_start(self):
        model = random_model(np.random.default_rng(9), 6, 0.6)
        first = tree_bound(model)
        second = tree_bound(model, init=first.warm_start, max_iter=5)
        self.assertGreaterEqual(second.log_z_estimate, first.log_z_estimate - 1e-12)
        self.assertLessEqual(second.iterations, 5)


class LoopyBPTest(TestCase):

    def test_exact_on_trees(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            model = random_tree(rng, 8)
            result = loopy_bp(model)
            self.assertTrue(result.converged)
            self.assertAlmostEqual(result.log_z_estimate, exact_logZ(model), delta=1e-6)
            moments = exact_moments(model)
            np.testing.assert_allclose(result.node_marginals, moments.node_marginals, atol=1e-6)
            np.testing.assert_allclose(result.edge_moments, moments.edge_moments, atol=1e-6)

    def test_sequential_schedule(self):
        model = random_tree(np.random.default_rng(8), 7)
        result = loopy_bp(model, schedule='sequential', damping=0.0)
        self.assertTrue(result.converged)
        self.assertAlmostEqual(result.log_z_estimate, exact_logZ(model), delta=1e-6)

    def test_no_edges(self):
        model = Model(3, [], [0.0, 1.0, -1.0])
        result = loopy_bp(model)
        self.assertTrue(result.converged)
        self.assertEqual(result.iterations, 0)
        self.assertAlmostEqual(result.log_z_estimate, exact_logZ(model), places=10)

    def test_nonconvergence_is_reported(self):
        model = Model(4, [(0, 1, 3.0), (1, 2, -3.0), (2, 3, 3.0), (0, 3, 3.0)], [0.0, 0.0, 0.0, 0.0])
        result = loopy_bp(model, max_iter=1)
        self.assertFalse(result.converged)
        self.assertEqual(result.iterations, 1)
        self.assertTrue(math.isfinite(result.log_z_estimate))

    def test_warm_start(self):
        model = random_model(np.random.default_rng(10), 6, 0.5, scale=0.5)
        first = loopy_bp(model)
        self.assertTrue(first.converged)
        second = loopy_bp(model, init=first.warm_start)
        self.assertTrue(second.converged)
        self.assertLessEqual(second.iterations, 2)
        self.assertAlmostEqual(first.log_z_estimate, second.log_z_estimate, places=7)

    def test_bethe_free_energy_of_fixed_point(self):
        model = random_model(np.random.default_rng(11), 6, 0.6, scale=0.5)
        result = loopy_bp(model, tol=1e-12, max_iter=5000)
        free_energy = bethe_free_energy(model, result.node_marginals, result.edge_moments)
        self.assertAlmostEqual(-free_energy, result.log_z_estimate, places=6)

    def test_bethe_free_energy_with_exact_tree_beliefs(self):
        model = random_tree(np.random.default_rng(12), 6)
        moments = exact_moments(model)
        free_energy = bethe_free_energy(model, moments.node_marginals, moments.edge_moments)
        self.assertAlmostEqual(-free_energy, exact_logZ(model), places=8)

    def test_inconsistent_beliefs(self):
        model = Model(2, [(0, 1, 1.0)])
        with self.assertRaises(InconsistentBeliefs):
            bethe_free_energy(model, [0.5, 0.5], [0.7])
        tables = np.array([[[0.25, 0.25], [0.25, 0.25]]])
        with self.assertRaises(InconsistentBeliefs):
            bethe_free_energy(model, [0.6, 0.5], tables)

    def test_unknown_schedule(self):
        with self.assertRaises(ValueError):
            loopy_bp(Model(2, [(0, 1, 1.0)]), schedule='random')


class PseudoLikelihoodTest(TestCase):

    def test_single_node(self):
        b = 0.3
        data = DataSet([[1], [0]], counts=[2, 1])
        expected = 2 * math.log(expit(b)) + math.log(1 - expit(b))
        self.assertAlmostEqual(pseudo_log_likelihood(Model(1, [], [b]), data), expected, places=12)

    def test_two_nodes(self):
        w, b0, b1 = 1.0, -0.5, 0.25
        model = Model(2, [(0, 1, w)], [b0, b1])
        expected = math.log(expit(b0)) + math.log(1 - expit(w + b1))
        self.assertAlmostEqual(pseudo_log_likelihood(model, DataSet([[1, 0]])), expected, places=12)

    def test_hidden_entries(self):
        with self.assertRaises(HiddenEntriesPresent):
            pseudo_log_likelihood(Model(2), DataSet([[1, HIDDEN]]))


if __name__ == '__main__':
    main()
