#!/usr/bin/env python3

import json
import logging
import os
import tempfile
from unittest import TestCase, main, skipIf, skipUnless

import numpy as np
from scipy.stats import norm

from bmposterior.chain import Chain
from bmposterior.exact import GridAxis
from bmposterior.exceptions import InvalidConfiguration, MalformedData, EmptyInput
from bmposterior.experiments import build_config, read_config_file, run_suite
from bmposterior.experiments.cli import main as cli_main, build_parser
from bmposterior.experiments.config import tomllib
from bmposterior.experiments.data import load_contingency, write_contingency, gen_synthetic, heart_standin, \
    HEART_CASES
from bmposterior.experiments.output import OutputBundle
from bmposterior.experiments.plots import emit_histogram_svg, step_outline, histogram_figure
from bmposterior.experiments.suites import HEART_CHAINS, OVERLAP_THRESHOLD, implied_prior, run_chains
from bmposterior.model import DataSet, GaussianPrior, fully_connected_layout
from bmposterior.samplers import overlap_coefficients

logging.basicConfig(level=logging.INFO,
                    format='%(asctime)s %(levelname)-5s %(message)s')

# Full-length acceptance runs take minutes to half an hour
LONG_RUNS = bool(os.environ.get('BMPOSTERIOR_LONG_RUNS'))


def read_tree(root):
    files = {}
    for directory, _, names in os.walk(root):
        for name in names:
            path = os.path.join(directory, name)
            with open(path, 'rb') as fo:
                files[os.path.relpath(path, root)] = fo.read()
    return files


class ConfigTest(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def test_defaults(self):
        config = build_config()
        self.assertEqual(config.experiment, 'custom')
        self.assertEqual(config.iterations, 100000)
        self.assertEqual(config.proposal_std, 0.1)
        self.assertEqual(config.n_values, [0, 1, 10, 100])

    def test_overrides_win(self):
        config = build_config({'seed': 3, 'iterations': 50}, seed=7, iterations=None)
        self.assertEqual(config.seed, 7)
        self.assertEqual(config.iterations, 50)

    def test_hash_ignores_where_results_go(self):
        a = build_config(output_dir='a', workers=1)
        b = build_config(output_dir='b', workers=4, progress=True)
        self.assertEqual(a.config_hash(), b.config_hash())
        self.assertNotEqual(a.config_hash(), build_config(seed=1).config_hash())
        self.assertEqual(len(a.config_hash()), 64)

    def test_invalid(self):
        with self.assertRaises(InvalidConfiguration):
            build_config(experiment='weather')
        with self.assertRaises(InvalidConfiguration):
            build_config(unknown_field=1)
        with self.assertRaises(InvalidConfiguration):
            build_config(method='metropolis', approximator='brief')
        with self.assertRaises(InvalidConfiguration):
            build_config(n_nodes=4, n_edges=7)
        with self.assertRaises(InvalidConfiguration):
            build_config(box_lower=1.0, box_upper=1.0)
        with self.assertRaises(InvalidConfiguration):
            build_config(iterations=0)
        with self.assertRaises(InvalidConfiguration):
            build_config(data_path=os.path.join(self.tmp.name, 'missing.csv'))

    def test_json_file(self):
        path = os.path.join(self.tmp.name, 'config.json')
        with open(path, 'w') as fo:
            json.dump({'experiment': 'heart', 'seed': 5}, fo)
        config = build_config(read_config_file(path))
        self.assertEqual(config.experiment, 'heart')
        self.assertEqual(config.seed, 5)

    @skipIf(tomllib is None, 'TOML needs Python 3.11')
    def test_toml_file(self):
        path = os.path.join(self.tmp.name, 'config.toml')
        with open(path, 'w') as fo:
            fo.write('experiment = "semisup"\nsigma_iterations = 20\nn_values = [0, 2]\n')
        config = build_config(read_config_file(path))
        self.assertEqual(config.experiment, 'semisup')
        self.assertEqual(config.sigma_iterations, 20)
        self.assertEqual(config.n_values, [0, 2])

    def test_unreadable_files(self):
        path = os.path.join(self.tmp.name, 'broken.json')
        with open(path, 'w') as fo:
            fo.write('{not json')
        with self.assertRaises(InvalidConfiguration):
            read_config_file(path)
        with open(path, 'w') as fo:
            fo.write('[1, 2]')
        with self.assertRaises(InvalidConfiguration):
            read_config_file(path)
        with self.assertRaises(InvalidConfiguration):
            read_config_file(os.path.join(self.tmp.name, 'missing.json'))


class DataTest(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        path = os.path.join(self.tmp.name, 'table.csv')
        with open(path, 'w') as fo:
            fo.write(text)
        return path

    def test_load_contingency(self):
        path = self.write('# heart table\nA,B,C,D,E,F,count\n0,1,0,0,1,1,12\n1,1,1,0,0,0,3\n0,1,0,0,1,1,2\n')
        data = load_contingency(path)
        self.assertEqual(data.k, 6)
        self.assertEqual(data.n_rows, 17)
        self.assertEqual(data.n_distinct, 2)
        self.assertEqual(sorted(data.counts.tolist()), [3, 14])

    def test_single_row(self):
        data = load_contingency(self.write('1,1,1,1,1,1,5\n'))
        self.assertEqual(data.n_rows, 5)
        self.assertEqual(data.n_distinct, 1)

    def test_malformed(self):
        with self.assertRaises(MalformedData):
            load_contingency(self.write('0,1,0,0,1,1,0,4\n'))
        with self.assertRaises(MalformedData):
            load_contingency(self.write('0,1,0,0,1,2,4\n'))
        with self.assertRaises(MalformedData):
            load_contingency(self.write('0,1,0,0,1,1,0\n'))
        with self.assertRaises(MalformedData):
            load_contingency(self.write('0,1,0,0,1,1,many\n'))
        with self.assertRaises(MalformedData):
            load_contingency(self.write('# nothing here\n'))

    def test_free_width(self):
        data = load_contingency(self.write('1,0,1,2\n0,0,1,1\n'), n_columns=None)
        self.assertEqual(data.k, 3)
        self.assertEqual(data.n_rows, 3)

    def test_write_round_trip(self):
        data = DataSet([[1, 0, 1], [0, 0, 1], [1, 0, 1]], counts=[2, 1, 4])
        path = os.path.join(self.tmp.name, 'out.csv')
        write_contingency(path, data, ['seed=1'])
        read = load_contingency(path, n_columns=3)
        self.assertEqual(read.rows.tolist(), data.merged().rows.tolist())
        self.assertEqual(read.counts.tolist(), data.merged().counts.tolist())

    def test_gen_synthetic(self):
        system = gen_synthetic(8, 10, seed=4, n_rows=30)
        self.assertEqual(system.model.layout.size, 18)
        self.assertEqual(system.data.n_rows, 30)
        self.assertIsNone(system.note)
        again = gen_synthetic(8, 10, seed=4, n_rows=30)
        self.assertEqual(system.model, again.model)
        self.assertEqual(system.data.rows.tolist(), again.data.rows.tolist())
        with self.assertRaises(InvalidConfiguration):
            gen_synthetic(4, 7, seed=0)

    def test_gen_synthetic_beyond_the_cap(self):
        system = gen_synthetic(25, 40, seed=5, n_rows=5)
        self.assertEqual(system.model.layout.size, 65)
        self.assertEqual(system.data.n_rows, 5)
        self.assertIn('Gibbs', system.note)

    def test_heart_standin(self):
        system = heart_standin()
        self.assertEqual(system.data.k, 6)
        self.assertEqual(system.data.n_rows, HEART_CASES)
        self.assertIn('stand-in', system.note)
        self.assertEqual(heart_standin().data.counts.tolist(), system.data.counts.tolist())


class PlotTest(TestCase):

    def test_step_outline(self):
        xs, ys = step_outline([0.0, 1.0, 2.0, 3.0], [4, 5, 6])
        self.assertEqual(xs.tolist(), [0.0, 1.0, 1.0, 2.0, 2.0, 3.0])
        self.assertEqual(ys.tolist(), [4.0, 4.0, 5.0, 5.0, 6.0, 6.0])

    def test_svg_is_deterministic(self):
        histograms = [('exact', np.linspace(-1, 1, 6), [1, 4, 6, 3, 1]),
                      ('loopy', np.linspace(-1, 1, 6), [2, 3, 5, 4, 1])]
        with tempfile.TemporaryDirectory() as tmp:
            outputs = []
            for name in ('a.svg', 'b.svg'):
                path = os.path.join(tmp, name)
                emit_histogram_svg(histograms, path, title='W_AB', markers=(0.25,))
                with open(path, 'rb') as fo:
                    outputs.append(fo.read())
        self.assertEqual(outputs[0], outputs[1])
        self.assertIn(b'<svg', outputs[0])

    def test_nothing_to_plot(self):
        with self.assertRaises(EmptyInput):
            histogram_figure([])


class OutputBundleTest(TestCase):

    def test_files_and_manifest(self):
        with tempfile.TemporaryDirectory() as tmp:
            bundle = OutputBundle(build_config(output_dir=tmp, seed=2))
            bundle.write_csv('sub/table.csv', ['a', 'b'], [[1, 0.5]])
            bundle.metric('good', 0.25)
            bundle.metric('bad', float('nan'))
            bundle.note('substituted')
            bundle.note('substituted')
            manifest = bundle.finish()
            with open(os.path.join(tmp, 'sub', 'table.csv')) as fo:
                lines = fo.read().splitlines()
            with open(os.path.join(tmp, 'run.json')) as fo:
                run = json.load(fo)
        self.assertEqual(lines[0], '# config_hash=%s' % bundle.config_hash)
        self.assertEqual(lines[1], '# seed=2')
        self.assertEqual(lines[2:], ['a,b', '1,0.5'])
        self.assertEqual(manifest.metrics, {'good': 0.25})
        self.assertEqual(manifest.substitution_notes, ['substituted'])
        self.assertEqual(run['files'], ['sub/table.csv'])
        self.assertEqual(run['config']['seed'], 2)


class SuiteTest(TestCase):

    def run_twice(self, **values):
        outputs = []
        results = []
        for _ in range(2):
            with tempfile.TemporaryDirectory() as tmp:
                results.append(run_suite(build_config(output_dir=tmp, **values)))
                outputs.append(read_tree(tmp))
        self.assertEqual(outputs[0], outputs[1])
        return results[0], outputs[0]

    def test_heart(self):
        result, files = self.run_twice(experiment='heart', iterations=60, bins=10, seed=1)
        self.assertEqual(list(result.chains), ['exact', 'exact-repeat', 'mean-field', 'tree', 'loopy',
                                               'brief-langevin'])
        histograms = [name for name in files if name.startswith('histograms' + os.sep)]
        self.assertEqual(len(histograms), 21)
        self.assertIn(os.path.join('histograms', 'W_AB.csv'), files)
        self.assertIn(os.path.join('plots', 'b_F.svg'), files)
        self.assertIn('overlap.csv', files)
        self.assertEqual(len(result.manifest.substitution_notes), 1)
        self.assertIn('overlap_fraction.exact-repeat', result.manifest.metrics)
        for key, value in result.manifest.metrics.items():
            if key.startswith(('overlap_fraction.', 'acceptance.', 'bp_nonconverged.')):
                self.assertTrue(0.0 <= value <= 1.0, key)
            if key.startswith(('max_variance_ratio.', 'max_mean_shift_sd.')):
                self.assertGreaterEqual(value, 0.0, key)
        self.assertIn('max_mean_shift_sd.loopy', result.manifest.metrics)
        header = json.loads(files[os.path.join('chains', 'loopy.jsonl')].splitlines()[0])
        self.assertEqual(header['approximator'], 'bethe')
        self.assertEqual(header['config_hash'], result.manifest.config_hash)
        self.assertEqual(header['names'][0], 'W_AB')

    def test_heart_with_table(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'heart.csv')
            with open(path, 'w') as fo:
                fo.write('0,0,0,0,0,0,10\n1,1,0,0,1,0,4\n1,1,1,1,1,1,2\n')
            result = run_suite(build_config(experiment='heart', iterations=20, bins=5, data_path=path,
                                            output_dir=os.path.join(tmp, 'out')))
        self.assertEqual(result.manifest.substitution_notes, [])
        self.assertEqual(result.manifest.metrics['n_cases'], 16.0)

    def test_synthetic(self):
        result, files = self.run_twice(experiment='synthetic', n_nodes=8, n_edges=10, n_rows=30, iterations=50,
                                       prior_samples=200, bins=8, seed=2)
        self.assertEqual(list(result.chains), ['loopy', 'brief-langevin'])
        for name in ('true_model.json', 'f_curves.csv', 'f_curve_prior.csv', 'f_curve_brief_langevin.csv',
                     'true_values.csv', os.path.join('plots', 'f_curves.svg')):
            self.assertIn(name, files)
        self.assertIn('median_f.prior', result.manifest.metrics)
        rows = files['f_curves.csv'].decode('utf-8').splitlines()
        self.assertEqual(rows[2], 'rank,loopy,brief-langevin,prior')
        self.assertEqual(len(rows), 3 + 18)

    def test_semisup(self):
        result, files = self.run_twice(experiment='semisup', toy='small', sigma_iterations=20, grid_points=4,
                                       prediction_stride=5, sw_sweeps=2, seed=3)
        for name in ('points.csv', 'sigma_langevin.csv', 'sigma_loopy.csv', 'predictions.csv', 'sigma_grid.csv',
                     os.path.join('plots', 'sigma.svg')):
            self.assertIn(name, files)
        metrics = result.manifest.metrics
        self.assertIn('tv_to_exact.langevin', metrics)
        self.assertIn('corner.exact', metrics)
        for label in ('langevin', 'loopy', 'exact'):
            regions = [metrics['%s.%s' % (region, label)] for region in ('corner', 'arm_x', 'arm_y')]
            self.assertTrue(all(v >= 0.0 for v in regions))
            self.assertLessEqual(sum(regions), 1.0 + 1e-9)
        for label in ('langevin', 'loopy'):
            self.assertTrue(0.0 <= metrics['tv_to_exact.%s' % label] <= 1.0)
        self.assertEqual(metrics['acceptance.langevin'], 1.0)
        predictions = files['predictions.csv'].decode('utf-8').splitlines()
        self.assertEqual(predictions[2], 'x,y,label,p_class1')
        self.assertEqual(len(predictions), 3 + 12)
        self.assertTrue(any(',?,' in line for line in predictions))

    def test_flawed_joint_demo(self):
        result, files = self.run_twice(experiment='flawed-joint-demo', n_values=[0, 1, 10, 100], seed=0)
        argmax = [result.manifest.metrics['argmax_w.N=%d' % n] for n in (0, 1, 10, 100)]
        self.assertAlmostEqual(argmax[0], 0.0)
        self.assertTrue(all(a <= b for a, b in zip(argmax, argmax[1:])))
        self.assertGreater(argmax[-1], argmax[0])
        self.assertIn('implied_prior.csv', files)

    def test_implied_prior_without_data_is_the_prior(self):
        axis = GridAxis(-6.0, 6.0, 241)
        density = implied_prior(GaussianPrior(), 0, axis)
        np.testing.assert_allclose(density, norm.pdf(axis.points()), atol=1e-3)

    def test_custom_with_table_and_avro(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'table.csv')
            with open(path, 'w') as fo:
                fo.write('s0,s1,s2,count\n1,0,1,3\n0,1,1,2\n1,1,1,1\n')
            out = os.path.join(tmp, 'out')
            result = run_suite(build_config(experiment='custom', method='langevin', approximator='brief',
                                            iterations=30, bins=5, data_path=path, chain_format='avro',
                                            output_dir=out))
            chain = Chain.from_avro(os.path.join(out, 'chains', 'langevin-brief.avro'))
        self.assertEqual(len(chain), 30)
        self.assertEqual(chain.method, 'langevin')
        self.assertEqual(result.manifest.metrics['acceptance.langevin-brief'], 1.0)

    def test_custom_generated(self):
        result, files = self.run_twice(experiment='custom', method='pseudo-metropolis',
                                       approximator='pseudo-likelihood', n_nodes=5, n_edges=4, n_rows=20,
                                       iterations=40, bins=5)
        self.assertIn('f_curve.csv', files)
        self.assertIn('median_f', result.manifest.metrics)

    def test_rejects_other_objects(self):
        with self.assertRaises(InvalidConfiguration):
            run_suite({'experiment': 'heart'})


@skipUnless(LONG_RUNS, 'set BMPOSTERIOR_LONG_RUNS=1 for full-length acceptance runs')
class AcceptanceTest(TestCase):

    def test_heart_approximations_match_exact(self):
        config = build_config(experiment='heart', iterations=100000, seed=11)
        data = heart_standin().data
        specs = [spec for spec in HEART_CHAINS if spec[0] in ('exact', 'mean-field', 'loopy', 'brief-langevin')]
        chains = run_chains(config, specs, data, fully_connected_layout(data.k))
        exact = chains['exact']
        for label in ('loopy', 'brief-langevin'):
            overlaps = overlap_coefficients(exact, chains[label], config.bins)
            self.assertGreaterEqual(np.mean(overlaps >= OVERLAP_THRESHOLD), 0.8, label)
        # Mean-field widening is reported, not required
        ratio = chains['mean-field'].samples.var(axis=0) / exact.samples.var(axis=0)
        logging.info('mean-field max variance ratio %.2f', ratio.max())

    def test_synthetic_brief_langevin_beats_the_prior(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = run_suite(build_config(experiment='synthetic', output_dir=tmp, seed=5))
        self.assertGreaterEqual(result.manifest.metrics['median_f_ratio.brief-langevin'], 2.0)

    def test_semisup_langevin_matches_enumeration(self):
        with tempfile.TemporaryDirectory() as tmp:
            result = run_suite(build_config(experiment='semisup', toy='small', output_dir=tmp, seed=0))
        metrics = result.manifest.metrics
        self.assertLess(metrics['tv_to_exact.langevin'], 0.15)
        self.assertLess(metrics['corner.langevin'], 0.05)
        self.assertGreater(metrics['arm_x.langevin'], 0.10)
        self.assertGreater(metrics['arm_y.langevin'], 0.10)


class CliTest(TestCase):

    def test_flawed_demo(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(cli_main(['flawed-demo', '--out', tmp, '--log-level', 'error']), 0)
            self.assertTrue(os.path.isfile(os.path.join(tmp, 'run.json')))

    def test_invalid_configuration(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(cli_main(['custom', '--method', 'metropolis', '--approximator', 'brief', '--out', tmp,
                                       '--log-level', 'error']), 2)
            self.assertEqual(cli_main(['heart', '--data', os.path.join(tmp, 'missing.csv'), '--out', tmp,
                                       '--log-level', 'error']), 2)

    def test_library_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bad.csv')
            with open(path, 'w') as fo:
                fo.write('0,1,0,0,1,1,0,4\n')
            self.assertEqual(cli_main(['heart', '--data', path, '--out', os.path.join(tmp, 'out'),
                                       '--log-level', 'error']), 1)

    def test_parser(self):
        args = build_parser().parse_args(['semisup', '--seed', '3', '--iters', '10', '--format', 'avro'])
        self.assertEqual(args.command, 'semisup')
        self.assertEqual(args.seed, 3)
        self.assertEqual(args.iterations, 10)
        self.assertEqual(args.chain_format, 'avro')
        self.assertIsNone(args.progress)
        with self.assertRaises(SystemExit):
            build_parser().parse_args(['weather'])


if __name__ == '__main__':
    main()
