"""
Experiment configuration.

A config file is JSON (``.json``) or TOML (``.toml``) holding any subset of
the `ExperimentConfig` fields; command-line flags override file values.
Every output file carries `ExperimentConfig.config_hash`.
"""
import hashlib
import json
import logging
import os

from bmposterior.exceptions import InvalidConfiguration
from bmposterior.schema import Record, Integer, Double, String, Boolean, Array

try:
    import tomllib
except ImportError:
    tomllib = None

_logger = logging.getLogger(__name__)

EXPERIMENTS = ('heart', 'synthetic', 'semisup', 'flawed-joint-demo', 'custom')

_APPROXIMATORS = {
    'metropolis': ('exact', 'mean-field', 'tree', 'bethe'),
    'ratio-metropolis': ('exhaustive', 'gibbs'),
    'langevin': ('exact', 'brief', 'long-run', 'mean-field', 'tree', 'bethe'),
    'pseudo-metropolis': ('pseudo-likelihood',),
}

# Fields that change where or how fast a run goes, never what it computes.
_UNHASHED = ('output_dir', 'progress', 'workers')


class ExperimentConfig(Record):
    experiment = String(default='custom', choices=EXPERIMENTS)
    method = String(default='metropolis', choices=tuple(_APPROXIMATORS))
    approximator = String(default='exact')
    iterations = Integer(default=100000, minimum=1)
    thin = Integer(default=1, minimum=1)
    seed = Integer(default=0, minimum=0)
    output_dir = String(default='out')
    chain_format = String(default='jsonl', choices=('jsonl', 'avro'))
    workers = Integer(default=1, minimum=1)
    progress = Boolean(default=False)

    # Data
    data_path = String()
    points_path = String()
    n_nodes = Integer(default=100, minimum=1)
    n_edges = Integer(default=204, minimum=0)
    n_rows = Integer(default=100, minimum=1)
    weight_scale = Double(default=1.0, minimum=0.0, exclusive_minimum=True)

    # Prior and proposals
    weight_variance = Double(default=1.0, minimum=0.0, exclusive_minimum=True)
    bias_variance = Double(default=1.0, minimum=0.0, exclusive_minimum=True)
    proposal_kind = String(default='single', choices=('single', 'full'))
    proposal_std = Double(default=0.1, minimum=0.0, exclusive_minimum=True)
    schedule = String(default='cyclic', choices=('cyclic', 'random'))
    epsilon = Double(default=0.01, minimum=0.0, exclusive_minimum=True)
    brief_sweeps = Integer(default=1, minimum=1)
    n_inner_samples = Integer(default=100, minimum=1)
    inner_burn_in = Integer(default=100, minimum=0)

    # Loopy BP
    bp_policy = String(default='use', choices=('use', 'reject'))
    bp_damping = Double(default=0.5, minimum=0.0, maximum=0.99)
    bp_max_iter = Integer(default=500, minimum=1)
    bp_flag_fraction = Double(default=0.05, minimum=0.0, maximum=1.0)
    warm_start = Boolean(default=True)

    # Reports
    bins = Integer(default=50, minimum=2)
    f_tol = Double(default=0.1, minimum=0.0, exclusive_minimum=True)
    prior_samples = Integer(default=10000, minimum=1)

    # Semi-supervised
    toy = String(default='full', choices=('full', 'small'))
    sigma_iterations = Integer(default=10000, minimum=1)
    sigma_epsilon = Double(default=0.3, minimum=0.0, exclusive_minimum=True)
    sigma_proposal_std = Double(default=0.3, minimum=0.0, exclusive_minimum=True)
    sw_sweeps = Integer(default=5, minimum=1)
    box_lower = Double(default=-4.0)
    box_upper = Double(default=4.0)
    prediction_stride = Integer(default=100, minimum=1)
    grid_points = Integer(default=32, minimum=2)

    # Flawed joint model demo
    n_values = Array(Integer(minimum=0), default=[0, 1, 10, 100])
    demo_range = Double(default=6.0, minimum=0.0, exclusive_minimum=True)
    demo_points = Integer(default=241, minimum=2)

    def validate(self):
        """
        Cross-field checks, run before any compute.
        """
        if self.approximator not in _APPROXIMATORS[self.method]:
            raise InvalidConfiguration("Approximator '%s' does not fit method '%s'. Expected one of: %s"
                                       % (self.approximator, self.method, ', '.join(_APPROXIMATORS[self.method])))
        if self.n_edges > self.n_nodes * (self.n_nodes - 1) // 2:
            raise InvalidConfiguration("%d edges do not fit on %d nodes" % (self.n_edges, self.n_nodes))
        if not self.box_lower < self.box_upper:
            raise InvalidConfiguration("box_lower must be below box_upper")
        if self.iterations < self.thin:
            raise InvalidConfiguration("iterations must be at least thin")
        for path in (self.data_path, self.points_path):
            if path is not None and not os.path.isfile(path):
                raise InvalidConfiguration("File %s does not exist" % path)
        return self

    def canonical_json(self):
        values = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        return json.dumps(values, sort_keys=True, separators=(',', ':'), allow_nan=False)

    def config_hash(self):
        """
        SHA-256 of the canonical JSON of every field that affects results.
        """
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()


def read_config_file(path):
    """
    Field values from a JSON or TOML file.
    """
    _, ext = os.path.splitext(path)
    try:
        if ext == '.toml':
            if tomllib is None:
                raise InvalidConfiguration("TOML configs need Python 3.11 or newer")
            with open(path, 'rb') as fo:
                values = tomllib.load(fo)
        else:
            with open(path) as fo:
                values = json.load(fo)
    except OSError as e:
        raise InvalidConfiguration("Cannot read config %s: %s" % (path, e))
    except ValueError as e:
        raise InvalidConfiguration("Cannot parse config %s: %s" % (path, e))
    if not isinstance(values, dict):
        raise InvalidConfiguration("Config %s must hold a table of fields" % path)
    return values


def build_config(file_values=None, **overrides):
    """
    Merge file values with overrides (None overrides are ignored) into a
    validated `ExperimentConfig`.
    """
    values = dict(file_values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = ExperimentConfig(**values)
    except (AttributeError, TypeError, ValueError) as e:
        raise InvalidConfiguration(str(e))
    return config.validate()
