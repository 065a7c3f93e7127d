"""
Experiment suites and the ``bmposterior`` command line.
"""
from bmposterior.experiments.config import ExperimentConfig, build_config, read_config_file  # noqa: F401
from bmposterior.experiments.suites import SuiteResult, run_suite  # noqa: F401
