"""
Result bundles.

Every CSV starts with ``# config_hash=...`` and ``# seed=...`` comment
lines; chains record the hash in their header; ``run.json`` lists the
config, versions, substitution notes, flags and every file written.
Nothing time-dependent is written, so reruns are byte-identical.
"""
import csv
import logging
import os

import matplotlib
import numpy as np
import scipy

from bmposterior.__about__ import __version__
from bmposterior.experiments.config import ExperimentConfig
from bmposterior.experiments.plots import write_svg
from bmposterior.schema import Record, String, Integer, Double, Array, Map, JsonSchema

_logger = logging.getLogger(__name__)


class RunManifest(Record):
    experiment = String(required=True)
    config = ExperimentConfig()
    config_hash = String(required=True)
    seed = Integer(required=True)
    versions = Map(String())
    substitution_notes = Array(String())
    flags = Array(String())
    metrics = Map(Double())
    files = Array(String())


def versions():
    return {
        'bmposterior': __version__,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'matplotlib': matplotlib.__version__,
    }


def _format(value):
    if isinstance(value, (float, np.floating)):
        return '%.10g' % value
    return str(value)


class OutputBundle:
    """
    Output directory of one suite run.

    Parameters
    ----------

    config: ExperimentConfig
        Its ``output_dir`` is created when missing
    """

    def __init__(self, config):
        self.config = config
        self.root = config.output_dir
        self.config_hash = config.config_hash()
        self.files = []
        self.notes = []
        self.flags = []
        self.metrics = {}
        os.makedirs(self.root, exist_ok=True)

    def path(self, name):
        full = os.path.join(self.root, name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return full

    def header_lines(self):
        return ['config_hash=%s' % self.config_hash, 'seed=%d' % self.config.seed]

    def write_csv(self, name, columns, rows):
        """
        Write ``rows`` (iterable of sequences) under a header of ``columns``.
        """
        with open(self.path(name), 'w', newline='') as fo:
            for line in self.header_lines():
                fo.write('# %s\n' % line)
            writer = csv.writer(fo, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format(v) for v in row])
        _logger.debug('Wrote %s', name)

    def write_chain(self, chain, name):
        """
        Persist a chain as JSON lines or Avro, per ``chain_format``.
        """
        chain.config_hash = self.config_hash
        if self.config.chain_format == 'avro':
            chain.to_avro(self.path(name + '.avro'))
        else:
            chain.to_jsonl(self.path(name + '.jsonl'))

    def write_svg(self, fig, name):
        write_svg(fig, self.path(name))

    def write_text(self, name, text):
        with open(self.path(name), 'w') as fo:
            fo.write(text)

    def note(self, text):
        if text and text not in self.notes:
            _logger.info(text)
            self.notes.append(text)

    def flag(self, text):
        _logger.warning(text)
        self.flags.append(text)

    def metric(self, name, value):
        value = float(value)
        if not np.isfinite(value):
            _logger.debug('Metric %s is not finite, left out', name)
            return
        self.metrics[name] = value

    def manifest(self):
        return RunManifest(experiment=self.config.experiment, config=self.config, config_hash=self.config_hash,
                           seed=self.config.seed, versions=versions(), substitution_notes=self.notes,
                           flags=self.flags, metrics=dict(sorted(self.metrics.items())),
                           files=sorted(self.files))

    def finish(self):
        """
        Write ``run.json`` and return the manifest.
        """
        manifest = self.manifest()
        with open(os.path.join(self.root, 'run.json'), 'wb') as fo:
            fo.write(JsonSchema(RunManifest, indent=2).encode(manifest) + b'\n')
        _logger.info('Wrote %d files to %s', len(self.files), self.root)
        return manifest
