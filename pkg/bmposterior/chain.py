"""
Parameter chains and their persistence.

A chain file is JSON lines: a `ChainHeader` line followed by one
`ChainRecord` per stored sample. The same records can be written as an
Avro container (``pip install 'bmposterior[avro]'``).
"""
import json
import logging

import numpy as np

from bmposterior.exceptions import EmptyInput, LayoutMismatch
from bmposterior.model import Layout, ParamVector
from bmposterior.schema import Record, Integer, Double, String, Boolean, Array, JsonSchema, AvroSchema

_logger = logging.getLogger(__name__)


class ChainHeader(Record):
    method = String(required=True)
    approximator = String()
    seed = Integer()
    config_hash = String()
    k = Integer(required=True, minimum=1)
    pairs = Array(Array(Integer()))
    names = Array(String())
    step_size = Double()
    n_steps = Integer(minimum=0)
    accept_count = Integer(minimum=0)
    propose_count = Integer(minimum=0)
    nonconverged_count = Integer(minimum=0)


class ChainRecord(Record):
    step = Integer(required=True, minimum=0)
    params = Array(Double(), required=True)
    accepted = Boolean()
    log_z = Double()
    converged = Boolean()


class Chain:
    """
    Ordered parameter samples with acceptance and per-step diagnostics.

    Attributes
    ----------

    layout:
        Coordinate layout of every sample
    samples:
        (n_samples, layout.size) array, after thinning
    steps:
        Iteration index of each stored sample
    diagnostics:
        One dict per stored sample with ``accepted``, ``log_z`` and
        ``converged`` (the last two None when the method has no log Z)
    """

    def __init__(self, layout, samples, steps=None, diagnostics=None, accept_count=0, propose_count=0,
                 nonconverged_count=0, method='', approximator=None, seed=None, step_size=None, config_hash=None,
                 names=None):
        samples = np.array(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[1] != layout.size:
            raise LayoutMismatch("Samples must have %d columns" % layout.size)
        if accept_count > propose_count:
            raise ValueError("accept_count cannot exceed propose_count")
        self.layout = layout
        self.samples = samples
        self.steps = np.arange(1, samples.shape[0] + 1) if steps is None else np.asarray(steps, dtype=np.int64)
        self.diagnostics = diagnostics if diagnostics is not None else \
            [{'accepted': None, 'log_z': None, 'converged': None} for _ in range(samples.shape[0])]
        self.accept_count = int(accept_count)
        self.propose_count = int(propose_count)
        self.nonconverged_count = int(nonconverged_count)
        self.method = method
        self.approximator = approximator
        self.seed = seed
        self.step_size = step_size
        self.config_hash = config_hash
        self.names = list(names) if names is not None else layout.names()

    def __len__(self):
        return self.samples.shape[0]

    @property
    def acceptance_rate(self):
        return self.accept_count / self.propose_count if self.propose_count else float('nan')

    @property
    def nonconverged_fraction(self):
        return self.nonconverged_count / self.propose_count if self.propose_count else 0.0

    def param(self, n):
        return ParamVector(self.layout, self.samples[n])

    def last(self):
        if not len(self):
            raise EmptyInput("Chain has no samples")
        return self.param(len(self) - 1)

    def header(self):
        return ChainHeader(method=self.method, approximator=self.approximator,
                           seed=None if self.seed is None else int(self.seed), config_hash=self.config_hash,
                           k=self.layout.k, pairs=[list(p) for p in self.layout.pairs], names=self.names,
                           step_size=self.step_size, n_steps=self.propose_count, accept_count=self.accept_count,
                           propose_count=self.propose_count, nonconverged_count=self.nonconverged_count)

    def records(self):
        for step, values, diag in zip(self.steps.tolist(), self.samples, self.diagnostics):
            yield ChainRecord(step=step, params=values.tolist(), accepted=diag.get('accepted'),
                              log_z=diag.get('log_z'), converged=diag.get('converged'))

    def to_jsonl(self, path):
        header = JsonSchema(ChainHeader)
        record = JsonSchema(ChainRecord)
        with open(path, 'wb') as fo:
            fo.write(header.encode(self.header()) + b'\n')
            for r in self.records():
                fo.write(record.encode(r) + b'\n')
        _logger.debug('Wrote %d samples to %s', len(self), path)

    @classmethod
    def from_jsonl(cls, path):
        header_codec = JsonSchema(ChainHeader)
        record_codec = JsonSchema(ChainRecord)
        with open(path, 'rb') as fo:
            lines = [line for line in fo.read().splitlines() if line.strip()]
        if not lines:
            raise EmptyInput("Chain file %s is empty" % path)
        header = header_codec.decode(lines[0])
        records = [record_codec.decode(line) for line in lines[1:]]
        return cls._from_parts(header, records)

    @classmethod
    def _from_parts(cls, header, records):
        layout = Layout(header.k, [tuple(p) for p in header.pairs])
        samples = np.array([r.params for r in records], dtype=float).reshape(len(records), layout.size)
        diagnostics = [{'accepted': r.accepted, 'log_z': r.log_z, 'converged': r.converged} for r in records]
        return cls(layout, samples, [r.step for r in records], diagnostics, header.accept_count,
                   header.propose_count, header.nonconverged_count, header.method, header.approximator,
                   header.seed, header.step_size, header.config_hash, header.names)

    def to_avro(self, path):
        codec = AvroSchema(ChainRecord)
        metadata = {'bmposterior.header': JsonSchema(ChainHeader).encode(self.header()).decode('utf-8')}
        with open(path, 'wb') as fo:
            codec.write_container(fo, self.records(), metadata)

    @classmethod
    def from_avro(cls, path):
        import fastavro
        codec = AvroSchema(ChainRecord)
        with open(path, 'rb') as fo:
            meta = fastavro.reader(fo).metadata
            header = JsonSchema(ChainHeader).decode(meta['bmposterior.header'])
        with open(path, 'rb') as fo:
            records = list(codec.read_container(fo))
        return cls._from_parts(header, records)

    def summary(self):
        return json.loads(JsonSchema(ChainHeader).encode(self.header()))

    def __repr__(self):
        return 'Chain(method=%r, n_samples=%d, acceptance=%.3f)' % (self.method, len(self), self.acceptance_rate)
