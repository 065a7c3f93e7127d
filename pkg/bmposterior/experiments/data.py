"""
Data sets for the experiment suites: contingency tables, random synthetic
systems and the stand-in for the six-variable heart-disease table.
"""
import csv
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bmposterior.exact import DEFAULT_CAP, exact_sample
from bmposterior.exceptions import MalformedData, InvalidConfiguration
from bmposterior.model import DataSet, Model
from bmposterior.states import draw_training_states

_logger = logging.getLogger(__name__)

HEART_NODE_NAMES = ('A', 'B', 'C', 'D', 'E', 'F')
HEART_CASES = 1841
HEART_SEED = 1841


def _is_number(token):
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_contingency(path, n_columns=6):
    """
    Read a contingency table: ``n_columns`` binary columns then a count.

    Lines starting with ``#`` are skipped, as is a non-numeric header line.
    Duplicate patterns are merged. ``n_columns=None`` takes the width from
    the first row.
    """
    rows, counts = [], []
    with open(path, newline='') as fo:
        reader = csv.reader(line for line in fo if line.strip() and not line.lstrip().startswith('#'))
        for line, row in enumerate(reader, start=1):
            row = [token.strip() for token in row]
            if line == 1 and not all(_is_number(t) for t in row):
                continue
            if n_columns is None:
                n_columns = len(row) - 1
            if len(row) != n_columns + 1:
                raise MalformedData("Row %d: expected %d binary columns and a count, got %d fields"
                                    % (line, n_columns, len(row)))
            if any(t not in ('0', '1') for t in row[:-1]):
                raise MalformedData("Row %d: cells must be 0 or 1" % line)
            try:
                count = int(row[-1])
            except ValueError:
                raise MalformedData("Row %d: count must be an integer" % line)
            if count < 1:
                raise MalformedData("Row %d: count must be positive" % line)
            rows.append([int(t) for t in row[:-1]])
            counts.append(count)
    if not rows:
        raise MalformedData("No rows in %s" % path)
    data = DataSet(rows, counts).merged()
    _logger.info('Loaded %d cases in %d patterns from %s', data.n_rows, data.n_distinct, path)
    return data


def write_contingency(path, data, header_lines=()):
    merged = data.merged()
    with open(path, 'w', newline='') as fo:
        for line in header_lines:
            fo.write('# %s\n' % line)
        writer = csv.writer(fo, lineterminator='\n')
        writer.writerow(['s%d' % i for i in range(data.k)] + ['count'])
        for row, count in zip(merged.rows.tolist(), merged.counts.tolist()):
            writer.writerow(row + [count])


@dataclass(frozen=True)
class SyntheticSystem:
    """
    A generated model, the data drawn from it, and how the data was drawn.
    """
    model: Model
    data: DataSet
    note: Optional[str] = None


def gen_synthetic(k, n_edges, seed, n_rows=100, weight_scale=1.0, cap=DEFAULT_CAP, progress=False):
    """
    Random system with ``n_edges`` distinct uniformly chosen edges, weights
    and biases ``weight_scale * N(0, 1)``, and ``n_rows`` training cases.
    """
    n_pairs = k * (k - 1) // 2
    if not 0 <= n_edges <= n_pairs:
        raise InvalidConfiguration("%d edges do not fit on %d nodes" % (n_edges, k))
    rng = np.random.default_rng(seed)
    i, j = np.triu_indices(k, 1)
    chosen = np.sort(rng.choice(n_pairs, size=n_edges, replace=False))
    weights = weight_scale * rng.standard_normal(n_edges)
    biases = weight_scale * rng.standard_normal(k)
    model = Model(k, zip(i[chosen].tolist(), j[chosen].tolist(), weights.tolist()), biases)
    states, note = draw_training_states(model, n_rows, rng, cap, progress=progress)
    return SyntheticSystem(model, DataSet(states).merged(), note)


def heart_standin(seed=HEART_SEED, n_cases=HEART_CASES):
    """
    Synthetic six-variable table of ``n_cases`` cases drawn exactly from a
    fixed, fully connected model with weak weights.

    Weights are ``0.25 * N(0, 1)``: at twice that scale the Bethe
    approximation biases loopy Metropolis means by more than a posterior
    standard deviation at this sample size.
    """
    rng = np.random.default_rng(seed)
    k = len(HEART_NODE_NAMES)
    i, j = np.triu_indices(k, 1)
    weights = 0.25 * rng.standard_normal(i.size)
    biases = 0.5 * rng.standard_normal(k) - 0.5
    model = Model(k, zip(i.tolist(), j.tolist(), weights.tolist()), biases)
    data = DataSet(exact_sample(model, rng, n_cases)).merged()
    note = ('heart-disease table not supplied: using a synthetic stand-in of %d cases drawn from a fixed '
            '6-variable model (seed %d)' % (n_cases, seed))
    return SyntheticSystem(model, data, note)
