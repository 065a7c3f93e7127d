"""
SVG figures for the suites.

Figures are built on ``matplotlib.figure.Figure`` directly (no pyplot
state) and saved with a fixed hash salt and no date, so identical input
gives identical bytes.
"""
import io

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from bmposterior.exceptions import EmptyInput

_SVG_RC = {'svg.hashsalt': 'bmposterior', 'svg.fonttype': 'none', 'path.simplify': False}


def step_outline(edges, counts):
    """
    Vertices of a histogram outline: two per bin, at both bin edges.
    """
    edges = np.asarray(edges, dtype=float)
    counts = np.asarray(counts, dtype=float)
    xs = np.repeat(edges, 2)[1:-1]
    ys = np.repeat(counts, 2)
    return xs, ys


def histogram_figure(histograms, title=None, markers=(), xlabel=None):
    """
    Overlay of histogram outlines, one line per entry.

    Parameters
    ----------

    histograms: sequence of (label, edges, counts)
    title: str, optional
    markers: sequence of float
        Vertical reference lines, e.g. the true parameter value
    """
    histograms = list(histograms)
    if not histograms:
        raise EmptyInput("Nothing to plot")
    fig = Figure(figsize=(4, 3))
    ax = fig.add_subplot(1, 1, 1)
    for label, edges, counts in histograms:
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        xs, ys = step_outline(edges, counts / total if total else counts)
        ax.plot(xs, ys, label=label, linewidth=1)
    for value in markers:
        ax.axvline(value, color='k', linestyle='--', linewidth=1)
    if title:
        ax.set_title(title)
    if xlabel:
        ax.set_xlabel(xlabel)
    if len(histograms) > 1:
        ax.legend(fontsize='small')
    return fig


def f_curve_figure(curves, tol):
    """
    Sorted f-curves, one line per method.

    Parameters
    ----------

    curves: sequence of (label, fractions)
    tol: float
    """
    curves = list(curves)
    if not curves:
        raise EmptyInput("Nothing to plot")
    fig = Figure(figsize=(4, 3))
    ax = fig.add_subplot(1, 1, 1)
    for label, fractions in curves:
        ax.plot(np.arange(1, len(fractions) + 1), fractions, label=label, linewidth=1)
    ax.set_xlabel('parameter (sorted by f)')
    ax.set_ylabel('f within +-%g' % tol)
    ax.legend(fontsize='small')
    return fig


def scatter_figure(series, xlabel, ylabel, log=True):
    """
    Scatter plot of (label, x, y) series.
    """
    series = list(series)
    if not series:
        raise EmptyInput("Nothing to plot")
    fig = Figure(figsize=(4, 4))
    ax = fig.add_subplot(1, 1, 1)
    for label, x, y in series:
        ax.plot(x, y, linestyle='none', marker='.', markersize=2, label=label)
    if log:
        ax.set_xscale('log')
        ax.set_yscale('log')
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend(fontsize='small')
    return fig


def curves_figure(x, curves, xlabel, ylabel):
    fig = Figure(figsize=(4, 3))
    ax = fig.add_subplot(1, 1, 1)
    for label, y in curves:
        ax.plot(x, y, label=label, linewidth=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(fontsize='small')
    return fig


def svg_bytes(fig):
    buffer = io.BytesIO()
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(buffer, format='svg', metadata={'Date': None})
    return buffer.getvalue()


def write_svg(fig, path):
    with open(path, 'wb') as fo:
        fo.write(svg_bytes(fig))


def emit_histogram_svg(histograms, path, title=None, markers=()):
    """
    Write a deterministic SVG overlay of ``(label, edges, counts)`` histograms.
    """
    write_svg(histogram_figure(histograms, title, markers), path)
