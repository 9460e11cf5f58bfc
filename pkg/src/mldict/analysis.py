"""Dictionary statistics: log-binned frequency histograms, cumulative mass
curves, top-k coverage and CSV export. Column layouts are documented in
docs/analysis.md."""

import csv
from dataclasses import dataclass

import numpy as np

from .dictionary import mass_prefix_length
from .errors import InputError
from .patchkey import format_key

DEFAULT_BINS = 30


@dataclass(frozen=True)
class HistogramSpec:
    edges: np.ndarray   # bins + 1 increasing normalized-frequency edges
    counts: np.ndarray  # entries per bin
    bin_of: dict        # key -> bin index

    @property
    def centers(self):
        return np.sqrt(self.edges[:-1] * self.edges[1:])


@dataclass(frozen=True)
class MassCurve:
    keys: list
    cumulative: np.ndarray  # cumulative[i] = mass of the i + 1 most frequent keys


def log_histogram(d, bins=DEFAULT_BINS, span="full"):
    """Bin each entry's normalized frequency on log-spaced edges.

    ``span="full"`` puts the edges over [1/total, 1]; ``span="observed"`` over
    the [smallest, largest] normalized frequency actually present.
    """
    if not len(d):
        raise InputError("cannot histogram an empty dictionary")
    keys = [k for k, _ in d.ranked()]
    freq = np.array([c for _, c in d.ranked()], dtype=np.float64) / d.total
    if span == "full":
        lo, hi = 1.0 / d.total, 1.0
    elif span == "observed":
        lo, hi = freq[-1], freq[0]
    else:
        raise InputError(f"unknown histogram span {span!r}")
    if lo >= hi:
        lo = hi / 2
    edges = np.geomspace(lo, hi, bins + 1)
    edges[0], edges[-1] = lo, hi
    idx = np.searchsorted(edges, np.clip(freq, lo, hi), side="right") - 1
    idx = np.clip(idx, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    return HistogramSpec(edges, counts, dict(zip(keys, idx.tolist())))


def mass_curve(d):
    if not len(d):
        raise InputError("cannot build a mass curve for an empty dictionary")
    ranked = d.ranked()
    counts = np.array([c for _, c in ranked], dtype=np.int64)
    return MassCurve([k for k, _ in ranked], np.cumsum(counts) / counts.sum())


def top_k_for_mass(d, fraction):
    if not len(d):
        raise InputError("empty dictionary")
    return mass_prefix_length([c for _, c in d.ranked()], fraction)


def _float(x):
    return repr(float(x))


def export_histogram(hist, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["bin", "lo", "hi", "center", "count"])
        for i, c in enumerate(hist.counts):
            w.writerow([i, _float(hist.edges[i]), _float(hist.edges[i + 1]),
                        _float(hist.centers[i]), int(c)])


def export_mass_curve(d, path):
    curve = mass_curve(d)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["rank", "key", "frequency", "cumulative"])
        for i, key in enumerate(curve.keys):
            w.writerow([i, format_key(key), d[key], _float(curve.cumulative[i])])


def export_convergence(mon, path):
    """One row per chunk: ``chunk_index`` (1-based) then one probability per tracked symbol."""
    series = mon.series
    if series.shape[0] == 0:
        raise InputError("convergence monitor has no samples")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["chunk_index"] + [format_key(s) for s in mon.symbols])
        for i, row in enumerate(series, 1):
            w.writerow([i] + [_float(p) for p in row])


def read_convergence(path):
    """(symbols, series) back from :func:`export_convergence` output."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    series = np.array([[float(x) for x in r[1:]] for r in body]).reshape(len(body), len(header) - 1)
    return header[1:], series
