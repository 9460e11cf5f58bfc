import numpy as np
import pytest

from mldict.dictionary import ConvergenceMonitor
from mldict.errors import InputError


def simulate(probs, chunks, chunk_size=1000, seed=0):
    """Running probability estimates of an i.i.d. multinomial source, one row per chunk."""
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(chunk_size, probs, size=chunks).cumsum(axis=0)
    return counts / (chunk_size * np.arange(1, chunks + 1))[:, None]


def test_constant_series_converges():
    mon = ConvergenceMonitor(["0", "F"], epsilon=1e-5)
    mon.extend(np.tile([0.6, 0.4], (1001, 1)))
    status = mon.check()
    assert status.converged and all(status.per_symbol.values())
    assert mon.first_converged() == 1001


def test_alternating_series_never_converges():
    mon = ConvergenceMonitor(["0"], epsilon=1e-5)
    mon.extend(np.where(np.arange(3000) % 2, 0.5, 0.6)[:, None])
    assert mon.check().converged is False
    assert mon.first_converged() is None


def test_too_short_is_undecided():
    mon = ConvergenceMonitor(["0"], epsilon=1e-5)
    for _ in range(1000):
        mon.record([0.5])
    status = mon.check()
    assert status.converged is None and status.per_symbol == {"0": None}


def test_per_symbol_status():
    mon = ConvergenceMonitor(["a", "b"], epsilon=1e-3)
    rows = np.zeros((1100, 2))
    rows[:, 0] = 0.5
    rows[:, 1] = np.linspace(0, 1, 1100)
    mon.extend(rows)
    assert mon.check().per_symbol == {"a": True, "b": False}


def test_record_and_extend_agree():
    rows = np.random.default_rng(0).random((50, 3))
    a, b = ConvergenceMonitor("xyz"), ConvergenceMonitor("xyz")
    for r in rows:
        a.record(r)
    b.extend(rows[:20])
    b.record(rows[20])
    b.extend(rows[21:])
    assert np.array_equal(a.series, b.series) and len(b) == 50


def test_first_converged_matches_scan():
    rng = np.random.default_rng(4)
    rows = np.cumsum(rng.normal(0, 1e-6, (3000, 2)), axis=0) * np.exp(-np.arange(3000) / 400)[:, None]
    mon = ConvergenceMonitor("ab", epsilon=2e-6)
    mon.extend(rows)
    expected = None
    for n in range(1001, 3001):
        m = ConvergenceMonitor("ab", epsilon=2e-6)
        m.extend(rows[:n])
        if m.check().converged:
            expected = n
            break
    assert mon.first_converged() == expected


def test_iid_source_settles():
    probs = np.array([0.45, 0.44] + [0.11 / 14] * 14)
    series = simulate(probs, 20000)
    mon = ConvergenceMonitor(range(16), epsilon=1e-4)
    mon.extend(series)
    n = mon.first_converged()
    assert n is not None
    assert np.abs(series[n - 1] - probs).max() < 2e-3


def test_bad_epsilon():
    with pytest.raises(InputError):
        ConvergenceMonitor(["0"], epsilon=0)
