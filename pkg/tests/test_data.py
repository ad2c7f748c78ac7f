import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from nnld import data
from nnld.data import NEGATIVE, POSITIVE, FormatError, SpikePattern
from nnld.kernel import ParameterError


def test_latency_shape_and_range():
    ds = data.gen_latency(100, 500, 400.0, seed=7)
    assert len(ds) == 100 and ds.d == 500 and ds.task == "latency"
    for p in ds.patterns:
        assert p.times.size == 500
        assert np.all(np.diff(p.offsets) == 1)
        assert p.times.min() >= 1.0 and p.times.max() <= 400.0
    assert set(ds.labels.tolist()) <= {POSITIVE, NEGATIVE}


def test_latency_degenerate_range():
    ds = data.gen_latency(1, 1, 1.0, seed=0)
    assert ds.patterns[0].times.tolist() == [1.0]


def test_generators_deterministic(tmp_path):
    for gen in (data.gen_latency, data.gen_synchrony):
        a, b = gen(20, 10, 400.0, 3), gen(20, 10, 400.0, 3)
        assert a == b
        data.save(a, tmp_path / "a.jsonl")
        data.save(b, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert gen(20, 10, 400.0, 4) != a


@pytest.mark.parametrize("args", [(0, 5, 10.0), (5, 0, 10.0), (5, 5, 0.0)])
def test_generator_bad_args(args):
    with pytest.raises(ParameterError):
        data.gen_latency(*args, seed=0)


def test_synchrony_structure():
    ds = data.gen_synchrony(100, 500, 400.0, seed=1)
    pos, neg = ds.pairings
    assert not np.array_equal(pos, neg)
    for m in (pos, neg):
        assert sorted(m.reshape(-1).tolist()) == list(range(500))
    for p in ds.patterns:
        m = pos if p.label == POSITIVE else neg
        t = p.times
        assert np.array_equal(t[m[:, 0]], t[m[:, 1]])
        # collisions aside, exactly d/2 distinct times
        assert len(np.unique(t)) == 250


def test_synchrony_pairs_recovered_from_times():
    ds = data.gen_synchrony(30, 40, 400.0, seed=5)
    pos, neg = ds.pairings
    for p in ds.patterns:
        m = pos if p.label == POSITIVE else neg
        order = np.argsort(p.times, kind="stable")
        groups = order.reshape(-1, 2)
        groups.sort(axis=1)
        recovered = {tuple(g) for g in groups.tolist()}
        assert recovered == {tuple(r) for r in m.tolist()}


def test_synchrony_two_afferents():
    ds = data.gen_synchrony(20, 2, 50.0, seed=0)
    for p in ds.patterns:
        assert p.times[0] == p.times[1]


def test_synchrony_odd_d():
    with pytest.raises(ParameterError):
        data.gen_synchrony(5, 7, 100.0, seed=0)


def test_synchrony_marginal_uniform():
    """Single-afferent spike times carry no class information: both classes are uniform on [1, T]."""
    T = 400.0
    ds = data.gen_synchrony(20000, 10, T, seed=11)
    times = np.array([p.times[3] for p in ds.patterns])
    labels = ds.labels
    edges = np.linspace(1.0, T, 21)
    for lab in (POSITIVE, NEGATIVE):
        counts, _ = np.histogram(times[labels == lab], bins=edges)
        assert counts.sum() > 5000
        _, pval = stats.chisquare(counts)
        assert pval > 1e-3


def test_label_balance():
    labels = data.gen_latency(2000, 2, 10.0, seed=2).labels
    assert 0.45 <= np.mean(labels == POSITIVE) <= 0.55
    exact = data.gen_latency(100, 2, 10.0, seed=2, exact_split=True).labels
    assert np.sum(exact == POSITIVE) == 50


def test_round_trip(tmp_path):
    for ds in (data.gen_latency(15, 8, 100.0, 1), data.gen_synchrony(15, 8, 100.0, 1)):
        path = tmp_path / f"{ds.task}.jsonl"
        data.save(ds, path)
        assert data.load(path) == ds


def test_round_trip_multi_spike(tmp_path):
    pats = [SpikePattern.from_lists([[0.5, 3.25], [], [7.0]], POSITIVE, 0),
            SpikePattern.from_lists([[], [], []], NEGATIVE, 1)]
    ds = data.Dataset(pats, 3, 10.0, "encoded")
    data.save(ds, tmp_path / "x.jsonl")
    assert data.load(tmp_path / "x.jsonl") == ds


def _write(tmp_path, lines):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_truncated(tmp_path):
    ds = data.gen_latency(5, 4, 100.0, 0)
    data.save(ds, tmp_path / "ok.jsonl")
    lines = (tmp_path / "ok.jsonl").read_text().splitlines()
    with pytest.raises(FormatError, match="truncated"):
        data.load(_write(tmp_path, lines[:-2]))
    # a line cut mid-record
    with pytest.raises(FormatError, match=":6:"):
        data.load(_write(tmp_path, lines[:-1] + [lines[-1][:20]]))


def test_load_d_mismatch(tmp_path):
    header = json.dumps({"d": 3, "T": 10.0, "task": "latency", "pairings": None})
    rec = json.dumps({"id": 0, "label": "+", "spikes": [[1.0], [2.0]]})
    with pytest.raises(FormatError, match=":2:.*spikes"):
        data.load(_write(tmp_path, [header, rec]))


@pytest.mark.parametrize("line, msg", [
    ('{"id": 0, "spikes": [[1.0]]}', "label"),
    ('{"id": 0, "label": "x", "spikes": [[1.0]]}', "label"),
    ('{"id": 0, "label": "+", "spikes": [[-1.0]]}', "spikes"),
    ("[1, 2]", "object"),
])
def test_load_bad_fields(tmp_path, line, msg):
    header = json.dumps({"d": 1, "T": 10.0, "task": "latency", "pairings": None})
    with pytest.raises(FormatError, match=msg):
        data.load(_write(tmp_path, [header, line]))


def test_load_bad_header(tmp_path):
    with pytest.raises(FormatError, match="header missing"):
        data.load(_write(tmp_path, ['{"d": 1}']))
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(FormatError, match="empty"):
        data.load(empty)


def test_spike_grid_rounding():
    p = SpikePattern.from_lists([[0.4, 2.6], [5.0]], POSITIVE)
    g = data.to_spike_grid([p], 2, 1.0)
    assert g.shape == (1, 2, 2)
    assert g[0].tolist() == [[0, 3], [5, -1]]
    assert data.to_spike_grid([p], 2, 0.1)[0, 0].tolist() == [4, 26]


def test_grid_length():
    assert data.grid_length(400.0, 15.0, 1.0) == 476
    assert data.grid_length(400.0, 15.0, 0.1) == 4751


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 20), st.floats(1.0, 1000.0), st.integers(0, 2**32 - 1))
def test_latency_invariants(P, d, T, seed):
    ds = data.gen_latency(P, d, T, seed)
    for p in ds.patterns:
        assert p.times.size == d
        assert np.all((p.times >= 1.0) & (p.times <= max(T, 1.0)))


def test_pattern_validation():
    with pytest.raises(ParameterError):
        SpikePattern.from_lists([[1.0]], 0)
    with pytest.raises(ParameterError):
        SpikePattern.from_lists([[float("nan")]], POSITIVE)
    with pytest.raises(ParameterError):
        data.Dataset([SpikePattern.from_lists([[1.0]], POSITIVE)], 2, 10.0, "latency")
