import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnld.data import NEGATIVE, POSITIVE, Dataset, SpikePattern, grid_length
from nnld.kernel import KernelParams, build_table, kernel_value
from nnld.neuron import (
    ConnectionMap,
    NeuronParams,
    NnldModel,
    accuracy,
    branch_derivative,
    branch_drive,
    branch_nonlinearity,
    eval_pattern,
    evaluate,
    init_connections,
    membrane_trace,
    membrane_voltage,
)

TABLE = build_table(KernelParams.from_tau(15.0))
PEAK = 6.931471805599453


def brute_force_vmax(spikes, slots, x_thr, x_sat, T, dt, tau=15.0):
    """Direct double loop over branches, slots and spikes with closed-form exponentials."""
    tau_s = tau / 4
    t_star = tau * tau_s / (tau - tau_s) * math.log(tau / tau_s)
    v0 = 1.0 / (math.exp(-t_star / tau) - math.exp(-t_star / tau_s))
    best, best_t = -1.0, None
    n = int(round((T + 5 * tau) / dt)) + 1
    for g in range(n):
        t = g * dt
        V = 0.0
        for row in slots:
            v = 0.0
            for a in row:
                for tf in spikes[a]:
                    lag = t - tf
                    if lag > 0:
                        v += v0 * (math.exp(-lag / tau) - math.exp(-lag / tau_s))
            V += min(v * v / x_thr, x_sat)
        if V > best:
            best, best_t = V, t
    return best, best_t


def _model(slots, d, x_thr=1.0, x_sat=100.0, v_thr=1.0):
    slots = np.asarray(slots)
    p = NeuronParams(m=slots.shape[0], k=slots.shape[1], x_thr=x_thr, x_sat=x_sat)
    return NnldModel(p, ConnectionMap(slots, d), v_thr)


def test_nonlinearity_values():
    p = NeuronParams(x_thr=1.0, x_sat=100.0)
    assert branch_nonlinearity(2.0, p) == 4.0
    assert branch_nonlinearity(20.0, p) == 100.0
    assert branch_nonlinearity(0.0, p) == 0.0
    assert branch_derivative(3.0, p) == 6.0
    assert branch_derivative(11.0, p) == 0.0


def test_init_connections():
    p = NeuronParams()
    conn = init_connections(500, p, seed=3)
    assert conn.slots.shape == (100, 5)
    assert conn.slots.min() >= 0 and conn.slots.max() < 500
    assert conn == init_connections(500, p, seed=3)
    assert np.all(init_connections(1, p, seed=0).slots == 0)
    assert conn.weights().sum(axis=0).tolist() == [5] * 100


def test_connection_map_validation():
    with pytest.raises(ValueError):
        ConnectionMap([[0, 5]], d=5)
    with pytest.raises(ValueError):
        NnldModel(NeuronParams(m=2, k=2), ConnectionMap([[0, 1]], 2), 1.0)
    with pytest.raises(ValueError):
        NnldModel(NeuronParams(m=1, k=2), ConnectionMap([[0, 1]], 2), 0.0)


def test_branch_drive_cases():
    empty = SpikePattern.from_lists([[], []], POSITIVE)
    conn = ConnectionMap([[0, 1]], 2)
    assert branch_drive(empty, 0, 10.0, conn, TABLE) == 0.0
    pat = SpikePattern.from_lists([[10.0], []], POSITIVE)
    single = ConnectionMap([[0]], 2)
    for t in (5.0, 10.0, 17.0, 40.0):
        assert branch_drive(pat, 0, t, single, TABLE) == pytest.approx(kernel_value(t - 10.0, TABLE.params), abs=1e-15)
    double = ConnectionMap([[0, 0]], 2)
    assert branch_drive(pat, 0, 17.0, double, TABLE) == pytest.approx(2 * kernel_value(7.0, TABLE.params))
    with pytest.raises(IndexError):
        branch_drive(pat, 1, 17.0, single, TABLE)


def test_no_spike_pattern():
    model = _model([[0, 1]], 2)
    res = eval_pattern(SpikePattern.from_lists([[], []], POSITIVE), model, TABLE, T=50.0)
    assert res.v_max == 0.0 and res.predicted == NEGATIVE


def test_single_spike_peak():
    model = _model([[0]], 1)
    table = build_table(KernelParams.from_tau(15.0), dt=0.01)
    res = eval_pattern(SpikePattern.from_lists([[20.0]], POSITIVE), model, table, T=30.0)
    assert res.v_max == pytest.approx(1.0, abs=1e-6)
    assert res.t_max == pytest.approx(20.0 + PEAK, abs=0.01)
    res1 = eval_pattern(SpikePattern.from_lists([[20.0]], POSITIVE), model, TABLE, T=30.0)
    assert res1.t_max == 27.0


def test_two_identical_branches_double():
    pat = SpikePattern.from_lists([[3.0], [9.0], [4.0]], POSITIVE)
    one = membrane_trace(pat, _model([[0, 1]], 3), TABLE, T=20.0)
    two = membrane_trace(pat, _model([[0, 1], [0, 1]], 3), TABLE, T=20.0)
    assert np.array_equal(two, 2 * one)


def test_membrane_voltage_matches_trace():
    rng = np.random.default_rng(0)
    pat = SpikePattern.from_lists([[float(t)] for t in rng.integers(1, 50, size=6)], POSITIVE)
    model = _model(rng.integers(0, 6, size=(3, 2)), 6)
    trace = membrane_trace(pat, model, TABLE, T=50.0)
    for t in (0, 10, 33, 60):
        assert membrane_voltage(pat, model, TABLE, float(t)) == pytest.approx(trace[t], rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 5),
    st.integers(1, 2),
    st.integers(1, 2),
    st.lists(st.tuples(st.integers(0, 4), st.integers(0, 300)), min_size=0, max_size=3),
    st.integers(0, 10**6),
)
def test_brute_force_oracle(d, m, k, spikes, seed):
    """Grid evaluation agrees with a direct evaluator at 10x finer resolution."""
    rng = np.random.default_rng(seed)
    lists = [[] for _ in range(d)]
    for a, t10 in spikes:
        lists[a % d].append(t10 / 10.0)
    pat = SpikePattern.from_lists(lists, POSITIVE)
    slots = rng.integers(0, d, size=(m, k))
    x_sat = float(rng.choice([2.0, 100.0]))
    model = _model(slots, d, x_sat=x_sat)
    T = 30.0
    fine_v, fine_t = brute_force_vmax(pat.afferents, slots, 1.0, x_sat, T, 0.1)
    # same resolution: exact agreement
    fine_table = build_table(KernelParams.from_tau(15.0), dt=0.1)
    res = eval_pattern(pat, model, fine_table, T=T)
    assert res.v_max == pytest.approx(fine_v, rel=1e-9, abs=1e-12)
    if fine_v > 0:
        assert res.t_max == pytest.approx(fine_t, abs=1e-9)
    # 1 ms grid rounds spike times, then samples V(t) coarsely: bounded by the fine peak of the rounded input
    rounded = [np.rint(a).tolist() for a in pat.afferents]
    ref_v, _ = brute_force_vmax(rounded, slots, 1.0, x_sat, T, 0.1)
    coarse = eval_pattern(pat, model, TABLE, T=T)
    assert coarse.v_max <= ref_v + 1e-9
    assert coarse.v_max >= ref_v * 0.9 - 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6))
def test_symmetries_and_bound(seed):
    rng = np.random.default_rng(seed)
    d, m, k = 8, 4, 3
    pat = SpikePattern.from_lists([sorted(rng.uniform(0, 60, size=rng.integers(0, 3)).tolist()) for _ in range(d)],
                                  POSITIVE)
    slots = rng.integers(0, d, size=(m, k))
    base = membrane_trace(pat, _model(slots, d, x_sat=5.0), TABLE, T=60.0)
    perm_b = membrane_trace(pat, _model(slots[rng.permutation(m)], d, x_sat=5.0), TABLE, T=60.0)
    perm_s = membrane_trace(pat, _model(np.array([rng.permutation(r) for r in slots]), d, x_sat=5.0), TABLE, T=60.0)
    np.testing.assert_allclose(perm_b, base, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(perm_s, base, rtol=1e-12, atol=1e-12)
    assert base.max() <= m * 5.0 + 1e-12


def test_monotone_multiplicity():
    pat = SpikePattern.from_lists([[5.0], [12.0], []], POSITIVE)
    conn_a = ConnectionMap([[0, 2]], 3)
    conn_b = ConnectionMap([[0, 2, 1]], 3)
    for t in range(0, 80):
        assert branch_drive(pat, 0, float(t), conn_b, TABLE) >= branch_drive(pat, 0, float(t), conn_a, TABLE)


def test_evaluate_dataset_matches_eval_pattern():
    rng = np.random.default_rng(1)
    pats = [SpikePattern.from_lists([[float(x)] for x in rng.uniform(1, 100, 10)], POSITIVE if n % 2 else NEGATIVE, n)
            for n in range(6)]
    ds = Dataset(pats, 10, 100.0, "latency")
    model = _model(rng.integers(0, 10, (5, 3)), 10, v_thr=3.0)
    vmax, tmax = evaluate(ds, model, TABLE)
    for n, p in enumerate(pats):
        r = eval_pattern(p, model, TABLE, T=100.0)
        assert vmax[n] == pytest.approx(r.v_max, rel=1e-12)
        assert tmax[n] == r.t_index
    assert accuracy(ds, model, TABLE) == np.mean([eval_pattern(p, model, TABLE, 100.0).predicted == p.label
                                                  for p in pats])
    assert len(membrane_trace(pats[0], model, TABLE, 100.0)) == grid_length(100.0, 15.0, 1.0)


def test_model_round_trip(tmp_path):
    model = _model([[0, 3], [2, 2]], 4, x_thr=2.0, v_thr=7.25)
    model.save(tmp_path / "m.json")
    back = NnldModel.load(tmp_path / "m.json")
    assert back.conn == model.conn and back.v_thr == model.v_thr and back.params == model.params
