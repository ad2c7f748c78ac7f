"""Morphological learning: correlation-guided synapse swapping with adaptive threshold."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels
from .data import NEGATIVE, POSITIVE, Dataset, SpikePattern, grid_length, to_spike_grid
from .kernel import KernelTable, ParameterError, build_table
from .neuron import (
    ConnectionMap,
    EvalResult,
    NeuronParams,
    NnldModel,
    branch_derivative,
    init_connections,
)

log = logging.getLogger(__name__)

# threshold is kept strictly positive
V_THR_FLOOR = 1e-6


@dataclass
class MorphConfig:
    n_T: int = 100
    n_R: int = 200
    max_iters: int = 5000
    eta: float = 0.01
    w_fp: float = 1.0
    w_fn: float = 1.0
    # fixed start value, or (low, high) for a uniform draw
    v_thr_init: float | tuple[float, float] = (1.0, 50.0)
    seed: int = 0
    # full recomputation of V(t) every this many swaps bounds incremental round-off
    refresh_every: int = 500

    def __post_init__(self):
        if self.n_T < 1 or self.n_R < 1 or self.max_iters < 1:
            raise ParameterError("n_T, n_R and max_iters must be >= 1")
        if self.eta < 0:
            raise ParameterError("eta must be >= 0")
        if isinstance(self.v_thr_init, (list, tuple)):
            lo, hi = self.v_thr_init
            if not 0 < lo <= hi:
                raise ParameterError("v_thr_init range must satisfy 0 < low <= high")
            self.v_thr_init = (float(lo), float(hi))
        elif not self.v_thr_init > 0:
            raise ParameterError("v_thr_init must be positive")


@dataclass
class IterationTrace:
    iter: int
    train_accuracy: float
    fp: int
    fn: int
    v_thr: float
    swapped: tuple[int, int, int] | None = None
    clamped: bool = False
    targets: np.ndarray | None = field(default=None, repr=False)
    candidates: np.ndarray | None = field(default=None, repr=False)


def threshold_update(fp: int, fn: int, cfg: MorphConfig) -> float:
    """Threshold increment: positive when false alarms outnumber misses."""
    return cfg.eta * (cfg.w_fp * fp - cfg.w_fn * fn)


def correlation_cij(
    misclassified: Sequence[tuple[SpikePattern, EvalResult, int]],
    branch: int,
    afferent: int,
    model: NnldModel,
    table: KernelTable,
    norm: int | None = None,
) -> float:
    """Batch-averaged fitness of a synapse from ``afferent`` onto ``branch``.

    Each entry contributes ``label * b'(v_branch(t_max)) * sum_f K(t_max - t_f)``;
    the sum is divided by ``norm`` (default: number of entries).
    """
    if not misclassified:
        return 0.0
    total = 0.0
    for pattern, res, label in misclassified:
        if label == POSITIVE and res.predicted == POSITIVE or label == NEGATIVE and res.predicted == NEGATIVE:
            continue
        s = np.rint(pattern.spikes(afferent) / table.dt).astype(np.int64)
        psp = float(np.sum(table.lookup(res.t_index - s)))
        slope = float(branch_derivative(res.branch_drives_at_tmax[branch], model.params))
        total += label * slope * psp
    return total / (norm if norm is not None else len(misclassified))


def _pick(rng: np.random.Generator, values: np.ndarray, best) -> int:
    """Index of the min/max of ``values``, ties broken uniformly."""
    hits = np.flatnonzero(values == best(values))
    return int(hits[0] if hits.size == 1 else rng.choice(hits))


class MorphTrainer:
    """Stateful learner that keeps V(t) of every pattern cached between swaps.

    A swap touches one branch, so only that branch's contribution to V(t) is
    recomputed; ``refresh_every`` swaps trigger a full recomputation.
    """

    def __init__(self, dataset: Dataset, model: NnldModel, table: KernelTable, cfg: MorphConfig, rng):
        if len(dataset) == 0:
            raise ParameterError("empty dataset")
        if model.conn.d != dataset.d:
            raise ParameterError(f"model has d={model.conn.d}, dataset has d={dataset.d}")
        self.dataset = dataset
        self.model = model
        self.table = table
        self.cfg = cfg
        self.rng = rng
        self.spk = dataset.spike_grid(table.dt)
        self.G = grid_length(dataset.T, table.params.tau, table.dt)
        self.labels = dataset.labels
        self.iteration = 0
        self._swaps = 0
        self.best_accuracy = -1.0
        self.best_model = model.copy()
        self.refresh()

    def refresh(self) -> None:
        p = self.model.params
        self.V = kernels.membrane(self.spk, self.model.conn.slots, self.table.values, self.G, p.x_thr, p.x_sat)
        self.vmax, self.tmax = kernels.vmax_tmax(self.V)

    def errors(self) -> tuple[np.ndarray, np.ndarray]:
        fired = self.vmax >= self.model.v_thr
        return fired & (self.labels == NEGATIVE), ~fired & (self.labels == POSITIVE)

    def branch_slopes(self, mis: np.ndarray) -> np.ndarray:
        """``b'(v_j(t_max))`` for every misclassified pattern (rows) and branch (columns)."""
        v = kernels.drives_at(self.spk, mis, self.tmax[mis], self.model.conn.slots, self.table.values)
        return branch_derivative(v, self.model.params)

    def cij(self, branches: np.ndarray, afferents: np.ndarray, mis: np.ndarray, slopes: np.ndarray) -> np.ndarray:
        """Batch-averaged correlation of synapse ``afferents[r]`` -> ``branches[r]`` over ``mis``."""
        if mis.size == 0:
            return np.zeros(len(afferents))
        psp = kernels.psp_at(self.spk, mis, self.tmax[mis], np.asarray(afferents, dtype=np.int64), self.table.values)
        weight = self.labels[mis].astype(float)[:, None] * slopes[:, branches]
        return (weight * psp).sum(axis=0) / mis.size

    def step(self) -> IterationTrace:
        cfg, model, rng = self.cfg, self.model, self.rng
        slots = model.conn.slots
        m, k = slots.shape
        fp_mask, fn_mask = self.errors()
        fp, fn = int(fp_mask.sum()), int(fn_mask.sum())
        P = self.labels.size
        acc = 1.0 - (fp + fn) / P
        if acc > self.best_accuracy:
            self.best_accuracy = acc
            self.best_model = model.copy()
        trace = IterationTrace(self.iteration, acc, fp, fn, model.v_thr)
        self.iteration += 1
        if fp + fn == 0:
            return trace

        mis = np.flatnonzero(fp_mask | fn_mask)
        n_t = min(cfg.n_T, m * k)
        trace.clamped = cfg.n_T > m * k
        targets = rng.choice(m * k, size=n_t, replace=False)
        tj, tq = np.divmod(targets, k)
        slopes = self.branch_slopes(mis)
        c_t = self.cij(tj, slots[tj, tq], mis, slopes)
        worst = _pick(rng, c_t, np.min)
        j, q = int(tj[worst]), int(tq[worst])

        # silent candidates: scored against the unchanged V(t) and t_max
        cands = rng.choice(model.conn.d, size=min(cfg.n_R, model.conn.d), replace=False)
        c_r = self.cij(np.full(cands.size, j), cands, mis, slopes)
        a_in = int(cands[_pick(rng, c_r, np.max)])
        a_out = int(slots[j, q])

        if a_in != a_out:
            p = model.params
            kernels.swap_update(self.V, self.spk, slots[j], q, a_in, self.table.values, p.x_thr, p.x_sat)
            slots[j, q] = a_in
            self._swaps += 1
            if self._swaps % cfg.refresh_every == 0:
                self.refresh()
            else:
                self.vmax, self.tmax = kernels.vmax_tmax(self.V)

        model.v_thr = max(model.v_thr + threshold_update(fp, fn, cfg), V_THR_FLOOR)
        trace.v_thr = model.v_thr
        trace.swapped = (j, a_out, a_in)
        trace.targets = targets
        trace.candidates = cands
        return trace


def train_iteration(model: NnldModel, dataset: Dataset, table: KernelTable, cfg: MorphConfig, rng):
    """One learning pass on a copy of ``model``; returns ``(new_model, trace)``."""
    trainer = MorphTrainer(dataset, model.copy(), table, cfg, rng)
    trace = trainer.step()
    return trainer.model, trace


def initial_threshold(cfg: MorphConfig, rng: np.random.Generator) -> float:
    if isinstance(cfg.v_thr_init, tuple):
        return float(rng.uniform(*cfg.v_thr_init))
    return float(cfg.v_thr_init)


def train(
    dataset: Dataset,
    params: NeuronParams,
    cfg: MorphConfig,
    table: KernelTable | None = None,
    conn: ConnectionMap | None = None,
) -> tuple[NnldModel, list[IterationTrace]]:
    """Iterate until every training pattern is classified correctly or ``max_iters``.

    Returns the best-accuracy model seen and the full trace.
    """
    if table is None:
        table = build_table(params.kernel)
    conn_seed, thr_seed, loop_seed = np.random.SeedSequence(cfg.seed).spawn(3)
    if conn is None:
        conn = init_connections(dataset.d, params, conn_seed)
    model = NnldModel(params, conn.copy(), initial_threshold(cfg, np.random.default_rng(thr_seed)))
    trainer = MorphTrainer(dataset, model, table, cfg, np.random.default_rng(loop_seed))
    traces = []
    for _ in range(cfg.max_iters):
        tr = trainer.step()
        traces.append(tr)
        if tr.fp + tr.fn == 0:
            break
    else:
        # score the state left by the last swap
        trainer.refresh()
        fp_mask, fn_mask = trainer.errors()
        acc = 1.0 - (fp_mask.sum() + fn_mask.sum()) / len(dataset)
        if acc > trainer.best_accuracy:
            trainer.best_accuracy = acc
            trainer.best_model = trainer.model.copy()
    log.debug("morph training stopped after %d iterations, best accuracy %.4f", len(traces), trainer.best_accuracy)
    return trainer.best_model, traces


def static_threshold(
    params: NeuronParams,
    d: int,
    T: float,
    n_samples: int = 10000,
    seed=0,
    table: KernelTable | None = None,
    chunk: int = 1000,
) -> float:
    """Mode of the V_max distribution over random latency patterns and random wirings.

    Histogram bins follow the Freedman-Diaconis rule; the mode bin's center is returned.
    """
    vmax = sample_vmax(params, d, T, n_samples, seed, table, chunk)
    if np.ptp(vmax) == 0:
        return float(vmax[0])
    counts, edges = np.histogram(vmax, bins="fd")
    i = int(np.argmax(counts))
    return float(0.5 * (edges[i] + edges[i + 1]))


def sample_vmax(params, d, T, n_samples, seed=0, table=None, chunk=1000) -> np.ndarray:
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    if table is None:
        table = build_table(params.kernel)
    rng = np.random.default_rng(seed)
    G = grid_length(T, params.kernel.tau, table.dt)
    out = np.empty(n_samples)
    for lo in range(0, n_samples, chunk):
        n = min(chunk, n_samples - lo)
        times = rng.uniform(1.0, max(T, 1.0), size=(n, d))
        spk = np.rint(times / table.dt).astype(np.int64)[:, :, None]
        slots3 = rng.integers(0, d, size=(n, params.m, params.k))
        out[lo:lo + n] = kernels.vmax_per_sample(spk, slots3, table.values, G, params.x_thr, params.x_sat)
    return out


TRACE_COLUMNS = ["iter", "accuracy", "fp", "fn", "v_thr", "swap_branch", "swap_out", "swap_in"]


def write_trace(traces, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for t in traces:
            sw = t.swapped if t.swapped is not None else ("", "", "")
            w.writerow([t.iter, repr(float(t.train_accuracy)), t.fp, t.fn, repr(float(t.v_thr)), *sw])
