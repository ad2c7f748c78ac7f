"""Tempotron baseline with optional n-bit weight quantization.

Quantization is either applied once to the trained weights (``"AT"``) or to
the weight vector after every update (``"DT"``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._backend import kernels
from .data import NEGATIVE, POSITIVE, Dataset, SpikePattern, grid_length, to_spike_grid
from .kernel import KernelParams, KernelTable, ParameterError, build_table
from .morph import IterationTrace
from .neuron import EvalResult, classify, pattern_grid_length

MODES = ("none", "AT", "DT")


@dataclass(frozen=True)
class QuantSpec:
    bits: int = 4
    mode: str = "none"
    # symmetric clipping bound; None lets AT fit it to max |w|
    bound: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"quantization mode must be one of {MODES}, got {self.mode!r}")
        if self.bits < 1:
            raise ParameterError(f"bits must be >= 1, got {self.bits}")
        if self.bound is not None and not self.bound > 0:
            raise ParameterError(f"bound must be positive, got {self.bound}")


def quant_levels(bits: int, bound: float) -> np.ndarray:
    if bits < 1:
        raise ParameterError(f"bits must be >= 1, got {bits}")
    n = 2 ** bits
    return -bound + np.arange(n) * (2.0 * bound / (n - 1))


def quantize(weights, spec: QuantSpec, bound: float | None = None) -> np.ndarray:
    """Clip to [-B, B] and round to the nearest of 2**bits evenly spaced levels (ties upward)."""
    if spec.bits < 1:
        raise ParameterError(f"bits must be >= 1, got {spec.bits}")
    B = bound if bound is not None else spec.bound
    if B is None or not B > 0:
        raise ParameterError("quantization needs a positive bound")
    levels = quant_levels(spec.bits, B)
    step = 2.0 * B / (levels.size - 1)
    w = np.clip(np.asarray(weights, dtype=float), -B, B)
    idx = np.floor((w + B) / step + 0.5).astype(np.int64)
    return levels[np.clip(idx, 0, levels.size - 1)]


def fitted_bound(weights) -> float:
    """AT clipping range: the largest trained weight magnitude."""
    B = float(np.max(np.abs(weights))) if np.size(weights) else 0.0
    return B if B > 0 else 1.0


@dataclass
class TempotronModel:
    weights: np.ndarray
    v_thr: float = 1.0
    kernel: KernelParams = field(default_factory=lambda: KernelParams.from_tau(15.0))

    def to_json(self) -> dict:
        return {"v_thr": self.v_thr, "kernel": {"tau": self.kernel.tau, "tau_s": self.kernel.tau_s},
                "weights": self.weights.tolist()}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "TempotronModel":
        dct = json.loads(Path(path).read_text())
        kern = KernelParams(tau=dct["kernel"]["tau"], tau_s=dct["kernel"]["tau_s"])
        return cls(np.asarray(dct["weights"], dtype=float), float(dct["v_thr"]), kern)


@dataclass
class TempotronConfig:
    lr: float = 0.01
    v_thr: float = 1.0
    max_epochs: int = 200
    quant: QuantSpec = QuantSpec()
    # fixed clipping bound used by DT
    dt_bound: float = 0.25
    # in DT mode raise lr to one quantization step so updates survive rounding
    dt_lr_floor: bool = True
    # std of the zero-mean Gaussian initial weights; None -> 2 * v_thr / sqrt(d)
    init_std: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0 or not self.v_thr > 0 or self.max_epochs < 1:
            raise ParameterError("lr, v_thr must be positive and max_epochs >= 1")
        if isinstance(self.quant, dict):
            self.quant = QuantSpec(**self.quant)


def _check_d(pattern_d: int, model: TempotronModel):
    if pattern_d != model.weights.shape[0]:
        raise ParameterError(f"pattern has d={pattern_d}, model has {model.weights.shape[0]} weights")


def tempotron_trace(pattern: SpikePattern, model: TempotronModel, table: KernelTable, T: float | None = None):
    _check_d(pattern.d, model)
    spk = to_spike_grid([pattern], pattern.d, table.dt)
    return kernels.linear_voltage(spk[0], model.weights, table.values, pattern_grid_length(pattern, table, T))


def tempotron_eval(pattern: SpikePattern, model: TempotronModel, table: KernelTable, T: float | None = None) -> EvalResult:
    V = tempotron_trace(pattern, model, table, T)
    ti = int(np.argmax(V))
    return EvalResult(float(V[ti]), ti * table.dt, ti, np.zeros(0), int(classify(V[ti], model.v_thr)))


def tempotron_update(pattern: SpikePattern, model: TempotronModel, table: KernelTable, lam: float) -> np.ndarray:
    """Weight change for one presentation: +/- lam * sum_f K(t_max - t_f) on a misclassification."""
    res = tempotron_eval(pattern, model, table)
    if res.predicted == pattern.label:
        return np.zeros_like(model.weights)
    spk = to_spike_grid([pattern], pattern.d, table.dt)
    psp = kernels.psp_at(spk, np.zeros(1, np.int64), np.array([res.t_index]), np.arange(pattern.d), table.values)[0]
    return pattern.label * lam * psp


def evaluate_weights(dataset: Dataset, weights: np.ndarray, table: KernelTable):
    spk = dataset.spike_grid(table.dt)
    G = grid_length(dataset.T, table.params.tau, table.dt)
    return kernels.linear_vmax(spk, np.ascontiguousarray(weights, dtype=float), table.values, G)


def _counts(vmax, v_thr, labels):
    fired = vmax >= v_thr
    fp = int(np.sum(fired & (labels == NEGATIVE)))
    fn = int(np.sum(~fired & (labels == POSITIVE)))
    return fp, fn


def train_tempotron(
    dataset: Dataset, cfg: TempotronConfig, table: KernelTable | None = None
) -> tuple[TempotronModel, list[IterationTrace]]:
    """Cyclic single-pattern training; returns the best-accuracy snapshot and per-epoch trace.

    AT trains at full precision and quantizes the selected weights once at the
    end, with the range fitted to them. DT keeps the weights quantized
    throughout.
    """
    kern = table.params if table is not None else KernelParams.from_tau(15.0)
    if table is None:
        table = build_table(kern)
    q = cfg.quant
    rng = np.random.default_rng(cfg.seed)
    d = dataset.d
    std = cfg.init_std if cfg.init_std is not None else 2.0 * cfg.v_thr / math.sqrt(d)
    w = rng.normal(0.0, std, size=d)
    dt_spec = QuantSpec(q.bits, "DT", q.bound if q.bound is not None else cfg.dt_bound)
    lr = cfg.lr
    if q.mode == "DT":
        w = quantize(w, dt_spec)
        if cfg.dt_lr_floor:
            lr = max(lr, 2.0 * dt_spec.bound / (2 ** q.bits - 1))

    spk = dataset.spike_grid(table.dt)
    G = grid_length(dataset.T, table.params.tau, table.dt)
    labels = dataset.labels
    P = labels.size
    all_aff = np.arange(d)
    vals = table.values

    best_acc, best_w = -1.0, w.copy()
    traces: list[IterationTrace] = []
    for epoch in range(cfg.max_epochs):
        for p in range(P):
            V = kernels.linear_voltage(spk[p], w, vals, G)
            t = int(np.argmax(V))
            fired = V[t] >= cfg.v_thr
            if fired == (labels[p] == POSITIVE):
                continue
            psp = kernels.psp_at(spk, np.array([p]), np.array([t]), all_aff, vals)[0]
            w += labels[p] * lr * psp
            if q.mode == "DT":
                w = quantize(w, dt_spec)

        vmax, _ = kernels.linear_vmax(spk, w, vals, G)
        fp, fn = _counts(vmax, cfg.v_thr, labels)
        acc = 1.0 - (fp + fn) / P
        traces.append(IterationTrace(epoch, acc, fp, fn, cfg.v_thr))
        if acc > best_acc:
            best_acc, best_w = acc, w.copy()
        if fp + fn == 0:
            break

    if q.mode == "AT":
        best_w = quantize(best_w, q, q.bound if q.bound is not None else fitted_bound(best_w))
        vq, _ = kernels.linear_vmax(spk, best_w, vals, G)
        fp, fn = _counts(vq, cfg.v_thr, labels)
        traces.append(IterationTrace(len(traces), 1.0 - (fp + fn) / P, fp, fn, cfg.v_thr))
    return TempotronModel(best_w, cfg.v_thr, table.params), traces


def tempotron_accuracy(dataset: Dataset, model: TempotronModel, table: KernelTable) -> float:
    vmax, _ = evaluate_weights(dataset, model.weights, table)
    fp, fn = _counts(vmax, model.v_thr, dataset.labels)
    return 1.0 - (fp + fn) / len(dataset)
