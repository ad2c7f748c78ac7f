"""Neuron with nonlinear dendrites: forward model and classification."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._backend import kernels
from .data import NEGATIVE, POSITIVE, Dataset, SpikePattern, grid_length, to_spike_grid
from .kernel import KernelParams, KernelTable, ParameterError


@dataclass(frozen=True)
class NeuronParams:
    m: int = 100
    k: int = 5
    x_thr: float = 1.0
    x_sat: float = 100.0
    kernel: KernelParams = KernelParams.from_tau(15.0)

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise ParameterError(f"need m, k >= 1, got m={self.m}, k={self.k}")
        if not (self.x_thr > 0 and self.x_sat > 0):
            raise ParameterError("x_thr and x_sat must be positive")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kernel"] = {"tau": self.kernel.tau, "tau_s": self.kernel.tau_s}
        return out

    @classmethod
    def from_dict(cls, dct: dict) -> "NeuronParams":
        dct = dict(dct)
        kern = dct.pop("kernel", None)
        if kern is not None:
            if "tau_s" in kern:
                dct["kernel"] = KernelParams(tau=kern["tau"], tau_s=kern["tau_s"])
            else:
                dct["kernel"] = KernelParams.from_tau(kern["tau"])
        return cls(**dct)


class ConnectionMap:
    """``m x k`` table of afferent indices; an afferent may fill several slots of a branch."""

    def __init__(self, slots, d: int):
        slots = np.array(slots, dtype=np.int64)
        if slots.ndim != 2 or slots.shape[1] < 1:
            raise ParameterError(f"slots must be a non-empty (m, k) table, got shape {slots.shape}")
        if d < 1 or slots.min() < 0 or slots.max() >= d:
            raise ParameterError(f"slot entries must lie in [0, {d})")
        self.slots = slots
        self.d = int(d)

    @property
    def m(self) -> int:
        return self.slots.shape[0]

    @property
    def k(self) -> int:
        return self.slots.shape[1]

    def copy(self) -> "ConnectionMap":
        return ConnectionMap(self.slots.copy(), self.d)

    def weights(self) -> np.ndarray:
        """Multiplicity matrix ``w[i, j]`` = number of slots of branch j holding afferent i."""
        w = np.zeros((self.d, self.m), dtype=np.int64)
        for j in range(self.m):
            np.add.at(w[:, j], self.slots[j], 1)
        return w

    def __eq__(self, other):
        return isinstance(other, ConnectionMap) and self.d == other.d and np.array_equal(self.slots, other.slots)

    def __repr__(self):
        return f"ConnectionMap(m={self.m}, k={self.k}, d={self.d})"


@dataclass
class NnldModel:
    params: NeuronParams
    conn: ConnectionMap
    v_thr: float

    def __post_init__(self):
        if self.conn.slots.shape != (self.params.m, self.params.k):
            raise ParameterError(
                f"connection map shape {self.conn.slots.shape} does not match m={self.params.m}, k={self.params.k}"
            )
        if not self.v_thr > 0:
            raise ParameterError(f"v_thr must be positive, got {self.v_thr}")

    def copy(self) -> "NnldModel":
        return NnldModel(self.params, self.conn.copy(), self.v_thr)

    def to_json(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "v_thr": self.v_thr,
            "d": self.conn.d,
            "slots": self.conn.slots.tolist(),
        }

    @classmethod
    def from_json(cls, dct: dict) -> "NnldModel":
        return cls(NeuronParams.from_dict(dct["params"]), ConnectionMap(dct["slots"], dct["d"]), float(dct["v_thr"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "NnldModel":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class EvalResult:
    v_max: float
    t_max: float
    t_index: int
    branch_drives_at_tmax: np.ndarray
    predicted: int


def init_connections(d: int, params: NeuronParams, seed) -> ConnectionMap:
    """Each of the m*k slots draws its afferent uniformly from [0, d)."""
    if d < 1:
        raise ParameterError(f"need d >= 1, got {d}")
    rng = np.random.default_rng(seed)
    return ConnectionMap(rng.integers(0, d, size=(params.m, params.k)), d)


def branch_nonlinearity(v, params: NeuronParams):
    """Squared drive, saturating at ``x_sat``."""
    v = np.asarray(v, dtype=float)
    return np.minimum(v * v * (1.0 / params.x_thr), params.x_sat)


def branch_derivative(v, params: NeuronParams):
    """Slope of the clipped nonlinearity; zero once the branch saturates."""
    v = np.asarray(v, dtype=float)
    return np.where(v * v * (1.0 / params.x_thr) < params.x_sat, 2.0 * v / params.x_thr, 0.0)


def _steps(t: float, dt: float) -> int:
    return int(round(t / dt))


def branch_drive(pattern: SpikePattern, branch: int, t: float, conn: ConnectionMap, table: KernelTable) -> float:
    if not 0 <= branch < conn.m:
        raise IndexError(f"branch {branch} out of range [0, {conn.m})")
    ts = _steps(t, table.dt)
    total = 0.0
    for a in conn.slots[branch]:
        s = np.rint(pattern.spikes(a) / table.dt).astype(np.int64)
        total += float(np.sum(table.lookup(ts - s)))
    return total


def pattern_grid_length(pattern: SpikePattern, table: KernelTable, T: float | None = None) -> int:
    if T is None:
        T = float(pattern.times.max()) if pattern.times.size else 0.0
    return grid_length(T, table.params.tau, table.dt)


def membrane_trace(pattern: SpikePattern, model: NnldModel, table: KernelTable, T: float | None = None) -> np.ndarray:
    """V(t) on the grid ``0, dt, ...`` covering [0, T + 5 tau]."""
    G = pattern_grid_length(pattern, table, T)
    spk = to_spike_grid([pattern], model.conn.d, table.dt)
    p = model.params
    return kernels.membrane(spk, model.conn.slots, table.values, G, p.x_thr, p.x_sat)[0]


def membrane_voltage(pattern: SpikePattern, model: NnldModel, table: KernelTable, t: float) -> float:
    drives = np.array([branch_drive(pattern, j, t, model.conn, table) for j in range(model.conn.m)])
    return float(branch_nonlinearity(drives, model.params).sum())


def classify(v_max, v_thr):
    return np.where(np.asarray(v_max) >= v_thr, POSITIVE, NEGATIVE)


def eval_pattern(pattern: SpikePattern, model: NnldModel, table: KernelTable, T: float | None = None) -> EvalResult:
    V = membrane_trace(pattern, model, table, T)
    if V.size == 0:
        raise ParameterError("empty evaluation grid")
    ti = int(np.argmax(V))
    spk = to_spike_grid([pattern], model.conn.d, table.dt)
    drives = kernels.drives_at(spk, np.zeros(1, np.int64), np.array([ti]), model.conn.slots, table.values)[0]
    return EvalResult(float(V[ti]), ti * table.dt, ti, drives, int(classify(V[ti], model.v_thr)))


def evaluate(dataset: Dataset, model: NnldModel, table: KernelTable) -> tuple[np.ndarray, np.ndarray]:
    """Peak voltage and its grid index for every pattern of ``dataset``."""
    spk = dataset.spike_grid(table.dt)
    G = grid_length(dataset.T, table.params.tau, table.dt)
    p = model.params
    V = kernels.membrane(spk, model.conn.slots, table.values, G, p.x_thr, p.x_sat)
    return kernels.vmax_tmax(V)


def accuracy(dataset: Dataset, model: NnldModel, table: KernelTable) -> float:
    vmax, _ = evaluate(dataset, model, table)
    return float(np.mean(classify(vmax, model.v_thr) == dataset.labels))
