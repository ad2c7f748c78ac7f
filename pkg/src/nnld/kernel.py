"""Normalized double-exponential PSP kernel and its precomputed lookup table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Raised for invalid numeric parameters."""


def peak_lag(tau: float, tau_s: float) -> float:
    """Lag (ms) at which exp(-t/tau) - exp(-t/tau_s) is maximal."""
    _check_taus(tau, tau_s)
    return tau * tau_s / (tau - tau_s) * math.log(tau / tau_s)


def normalization_v0(tau: float, tau_s: float) -> float:
    """Scale factor that makes the kernel peak exactly 1."""
    t_star = peak_lag(tau, tau_s)
    return 1.0 / (math.exp(-t_star / tau) - math.exp(-t_star / tau_s))


def _check_taus(tau: float, tau_s: float) -> None:
    if not (tau > tau_s > 0):
        raise ParameterError(f"need tau > tau_s > 0, got tau={tau}, tau_s={tau_s}")


@dataclass(frozen=True)
class KernelParams:
    tau: float = 15.0
    tau_s: float = 3.75
    v0: float = field(default=float("nan"))

    def __post_init__(self):
        _check_taus(self.tau, self.tau_s)
        v0 = normalization_v0(self.tau, self.tau_s)
        if not math.isnan(self.v0) and abs(self.v0 - v0) > 1e-12 * v0:
            raise ParameterError(f"v0={self.v0} does not normalize the peak (expected {v0})")
        object.__setattr__(self, "v0", v0)

    @classmethod
    def from_tau(cls, tau: float = 15.0) -> "KernelParams":
        """Kernel with the synaptic constant tied to tau / 4."""
        return cls(tau=tau, tau_s=tau / 4.0)

    @property
    def peak_lag(self) -> float:
        return peak_lag(self.tau, self.tau_s)


def kernel_value(lag, params: KernelParams):
    """Evaluate the causal kernel at ``lag`` (scalar or array, ms)."""
    lag = np.asarray(lag, dtype=float)
    pos = np.maximum(lag, 0.0)
    out = params.v0 * (np.exp(-pos / params.tau) - np.exp(-pos / params.tau_s))
    out = np.where(lag >= 0, out, 0.0)
    return out.item() if out.ndim == 0 else out


@dataclass(frozen=True)
class KernelTable:
    """Kernel sampled at lags ``0, dt, 2*dt, ...`` up to ``horizon``.

    Lookups past the last entry are zero; ``values`` is read-only.
    """

    params: KernelParams
    dt: float
    horizon: float
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.shape[0]

    def lookup(self, lag_steps):
        """Kernel value at integer lag(s) in grid steps; 0 outside the table."""
        lag_steps = np.asarray(lag_steps, dtype=np.int64)
        ok = (lag_steps >= 0) & (lag_steps < len(self))
        out = np.where(ok, self.values[np.clip(lag_steps, 0, len(self) - 1)], 0.0)
        return out.item() if out.ndim == 0 else out


def build_table(params: KernelParams, dt: float = 1.0, horizon: float | None = None) -> KernelTable:
    if horizon is None:
        horizon = 10.0 * params.tau
    if dt <= 0 or horizon <= 0:
        raise ParameterError(f"dt and horizon must be positive, got dt={dt}, horizon={horizon}")
    n = int(math.floor(horizon / dt + 1e-9)) + 1
    values = kernel_value(np.arange(n) * dt, params)
    values = np.asarray(values, dtype=np.float64)
    values[0] = 0.0
    values.setflags(write=False)
    return KernelTable(params=params, dt=float(dt), horizon=float(horizon), values=values)
