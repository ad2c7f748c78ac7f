"""Spike-pattern data model, benchmark generators and JSON-lines I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kernel import ParameterError

POSITIVE = 1
NEGATIVE = -1

TASKS = ("latency", "synchrony", "encoded")


class FormatError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True, eq=False)
class SpikePattern:
    """Spike times of ``d`` afferents stored flat.

    ``times[offsets[i]:offsets[i + 1]]`` are the sorted spike times (ms) of
    afferent ``i``.
    """

    times: np.ndarray
    offsets: np.ndarray
    label: int
    id: int = 0

    def __post_init__(self):
        if self.label not in (POSITIVE, NEGATIVE):
            raise ParameterError(f"label must be +1 or -1, got {self.label}")
        if self.times.size and not np.all(np.isfinite(self.times)):
            raise ParameterError("spike times must be finite")
        if self.times.size and self.times.min() < 0:
            raise ParameterError("spike times must be non-negative")

    @classmethod
    def from_lists(cls, afferents: Sequence[Iterable[float]], label: int, id: int = 0) -> "SpikePattern":
        arrs = [np.sort(np.asarray(list(a), dtype=np.float64)) for a in afferents]
        counts = np.array([a.size for a in arrs], dtype=np.int64)
        offsets = np.zeros(len(arrs) + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        times = np.concatenate(arrs) if arrs else np.zeros(0)
        return cls(times=times, offsets=offsets, label=label, id=id)

    @property
    def d(self) -> int:
        return self.offsets.shape[0] - 1

    @property
    def afferents(self) -> list[np.ndarray]:
        return [self.times[self.offsets[i]:self.offsets[i + 1]] for i in range(self.d)]

    def spikes(self, i: int) -> np.ndarray:
        return self.times[self.offsets[i]:self.offsets[i + 1]]

    def __eq__(self, other):
        if not isinstance(other, SpikePattern):
            return NotImplemented
        return (
            self.label == other.label
            and self.id == other.id
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.times, other.times)
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    patterns: list[SpikePattern]
    d: int
    T: float
    task: str
    pairings: tuple[np.ndarray, np.ndarray] | None = None
    _grid_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ParameterError(f"unknown task {self.task!r}")
        for p in self.patterns:
            if p.d != self.d:
                raise ParameterError(f"pattern {p.id} has {p.d} afferents, dataset declares {self.d}")

    def __len__(self) -> int:
        return len(self.patterns)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.d, self.T, self.task) != (other.d, other.T, other.task):
            return False
        if (self.pairings is None) != (other.pairings is None):
            return False
        if self.pairings is not None and not all(
            np.array_equal(a, b) for a, b in zip(self.pairings, other.pairings)
        ):
            return False
        return self.patterns == other.patterns

    @property
    def labels(self) -> np.ndarray:
        return np.array([p.label for p in self.patterns], dtype=np.int64)

    def subset(self, idx: Sequence[int]) -> "Dataset":
        return Dataset([self.patterns[i] for i in idx], self.d, self.T, self.task, self.pairings)

    def spike_grid(self, dt: float) -> np.ndarray:
        """Spike times rounded to grid steps, shape ``(P, d, S)`` padded with -1.

        ``S`` is the largest per-afferent spike count. Cached per ``dt``.
        """
        key = float(dt)
        if key not in self._grid_cache:
            self._grid_cache[key] = to_spike_grid(self.patterns, self.d, dt)
        return self._grid_cache[key]


def to_spike_grid(patterns: Sequence[SpikePattern], d: int, dt: float) -> np.ndarray:
    P = len(patterns)
    S = 1
    for p in patterns:
        if p.times.size:
            S = max(S, int(np.diff(p.offsets).max()))
    grid = np.full((P, d, S), -1, dtype=np.int64)
    for n, p in enumerate(patterns):
        counts = np.diff(p.offsets)
        if counts.size and counts.min() == counts.max() == 1:
            grid[n, :, 0] = np.rint(p.times / dt)
            continue
        for i in range(d):
            s = p.times[p.offsets[i]:p.offsets[i + 1]]
            grid[n, i, : s.size] = np.rint(s / dt)
    return grid


def _labels(rng: np.random.Generator, P: int, exact_split: bool) -> np.ndarray:
    if exact_split:
        lab = np.where(np.arange(P) < (P + 1) // 2, POSITIVE, NEGATIVE)
        return rng.permutation(lab)
    return np.where(rng.random(P) < 0.5, POSITIVE, NEGATIVE)


def _single_spike_pattern(times: np.ndarray, label: int, id: int) -> SpikePattern:
    d = times.shape[0]
    return SpikePattern(
        times=np.ascontiguousarray(times, dtype=np.float64),
        offsets=np.arange(d + 1, dtype=np.int64),
        label=int(label),
        id=id,
    )


def _check_sizes(P, d, T):
    if P < 1 or d < 1 or not T > 0:
        raise ParameterError(f"need P, d >= 1 and T > 0, got P={P}, d={d}, T={T}")


def gen_latency(P: int, d: int, T: float, seed: int, exact_split: bool = False) -> Dataset:
    """Random latency task: every afferent fires once, uniformly in [1, T] ms."""
    _check_sizes(P, d, T)
    rng = np.random.default_rng(seed)
    labels = _labels(rng, P, exact_split)
    times = rng.uniform(1.0, max(T, 1.0), size=(P, d))
    pats = [_single_spike_pattern(times[n], labels[n], n) for n in range(P)]
    return Dataset(pats, d, float(T), "latency")


def random_matching(rng: np.random.Generator, d: int) -> np.ndarray:
    """Uniform perfect matching of ``d`` afferents as a ``(d/2, 2)`` array, rows sorted."""
    pairs = rng.permutation(d).reshape(-1, 2)
    pairs.sort(axis=1)
    return pairs[np.argsort(pairs[:, 0])]


def gen_synchrony(P: int, d: int, T: float, seed: int, exact_split: bool = False) -> Dataset:
    """Pairwise synchrony task.

    Each class owns one fixed perfect matching of the afferents; a pattern
    draws one uniform time per pair of its class's matching and both
    afferents of the pair fire then.
    """
    _check_sizes(P, d, T)
    if d % 2:
        raise ParameterError(f"synchrony task needs an even afferent count, got d={d}")
    rng = np.random.default_rng(seed)
    pos = random_matching(rng, d)
    neg = random_matching(rng, d)
    # d = 2 has a single matching
    while d > 2 and np.array_equal(pos, neg):
        neg = random_matching(rng, d)
    labels = _labels(rng, P, exact_split)
    pair_times = rng.uniform(1.0, max(T, 1.0), size=(P, d // 2))
    pats = []
    for n in range(P):
        m = pos if labels[n] == POSITIVE else neg
        t = np.empty(d)
        t[m[:, 0]] = pair_times[n]
        t[m[:, 1]] = pair_times[n]
        pats.append(_single_spike_pattern(t, labels[n], n))
    return Dataset(pats, d, float(T), "synchrony", (pos, neg))


# --- JSON-lines I/O -------------------------------------------------------


def save(ds: Dataset, path) -> None:
    path = Path(path)
    header = {
        "d": ds.d,
        "T": ds.T,
        "task": ds.task,
        "P": len(ds),
        "pairings": None if ds.pairings is None else [m.tolist() for m in ds.pairings],
    }
    with path.open("w") as fh:
        fh.write(json.dumps(header) + "\n")
        for p in ds.patterns:
            rec = {
                "id": p.id,
                "label": "+" if p.label == POSITIVE else "-",
                "spikes": [a.tolist() for a in p.afferents],
            }
            fh.write(json.dumps(rec) + "\n")


def load(path) -> Dataset:
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = _parse_line(path, 1, lines[0])
    for key in ("d", "T", "task"):
        if key not in header:
            raise FormatError(f"{path}:1: header missing field {key!r}")
    d, T, task = header["d"], header["T"], header["task"]
    if not isinstance(d, int) or d < 1:
        raise FormatError(f"{path}:1: field 'd' must be a positive integer")
    if task not in TASKS:
        raise FormatError(f"{path}:1: unknown task {task!r}")
    pairings = None
    if header.get("pairings") is not None:
        try:
            pairings = tuple(np.asarray(m, dtype=np.int64).reshape(-1, 2) for m in header["pairings"])
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}:1: bad 'pairings': {exc}") from None
    pats = []
    for lineno, line in enumerate(lines[1:], start=2):
        rec = _parse_line(path, lineno, line)
        for key in ("id", "label", "spikes"):
            if key not in rec:
                raise FormatError(f"{path}:{lineno}: pattern missing field {key!r}")
        if rec["label"] not in ("+", "-"):
            raise FormatError(f"{path}:{lineno}: field 'label' must be '+' or '-'")
        spikes = rec["spikes"]
        if not isinstance(spikes, list) or len(spikes) != d:
            n = len(spikes) if isinstance(spikes, list) else "non-list"
            raise FormatError(f"{path}:{lineno}: field 'spikes' has {n} afferents, header declares d={d}")
        try:
            pats.append(
                SpikePattern.from_lists(spikes, POSITIVE if rec["label"] == "+" else NEGATIVE, int(rec["id"]))
            )
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: field 'spikes': {exc}") from None
    if "P" in header and header["P"] != len(pats):
        raise FormatError(f"{path}: header declares P={header['P']} patterns, found {len(pats)} (truncated?)")
    return Dataset(pats, d, float(T), task, pairings)


def _parse_line(path, lineno, line):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg} at column {exc.colno})") from None
    if not isinstance(rec, dict):
        raise FormatError(f"{path}:{lineno}: expected a JSON object")
    return rec


def grid_length(T: float, tau: float, dt: float) -> int:
    """Number of grid points covering [0, T + 5 tau]."""
    return int(math.floor((T + 5.0 * tau) / dt + 1e-9)) + 1
