"""Analog-to-spike conversion for multichannel sensor recordings.

Each channel is binarized at a fixed level, the binary stream and its
complement are both fed to a leaky integrate-and-fire unit, and the two
resulting spike trains become two afferents. Rising and falling edges both
change the firing of some afferent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._backend import kernels
from .data import NEGATIVE, POSITIVE, Dataset, FormatError, SpikePattern
from .kernel import ParameterError


@dataclass(frozen=True)
class AnalogRecording:
    channels: np.ndarray  # (c, n) samples in [0, 1]
    sample_period: float = 2.0  # ms

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim == 1:
            ch = ch[None, :]
        if ch.ndim != 2:
            raise ParameterError("channels must be a (c, n) array")
        if not self.sample_period > 0:
            raise ParameterError("sample_period must be positive")
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def duration(self) -> float:
        return self.channels.shape[1] * self.sample_period


@dataclass(frozen=True)
class DigitalRecording:
    bits: np.ndarray  # (c, n) uint8
    sample_period: float = 2.0

    @property
    def n_channels(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class LifParams:
    leak: float = 20.0  # ms
    gain: float = 0.12  # per high sample
    threshold: float = 1.0
    reset: float = 0.0

    def __post_init__(self):
        if not (self.leak > 0 and self.gain > 0 and self.threshold > 0):
            raise ParameterError("leak, gain and threshold must be positive")
        if not 0 <= self.reset < self.threshold:
            raise ParameterError("reset must satisfy 0 <= reset < threshold")


def binarize(rec: AnalogRecording, thr: float = 0.5) -> DigitalRecording:
    return DigitalRecording((rec.channels >= thr).astype(np.uint8), rec.sample_period)


def invert(dig: DigitalRecording) -> DigitalRecording:
    return DigitalRecording((1 - dig.bits).astype(np.uint8), dig.sample_period)


def lif_encode(bits, lif: LifParams, sample_period: float = 2.0) -> np.ndarray:
    """Spike times (ms) of a discrete LIF unit driven by one binary channel."""
    bits = np.ascontiguousarray(bits, dtype=np.float64)
    decay = math.exp(-sample_period / lif.leak)
    idx = kernels.lif_spikes(bits, decay, lif.gain, lif.threshold, lif.reset)
    return idx * float(sample_period)


def samples_to_fire(lif: LifParams, sample_period: float) -> int | None:
    """Samples of sustained high input needed to reach threshold from reset, or None if never."""
    a = math.exp(-sample_period / lif.leak)
    state = lif.reset
    for n in range(1, 100000):
        state = state * a + lif.gain
        if state >= lif.threshold:
            return n
        if state >= lif.gain / (1 - a) * (1 - 1e-12):
            return None
    return None


def encode_recording(rec: AnalogRecording, lif: LifParams = LifParams(), label: int = POSITIVE,
                     id: int = 0, thr: float = 0.5) -> SpikePattern:
    """Afferents ``0..c-1`` encode the binarized channels, ``c..2c-1`` their complements."""
    dig = binarize(rec, thr)
    inv = invert(dig)
    trains = [lif_encode(ch, lif, rec.sample_period) for ch in dig.bits]
    trains += [lif_encode(ch, lif, rec.sample_period) for ch in inv.bits]
    return SpikePattern.from_lists(trains, label, id)


# --- synthetic tactile recordings -----------------------------------------

GRID_SHAPE = (5, 13)
KINDS = {"small": 1.6, "large": 2.9}  # final contact radius in taxel units


def synth_tactile(
    kind: str,
    seed,
    n_samples: int = 200,
    sample_period: float = 2.0,
    noise: float = 0.05,
    release_at: float | None = None,
    grid_shape: tuple[int, int] = GRID_SHAPE,
) -> AnalogRecording:
    """Sphere-on-taxel-array stand-in: a contact disk grows after onset, then holds.

    Taxels inside the disk read about 0.85, the rest about 0.15, plus Gaussian
    noise. With ``release_at`` (ms) every taxel returns to baseline from then on.
    """
    if kind not in KINDS:
        raise ParameterError(f"kind must be one of {sorted(KINDS)}, got {kind!r}")
    rng = np.random.default_rng(seed)
    rows, cols = grid_shape
    onset = rng.uniform(40.0, 80.0)
    rise = 100.0
    center = np.array([(rows - 1) / 2 + rng.uniform(-0.5, 0.5), (cols - 1) / 2 + rng.uniform(-1.0, 1.0)])
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    dist = np.hypot(rr - center[0], cc - center[1]).reshape(-1)
    t = np.arange(n_samples) * sample_period
    radius = KINDS[kind] * np.sqrt(np.clip((t - onset) / rise, 0.0, 1.0))
    radius[t < onset] = -1.0
    contact = dist[:, None] <= radius[None, :]
    if release_at is not None:
        contact[:, t >= release_at] = False
    x = np.where(contact, 0.85, 0.15)
    if noise > 0:
        x = x + rng.normal(0.0, noise, size=x.shape)
    return AnalogRecording(np.clip(x, 0.0, 1.0), sample_period)


def gen_encoded(n_per_class: int = 100, seed: int = 0, lif: LifParams = LifParams(), **synth_kw) -> Dataset:
    """Two-class encoded dataset: 'large' indenter recordings are P+, 'small' are P-."""
    if n_per_class < 1:
        raise ParameterError("n_per_class must be >= 1")
    ss = np.random.SeedSequence(seed)
    seeds = ss.spawn(2 * n_per_class)
    pats = []
    T = 0.0
    for n in range(2 * n_per_class):
        kind = "large" if n % 2 == 0 else "small"
        rec = synth_tactile(kind, seeds[n], **synth_kw)
        T = rec.duration
        pats.append(encode_recording(rec, lif, POSITIVE if kind == "large" else NEGATIVE, n))
    return Dataset(pats, pats[0].d, T, "encoded")


def split_train_test(dataset: Dataset, train_frac: float = 0.6, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Per-class random split (60/40 by default)."""
    rng = np.random.default_rng(seed)
    labels = dataset.labels
    train, test = [], []
    for lab in (POSITIVE, NEGATIVE):
        idx = rng.permutation(np.flatnonzero(labels == lab))
        cut = int(round(train_frac * idx.size))
        train += idx[:cut].tolist()
        test += idx[cut:].tolist()
    return dataset.subset(sorted(train)), dataset.subset(sorted(test))


# --- CSV I/O ----------------------------------------------------------------


def write_recording_csv(rec: AnalogRecording, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"sample_period={rec.sample_period!r}\n")
        w = csv.writer(fh)
        for row in rec.channels.T:
            w.writerow([repr(float(v)) for v in row])


def read_recording_csv(path) -> AnalogRecording:
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline().strip()
        key, _, val = header.partition("=")
        if key.strip() != "sample_period" or not val:
            raise FormatError(f"{path}:1: expected header 'sample_period=<ms>'")
        try:
            sp = float(val)
        except ValueError:
            raise FormatError(f"{path}:1: bad sample_period {val!r}") from None
        rows = []
        for lineno, row in enumerate(csv.reader(fh), start=2):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric sample") from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(f"{path}:{lineno}: expected {len(rows[0])} channels, got {len(rows[-1])}")
    if not rows:
        raise FormatError(f"{path}: no samples")
    return AnalogRecording(np.asarray(rows).T, sp)
