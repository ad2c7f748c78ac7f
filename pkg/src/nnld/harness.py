"""Seeded multi-trial experiments, quantization sweeps and report files."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import TASKS, Dataset, gen_latency, gen_synchrony
from .encoder import LifParams, gen_encoded, split_train_test
from .kernel import ParameterError, build_table
from .morph import MorphConfig, static_threshold, train
from .neuron import NeuronParams, accuracy
from .tempotron import MODES, QuantSpec, TempotronConfig, tempotron_accuracy, train_tempotron

LEARNERS = ("morph", "tempotron")
THRESHOLDS = ("adaptive", "static")
OUTPUT_ENV = "NNLD_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the offending field path."""


@dataclass
class EncodedTask:
    n_per_class: int = 100
    train_frac: float = 0.6
    lif: LifParams = LifParams()


@dataclass
class ExperimentConfig:
    task: str = "latency"
    P: int = 500
    d: int = 500
    T: float = 400.0
    neuron: NeuronParams = NeuronParams()
    learner: str = "morph"
    morph: MorphConfig = field(default_factory=MorphConfig)
    tempotron: TempotronConfig = field(default_factory=TempotronConfig)
    # "static" fixes the threshold at the V_max mode of random patterns and wirings
    threshold: str = "adaptive"
    static_samples: int = 2000
    encoded: EncodedTask = field(default_factory=EncodedTask)
    trials: int = 10
    base_seed: int = 0
    workers: int = 1
    dt: float = 1.0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task: must be one of {TASKS}, got {self.task!r}")
        if self.learner not in LEARNERS:
            raise ConfigError(f"learner: must be one of {LEARNERS}, got {self.learner!r}")
        if self.threshold not in THRESHOLDS:
            raise ConfigError(f"threshold: must be one of {THRESHOLDS}, got {self.threshold!r}")
        for name in ("trials", "workers", "P", "d", "static_samples"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name}: must be >= 1, got {getattr(self, name)}")
        if not self.T > 0 or not self.dt > 0:
            raise ConfigError("T/dt: must be positive")
        if not 0 < self.encoded.train_frac < 1:
            raise ConfigError("encoded.train_frac: must lie in (0, 1)")

    # --- (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        out = _plain(self)
        out["neuron"] = self.neuron.to_dict()
        return out

    @classmethod
    def from_dict(cls, dct: dict) -> "ExperimentConfig":
        if not isinstance(dct, dict):
            raise ConfigError("<root>: expected an object")
        dct = dict(dct)
        kw = {}
        if "neuron" in dct:
            sub = _expect_obj(dct.pop("neuron"), "neuron")
            _reject_unknown(sub, {f.name for f in dataclasses.fields(NeuronParams)}, "neuron")
            kw["neuron"] = _build("neuron", NeuronParams.from_dict, sub)
        if "morph" in dct:
            sub = _expect_obj(dct.pop("morph"), "morph")
            kw["morph"] = _build_dc("morph", MorphConfig, sub)
        if "tempotron" in dct:
            sub = dict(_expect_obj(dct.pop("tempotron"), "tempotron"))
            if "quant" in sub:
                sub["quant"] = _build_dc("tempotron.quant", QuantSpec, _expect_obj(sub["quant"], "tempotron.quant"))
            kw["tempotron"] = _build_dc("tempotron", TempotronConfig, sub)
        if "encoded" in dct:
            sub = dict(_expect_obj(dct.pop("encoded"), "encoded"))
            if "lif" in sub:
                sub["lif"] = _build_dc("encoded.lif", LifParams, _expect_obj(sub["lif"], "encoded.lif"))
            kw["encoded"] = _build_dc("encoded", EncodedTask, sub)
        _reject_unknown(dct, {f.name for f in dataclasses.fields(cls)}, "")
        kw.update(dct)
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            dct = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"<file>: invalid JSON at line {e.lineno}: {e.msg}") from None
        return cls.from_dict(dct)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    return obj


def _expect_obj(val, path):
    if not isinstance(val, dict):
        raise ConfigError(f"{path}: expected an object")
    return val


def _reject_unknown(dct, known, prefix):
    for key in dct:
        if key not in known:
            where = f"{prefix}.{key}" if prefix else key
            raise ConfigError(f"{where}: unknown field")


def _build(path, ctor, dct):
    try:
        return ctor(dct)
    except ConfigError:
        raise
    except (ParameterError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from None


def _build_dc(path, cls, dct):
    _reject_unknown(dct, {f.name for f in dataclasses.fields(cls)}, path)
    return _build(path, lambda d: cls(**d), dct)


def apply_overrides(dct: dict, overrides) -> dict:
    """Apply ``a.b=value`` overrides; values are parsed as JSON when possible."""
    out = json.loads(json.dumps(dct))
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r}: expected key=value")
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: {p} is not an object")
        node[parts[-1]] = val
    return out


# --- trials -------------------------------------------------------------------


def trial_seeds(base_seed: int, t: int) -> tuple[int, int]:
    """Independent integer seeds for the dataset and the learner of trial ``t``."""
    data, learn = np.random.SeedSequence(base_seed + t).generate_state(2)
    return int(data), int(learn)


def make_dataset(cfg: ExperimentConfig, seed: int) -> tuple[Dataset, Dataset | None]:
    """Training set and, for the encoded task, the held-out set."""
    if cfg.task == "latency":
        return gen_latency(cfg.P, cfg.d, cfg.T, seed), None
    if cfg.task == "synchrony":
        return gen_synchrony(cfg.P, cfg.d, cfg.T, seed), None
    ds = gen_encoded(cfg.encoded.n_per_class, seed, cfg.encoded.lif)
    return split_train_test(ds, cfg.encoded.train_frac, seed)


def run_trial(cfg: ExperimentConfig, t: int) -> dict:
    data_seed, learn_seed = trial_seeds(cfg.base_seed, t)
    train_ds, test_ds = make_dataset(cfg, data_seed)
    table = build_table(cfg.neuron.kernel, cfg.dt)
    scored = test_ds if test_ds is not None else train_ds
    out = {"trial": t, "seed": cfg.base_seed + t}
    if cfg.learner == "morph":
        mcfg = dataclasses.replace(cfg.morph, seed=learn_seed)
        if cfg.threshold == "static":
            thr = static_threshold(cfg.neuron, train_ds.d, train_ds.T, cfg.static_samples, learn_seed, table)
            mcfg = dataclasses.replace(mcfg, eta=0.0, v_thr_init=max(thr, 1e-6))
        model, traces = train(train_ds, cfg.neuron, mcfg, table)
        out["accuracy"] = accuracy(scored, model, table)
        out["train_accuracy"] = accuracy(train_ds, model, table)
        out["v_thr"] = model.v_thr
    else:
        tcfg = dataclasses.replace(cfg.tempotron, seed=learn_seed)
        model, traces = train_tempotron(train_ds, tcfg, table)
        out["accuracy"] = tempotron_accuracy(scored, model, table)
        out["train_accuracy"] = tempotron_accuracy(train_ds, model, table)
        out["v_thr"] = model.v_thr
    out["final_accuracy"] = traces[-1].train_accuracy
    out["iterations"] = len(traces)
    return out


@dataclass
class ExperimentReport:
    per_trial: list[dict]
    mean: float
    sd: float
    config: dict
    runtime: float = 0.0

    @property
    def accuracies(self) -> list[float]:
        return [r["accuracy"] for r in self.per_trial]

    def to_json(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "per_trial": self.per_trial, "config": self.config}


def summarize(values) -> tuple[float, float]:
    """Mean and sample SD; SD is 0 for a single trial."""
    values = list(values)
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


def _run_trial_args(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig, trial_order=None) -> ExperimentReport:
    """Run ``cfg.trials`` independent trials and aggregate them in trial order."""
    start = time.perf_counter()
    order = list(trial_order) if trial_order is not None else list(range(cfg.trials))
    if sorted(order) != list(range(cfg.trials)):
        raise ConfigError("trial_order: must be a permutation of range(trials)")
    if cfg.workers > 1 and len(order) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_trial_args, [(cfg, t) for t in order]))
    else:
        results = [run_trial(cfg, t) for t in order]
    results.sort(key=lambda r: r["trial"])
    mean, sd = summarize(r["accuracy"] for r in results)
    return ExperimentReport(results, mean, sd, cfg.to_dict(), time.perf_counter() - start)


def write_report(report: ExperimentReport, outdir) -> Path:
    """``report.json`` depends only on config and seeds; wall time goes to ``runtime.json``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "report.json"
    path.write_text(json.dumps(report.to_json(), indent=1))
    (outdir / "runtime.json").write_text(json.dumps({"seconds": report.runtime}))
    return path


# --- quantization sweep -------------------------------------------------------

SWEEP_COLUMNS = ["task", "bits", "mode", "mean", "sd", "trials"]


def run_quant_sweep(cfg: ExperimentConfig, bits_list, modes=("AT", "DT"), tasks=None) -> list[dict]:
    """Tempotron accuracy for every (task, bits, mode) combination."""
    rows = []
    for mode in modes:
        if mode not in MODES or mode == "none":
            raise ConfigError(f"modes: expected AT or DT, got {mode!r}")
    for task in tasks if tasks is not None else [cfg.task]:
        for bits in bits_list:
            for mode in modes:
                quant = QuantSpec(int(bits), mode)
                sub = dataclasses.replace(
                    cfg, task=task, learner="tempotron", tempotron=dataclasses.replace(cfg.tempotron, quant=quant)
                )
                rep = run_experiment(sub)
                rows.append({"task": task, "bits": int(bits), "mode": mode, "mean": rep.mean, "sd": rep.sd,
                             "trials": rep.accuracies})
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r["task"], r["bits"], r["mode"], repr(float(r["mean"])), repr(float(r["sd"])),
                        " ".join(repr(float(a)) for a in r["trials"])])


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "nnld_out"))
