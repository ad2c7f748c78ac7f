"""Command-line entry point: ``nnld <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import data
from .data import FormatError
from .encoder import LifParams, encode_recording, gen_encoded, read_recording_csv
from .harness import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    default_output_dir,
    run_experiment,
    run_quant_sweep,
    write_report,
    write_sweep_csv,
)
from .kernel import ParameterError, build_table
from .morph import static_threshold, train, write_trace
from .neuron import NeuronParams, accuracy
from .tempotron import tempotron_accuracy, train_tempotron


def _load_config(args) -> ExperimentConfig:
    dct = json.loads(Path(args.config).read_text()) if args.config else {}
    for flag, key in (("task", "task"), ("p", "P"), ("d", "d"), ("t", "T"), ("learner", "learner"),
                      ("trials", "trials"), ("workers", "workers"), ("base_seed", "base_seed")):
        val = getattr(args, flag, None)
        if val is not None:
            dct[key] = val
    return ExperimentConfig.from_dict(apply_overrides(dct, args.set or []))


def _outdir(args) -> Path:
    out = Path(args.output) if args.output else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    if args.task == "latency":
        ds = data.gen_latency(args.p, args.d, args.t, args.seed)
    elif args.task == "synchrony":
        ds = data.gen_synchrony(args.p, args.d, args.t, args.seed)
    else:
        ds = gen_encoded(args.n_per_class, args.seed)
    out = Path(args.output) if args.output else default_output_dir() / f"{args.task}.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    data.save(ds, out)
    print(out)
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    ds = data.load(args.dataset)
    table = build_table(cfg.neuron.kernel, cfg.dt)
    out = _outdir(args)
    seed = args.seed if args.seed is not None else cfg.base_seed
    if cfg.learner == "morph":
        model, traces = train(ds, cfg.neuron, dataclasses.replace(cfg.morph, seed=seed), table)
        acc = accuracy(ds, model, table)
    else:
        model, traces = train_tempotron(ds, dataclasses.replace(cfg.tempotron, seed=seed), table)
        acc = tempotron_accuracy(ds, model, table)
    model.save(out / "model.json")
    write_trace(traces, out / "trace.csv")
    summary = {"accuracy": acc, "final_accuracy": traces[-1].train_accuracy, "iterations": len(traces),
               "v_thr": model.v_thr}
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    print(json.dumps(summary))
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    rep = run_experiment(cfg)
    path = write_report(rep, _outdir(args))
    print(f"{path}: mean={rep.mean!r} sd={rep.sd!r}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    rows = run_quant_sweep(cfg, args.bits, args.modes, args.tasks)
    path = _outdir(args) / "sweep.csv"
    write_sweep_csv(rows, path)
    print(path)
    return 0


def cmd_encode(args) -> int:
    lif = LifParams(args.leak, args.gain, args.threshold, args.reset)
    pats = []
    for n, src in enumerate(args.inputs):
        rec = read_recording_csv(src)
        pats.append(encode_recording(rec, lif, data.POSITIVE if args.label == "+" else data.NEGATIVE, n, args.bin_thr))
    T = max(read_recording_csv(src).duration for src in args.inputs)
    ds = data.Dataset(pats, pats[0].d, T, "encoded")
    out = Path(args.output) if args.output else default_output_dir() / "encoded.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    data.save(ds, out)
    print(out)
    return 0


def cmd_static_thr(args) -> int:
    params = NeuronParams(m=args.m, k=args.k)
    thr = static_threshold(params, args.d, args.t, args.samples, args.seed)
    print(repr(thr))
    if args.output:
        Path(args.output).write_text(json.dumps({"v_thr": thr, "m": args.m, "k": args.k, "d": args.d, "T": args.t,
                                                 "samples": args.samples, "seed": args.seed}))
    return 0


def _config_flags(p: argparse.ArgumentParser, trials=False):
    p.add_argument("-c", "--config", help="JSON experiment config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field, e.g. morph.n_T=50")
    p.add_argument("--task", choices=data.TASKS)
    p.add_argument("--p", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--t", type=float)
    p.add_argument("--learner", choices=("morph", "tempotron"))
    p.add_argument("-o", "--output", help="output directory")
    if trials:
        p.add_argument("--trials", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--base-seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nnld", description="Dendritic-neuron spike classifiers")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset file")
    g.add_argument("--task", choices=data.TASKS, required=True)
    g.add_argument("--p", type=int, default=100)
    g.add_argument("--d", type=int, default=500)
    g.add_argument("--t", type=float, default=400.0)
    g.add_argument("--n-per-class", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="single training run on a dataset file")
    t.add_argument("dataset")
    t.add_argument("--seed", type=int)
    _config_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("experiment", help="multi-trial experiment")
    _config_flags(e, trials=True)
    e.set_defaults(func=cmd_experiment)

    s = sub.add_parser("sweep", help="Tempotron quantization sweep")
    _config_flags(s, trials=True)
    s.add_argument("--bits", type=int, nargs="*", default=[2, 4])
    s.add_argument("--modes", nargs="+", choices=("AT", "DT"), default=["AT", "DT"])
    s.add_argument("--tasks", nargs="+", choices=data.TASKS)
    s.set_defaults(func=cmd_sweep)

    n = sub.add_parser("encode", help="encode analog CSV recordings into a spike dataset")
    n.add_argument("inputs", nargs="+")
    n.add_argument("--label", choices=("+", "-"), default="+")
    n.add_argument("--bin-thr", type=float, default=0.5)
    n.add_argument("--leak", type=float, default=LifParams.leak)
    n.add_argument("--gain", type=float, default=LifParams.gain)
    n.add_argument("--threshold", type=float, default=LifParams.threshold)
    n.add_argument("--reset", type=float, default=LifParams.reset)
    n.add_argument("-o", "--output")
    n.set_defaults(func=cmd_encode)

    st = sub.add_parser("static-thr", help="V_max-mode threshold of random patterns")
    st.add_argument("--m", type=int, default=100)
    st.add_argument("--k", type=int, default=5)
    st.add_argument("--d", type=int, default=500)
    st.add_argument("--t", type=float, default=400.0)
    st.add_argument("--samples", type=int, default=10000)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("-o", "--output")
    st.set_defaults(func=cmd_static_thr)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, ParameterError, FileNotFoundError) as e:
        print(f"nnld: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
