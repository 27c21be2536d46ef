"""Command-line entry point.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric divergence.
"""

import argparse
import dataclasses
import sys

import numpy as np

from . import cluster as cluster_mod
from . import colored, environments, erm, evaluation, irm, net, persistence, pipeline, syndigits
from .colored import SynthesisConfig
from .config import load_config
from .errors import ConfigError, DataError, NumericError
from .idx import load_mnist


def _load_dataset(path: str) -> colored.ColoredDataset:
    return colored.decode_dataset(persistence.load_artifact("dataset", path))


def _load_model(path: str):
    params = net.decode_params(persistence.load_artifact("checkpoint", path))
    return erm.TrainedModel(params=params, history=[], config=None)


def _pipeline_config(args) -> pipeline.PipelineConfig:
    cfg = load_config(args.config) if args.config else pipeline.PipelineConfig()
    updates = {}
    if args.mnist_dir:
        updates["mnist_dir"] = args.mnist_dir
    if args.out:
        updates["out_dir"] = args.out
    if args.seeds:
        updates["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    elif args.seed is not None:
        updates["seeds"] = (args.seed,)
    if args.jobs:
        updates["jobs"] = args.jobs
    if args.force:
        updates["force"] = True
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _add_common(parser):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--seeds", help="comma-separated seed list")
    parser.add_argument("--out", help="output path or directory")
    parser.add_argument("--mnist-dir", dest="mnist_dir", help="directory with IDX files")
    parser.add_argument("--jobs", type=int, default=0)
    parser.add_argument("--force", action="store_true", help="ignore the stage cache")


def build_parser():
    parser = argparse.ArgumentParser(prog="envinfer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic digit corpus as IDX files")
    _add_common(p)
    p.add_argument("--n-train", type=int, default=5000)
    p.add_argument("--n-test", type=int, default=2000)

    p = sub.add_parser("synth", help="synthesize a color-correlated dataset artifact")
    _add_common(p)
    p.add_argument("--split", choices=["train", "test"], default="train")
    p.add_argument("--pe", type=float, default=0.15)
    p.add_argument("--ny", type=float, default=0.25)
    p.add_argument("--grayscale", action="store_true")

    p = sub.add_parser("train-erm", help="train an ERM model on a dataset artifact")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--steps", type=int, default=501)
    p.add_argument("--step-size", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1.1e-3)
    p.add_argument("--widths", default="392,390,390,1")

    p = sub.add_parser("cluster", help="cluster ERM embeddings and report purity")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--restarts", type=int, default=10)

    p = sub.add_parser("build-envs", help="build D_m / D_balance from clusters")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--restarts", type=int, default=10)

    p = sub.add_parser("train-irm", help="train IRM on >= 2 dataset artifacts")
    _add_common(p)
    p.add_argument("--env", action="append", required=True,
                   help="dataset artifact path, repeat per environment")
    p.add_argument("--steps", type=int, default=501)
    p.add_argument("--step-size", type=float, default=1e-3)
    p.add_argument("--weight-decay", type=float, default=1.1e-3)
    p.add_argument("--widths", default="392,390,390,1")
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--lambda-final", type=float, default=1e4)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset artifact")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)

    p = sub.add_parser("sweep", help="accuracy over test sets with varying p_e")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ny", type=float, default=0.25)
    p.add_argument("--grayscale", action="store_true")

    p = sub.add_parser("pipeline", help="run every configured stage for all seeds")
    _add_common(p)

    p = sub.add_parser("report", help="re-aggregate a results.csv and emit tables/plot")
    _add_common(p)
    p.add_argument("--results", required=True)
    return parser


def _cmd_gen_data(args):
    out = args.out or "data"
    syndigits.write_idx_files(out, args.n_train, args.n_test, args.seed or 0)
    print(f"wrote synthetic IDX files to {out}")


def _cmd_synth(args):
    raw = load_mnist(args.mnist_dir or "data", args.split)
    cfg = SynthesisConfig(noise_level=args.ny, color_correlation=args.pe,
                          seed=args.seed or 0, grayscale=args.grayscale)
    ds = colored.synthesize(raw, cfg)
    out = args.out or f"{args.split}_pe{args.pe}.ds"
    persistence.save_artifact("dataset", colored.encode_dataset(ds), out)
    stats = colored.correlation_stats(ds)
    print(f"wrote {out}: n={stats['n']} empirical_pe={stats['empirical_pe']:.4f} "
          f"empirical_ny={stats['empirical_ny']:.4f}")


def _cmd_train_erm(args):
    ds = _load_dataset(args.dataset)
    widths = tuple(int(w) for w in args.widths.split(","))
    tcfg = erm.TrainConfig(steps=args.steps, step_size=args.step_size,
                           weight_decay=args.weight_decay, seed=args.seed or 0,
                           widths=widths)
    model = erm.train_erm(ds, tcfg)
    out = args.out or "erm.ckpt"
    persistence.save_artifact("checkpoint", net.encode_params(model.params), out)
    last = model.history[-1]
    print(f"wrote {out}: final loss={last['loss']:.4f} train_acc={last['train_acc']:.4f}")


def _cluster_from_args(args):
    ds = _load_dataset(args.dataset)
    model = _load_model(args.checkpoint)
    emb = cluster_mod.extract_embeddings(model, ds)
    assignment = cluster_mod.kmeans(emb, args.k, args.seed or 0, restarts=args.restarts)
    return ds, assignment


def _cmd_cluster(args):
    ds, assignment = _cluster_from_args(args)
    s_pur = cluster_mod.purity(assignment, ds.color_ids)
    c_pur = cluster_mod.purity(assignment, ds.labels)
    if args.out:
        cluster_mod.export_assignment_csv(assignment, ds, args.out)
    print(f"k={assignment.k} inertia={assignment.inertia:.2f} "
          f"S-purity={s_pur:.4f} C-purity={c_pur:.4f}")


def _cmd_build_envs(args):
    ds, assignment = _cluster_from_args(args)
    split = environments.minority_split(assignment, ds.labels)
    pair = environments.build_environments(split, ds.labels, ds.color_ids,
                                           args.seed or 0)
    if args.out:
        environments.export_environments_csv(pair, assignment, ds, args.out)
    for name, stats in pair.stats.items():
        print(f"{name}: size={stats['size']} class_balance={stats['class_balance']:.3f} "
              f"conflict_rate={stats['conflict_rate']:.3f}")


def _cmd_train_irm(args):
    envs = [_load_dataset(path) for path in args.env]
    widths = tuple(int(w) for w in args.widths.split(","))
    icfg = irm.IrmConfig(steps=args.steps, step_size=args.step_size,
                         weight_decay=args.weight_decay, seed=args.seed or 0,
                         widths=widths, warmup=args.warmup,
                         lambda_final=args.lambda_final)
    model = irm.train_irm(envs, icfg)
    out = args.out or "irm.ckpt"
    persistence.save_artifact("checkpoint", net.encode_params(model.params), out)
    print(f"wrote {out}")


def _cmd_eval(args):
    model = _load_model(args.checkpoint)
    ds = _load_dataset(args.dataset)
    print(f"accuracy={evaluation.evaluate(model, ds):.4f}")


def _cmd_sweep(args):
    model = _load_model(args.checkpoint)
    raw = load_mnist(args.mnist_dir or "data", "test")
    accs = evaluation.sweep(model, raw, noise_level=args.ny, seed=args.seed or 0,
                            grayscale=args.grayscale)
    for p, acc in zip(evaluation.DEFAULT_GRID, accs):
        print(f"{p:.1f},{acc:.4f}")


def _cmd_pipeline(args):
    cfg = _pipeline_config(args)
    out = pipeline.run_pipeline(cfg)
    print(f"pipeline artifacts in {out}")


def _cmd_report(args):
    reports = []
    with open(args.results) as fh:
        header = fh.readline()
        if header.strip() != "method,seed,p_e,accuracy":
            raise DataError(f"unexpected results header: {header.strip()!r}")
        rows = {}
        for line in fh:
            method, seed, p, acc = line.strip().split(",")
            rows.setdefault((method, int(seed)), []).append((float(p), float(acc)))
    for (method, seed), vals in sorted(rows.items()):
        vals.sort()
        reports.append(evaluation.RunReport(
            method=method, seed=seed,
            p_grid=tuple(v[0] for v in vals),
            accuracies=[v[1] for v in vals]))
    aggregate = evaluation.aggregate_runs(reports)
    pipeline.emit_report(aggregate, args.out or ".")
    print(f"report written to {args.out or '.'}")


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "synth": _cmd_synth,
    "train-erm": _cmd_train_erm,
    "cluster": _cmd_cluster,
    "build-envs": _cmd_build_envs,
    "train-irm": _cmd_train_irm,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "pipeline": _cmd_pipeline,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
