"""Operator command line: datagen, train, eval, roc, predict, ensemble-search.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 metric
below an acceptance gate (--min-mcc).  Every command takes --seed and
echoes it, along with the file format versions, in its stdout report, so
logged invocations are reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import metrics
from . import persistence as P
from .datagen import PRESETS, build_dataset
from .encoding import EncoderSpec
from .ensemble import calibrate_far, enumerate_ensembles
from .evolution import EonsParams, TrainConfig, train
from .inference import (ClassifierConfig, apply_threshold, classify_dataset,
                        classify_run, window_steps)

DATA_DIR_ENV = "EVOSNN_DATA_DIR"


class UsageError(Exception):
    """Bad flag combination discovered after argument parsing."""


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0,
                   help="seed echoed in the report (default 0)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="evaluation worker threads (default: all cores)")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", default=os.environ.get(DATA_DIR_ENV),
                   help=f"dataset directory (default: ${DATA_DIR_ENV})")


def _require_data(args) -> Path:
    if not args.data:
        raise UsageError(
            f"--data is required (or set {DATA_DIR_ENV})")
    return Path(args.data)


def _report(fields: dict) -> None:
    sys.stdout.write(P.format_report(fields))


def _load_network_with_encoder(path):
    loaded = P.load_network(path)
    if loaded.encoder is None:
        raise P.FormatError(f"{path}: network file has no embedded encoder")
    return loaded


def cmd_datagen(args) -> int:
    out = Path(args.out)
    dataset = build_dataset(args.preset, args.background, args.source,
                            seed=args.seed, stride_seconds=args.stride_seconds)
    P.save_dataset(dataset, out)
    _report({
        "command": "datagen",
        "seed": args.seed,
        "dataset_format_version": P.DATASET_FORMAT_VERSION,
        "preset": args.preset,
        "out": out,
        "runs": len(dataset.runs),
        "source_runs": args.source,
    })
    return 0


def cmd_train(args) -> int:
    dataset = P.load_dataset(_require_data(args))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = EonsParams(population_size=args.population)
    cfg = TrainConfig(epochs=args.epochs, tau=args.tau, fitness=args.fitness,
                      seed=args.seed, batch_fraction=args.batch_fraction,
                      mode=args.mode)
    spec = EncoderSpec(scheme=args.scheme, tau=args.tau,
                       bins_per_variable=args.bins, flip_flop=args.flip_flop,
                       ranges=dataset.ranges)
    result = train(dataset, params, cfg, encoder=spec, jobs=args.jobs)
    provenance = {"seed": args.seed, "epochs": len(result.history),
                  "fitness": result.best.fitness}
    P.save_network(result.best.network, out / "best_network.json",
                   encoder=spec, provenance=provenance)
    P.save_population(result.population, out / "population.json",
                      encoder=spec, epoch=len(result.history) - 1)
    P.write_history_csv(result.history, out / "history.csv")
    _report({
        "command": "train",
        "seed": args.seed,
        "network_format_version": P.NETWORK_FORMAT_VERSION,
        "population_format_version": P.POPULATION_FORMAT_VERSION,
        "epochs": len(result.history),
        "fitness_kind": cfg.fitness,
        "best_fitness": result.best.fitness,
        "best_neurons": result.best.network.n_neurons,
        "best_synapses": result.best.network.n_synapses,
        "out": out,
    })
    return 0


def _classified(args):
    loaded = _load_network_with_encoder(args.network)
    dataset = P.load_dataset(_require_data(args))
    window = window_steps(args.window_seconds, dataset.stride_seconds)
    traces = classify_dataset(loaded.network, loaded.encoder, dataset.runs,
                              jobs=args.jobs)
    labels = [run.labels for run in dataset.runs]
    return loaded, dataset, window, [t.z for t in traces], labels


def cmd_eval(args) -> int:
    loaded, dataset, window, zs, labels = _classified(args)
    if args.auto_theta:
        theta, _ = metrics.best_mcc_threshold(zs, labels, mode=args.mode,
                                              window=window)
    else:
        theta = args.theta
    rule = ClassifierConfig(theta=theta, window=window)
    ys = [apply_threshold(z, rule) for z in zs]
    report = metrics.make_report(ys, labels, dataset.runs, mode=args.mode,
                                 theta=theta, window=window)
    fields = {
        "command": "eval",
        "seed": args.seed,
        "network_format_version": P.NETWORK_FORMAT_VERSION,
        "dataset_format_version": P.DATASET_FORMAT_VERSION,
        "network": args.network,
        "mode": report.mode,
        "theta": report.theta,
        "window_steps": report.window,
        "window_seconds": args.window_seconds,
    }
    fields.update(report.as_dict())
    _report(fields)
    if args.min_mcc is not None and report.mcc < args.min_mcc:
        print(f"gate: mcc {report.mcc:.6f} below --min-mcc {args.min_mcc}",
              file=sys.stderr)
        return 3
    return 0


def cmd_roc(args) -> int:
    loaded, dataset, window, zs, labels = _classified(args)
    hours = metrics.background_hours(dataset.runs)
    roc = metrics.roc_sweep(zs, labels, mode=args.mode,
                            background_hours=hours, window=window)
    P.write_roc_csv(roc, args.out)
    _report({
        "command": "roc",
        "seed": args.seed,
        "network_format_version": P.NETWORK_FORMAT_VERSION,
        "dataset_format_version": P.DATASET_FORMAT_VERSION,
        "mode": args.mode,
        "window_steps": window,
        "points": len(roc.points),
        "background_hours": hours,
        "out": args.out,
    })
    return 0


def cmd_predict(args) -> int:
    loaded = _load_network_with_encoder(args.network)
    spec = loaded.encoder
    run = P.load_run(args.run, spec.n_variables,
                     stride_seconds=args.stride_seconds,
                     run_id=Path(args.run).stem)
    window = window_steps(args.window_seconds, args.stride_seconds)
    rule = ClassifierConfig(theta=args.theta, window=window)
    trace = classify_run(loaded.network, spec, run, cfg=rule)
    text = P.format_trace_csv([trace], [run])
    if args.out:
        Path(args.out).write_text(text)
    _report({
        "command": "predict",
        "seed": args.seed,
        "network_format_version": P.NETWORK_FORMAT_VERSION,
        "theta": args.theta,
        "window_steps": window,
        "steps": run.n_steps,
        "positive_steps": int(trace.y.sum()),
    })
    if not args.out:
        sys.stdout.write(text)
    return 0


def cmd_ensemble_search(args) -> int:
    pop = P.load_population(args.population)
    if pop.encoder is None:
        raise P.FormatError(
            f"{args.population}: population file has no embedded encoder")
    if len(pop.members) < 2:
        raise P.FormatError(
            f"{args.population}: ensembling needs at least 2 networks")
    dataset = P.load_dataset(_require_data(args))
    window = window_steps(args.window_seconds, dataset.stride_seconds)
    labels = [run.labels for run in dataset.runs]
    hours = metrics.background_hours(dataset.runs)

    ranked = sorted(range(len(pop.members)),
                    key=lambda i: (-pop.members[i].fitness, i))
    k = max(2, math.ceil(args.top_fraction * len(pop.members)))
    top = [pop.members[i] for i in ranked[:k]]

    net_counts = []
    single_tpr = 0.0
    for s in top:
        traces = classify_dataset(s.network, pop.encoder, dataset.runs,
                                  jobs=args.jobs)
        zs = [t.z for t in traces]
        net_counts.append(zs)
        roc = metrics.roc_sweep(zs, labels, mode=args.mode,
                                background_hours=hours, window=window)
        single_tpr = max(single_tpr, metrics.tpr_at_far(roc, args.far_target))

    index_of = {id(s.network): i for i, s in enumerate(top)}
    rows = []
    for ens in enumerate_ensembles(top):
        counts = [net_counts[index_of[id(m.network)]] for m in ens.members]
        result = calibrate_far(ens, pop.encoder, dataset.runs,
                               far_target=args.far_target, mode=args.mode,
                               window=window, counts=counts)
        member_ids = "+".join(str(index_of[id(m.network)])
                              for m in ens.members)
        rows.append((result, member_ids, ens.vote))
    rows.sort(key=lambda r: (not r[0].reached, -r[0].tpr, r[0].far_per_hour))

    best, best_members, best_vote = rows[0]
    member_sets = {r[1] for r in rows}
    if args.out:
        P.save_ensemble(best.ensemble, args.out, encoder=pop.encoder)
    _report({
        "command": "ensemble-search",
        "seed": args.seed,
        "network_format_version": P.NETWORK_FORMAT_VERSION,
        "ensemble_format_version": P.ENSEMBLE_FORMAT_VERSION,
        "population_size": len(pop.members),
        "top_networks": k,
        "member_sets": len(member_sets),
        "far_target": args.far_target,
        "best_members": best_members,
        "best_vote": best_vote,
        "best_thetas": " ".join(str(t) for t in best.ensemble.thetas),
        "best_far_per_hour": best.far_per_hour,
        "best_tpr": best.tpr,
        "best_single_tpr": single_tpr,
        "winner": "ensemble" if best.tpr >= single_tpr else "single",
        "out": args.out or "",
    })
    print("rank,members,vote,thetas,far_per_hour,tpr,reached")
    for rank, (result, member_ids, vote) in enumerate(rows):
        thetas = "+".join(str(t) for t in result.ensemble.thetas)
        print(f"{rank},{member_ids},{vote},{thetas},"
              f"{repr(result.far_per_hour)},{repr(result.tpr)},"
              f"{int(result.reached)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evosnn",
                     description="Evolve and run quantized spiking "
                                 "classifiers on multivariate time series.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("datagen", help="generate a synthetic dataset")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--background", type=int, default=15,
                   help="background-only runs (default 15)")
    p.add_argument("--source", type=int, default=15,
                   help="runs with a source injection (default 15)")
    p.add_argument("--stride-seconds", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=cmd_datagen)

    p = sub.add_parser("train", help="evolve a population on a dataset")
    _add_data(p)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--population", type=int, default=100)
    p.add_argument("--tau", type=int, default=16)
    p.add_argument("--fitness", choices=("mcc", "f1_tpr0sq"), default="mcc")
    p.add_argument("--batch-fraction", type=float, default=1.0)
    p.add_argument("--scheme", choices=("rate", "spikes"), default="rate")
    p.add_argument("--bins", type=int, default=1)
    p.add_argument("--flip-flop", action="store_true")
    p.add_argument("--mode", choices=("sample", "event"), default="sample")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a network on a dataset")
    p.add_argument("--network", required=True)
    _add_data(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--theta", type=int, default=0)
    group.add_argument("--auto-theta", action="store_true",
                       help="pick theta by best MCC on this data")
    p.add_argument("--window-seconds", type=float, default=0.0)
    p.add_argument("--mode", choices=("sample", "event"), default="sample")
    p.add_argument("--min-mcc", type=float, default=None,
                   help="exit 3 if MCC lands below this gate")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("roc", help="write the theta-sweep ROC as CSV")
    p.add_argument("--network", required=True)
    _add_data(p)
    p.add_argument("--out", required=True)
    p.add_argument("--window-seconds", type=float, default=0.0)
    p.add_argument("--mode", choices=("sample", "event"), default="sample")
    _add_common(p)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("predict", help="per-step predictions for one run CSV")
    p.add_argument("--network", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--theta", type=int, default=0)
    p.add_argument("--window-seconds", type=float, default=0.0)
    p.add_argument("--stride-seconds", type=float, default=1.0)
    p.add_argument("--out", default=None,
                   help="trace CSV path (default: stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ensemble-search",
                       help="enumerate and calibrate voting ensembles")
    p.add_argument("--population", required=True,
                   help="population checkpoint file")
    _add_data(p)
    p.add_argument("--top-fraction", type=float, default=0.1)
    p.add_argument("--far-target", type=float, required=True)
    p.add_argument("--window-seconds", type=float, default=0.0)
    p.add_argument("--mode", choices=("sample", "event"), default="sample")
    p.add_argument("--out", default=None, help="best ensemble file")
    _add_common(p)
    p.set_defaults(func=cmd_ensemble_search)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 1
    except (P.FormatError, OSError, ValueError) as e:
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
