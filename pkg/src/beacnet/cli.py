"""``beacnet`` command line: one binary, one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure,
4 infeasible summary. Primary outputs are the files named by ``--out``
(and ``--log``/``--csv``); a one-line JSON summary goes to stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import BASELINE_SELECTORS, MODEL_SELECTORS, ConfigError, RunConfig, load_config
from .dataio import FormatError, SynthConfig, gen_synthetic, load_fseq
from .gradsuite import run_suite
from .ndkernel import CheckpointError, NonFiniteGradientError
from .network import BEACNet
from .pipeline import (
    baseline_report,
    default_workers,
    load_dataset,
    load_manifest,
    model_report,
    num_classes,
    stratified_fraction,
    train_repeats,
)
from .summarization import InfeasibleError, SummarizationConfig, dp_summarize, frame_costs
from .baselines import score_summary, uniform_summary
from .training import DivergenceError, evaluate_model, finetune, write_log

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 1, 2, 3, 4
GRAD_TOLERANCE = 1e-4

log = logging.getLogger("beacnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _run_config(args) -> RunConfig:
    cfg = load_config(args.cfg) if getattr(args, "cfg", None) else RunConfig()
    t = cfg.train
    overrides = {k: getattr(args, k) for k in ("seed", "epochs", "repeats", "beta", "lr", "batch_size")
                 if getattr(args, k, None) is not None}
    if getattr(args, "ablation", None) is not None:
        overrides["ablation"] = args.ablation
    cfg.train = replace(t, **overrides)
    cfg.train.validate()
    return cfg


def _thresholds(args, cfg: RunConfig):
    if getattr(args, "thresholds", None):
        return tuple(float(x) for x in args.thresholds.split(","))
    return cfg.thresholds


def _suffixed(path: Path, seed: int, many: bool) -> Path:
    return path.with_name(f"{path.stem}-seed{seed}{path.suffix}") if many else path


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_synth(args) -> int:
    base = load_config(args.cfg).synth if args.cfg else SynthConfig()
    flags = {"classes": args.classes, "per_class": args.per_class, "dim": args.dim, "frames": args.frames,
             "seg_min": args.seg_min, "seg_max": args.seg_max, "sigma": args.sigma,
             "context_sigma": args.context_sigma, "separation": args.sep, "seed": args.seed}
    cfg = replace(base, **{k: v for k, v in flags.items() if v is not None})
    manifest = gen_synthetic(cfg, args.out, args.split_seed)
    sizes = {name: len(load_manifest(Path(args.out) / f"{name}.jsonl")) for name in ("train", "val", "test")}
    _emit({"out": str(args.out), "videos": len(manifest), **sizes})
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _run_config(args)
    t = cfg.train
    if t.ablation in BASELINE_SELECTORS:
        raise UsageError(f"{t.ablation} is a baseline without a checkpoint; use `beacnet baseline {t.ablation}`")
    train_data = load_dataset(args.data, "train")
    val_data = load_dataset(args.data, "val")
    K = num_classes(train_data, val_data)
    seeds = [t.seed + r for r in range(t.repeats)]
    results = train_repeats(train_data, val_data, t, K, seeds, args.workers)
    many = len(seeds) > 1
    out, log_path = Path(args.out), Path(args.log) if args.log else None
    summary = {"checkpoints": [], "best_epoch": [], "best_val_accuracy": []}
    for seed, (model, rows, best_epoch, best_acc) in zip(seeds, results):
        ckpt = _suffixed(out, seed, many)
        model.save(ckpt, {"train": {**t.__dict__, "seed": seed, "alpha_init": list(t.alpha_init)},
                          "best_epoch": best_epoch})
        if log_path is not None:
            write_log(_suffixed(log_path, seed, many), rows)
        summary["checkpoints"].append(str(ckpt))
        summary["best_epoch"].append(best_epoch)
        summary["best_val_accuracy"].append(best_acc)
    summary["mean_best_val_accuracy"] = float(np.mean(summary["best_val_accuracy"]))
    _emit(summary)
    return EXIT_OK


def cmd_finetune(args) -> int:
    cfg = _run_config(args)
    model, meta = BEACNet.load(args.from_)
    train_data = load_dataset(args.data, "train")
    small = stratified_fraction(train_data, args.fraction, cfg.train.seed)
    val_path = Path(args.data)
    val_data = load_dataset(val_path, "val") if val_path.is_dir() else None
    before = evaluate_model(model, val_data)[0] if val_data is not None else None
    res = finetune(model, small, cfg.train, epochs=args.epochs, val_data=val_data, seed=cfg.train.seed)
    carried = {k: v for k, v in meta.items() if k != "model"}
    model.save(args.out, {**carried, "finetune": {"from": Path(args.from_).name,
                          "epochs": args.epochs, "fraction": args.fraction, "seed": cfg.train.seed}})
    if args.log:
        write_log(args.log, res.log)
    _emit({"checkpoint": str(args.out), "videos": len(small.labels), "epochs": len(res.log),
           "val_accuracy_before": before, "best_val_accuracy": res.best_val_accuracy})
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    model, _ = BEACNet.load(args.model)
    data = load_dataset(args.data, "test")
    report = model_report(model, data, _thresholds(args, cfg))
    report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    _emit({"accuracy": report.accuracy, "map": report.map})
    return EXIT_OK


def cmd_classify(args) -> int:
    model, _ = BEACNet.load(args.model)
    manifest = load_manifest(args.input, "test")
    frames, _, _ = manifest.load_arrays()
    probs, _, _ = model.predict(frames)
    K = probs.shape[1]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "predicted", "confidence", *[f"p_{k}" for k in range(K)]])
        for e, p in zip(manifest.entries, probs):
            w.writerow([e.id, int(p.argmax()), f"{p.max():.6f}", *[f"{v:.6f}" for v in p]])
    _emit({"out": str(args.out), "videos": len(manifest)})
    return EXIT_OK


def cmd_attribute(args) -> int:
    model, _ = BEACNet.load(args.model)
    if not model.spec.has_anet:
        raise UsageError(f"a {model.spec.variant!r} model has no attribution network")
    manifest = load_manifest(args.input, "test")
    frames, _, _ = manifest.load_arrays()
    _, spans, alphas = model.predict(frames)
    lines = [json.dumps({"id": e.id, "t_s": int(s[0]), "t_e": int(s[1]),
                         "alpha": [round(float(a[0]), 6), round(float(a[1]), 6)]}, sort_keys=True)
             for e, s, a in zip(manifest.entries, spans, alphas)]
    Path(args.out).write_text("\n".join(lines) + "\n")
    _emit({"out": str(args.out), "videos": len(lines)})
    return EXIT_OK


def _parse_span(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--span expects two integers 't_s,t_e', got {text!r}") from exc
    if b <= a:
        raise UsageError(f"--span end must exceed start, got {text!r}")
    return a, b


def cmd_summarize(args) -> int:
    run = load_config(args.cfg).summarization if args.cfg else RunConfig().summarization
    span = _parse_span(args.span) if args.span else None
    frames = load_fseq(args.input).astype(np.float64)
    M = len(frames)
    if span is None and args.model:
        model, _ = BEACNet.load(args.model)
        if not model.spec.has_anet:
            raise UsageError("--model must be able to attribute (it has no A-Net)")
        _, spans, _ = model.predict(frames[None])
        span = (int(spans[0, 0]), int(spans[0, 1]))
    cfg = SummarizationConfig(
        args.kmax if args.kmax is not None else run.k_max,
        args.dmax if args.dmax is not None else run.d_max,
        args.tmax if args.tmax is not None else run.t_max,
        span,
    )
    if args.baseline:
        picks = uniform_summary(M, cfg.t_max) if args.baseline == "uniform" else score_summary(frames, cfg.t_max)
        out = {"frames": picks, "cost": float(frame_costs(M, span)[np.asarray(picks) - 1].sum())}
    else:
        out = dp_summarize(frames, cfg).to_json()
    out["span"] = list(span) if span else None
    _write_json(args.out, out)
    _emit(out)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = _run_config(args)
    if args.cfg and cfg.train.ablation not in ("full", args.method):
        raise UsageError(f"config selects model {cfg.train.ablation!r} but the command runs baseline {args.method!r}")
    train_data = load_dataset(args.data, "train")
    test_data = load_dataset(args.data, "test")
    K = num_classes(train_data, test_data)
    thresholds = _thresholds(args, cfg)
    if args.method == "attention":
        val_data = load_dataset(args.data, "val")
        t = replace(cfg.train, ablation="attention")
        (model, rows, _, _), = train_repeats(train_data, val_data, t, K, [t.seed], 1)
        report = model_report(model, test_data, thresholds, "attention")
    else:
        report = baseline_report(args.method, train_data, test_data, K, thresholds, cfg.train.seed,
                                 args.clusters, args.knn, args.threshold)
    report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    _emit({"method": args.method, "accuracy": report.accuracy, "map": report.map})
    return EXIT_OK


def cmd_grad_check(args) -> int:
    res = run_suite(args.seed, args.seeds)
    res.pop("seconds", None)
    res["tolerance"] = GRAD_TOLERANCE
    res["passed"] = res["max_rel_error"] < GRAD_TOLERANCE
    _emit(res)
    return EXIT_OK if res["passed"] else EXIT_NUMERIC


def cmd_dp_oracle(args) -> int:
    from .summarization import oracle_trials

    res = oracle_trials(args.trials, args.seed)
    res["passed"] = not res["mismatches"]
    _emit(res)
    return EXIT_OK if res["passed"] else EXIT_NUMERIC


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beacnet", description="Emotion attribution, classification and summarization on frame features.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def train_flags(q, ablation=True):
        q.add_argument("--cfg", help="JSON run config; flags override it")
        q.add_argument("--seed", type=int)
        q.add_argument("--epochs", type=int)
        q.add_argument("--beta", type=float)
        q.add_argument("--lr", type=float)
        q.add_argument("--batch-size", type=int)
        if ablation:
            q.add_argument("--ablation", choices=MODEL_SELECTORS)

    q = sub.add_parser("gen-synth", help="write a synthetic feature dataset with splits")
    q.add_argument("--cfg", help="JSON run config whose 'synth' section gives the defaults")
    q.add_argument("--classes", type=int)
    q.add_argument("--per-class", type=int)
    q.add_argument("--dim", type=int)
    q.add_argument("--frames", type=int)
    q.add_argument("--seg-min", type=int)
    q.add_argument("--seg-max", type=int)
    q.add_argument("--sigma", type=float)
    q.add_argument("--context-sigma", type=float)
    q.add_argument("--sep", type=float)
    q.add_argument("--seed", type=int)
    q.add_argument("--split-seed", type=int)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_gen_synth)

    q = sub.add_parser("train", help="train a model (optionally several seeds)")
    q.add_argument("--data", required=True, help="directory with train.jsonl and val.jsonl")
    q.add_argument("--out", required=True, help="checkpoint path (-seed<k> is appended for repeats)")
    q.add_argument("--log", help="per-epoch CSV log")
    q.add_argument("--repeats", type=int)
    q.add_argument("--workers", type=int, default=None, help="parallel seeds (default $BEACNET_WORKERS or 1)")
    train_flags(q)
    q.set_defaults(func=cmd_train)

    q = sub.add_parser("finetune", help="continue training a checkpoint on a fraction of a training split")
    q.add_argument("--from", dest="from_", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--log")
    q.add_argument("--fraction", type=float, default=0.2)
    train_flags(q, ablation=False)
    q.set_defaults(func=cmd_finetune)
    q.set_defaults(epochs=10)

    q = sub.add_parser("eval", help="accuracy and mAP over tIoU thresholds")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True, help="manifest, or data directory (uses test.jsonl)")
    q.add_argument("--out", required=True)
    q.add_argument("--csv")
    q.add_argument("--cfg")
    q.add_argument("--thresholds", help="comma separated, default 0.1..0.7")
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("classify", help="class probabilities per video")
    q.add_argument("--model", required=True)
    q.add_argument("--input", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_classify)

    q = sub.add_parser("attribute", help="emotional span per video")
    q.add_argument("--model", required=True)
    q.add_argument("--input", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_attribute)

    q = sub.add_parser("summarize", help="emotion-oriented keyframes of one sequence")
    q.add_argument("--input", required=True, help="FSEQ feature file")
    q.add_argument("--span", help="emotional span 't_s,t_e' (1-based, inclusive)")
    q.add_argument("--model", help="checkpoint used to attribute the span when --span is absent")
    q.add_argument("--kmax", type=int)
    q.add_argument("--dmax", type=float)
    q.add_argument("--tmax", type=int)
    q.add_argument("--baseline", choices=("uniform", "score"))
    q.add_argument("--cfg")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_summarize)

    q = sub.add_parser("baseline", help="train and evaluate a comparison method")
    q.add_argument("method", choices=("ite", "attention", "framevote"))
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--csv")
    q.add_argument("--thresholds")
    q.add_argument("--clusters", type=int, default=256)
    q.add_argument("--knn", type=int, default=5)
    q.add_argument("--threshold", type=float, help="ITE attribution threshold (default: per-video mean)")
    train_flags(q, ablation=False)
    q.set_defaults(func=cmd_baseline)

    q = sub.add_parser("grad-check", help="finite-difference check of every op and the full loss")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    q.set_defaults(func=cmd_grad_check)

    q = sub.add_parser("dp-oracle", help="dynamic programme versus exhaustive search")
    q.add_argument("--trials", type=int, default=200)
    q.add_argument("--seed", type=int, default=1)
    q.set_defaults(func=cmd_dp_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "workers", None) is None and args.command == "train":
            args.workers = default_workers()
        return args.func(args)
    except UsageError as exc:
        print(f"beacnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"beacnet {args.command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DivergenceError, NonFiniteGradientError, FloatingPointError) as exc:
        print(f"beacnet {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, FormatError, CheckpointError, FileNotFoundError, KeyError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"beacnet {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
