"""mAP at tIoU thresholds 0.1..0.7 for attributing methods, averaged over seeds.

    python3 scripts/map_curve.py --cfg configs/emotion6v_small.json \
        --methods full e_stream attention ite framevote --csv map_curve.csv
"""
from __future__ import annotations

import argparse
import csv
import json
import tempfile
from dataclasses import replace

import numpy as np

from beacnet.config import BASELINE_SELECTORS, load_config
from beacnet.dataio import gen_synthetic
from beacnet.pipeline import baseline_report, load_dataset, model_report, num_classes, train_repeats

ATTRIBUTING = ("full", "e_stream", "unsup_e", "c_unsup_e", "attention", "ite", "framevote")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cfg", required=True)
    ap.add_argument("--methods", nargs="+", default=["full", "ite", "framevote"], choices=ATTRIBUTING)
    ap.add_argument("--seeds", type=int)
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--csv")
    args = ap.parse_args()

    cfg = load_config(args.cfg)
    t = cfg.train if args.epochs is None else replace(cfg.train, epochs=args.epochs)
    seeds = list(range(t.seed, t.seed + (args.seeds or t.repeats)))
    with tempfile.TemporaryDirectory() as tmp:
        root = gen_synthetic(cfg.synth, tmp).root
        tr, va, te = (load_dataset(root, s) for s in ("train", "val", "test"))
    K = num_classes(tr, va, te)
    keys = [f"{x:.1f}" for x in cfg.thresholds]

    curves = {}
    for method in args.methods:
        if method in BASELINE_SELECTORS:
            reports = [baseline_report(method, tr, te, K, cfg.thresholds, s) for s in seeds]
        else:
            models = train_repeats(tr, va, replace(t, ablation=method), K, seeds, args.workers)
            reports = [model_report(m, te, cfg.thresholds) for m, *_ in models]
        curves[method] = [float(np.mean([r.map[k] for r in reports])) for k in keys]
        print(json.dumps({method: dict(zip(keys, curves[method]))}), flush=True)

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", *curves])
            for i, k in enumerate(keys):
                w.writerow([k, *(f"{curves[m][i]:.6f}" for m in curves)])


if __name__ == "__main__":
    main()
