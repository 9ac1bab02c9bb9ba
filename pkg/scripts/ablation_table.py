"""Accuracy and mAP@0.5 of model variants and baselines over several seeds.

    python3 scripts/ablation_table.py --cfg configs/emotion6v_small.json \
        --variants full c_stream e_stream unsup_e c_unsup_e attention framevote ite --out table.json
"""
from __future__ import annotations

import argparse
import json
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from beacnet.config import BASELINE_SELECTORS, MODEL_SELECTORS, load_config
from beacnet.dataio import gen_synthetic
from beacnet.pipeline import baseline_report, load_dataset, model_report, num_classes, train_repeats


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cfg", required=True)
    ap.add_argument("--variants", nargs="+", default=["full", "c_stream"], choices=MODEL_SELECTORS)
    ap.add_argument("--seeds", type=int, help="number of seeds (default: the config's repeats)")
    ap.add_argument("--epochs", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--data", help="existing data directory (default: generate from the config)")
    ap.add_argument("--out")
    args = ap.parse_args()

    cfg = load_config(args.cfg)
    t = cfg.train if args.epochs is None else replace(cfg.train, epochs=args.epochs)
    seeds = list(range(t.seed, t.seed + (args.seeds or t.repeats)))
    with tempfile.TemporaryDirectory() as tmp:
        data_dir = args.data or gen_synthetic(cfg.synth, tmp).root
        tr, va, te = (load_dataset(data_dir, s) for s in ("train", "val", "test"))
    K = num_classes(tr, va, te)

    table = {}
    for variant in args.variants:
        rows = []
        if variant in BASELINE_SELECTORS:
            for s in seeds:
                rep = baseline_report(variant, tr, te, K, cfg.thresholds, s)
                rows.append((rep.accuracy, (rep.map or {}).get("0.5")))
        else:
            for model, *_ in train_repeats(tr, va, replace(t, ablation=variant), K, seeds, args.workers):
                rep = model_report(model, te, cfg.thresholds)
                rows.append((rep.accuracy, (rep.map or {}).get("0.5")))
        acc = [r[0] for r in rows]
        maps = [r[1] for r in rows if r[1] is not None]
        table[variant] = {
            "accuracy": acc,
            "mean_accuracy": float(np.mean(acc)),
            "map50": maps or None,
            "mean_map50": float(np.mean(maps)) if maps else None,
        }
        print(json.dumps({variant: table[variant]}), flush=True)
    if args.out:
        Path(args.out).write_text(json.dumps({"config": args.cfg, "seeds": seeds, "results": table},
                                             indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
