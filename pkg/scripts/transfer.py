"""Transfer learning: pretrain on one synthetic preset, finetune on a small slice of another.

Compares a model trained from scratch on the slice with one finetuned from
the pretrained checkpoint, both evaluated on the target test split.

    python3 scripts/transfer.py --source configs/emotion6v_small.json \
        --target configs/sparse_emotion.json --fraction 0.2 --epochs 10
"""
from __future__ import annotations

import argparse
import json
import tempfile
from dataclasses import replace

import numpy as np

from beacnet.config import load_config
from beacnet.dataio import gen_synthetic
from beacnet.pipeline import load_dataset, model_report, num_classes, stratified_fraction, train_repeats
from beacnet.training import finetune, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--source", required=True)
    ap.add_argument("--target", required=True)
    ap.add_argument("--target-seed", type=int, default=100, help="generator seed of the target data")
    ap.add_argument("--fraction", type=float, default=0.2)
    ap.add_argument("--epochs", type=int, default=10, help="finetune / from-scratch epochs")
    ap.add_argument("--pretrain-epochs", type=int)
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--out")
    args = ap.parse_args()

    src, tgt = load_config(args.source), load_config(args.target)
    if (src.synth.frames, src.synth.dim) != (tgt.synth.frames, tgt.synth.dim):
        raise SystemExit("source and target presets must share frames and dim")
    t = src.train if args.pretrain_epochs is None else replace(src.train, epochs=args.pretrain_epochs)
    with tempfile.TemporaryDirectory() as tmp:
        s_root = gen_synthetic(src.synth, f"{tmp}/src").root
        t_root = gen_synthetic(replace(tgt.synth, seed=args.target_seed), f"{tmp}/tgt").root
        s_tr, s_va = load_dataset(s_root, "train"), load_dataset(s_root, "val")
        t_tr, t_va, t_te = (load_dataset(t_root, s) for s in ("train", "val", "test"))
    K = num_classes(s_tr, t_tr)

    rows = {"scratch": [], "finetuned": []}
    for seed in range(args.seeds):
        small = stratified_fraction(t_tr, args.fraction, seed)
        scratch = train(small, t_va, replace(t, epochs=args.epochs, seed=seed), K).model
        (pre, *_), = train_repeats(s_tr, s_va, t, K, [seed], 1)
        tuned = finetune(pre, small, t, epochs=args.epochs, val_data=t_va, seed=seed).model
        for name, model in (("scratch", scratch), ("finetuned", tuned)):
            rep = model_report(model, t_te)
            rows[name].append({"accuracy": rep.accuracy, "map50": rep.map["0.5"]})
    summary = {name: {"mean_accuracy": float(np.mean([r["accuracy"] for r in v])),
                      "mean_map50": float(np.mean([r["map50"] for r in v])), "runs": v}
               for name, v in rows.items()}
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
