"""Command-line training entry.

    pdlab-train --data DIR --out FILE --seed S [--no-optm] [--uniform] \
                [--epochs N] [--hidden-dim H] [--eval-data FILE]

Reads every records file under --data, trains on the records tagged train
with validation on the val split, and writes the best-validation weights in
the portable text format.  With --eval-data, runs free-run inference over
that records file afterwards and prints the ratio summary.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .evaluate import evaluate
from .records import read_dataset_dir, read_records
from .train import TrainConfig, train


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pdlab-train", description=__doc__.splitlines()[0])
    parser.add_argument("--data", required=True, help="dataset directory of records files")
    parser.add_argument("--out", required=True, help="weights file to write")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--no-optm", action="store_true", help="train on hints only")
    parser.add_argument("--uniform", action="store_true", default=None,
                        help="force the uniform-increase architecture (default: from data)")
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--hidden-dim", type=int, default=32)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--weight-decay", type=float, default=1e-4)
    parser.add_argument("--dropout", type=float, default=0.0)
    parser.add_argument("--teacher-forcing-p", type=float, default=0.5)
    parser.add_argument("--metrics", default=None, help="per-epoch JSONL metrics log")
    parser.add_argument("--eval-data", default=None, help="records file to evaluate after training")
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        print(json.dumps({"status": "error", "message": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 2


def _run(args) -> int:
    records = read_dataset_dir(args.data)
    train_recs = [r for r in records if r.split == "train"]
    val_recs = [r for r in records if r.split == "val"]
    if not train_recs:
        raise ValueError("dataset has no records tagged split=train")
    if not val_recs:
        cut = max(1, int(len(train_recs) * 0.9))
        train_recs, val_recs = train_recs[:cut], train_recs[cut:] or train_recs[-1:]

    uniform = args.uniform if args.uniform is not None else train_recs[0].uniform
    use_optimal = not args.no_optm
    if use_optimal and any(r.optimal_x is None for r in train_recs):
        raise ValueError("optimal labels missing; regenerate with labels or pass --no-optm")

    config = TrainConfig(
        lr=args.lr,
        weight_decay=args.weight_decay,
        batch_size=args.batch_size,
        hidden_dim=args.hidden_dim,
        epochs=args.epochs,
        teacher_forcing_p=args.teacher_forcing_p,
        dropout=args.dropout,
        use_optimal=use_optimal,
        uniform=uniform,
        seed=args.seed,
    )
    metrics = args.metrics or (str(Path(args.out)) + ".metrics.jsonl")
    model = train(train_recs, val_recs, config, args.out, metrics)
    best_val = min(log.val_loss for log in model.epoch_logs)
    print(json.dumps({
        "status": "ok",
        "weights": args.out,
        "epochs": len(model.epoch_logs),
        "best_val_loss": best_val,
        "train_records": len(train_recs),
        "val_records": len(val_recs),
        "uniform": uniform,
        "optimal_loss": use_optimal,
    }))

    if args.eval_data:
        model.load_weights_file(args.out)  # evaluate the exported checkpoint
        summary = evaluate(model, read_records(args.eval_data))
        print(json.dumps({"status": "ok", "eval": summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
