"""Train the layered model on a pipeline export bundle."""

from __future__ import annotations

import argparse
import sys

from .perturb import PerturbRates
from .train import TrainConfig, emit_run, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="relaug-train",
        description="Pretrain and fine-tune the layered graph model on an "
                    "export bundle (nodes/edges/documents/pairs/labels).",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--export-dir", required=True, help="pipeline export directory")
    p.add_argument("--labels", help="labels.csv (default: export-dir/labels.csv)")
    p.add_argument("--out-dir", required=True, help="where to write metrics and curves")
    p.add_argument("--dim", type=int, default=128, help="embedding and hidden width")
    p.add_argument("--layers", type=int, default=2, help="aggregation layers")
    p.add_argument("--blocks", type=int, default=2, help="residual blocks")
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=0.5, help="contrastive temperature")
    p.add_argument("--negatives", type=int, default=8, help="negatives per anchor")
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--pretrain-steps", type=int, default=60)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=10, help="early-stopping patience")
    p.add_argument("--neighbor-cap", type=int, default=10, help="sampled neighbors per relation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--edge-drop", type=float, default=0.2)
    p.add_argument("--node-drop", type=float, default=0.1)
    p.add_argument("--attr-mask", type=float, default=0.2)
    p.add_argument("--no-pretrain", action="store_true",
                   help="skip contrastive pretraining")
    p.add_argument("--schema-only", action="store_true",
                   help="ignore augmented edge types")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = TrainConfig(
        dim=args.dim,
        n_blocks=args.blocks,
        layers=args.layers,
        dropout=args.dropout,
        tau=args.tau,
        negatives=args.negatives,
        lr=args.lr,
        batch=args.batch,
        pretrain_steps=args.pretrain_steps,
        epochs=args.epochs,
        patience=args.patience,
        neighbor_cap=args.neighbor_cap,
        seed=args.seed,
        rates=PerturbRates(args.edge_drop, args.node_drop, args.attr_mask),
    )
    try:
        result = run_experiment(
            args.export_dir,
            cfg,
            use_pretrain=not args.no_pretrain,
            use_augmented_graph=not args.schema_only,
            labels_path=args.labels,
        )
    except (ValueError, FileNotFoundError) as exc:
        print(f"relaug-train: {exc}", file=sys.stderr)
        return 2
    emit_run(result, args.out_dir)
    print(f"{result['metric']}: valid {result['best_valid']:.4f} "
          f"test {result['test']:.4f} ({result['epochs_run']} epochs)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
