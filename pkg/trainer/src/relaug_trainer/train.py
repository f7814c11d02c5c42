"""Contrastive pretraining and task fine-tuning over an export bundle."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

import numpy as np
import torch
from sklearn.metrics import roc_auc_score

from .data import GraphData, load_export, sample_in_neighbors, temporal_split_masks
from .losses import binary_cross_entropy_logits, infonce_loss, l1_loss
from .model import ModelConfig, TupleModel, build_inputs
from .perturb import PerturbRates, perturb_subgraph


@dataclass
class TrainConfig:
    dim: int = 128
    n_blocks: int = 2
    layers: int = 2
    dropout: float = 0.1
    tau: float = 0.5
    negatives: int = 8
    lr: float = 1e-3
    batch: int = 512
    pretrain_steps: int = 60
    epochs: int = 200
    patience: int = 10
    neighbor_cap: int = 10
    seed: int = 0
    rates: PerturbRates = field(default_factory=PerturbRates)

    def model_config(self, dropout: float | None = None) -> ModelConfig:
        return ModelConfig(
            dim=self.dim,
            n_blocks=self.n_blocks,
            layers=self.layers,
            dropout=self.dropout if dropout is None else dropout,
        )


def pretrain(
    model: TupleModel,
    data: GraphData,
    inputs: dict,
    sampled: dict[str, list[list[int]]],
    cfg: TrainConfig,
) -> list[float]:
    """Contrastive alignment: partners as positives, perturbed views as the
    fallback, uniform same-table negatives. Returns the loss curve."""
    anchor_tables = sorted({data.node_table[g] for g in data.partners}) or sorted(
        t for t, s in data.tables.items() if s.columns
    )
    anchors = [g for t in anchor_tables for g in data.table_nodes(t)]
    by_table = {t: data.table_nodes(t) for t in anchor_tables}
    if not anchors:
        return []

    rng = Random(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    curve: list[float] = []
    model.train()
    for step in range(cfg.pretrain_steps):
        batch = anchors if len(anchors) <= cfg.batch else rng.sample(anchors, cfg.batch)
        view = perturb_subgraph(
            data, sampled, cfg.rates, seed=cfg.seed * 7919 + step,
            protected=frozenset(batch),
        )
        _, q = model.forward_all(data, inputs, sampled)
        _, q_pert = model.forward_all(data, inputs, view.sampled, masks=view.masks)

        losses = []
        for v in batch:
            partners = data.partners.get(v)
            if partners:
                positive = q[rng.choice(partners)]
            else:
                positive = q_pert[v]
            pool = by_table[data.node_table[v]]
            excluded = {v, *(partners or ())}
            candidates = [g for g in pool if g not in excluded]
            if not candidates:
                continue
            k = min(cfg.negatives, len(candidates))
            negatives = q[torch.as_tensor(rng.sample(candidates, k), dtype=torch.long)]
            losses.append(infonce_loss(q[v], positive, negatives, cfg.tau))
        if not losses:
            continue
        loss = torch.stack(losses).mean()
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        curve.append(float(loss.detach()))
    model.eval()
    return curve


def _metric(scores: np.ndarray, targets: np.ndarray, is_classification: bool) -> float:
    if is_classification:
        if len(np.unique(targets)) < 2:
            return 0.5
        return float(roc_auc_score(targets, scores))
    return float(np.mean(np.abs(scores - targets)))


def finetune(
    model: TupleModel,
    data: GraphData,
    inputs: dict,
    sampled: dict[str, list[list[int]]],
    cfg: TrainConfig,
) -> dict:
    """Supervised training of the full stack with early stopping.

    Classification optimizes sigmoid cross-entropy and reports ROC-AUC;
    regression optimizes mean absolute error and reports it. The best
    validation weights are restored before the test evaluation.
    """
    labels = data.labels
    if labels is None:
        raise ValueError("the export bundle has no labels.csv")
    node_ids = torch.as_tensor(labels.node_ids, dtype=torch.long)
    targets = torch.as_tensor(labels.values, dtype=torch.float32)
    masks = {k: torch.as_tensor(v) for k, v in temporal_split_masks(labels).items()}
    if not bool(masks["train"].any()):
        raise ValueError("labels.csv has no train rows")
    is_cls = labels.is_classification
    higher_better = is_cls

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    best = -np.inf if higher_better else np.inf
    best_state = None
    since_best = 0
    curve: list[tuple[float, float]] = []

    for epoch in range(cfg.epochs):
        model.train()
        _, q = model.forward_all(data, inputs, sampled)
        scores = model.head(q[node_ids])
        train_scores = scores[masks["train"]]
        train_targets = targets[masks["train"]]
        loss = (
            binary_cross_entropy_logits(train_scores, train_targets)
            if is_cls
            else l1_loss(train_scores, train_targets)
        )
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()

        model.eval()
        with torch.no_grad():
            _, q = model.forward_all(data, inputs, sampled)
            scores = model.head(q[node_ids]).numpy()
        valid = _metric(
            scores[masks["valid"].numpy()], labels.values[masks["valid"].numpy()], is_cls
        )
        curve.append((float(loss.detach()), valid))

        improved = valid > best if higher_better else valid < best
        if improved:
            best = valid
            best_state = copy.deepcopy(model.state_dict())
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    with torch.no_grad():
        _, q = model.forward_all(data, inputs, sampled)
        scores = model.head(q[node_ids]).numpy()
    test = _metric(
        scores[masks["test"].numpy()], labels.values[masks["test"].numpy()], is_cls
    )
    return {
        "task": "binary_classification" if is_cls else "regression",
        "metric": "roc_auc" if is_cls else "mae",
        "best_valid": float(best),
        "test": float(test),
        "epochs_run": len(curve),
        "curve": curve,
    }


def run_experiment(
    export_dir: str | Path,
    cfg: TrainConfig,
    use_pretrain: bool = True,
    use_augmented_graph: bool = True,
    labels_path: str | Path | None = None,
) -> dict:
    """Train once under the given ablation arm and report metrics."""
    torch.manual_seed(cfg.seed)
    data = load_export(export_dir, labels_path)
    relations = data.all_relations() if use_augmented_graph else data.schema_relations()
    dropout = None
    if data.labels is not None and not data.labels.is_classification:
        dropout = 0.0  # dropout destabilizes the regression objective
    model = TupleModel(data, relations, cfg.model_config(dropout))
    inputs = build_inputs(data)
    sampled = sample_in_neighbors(data, relations, cfg.neighbor_cap, cfg.seed)

    pretrain_curve = (
        pretrain(model, data, inputs, sampled, cfg) if use_pretrain else []
    )
    result = finetune(model, data, inputs, sampled, cfg)
    result["pretrain_curve"] = pretrain_curve
    result["pretrained"] = use_pretrain
    result["augmented_graph"] = use_augmented_graph
    result["relations"] = relations
    result["seed"] = cfg.seed
    return result


def emit_run(result: dict, out_dir: str | Path) -> None:
    """Write metrics.json and loss_curve.csv for one training run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    slim = {k: v for k, v in result.items() if k not in ("curve", "pretrain_curve")}
    (out_dir / "metrics.json").write_text(
        json.dumps(slim, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with open(out_dir / "loss_curve.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("phase,step,loss,valid_metric\n")
        for i, value in enumerate(result.get("pretrain_curve", [])):
            fh.write(f"pretrain,{i},{value!r},\n")
        for i, (loss, valid) in enumerate(result.get("curve", [])):
            fh.write(f"finetune,{i},{loss!r},{valid!r}\n")
