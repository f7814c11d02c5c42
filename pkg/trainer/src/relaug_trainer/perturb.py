"""Stochastic graph perturbations for synthetic contrastive positives."""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

import torch

from .data import GraphData


@dataclass(frozen=True)
class PerturbRates:
    edge_drop: float = 0.2
    node_drop: float = 0.1
    attr_mask: float = 0.2

    def __post_init__(self) -> None:
        for name, rate in (("edge_drop", self.edge_drop),
                           ("node_drop", self.node_drop),
                           ("attr_mask", self.attr_mask)):
            if not (0.0 <= rate < 1.0):
                raise ValueError(f"{name} must be in [0, 1), got {rate}")


@dataclass
class PerturbedView:
    """A perturbed neighborhood: thinned adjacency plus attribute masks."""

    sampled: dict[str, list[list[int]]]
    masks: dict[str, dict[str, torch.Tensor]]  # table -> slot -> (rows,) bool
    dropped: set[int]


def perturb_subgraph(
    data: GraphData,
    sampled: dict[str, list[list[int]]],
    rates: PerturbRates,
    seed: int,
    protected: set[int] | frozenset[int] = frozenset(),
) -> PerturbedView:
    """Independently drop edges and nodes and mask attribute slots.

    Protected nodes (the contrastive roots) are never dropped; dropping a
    node removes all its incident arcs. Deterministic for a fixed seed, and
    the identity when every rate is zero.
    """
    rng = Random(seed)

    dropped: set[int] = set()
    if rates.node_drop > 0:
        for gid in range(data.n_nodes):
            if gid not in protected and rng.random() < rates.node_drop:
                dropped.add(gid)

    thinned: dict[str, list[list[int]]] = {}
    for name in sorted(sampled):
        per_node = sampled[name]
        out: list[list[int]] = []
        for dst, nbrs in enumerate(per_node):
            if dst in dropped:
                out.append([])
                continue
            kept = [
                src for src in nbrs
                if src not in dropped
                and not (rates.edge_drop > 0 and rng.random() < rates.edge_drop)
            ]
            out.append(kept)
        thinned[name] = out

    masks: dict[str, dict[str, torch.Tensor]] = {}
    if rates.attr_mask > 0:
        for t in sorted(data.tables):
            schema = data.tables[t]
            rows = len(data.sentences[t])
            slots = [c.name for c in schema.columns if c.kind != "text"]
            if any(c.kind == "text" for c in schema.columns):
                slots.append("__text__")
            per_slot = {}
            for slot in slots:
                flags = [rng.random() < rates.attr_mask for _ in range(rows)]
                per_slot[slot] = torch.as_tensor(flags, dtype=torch.bool)
            masks[t] = per_slot

    return PerturbedView(thinned, masks, dropped)
