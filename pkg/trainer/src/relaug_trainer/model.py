"""Layered tuple model: attribute embedding, residual integration, graph
aggregation, and a linear task head.

Per table, each categorical and numeric attribute embeds into a shared
latent dimension (lookup table, affine map); the table's text columns are
concatenated into one sentence, encoded by deterministic feature hashing,
and affinely projected into the same space as a single slot. The
concatenated tuple vector runs through residual blocks down to one tuple
embedding; a relation-typed aggregation stack mixes neighbor embeddings,
and the final representation concatenates the pre-graph and post-graph
vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data import GraphData, TableSchema, feature_hash

TEXT_HASH_DIM = 64


def make_delta(dim: int, dropout: float, mode: str = "full") -> nn.Module:
    """Activation bundle: ReLU, layer normalization, dropout.

    mode="identity" turns the bundle off (used by algebraic unit tests).
    """
    if mode == "identity":
        return nn.Identity()
    layers: list[nn.Module] = [nn.ReLU(), nn.LayerNorm(dim)]
    if dropout > 0:
        layers.append(nn.Dropout(dropout))
    return nn.Sequential(*layers)


class AttributeEmbedder(nn.Module):
    """Per-table encoders; slots are cat/num columns plus one text sentence."""

    def __init__(
        self,
        schema: TableSchema,
        vocab: dict[str, dict[str, int]],
        dim: int,
        text_dim: int = TEXT_HASH_DIM,
    ):
        super().__init__()
        self.schema = schema
        self.dim = dim
        self.text_dim = text_dim
        self.cat_columns = [c.name for c in schema.columns if c.kind == "categorical"]
        self.num_columns = [c.name for c in schema.columns if c.kind == "numeric"]
        self.has_text = any(c.kind == "text" for c in schema.columns)
        self.cat_tables = nn.ModuleDict()
        self.num_scale = nn.ParameterDict()
        self.num_bias = nn.ParameterDict()
        for name in self.cat_columns:
            # row 0 is the shared null / out-of-vocabulary embedding
            self.cat_tables[name] = nn.Embedding(len(vocab.get(name, {})) + 1, dim)
        for name in self.num_columns:
            self.num_scale[name] = nn.Parameter(torch.randn(dim) * 0.1)
            self.num_bias[name] = nn.Parameter(torch.zeros(dim))
        if self.has_text:
            self.text_proj = nn.Linear(text_dim, dim)

    @property
    def n_slots(self) -> int:
        return len(self.cat_columns) + len(self.num_columns) + int(self.has_text)

    @property
    def out_dim(self) -> int:
        return self.n_slots * self.dim

    def forward(
        self,
        cat_idx: dict[str, torch.Tensor],   # col -> (n,) long, 0 = null/OOV
        num_val: dict[str, torch.Tensor],   # col -> (n,) float
        text_vec: torch.Tensor | None,      # (n, text_dim) hashed sentences
        mask: dict[str, torch.Tensor] | None = None,  # slot -> (n,) bool, True hides
    ) -> torch.Tensor:
        mask = mask or {}
        parts = []
        for name in self.cat_columns:
            idx = cat_idx[name]
            if name in mask:
                idx = torch.where(mask[name], torch.zeros_like(idx), idx)
            parts.append(self.cat_tables[name](idx))
        for name in self.num_columns:
            val = num_val[name]
            if name in mask:
                val = torch.where(mask[name], torch.zeros_like(val), val)
            parts.append(val.unsqueeze(1) * self.num_scale[name] + self.num_bias[name])
        if self.has_text:
            vec = text_vec
            if "__text__" in mask:
                vec = vec * (~mask["__text__"]).unsqueeze(1).to(vec.dtype)
            parts.append(self.text_proj(vec))
        if not parts:
            raise ValueError(f"table {self.schema.name} has no feature slots")
        return torch.cat(parts, dim=1)


class ResidualBlock(nn.Module):
    """out = F(x) + W x with F a two-layer network under the delta bundle."""

    def __init__(self, n_in: int, n_hid: int, n_out: int, dropout: float, delta: str):
        super().__init__()
        self.lin1 = nn.Linear(n_in, n_hid)
        self.lin2 = nn.Linear(n_hid, n_out)
        self.skip = nn.Linear(n_in, n_out, bias=False)
        self.delta_inner = make_delta(n_hid, dropout, delta)
        self.delta_outer = make_delta(n_out, dropout, delta)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f = self.delta_outer(self.lin2(self.delta_inner(self.lin1(x))))
        return f + self.skip(x)


class ResidualStack(nn.Module):
    """n_blocks residual blocks from the concatenated width down to dim."""

    def __init__(self, n_in: int, dim: int, n_blocks: int = 2,
                 dropout: float = 0.0, delta: str = "full"):
        super().__init__()
        if n_blocks == 0 and n_in != dim:
            raise ValueError("an empty stack requires matching dimensions")
        self.blocks = nn.ModuleList(
            ResidualBlock(n_in if i == 0 else dim, dim, dim, dropout, delta)
            for i in range(n_blocks)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            x = block(x)
        return x


class HeteroAggregator(nn.Module):
    """Relation-typed neighborhood mixing.

    h' = delta(W h + (1/R) sum_r sum_{u in N_r(v)} W_r h_u), where R is the
    total relation count (a constant, even when a node has no neighbors
    under some relation) and N_r(v) are the sampled in-neighbors of v.
    """

    def __init__(self, relations: list[str], dim: int, layers: int = 2,
                 dropout: float = 0.0, delta: str = "full"):
        super().__init__()
        self.relations = list(relations)
        self.n_layers = layers
        self.self_weights = nn.ModuleList(
            nn.Linear(dim, dim, bias=False) for _ in range(layers)
        )
        self.rel_weights = nn.ModuleList(
            nn.ModuleDict({r: nn.Linear(dim, dim, bias=False) for r in self.relations})
            for _ in range(layers)
        )
        self.deltas = nn.ModuleList(
            make_delta(dim, dropout, delta) for _ in range(layers)
        )

    @staticmethod
    def flatten(sampled: dict[str, list[list[int]]]) -> dict[str, tuple[torch.Tensor, torch.Tensor]]:
        index = {}
        for r, per_node in sampled.items():
            srcs, dsts = [], []
            for v, nbrs in enumerate(per_node):
                srcs.extend(nbrs)
                dsts.extend([v] * len(nbrs))
            index[r] = (
                torch.as_tensor(srcs, dtype=torch.long),
                torch.as_tensor(dsts, dtype=torch.long),
            )
        return index

    def forward(
        self, h: torch.Tensor, sampled: dict[str, list[list[int]]]
    ) -> torch.Tensor:
        if not self.relations:
            for k in range(self.n_layers):
                h = self.deltas[k](self.self_weights[k](h))
            return h
        index = self.flatten({r: sampled.get(r, []) for r in self.relations})
        scale = 1.0 / len(self.relations)
        for k in range(self.n_layers):
            mixed = torch.zeros_like(h)
            for r in self.relations:
                srcs, dsts = index[r]
                if srcs.numel() == 0:
                    continue
                mixed = mixed.index_add(0, dsts, self.rel_weights[k][r](h[srcs]))
            h = self.deltas[k](self.self_weights[k](h) + scale * mixed)
        return h


class TaskHead(nn.Module):
    """Single affine map from the concatenated representation."""

    def __init__(self, dim: int, out_dim: int = 1):
        super().__init__()
        self.proj = nn.Linear(2 * dim, out_dim)

    def forward(self, q: torch.Tensor) -> torch.Tensor:
        return self.proj(q).squeeze(-1)


@dataclass
class ModelConfig:
    dim: int = 128
    n_blocks: int = 2
    layers: int = 2
    dropout: float = 0.1
    text_dim: int = TEXT_HASH_DIM
    delta: str = "full"


class TupleModel(nn.Module):
    """Embedders and residual stacks per table plus one shared aggregator."""

    def __init__(self, data: GraphData, relations: list[str], cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.tables = sorted(data.tables)
        self.embedders = nn.ModuleDict()
        self.stacks = nn.ModuleDict()
        self.constants = nn.ParameterDict()
        for t in self.tables:
            schema = data.tables[t]
            if schema.columns:
                emb = AttributeEmbedder(schema, data.vocab[t], cfg.dim, cfg.text_dim)
                self.embedders[t] = emb
                self.stacks[t] = ResidualStack(
                    emb.out_dim, cfg.dim, cfg.n_blocks, cfg.dropout, cfg.delta
                )
            else:
                # key-only table: nodes carry a learned per-table constant
                self.constants[t] = nn.Parameter(torch.zeros(cfg.dim))
        self.aggregator = HeteroAggregator(
            relations, cfg.dim, cfg.layers, cfg.dropout, cfg.delta
        )
        self.head = TaskHead(cfg.dim)

    def tuple_embeddings(
        self, data: GraphData, inputs: dict, masks: dict | None = None
    ) -> torch.Tensor:
        """Pre-graph embedding e_f for every node, in global id order."""
        chunks: dict[str, torch.Tensor] = {}
        for t in self.tables:
            per_table = inputs[t]
            if t in self.embedders:
                chunks[t] = self.stacks[t](
                    self.embedders[t](
                        per_table["cat"], per_table["num"], per_table["text"],
                        mask=(masks or {}).get(t),
                    )
                )
            else:
                chunks[t] = self.constants[t].expand(per_table["count"], self.cfg.dim)
        rows = []
        cursor = {t: 0 for t in self.tables}
        for t in data.node_table:
            rows.append(chunks[t][cursor[t]])
            cursor[t] += 1
        return torch.stack(rows) if rows else torch.zeros(0, self.cfg.dim)

    def forward_all(
        self,
        data: GraphData,
        inputs: dict,
        sampled: dict[str, list[list[int]]],
        masks: dict | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (e_f, q) for all nodes; q = e_f ++ aggregated e_g."""
        e_f = self.tuple_embeddings(data, inputs, masks)
        e_g = self.aggregator(e_f, sampled)
        return e_f, torch.cat([e_f, e_g], dim=1)


def build_inputs(data: GraphData, text_dim: int = TEXT_HASH_DIM) -> dict:
    """Tensorize the reconstructed features once, per table."""
    inputs: dict = {}
    for t, schema in data.tables.items():
        count = len(data.sentences[t])
        cat: dict[str, torch.Tensor] = {}
        num: dict[str, torch.Tensor] = {}
        for col in schema.columns:
            if col.kind == "categorical":
                vocab = data.vocab[t][col.name]
                cat[col.name] = torch.as_tensor(
                    [
                        vocab.get(v, 0) if v is not None else 0
                        for v in data.cat_values[t][col.name]
                    ],
                    dtype=torch.long,
                )
            elif col.kind == "numeric":
                num[col.name] = torch.as_tensor(
                    [
                        v if v is not None else 0.0
                        for v in data.num_values[t][col.name]
                    ],
                    dtype=torch.float32,
                )
        if any(c.kind == "text" for c in schema.columns):
            text = torch.from_numpy(
                np.stack([feature_hash(s.split(), text_dim) for s in data.sentences[t]])
                if count
                else np.zeros((0, text_dim), dtype=np.float32)
            )
        else:
            text = None
        inputs[t] = {"cat": cat, "num": num, "text": text, "count": count}
    return inputs
