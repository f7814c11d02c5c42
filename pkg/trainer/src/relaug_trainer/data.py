"""Load a relaug export bundle and reconstruct per-tuple model inputs.

The bundle is plain files: manifest.json (column kinds), nodes.tsv,
edges_<type>.tsv (directed arcs), documents.jsonl (walk-weighted term bags),
atra_pairs.tsv (positive pairs), labels.csv (table,row_id,label,split).

Tuple features are rebuilt from each node's own-table terms: the dominant
token per categorical column, the dominant bin index as a numeric surrogate,
and the count-ranked keywords of each text column joined into one sentence
with the column names. Key and timestamp columns never appear in documents
and therefore carry no features (they are identifiers and split drivers).
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KEY_KINDS = ("pk", "timestamp")


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # categorical | numeric | text


@dataclass
class TableSchema:
    name: str
    columns: list[Column]


@dataclass
class Labels:
    node_ids: list[int]
    values: np.ndarray           # float labels
    splits: list[str]            # train | valid | test per row
    is_classification: bool


@dataclass
class GraphData:
    tables: dict[str, TableSchema]
    node_table: list[str]                       # global id -> table
    node_row: list[int]                         # global id -> row_id
    node_index: dict[tuple[str, int], int]      # (table, row_id) -> global id
    relations: dict[str, list[tuple[int, int]]]  # name -> directed arcs
    cat_values: dict[str, dict[str, list[str | None]]]   # table -> col -> per local row
    num_values: dict[str, dict[str, list[float | None]]]
    sentences: dict[str, list[str]]             # table -> per local row
    vocab: dict[str, dict[str, dict[str, int]]]  # table -> col -> token -> index (>=1)
    partners: dict[int, list[int]] = field(default_factory=dict)
    labels: Labels | None = None

    def table_nodes(self, table: str) -> list[int]:
        return [g for g, t in enumerate(self.node_table) if t == table]

    @property
    def n_nodes(self) -> int:
        return len(self.node_table)

    def schema_relations(self) -> list[str]:
        return [r for r in sorted(self.relations) if not r.startswith("aug__")]

    def all_relations(self) -> list[str]:
        return sorted(self.relations)


def _parse_manifest(path: Path) -> dict[str, TableSchema]:
    spec = json.loads(path.read_text(encoding="utf-8"))
    tables = {}
    for entry in spec["tables"]:
        columns = []
        for c in entry["columns"]:
            kind = c["kind"]
            if kind in KEY_KINDS or kind.startswith("fk:"):
                continue
            columns.append(Column(c["name"], kind))
        tables[entry["name"]] = TableSchema(entry["name"], columns)
    return tables


def _read_tsv(path: Path) -> list[list[str]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    return [line.split("\t") for line in lines[1:]]


def feature_hash(words: list[str], dim: int) -> np.ndarray:
    """Deterministic bag-of-words hashing; L2-normalized when nonzero."""
    vec = np.zeros(dim, dtype=np.float32)
    for w in words:
        digest = hashlib.blake2b(w.encode(), digest_size=4).digest()
        vec[int.from_bytes(digest, "big") % dim] += 1.0
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 0 else vec


def load_export(export_dir: str | Path, labels_path: str | Path | None = None) -> GraphData:
    export_dir = Path(export_dir)
    tables = _parse_manifest(export_dir / "manifest.json")

    node_table: list[str] = []
    node_row: list[int] = []
    node_index: dict[tuple[str, int], int] = {}
    for table, row in _read_tsv(export_dir / "nodes.tsv"):
        node_index[(table, int(row))] = len(node_table)
        node_table.append(table)
        node_row.append(int(row))

    relations: dict[str, list[tuple[int, int]]] = {}
    for path in sorted(export_dir.glob("edges_*.tsv")):
        name = path.stem[len("edges_"):]
        arcs = []
        for st, sid, dt, did in _read_tsv(path):
            arcs.append((node_index[(st, int(sid))], node_index[(dt, int(did))]))
        relations[name] = arcs

    # feature reconstruction from documents
    counts_by_node: dict[int, dict[str, int]] = {}
    with open(export_dir / "documents.jsonl", encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            key = (obj["table"], obj["row_id"])
            if key in node_index:
                counts_by_node[node_index[key]] = obj["terms"]

    local: dict[str, dict[int, int]] = {}
    for table in tables:
        rows = [node_row[g] for g in range(len(node_table)) if node_table[g] == table]
        local[table] = {rid: i for i, rid in enumerate(rows)}

    cat_values = {
        t: {c.name: [None] * len(local[t]) for c in s.columns if c.kind == "categorical"}
        for t, s in tables.items()
    }
    num_values = {
        t: {c.name: [None] * len(local[t]) for c in s.columns if c.kind == "numeric"}
        for t, s in tables.items()
    }
    sentences = {t: [""] * len(local[t]) for t in tables}

    for gid, terms in counts_by_node.items():
        table = node_table[gid]
        schema = tables.get(table)
        if schema is None:
            continue
        li = local[table][node_row[gid]]
        prefix = table + "."
        per_col: dict[str, list[tuple[int, str]]] = {}
        for term, count in terms.items():
            if not term.startswith(prefix):
                continue
            qualified, _, token = term.partition("=")
            col = qualified[len(prefix):]
            per_col.setdefault(col, []).append((count, token))

        parts = []
        for col in schema.columns:
            found = per_col.get(col.name)
            if not found:
                continue
            if col.kind == "categorical":
                count, token = max(found, key=lambda ct: (ct[0], ct[1]))
                cat_values[table][col.name][li] = token
            elif col.kind == "numeric":
                count, token = max(found, key=lambda ct: (ct[0], ct[1]))
                if token.startswith("bin"):
                    num_values[table][col.name][li] = float(token[3:])
            else:  # text: keywords in salience order
                ranked = sorted(found, key=lambda ct: (-ct[0], ct[1]))
                parts.append(f"{col.name}: " + " ".join(t for _, t in ranked))
        sentences[table][li] = " ".join(parts)

    vocab = {
        t: {
            col: {tok: i + 1 for i, tok in enumerate(sorted({v for v in vals if v is not None}))}
            for col, vals in cat_values[t].items()
        }
        for t in tables
    }

    data = GraphData(
        tables=tables,
        node_table=node_table,
        node_row=node_row,
        node_index=node_index,
        relations=relations,
        cat_values=cat_values,
        num_values=num_values,
        sentences=sentences,
        vocab=vocab,
    )

    atra = export_dir / "atra_pairs.tsv"
    if atra.exists():
        for table, a, b, _score in _read_tsv(atra):
            ga = node_index.get((table, int(a)))
            gb = node_index.get((table, int(b)))
            if ga is None or gb is None:
                continue
            data.partners.setdefault(ga, []).append(gb)
            data.partners.setdefault(gb, []).append(ga)
        for k in data.partners:
            data.partners[k].sort()

    if labels_path is None:
        candidate = export_dir / "labels.csv"
        labels_path = candidate if candidate.exists() else None
    if labels_path is not None:
        data.labels = _load_labels(Path(labels_path), node_index)
    return data


def _load_labels(path: Path, node_index: dict[tuple[str, int], int]) -> Labels:
    node_ids, values, splits = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            gid = node_index.get((row["table"], int(row["row_id"])))
            if gid is None:
                raise ValueError(
                    f"label row {row['table']}/{row['row_id']} has no matching node"
                )
            node_ids.append(gid)
            values.append(float(row["label"]))
            splits.append(row["split"])
    arr = np.asarray(values, dtype=np.float64)
    is_cls = bool(np.all(np.isin(arr, (0.0, 1.0))))
    return Labels(node_ids, arr, splits, is_cls)


def sample_in_neighbors(
    data: GraphData,
    relation_names: list[str],
    cap: int,
    seed: int,
) -> dict[str, list[list[int]]]:
    """Per relation, the sampled in-neighbor list of every node.

    Messages flow along stored arc direction (src feeds dst), so a node
    aggregates the sources of its incoming arcs. Sampling is uniform without
    replacement and deterministic for a fixed seed.
    """
    from random import Random

    out: dict[str, list[list[int]]] = {}
    for name in relation_names:
        incoming: list[list[int]] = [[] for _ in range(data.n_nodes)]
        for src, dst in data.relations.get(name, []):
            incoming[dst].append(src)
        rng = Random(seed ^ (hash_name(name) & 0x7FFFFFFF))
        sampled = []
        for nbrs in incoming:
            if len(nbrs) > cap:
                nbrs = rng.sample(nbrs, cap)
            sampled.append(sorted(nbrs))
        out[name] = sampled
    return out


def hash_name(name: str) -> int:
    digest = hashlib.blake2b(name.encode(), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def temporal_split_masks(labels: Labels) -> dict[str, np.ndarray]:
    masks = {}
    split_arr = np.asarray(labels.splits)
    for name in ("train", "valid", "test"):
        masks[name] = split_arr == name
    return masks
