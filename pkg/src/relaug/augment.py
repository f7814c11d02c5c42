"""Retrieval-driven augmentation signals.

ATRA: within each indexed table, tuples whose documents retrieve each other
with a high self-normalized score become positive pairs for contrastive
training. ETRA: between indexed tables that are not schema-adjacent, strong
raw-score retrievals become directed shortcut edges (retrieved tuple ->
query tuple), thresholded at mean + k_sigma standard deviations of the
table pair's pooled score population.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from .documents import TupleDocument, root_seed
from .graph import UNREACHABLE, HeteroGraph, NodeRef, schema_distance
from .index import ScoredHit, TableIndex, normalize_by_self, retrieve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AtraPair:
    table: str
    a: NodeRef
    b: NodeRef
    normalized_score: float


@dataclass(frozen=True)
class EtraEdge:
    src: NodeRef  # retrieved tuple
    dst: NodeRef  # query tuple
    score: float


@dataclass
class AugmentationSignals:
    atra_pairs: list[AtraPair] = field(default_factory=list)
    etra_edges: list[EtraEdge] = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)


def _by_table(docs: list[TupleDocument]) -> dict[str, list[TupleDocument]]:
    grouped: dict[str, list[TupleDocument]] = {}
    for d in docs:
        grouped.setdefault(d.root.table, []).append(d)
    for table in grouped:
        grouped[table].sort(key=lambda d: d.root.row_id)
    return grouped


#: tables beyond this row count default to sampling 10% of query tuples
LARGE_TABLE_ROWS = 100_000


def run_atra(
    indices: dict[str, TableIndex],
    docs: list[TupleDocument],
    theta_a: float = 0.7,
    sample_rate: float | None = None,
    top_k: int = 20,
    seed: int = 0,
    threads: int = 1,
) -> list[AtraPair]:
    """Same-table positive pairs with self-normalized score >= theta_a.

    Per table, ceil(sample_rate * N) query tuples are drawn with a seeded
    RNG; each retrieves top_k neighbors from its own table's index. When
    sample_rate is None, every tuple queries unless the table exceeds
    LARGE_TABLE_ROWS rows (then 10%). Pairs are unordered and deduplicated
    keeping the best score. Tables without an index are skipped with a
    warning.
    """
    if not (0.0 < theta_a <= 1.0):
        raise ValueError(f"theta_a must be in (0, 1], got {theta_a}")
    if sample_rate is not None and not (0.0 < sample_rate <= 1.0):
        raise ValueError(f"sample_rate must be in (0, 1], got {sample_rate}")

    best: dict[tuple[str, int, int], float] = {}
    for table, table_docs in sorted(_by_table(docs).items()):
        idx = indices.get(table)
        if idx is None:
            log.warning("atra: table %s has no index, skipped", table)
            continue
        n = len(table_docs)
        rate = sample_rate if sample_rate is not None else (
            1.0 if n <= LARGE_TABLE_ROWS else 0.1
        )
        count = min(n, math.ceil(rate * n))
        rng = Random(root_seed(seed, NodeRef(table, -1)))
        queries = sorted(rng.sample(table_docs, count), key=lambda d: d.root.row_id)

        def score_one(query: TupleDocument) -> list[tuple[int, int, float]]:
            hits = normalize_by_self(idx, query, retrieve(idx, query, top_k))
            out = []
            for h in hits:
                if h.doc_id.row_id == query.root.row_id:
                    continue
                if h.normalized >= theta_a:
                    lo, hi = sorted((query.root.row_id, h.doc_id.row_id))
                    out.append((lo, hi, h.normalized))
            return out

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                per_query = list(pool.map(score_one, queries))
        else:
            per_query = [score_one(q) for q in queries]
        for found in per_query:
            for lo, hi, score in found:
                key = (table, lo, hi)
                if score > best.get(key, -1.0):
                    best[key] = score

    return [
        AtraPair(table, NodeRef(table, lo), NodeRef(table, hi), best[(table, lo, hi)])
        for table, lo, hi in sorted(best)
    ]


def threshold_retain(scores: list[float], k_sigma: float) -> list[int]:
    """Indices of scores strictly above mean + k_sigma * population stddev.

    With zero variance nothing survives: the strict inequality makes the
    degenerate all-equal population retain nothing rather than everything.
    """
    if k_sigma < 0:
        raise ValueError(f"k_sigma must be >= 0, got {k_sigma}")
    if not scores:
        return []
    n = len(scores)
    mu = sum(scores) / n
    sigma = math.sqrt(sum((s - mu) ** 2 for s in scores) / n)
    cut = mu + k_sigma * sigma
    return [i for i, s in enumerate(scores) if s > cut]


def run_etra(
    indices: dict[str, TableIndex],
    docs: list[TupleDocument],
    g: HeteroGraph,
    k_sigma: float = 2.0,
    top_k: int = 20,
    threads: int = 1,
) -> list[EtraEdge]:
    """Directed shortcut edges between schema-distant indexed tables.

    For every unordered indexed-table pair at schema distance > 1 (but
    reachable), every tuple of each side queries the other side's index;
    all top_k raw scores pool into one population per pair, and candidates
    strictly above mean + k_sigma * std become edges retrieved -> query.
    """
    grouped = _by_table(docs)
    tables = sorted(t for t in grouped if t in indices)

    edges: dict[tuple[NodeRef, NodeRef], float] = {}
    for i, ta in enumerate(tables):
        for tb in tables[i + 1 :]:
            d = schema_distance(g, ta, tb)
            if d <= 1 or d == UNREACHABLE:
                continue
            candidates: list[tuple[float, NodeRef, NodeRef]] = []
            for q_table, hit_table in ((ta, tb), (tb, ta)):
                idx = indices[hit_table]

                def score_one(query: TupleDocument) -> list[tuple[float, NodeRef, NodeRef]]:
                    return [
                        (h.score, h.doc_id, query.root)
                        for h in retrieve(idx, query, top_k)
                    ]

                queries = grouped[q_table]
                if threads > 1:
                    with ThreadPoolExecutor(max_workers=threads) as pool:
                        per_query = list(pool.map(score_one, queries))
                else:
                    per_query = [score_one(q) for q in queries]
                for found in per_query:
                    candidates.extend(found)
            if not candidates:
                log.warning("etra: pair (%s, %s) retrieved nothing, skipped", ta, tb)
                continue
            keep = threshold_retain([c[0] for c in candidates], k_sigma)
            for i_c in keep:
                score, src, dst = candidates[i_c]
                key = (src, dst)
                if score > edges.get(key, -1.0):
                    edges[key] = score

    return [EtraEdge(src, dst, edges[(src, dst)]) for src, dst in sorted(edges)]


# ---------------------------------------------------------------------------
# serialization

def emit_signals(signals: AugmentationSignals, out_dir: str | Path) -> list[Path]:
    """Write atra_pairs.tsv, etra_edges.tsv, and config.json deterministically."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        write_atra_pairs(signals.atra_pairs, out_dir / "atra_pairs.tsv"),
        write_etra_edges(signals.etra_edges, out_dir / "etra_edges.tsv"),
    ]
    config = out_dir / "config.json"
    config.write_text(
        json.dumps(signals.config_echo, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    paths.append(config)
    return paths


def write_atra_pairs(pairs: list[AtraPair], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("table\trow_a\trow_b\tnormalized_score\n")
        for p in sorted(pairs, key=lambda p: (p.table, p.a.row_id, p.b.row_id)):
            fh.write(f"{p.table}\t{p.a.row_id}\t{p.b.row_id}\t{p.normalized_score!r}\n")
    return path


def read_atra_pairs(path: str | Path) -> list[AtraPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        next(fh)  # header
        for line in fh:
            table, a, b, score = line.rstrip("\n").split("\t")
            pairs.append(
                AtraPair(table, NodeRef(table, int(a)), NodeRef(table, int(b)), float(score))
            )
    return pairs


def write_etra_edges(edges: list[EtraEdge], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("src_table\tsrc_id\tdst_table\tdst_id\tscore\n")
        for e in sorted(edges, key=lambda e: (e.src, e.dst)):
            fh.write(
                f"{e.src.table}\t{e.src.row_id}\t{e.dst.table}\t{e.dst.row_id}\t{e.score!r}\n"
            )
    return path


def read_etra_edges(path: str | Path) -> list[EtraEdge]:
    edges = []
    with open(path, encoding="utf-8") as fh:
        next(fh)  # header
        for line in fh:
            st, sid, dt, did, score = line.rstrip("\n").split("\t")
            edges.append(EtraEdge(NodeRef(st, int(sid)), NodeRef(dt, int(did)), float(score)))
    return edges
