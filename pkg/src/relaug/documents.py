"""Graph-aware tuple documents built with random walk with restart.

Each root tuple gets a bag of terms: every node the walker visits contributes
its tokenized attributes, weighted by visit count. Restart probability makes
nearby context dominate; far-away nodes decay out of the bag. Walks are
Monte-Carlo with a per-root RNG derived from (global seed, root), so document
construction is deterministic and embarrassingly parallel.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .errors import EmptyDocumentError
from .graph import HeteroGraph, NodeRef
from .schema import Database
from .tokens import Term, TokenizerBundle

DEFAULT_ALPHA = 0.15
DEFAULT_TOTAL_STEPS = 2000


@dataclass(frozen=True)
class RwrConfig:
    alpha: float = DEFAULT_ALPHA
    total_steps: int = DEFAULT_TOTAL_STEPS
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {self.total_steps}")


@dataclass(frozen=True)
class TupleDocument:
    root: NodeRef
    term_counts: dict[Term, int]
    length: int

    @classmethod
    def from_counts(cls, root: NodeRef, counts: dict[Term, int]) -> "TupleDocument":
        return cls(root, dict(counts), sum(counts.values()))


def root_seed(seed: int, root: NodeRef) -> int:
    """Stable per-root RNG seed, independent of process hash randomization."""
    digest = hashlib.blake2b(
        f"{root.table}\x00{root.row_id}".encode(), digest_size=8
    ).digest()
    return seed ^ int.from_bytes(digest, "big")


def rwr_visits(g: HeteroGraph, root: NodeRef, cfg: RwrConfig) -> dict[NodeRef, int]:
    """Visit counts of a restart walk from root; counts sum to total_steps + 1.

    Each step jumps back to the root with probability alpha, otherwise moves
    to a uniformly random out-neighbor (any relation); dead ends always jump.
    The node occupied after every step is counted, plus one initial visit to
    the root.
    """
    root_gid = g.to_gid(root)
    adj = [g.all_out_neighbors(gid) for gid in range(g.n_nodes)]
    visits = [0] * g.n_nodes
    rand = Random(root_seed(cfg.seed, root)).random
    alpha = cfg.alpha
    cur = root_gid
    visits[cur] += 1
    for _ in range(cfg.total_steps):
        if rand() < alpha:
            cur = root_gid
        else:
            nbrs = adj[cur]
            if nbrs:
                cur = nbrs[int(rand() * len(nbrs))]
            else:
                cur = root_gid
        visits[cur] += 1
    return {g.from_gid(gid): c for gid, c in enumerate(visits) if c}


def build_document(
    g: HeteroGraph,
    db: Database,
    root: NodeRef,
    cfg: RwrConfig,
    tok: TokenizerBundle,
) -> TupleDocument:
    """Bag of terms around one root: visited nodes' terms, visit-weighted."""
    counts: dict[Term, int] = {}
    for ref, c in rwr_visits(g, root, cfg).items():
        for term in tok.tokenize_tuple(ref.table, ref.row_id):
            counts[term] = counts.get(term, 0) + c
    if not counts:
        raise EmptyDocumentError(
            f"no visited node around {root.table}/{root.row_id} produced any term"
        )
    return TupleDocument.from_counts(root, counts)


def build_all_documents(
    g: HeteroGraph,
    db: Database,
    cfg: RwrConfig,
    tok: TokenizerBundle,
    tables: list[str] | None = None,
    threads: int = 1,
    skip_empty: bool = True,
) -> list[TupleDocument]:
    """Documents for every tuple of the given tables (default: all tables).

    Walks are independent, so they may run on a thread pool; output order is
    (table, row_id) regardless of thread count. Tuples whose neighborhood
    yields no terms at all are skipped (they cannot be indexed or queried)
    unless skip_empty is False.
    """
    roots = [
        ref for ref in g.node_refs() if tables is None or ref.table in tables
    ]

    def one(ref: NodeRef) -> TupleDocument | None:
        try:
            return build_document(g, db, ref, cfg, tok)
        except EmptyDocumentError:
            if skip_empty:
                return None
            raise

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, roots))
    else:
        results = [one(ref) for ref in roots]
    return [d for d in results if d is not None]


# ---------------------------------------------------------------------------
# documents.jsonl

def write_documents(docs: list[TupleDocument], path: str | Path) -> Path:
    """One JSON object per line, sorted by (table, row_id); keys sorted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in sorted(docs, key=lambda d: d.root):
            fh.write(
                json.dumps(
                    {
                        "table": doc.root.table,
                        "row_id": doc.root.row_id,
                        "length": doc.length,
                        "terms": doc.term_counts,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )
    return path


def read_documents(path: str | Path) -> list[TupleDocument]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            docs.append(
                TupleDocument(
                    root=NodeRef(obj["table"], obj["row_id"]),
                    term_counts={k: int(v) for k, v in obj["terms"].items()},
                    length=obj["length"],
                )
            )
    return docs
