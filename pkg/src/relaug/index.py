"""Per-table inverted index with BM25 scoring and self-score normalization.

Only entity tables get an index (relationship tables are link structure, not
retrieval targets). The on-disk snapshot under ``index/<table>/`` is a cache
of the in-memory index, rebuildable from documents.jsonl:

    terms.dict    one line per term, sorted: <json-escaped term> TAB <offset>
    postings.bin  per term at its offset: uvarint(n) then n postings, each
                  uvarint(doc_id delta from previous, first is absolute)
                  followed by uvarint(term frequency)
    meta.json     {"table", "n_docs", "avgdl", "k1", "b", "doc_lengths"}

Loading the snapshot reproduces scores bit-for-bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyIndexError, NormalizationError, NotFoundError
from .documents import TupleDocument
from .graph import NodeRef
from .schema import Database, Kind
from .tokens import Term

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

ENTITY = "entity"
RELATIONSHIP = "relationship"


@dataclass
class TermStats:
    doc_count: int
    doc_freq: dict[Term, int]
    avgdl: float


@dataclass(frozen=True)
class ScoredHit:
    doc_id: NodeRef
    score: float
    normalized: float | None = None


@dataclass
class TableIndex:
    table: str
    postings: dict[Term, list[tuple[int, int]]]  # term -> [(doc_id, tf)], doc_id asc
    doc_lengths: dict[int, int]
    stats: TermStats
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    _tf: dict[Term, dict[int, int]] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._tf = {t: dict(rows) for t, rows in self.postings.items()}

    def idf(self, term: Term) -> float:
        n_q = self.stats.doc_freq.get(term, 0)
        if n_q == 0:
            return 0.0
        n = self.stats.doc_count
        return math.log((n - n_q + 0.5) / (n_q + 0.5) + 1.0)

    def _length_norm(self, doc_id: int) -> float:
        dl = self.doc_lengths[doc_id]
        return self.k1 * (1.0 - self.b + self.b * dl / self.stats.avgdl)


def classify_tables(db: Database) -> dict[str, str]:
    """Entity/relationship split driving which tables get an index.

    A table is a relationship iff it has at least two FK columns, at most two
    non-key non-timestamp attributes, and no other table references it. A
    manifest ``classification`` override always wins.
    """
    referenced: set[str] = set()
    for table in db.tables.values():
        for fk in table.fk_columns:
            if fk.target_table != table.name:
                referenced.add(fk.target_table)

    out: dict[str, str] = {}
    for name, table in db.tables.items():
        if table.classification_override:
            out[name] = table.classification_override
            continue
        plain = [
            c for c in table.columns
            if not c.is_key and c.kind is not Kind.TIMESTAMP
        ]
        is_rel = (
            len(table.fk_columns) >= 2
            and len(plain) <= 2
            and name not in referenced
        )
        out[name] = RELATIONSHIP if is_rel else ENTITY
    return out


def build_index(
    docs: list[TupleDocument], k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> TableIndex:
    """Exact postings/statistics over one table's documents."""
    if not docs:
        raise EmptyIndexError("cannot build an index over zero documents")
    if k1 <= 0:
        raise ValueError(f"k1 must be > 0, got {k1}")
    if not (0.0 <= b <= 1.0):
        raise ValueError(f"b must be in [0, 1], got {b}")
    tables = {d.root.table for d in docs}
    if len(tables) != 1:
        raise ValueError(f"documents span multiple tables: {sorted(tables)}")
    (table,) = tables

    docs = sorted(docs, key=lambda d: d.root.row_id)
    doc_lengths: dict[int, int] = {}
    postings: dict[Term, list[tuple[int, int]]] = {}
    for doc in docs:
        rid = doc.root.row_id
        if rid in doc_lengths:
            raise ValueError(f"duplicate document for {table}/{rid}")
        doc_lengths[rid] = doc.length
        for term, tf in doc.term_counts.items():
            postings.setdefault(term, []).append((rid, tf))

    stats = TermStats(
        doc_count=len(docs),
        doc_freq={t: len(rows) for t, rows in postings.items()},
        avgdl=sum(doc_lengths.values()) / len(docs),
    )
    return TableIndex(table, postings, doc_lengths, stats, k1, b)


def bm25_score(idx: TableIndex, query: TupleDocument, doc_id: int) -> float:
    """BM25 relevance of one indexed document to the query's term set.

    Distinct query terms contribute once each (query-side frequency is
    ignored); terms unknown to the index contribute zero.
    """
    if doc_id not in idx.doc_lengths:
        raise NotFoundError(f"document {idx.table}/{doc_id} is not indexed")
    norm = idx._length_norm(doc_id)
    score = 0.0
    for term in sorted(query.term_counts):
        tf_map = idx._tf.get(term)
        if not tf_map:
            continue
        tf = tf_map.get(doc_id)
        if not tf:
            continue
        score += idx.idf(term) * tf * (idx.k1 + 1.0) / (tf + norm)
    return score


def retrieve(idx: TableIndex, query: TupleDocument, top_k: int) -> list[ScoredHit]:
    """Top-k candidates sharing at least one term with the query.

    Ordered by score descending, then doc_id ascending; candidate scores are
    exactly bm25_score for the same (index, query, doc).
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    scores: dict[int, float] = {}
    for term in sorted(query.term_counts):
        rows = idx.postings.get(term)
        if not rows:
            continue
        idf = idx.idf(term)
        k1 = idx.k1
        for doc_id, tf in rows:
            scores[doc_id] = scores.get(doc_id, 0.0) + (
                idf * tf * (k1 + 1.0) / (tf + idx._length_norm(doc_id))
            )
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    return [ScoredHit(NodeRef(idx.table, rid), s) for rid, s in ranked]


def normalize_by_self(
    idx: TableIndex, query: TupleDocument, hits: list[ScoredHit]
) -> list[ScoredHit]:
    """Divide every hit score by the query tuple's self-retrieval score.

    The query document's own row must be indexed. Normalized values are not
    clamped: BM25 length normalization can push a hit above 1.0, which
    callers threshold later.
    """
    self_score = bm25_score(idx, query, query.root.row_id)
    if self_score <= 0.0:
        raise NormalizationError(
            f"self-retrieval score for {query.root.table}/{query.root.row_id} is zero"
        )
    return [
        ScoredHit(h.doc_id, h.score, normalized=h.score / self_score) for h in hits
    ]


# ---------------------------------------------------------------------------
# on-disk snapshot

def _write_uvarint(out: bytearray, value: int) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_uvarint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7


def write_index(idx: TableIndex, out_dir: str | Path) -> Path:
    """Snapshot the index into out_dir/<table>/ (three files, see module doc)."""
    table_dir = Path(out_dir) / idx.table
    table_dir.mkdir(parents=True, exist_ok=True)

    postings_buf = bytearray()
    dict_lines = []
    for term in sorted(idx.postings):
        dict_lines.append(f"{json.dumps(term, ensure_ascii=False)}\t{len(postings_buf)}")
        rows = idx.postings[term]
        _write_uvarint(postings_buf, len(rows))
        prev = 0
        for doc_id, tf in rows:
            _write_uvarint(postings_buf, doc_id - prev)
            _write_uvarint(postings_buf, tf)
            prev = doc_id

    (table_dir / "postings.bin").write_bytes(bytes(postings_buf))
    (table_dir / "terms.dict").write_text(
        "\n".join(dict_lines) + ("\n" if dict_lines else ""), encoding="utf-8"
    )
    meta = {
        "table": idx.table,
        "n_docs": idx.stats.doc_count,
        "avgdl": idx.stats.avgdl,
        "k1": idx.k1,
        "b": idx.b,
        "doc_lengths": {str(rid): idx.doc_lengths[rid] for rid in sorted(idx.doc_lengths)},
    }
    (table_dir / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return table_dir


def read_index(table_dir: str | Path) -> TableIndex:
    """Load a snapshot; scores reproduce the original index bit-for-bit."""
    table_dir = Path(table_dir)
    meta = json.loads((table_dir / "meta.json").read_text(encoding="utf-8"))
    buf = (table_dir / "postings.bin").read_bytes()

    postings: dict[Term, list[tuple[int, int]]] = {}
    dict_text = (table_dir / "terms.dict").read_text(encoding="utf-8")
    for line in dict_text.splitlines():
        raw_term, _, raw_offset = line.rpartition("\t")
        term = json.loads(raw_term)
        pos = int(raw_offset)
        n, pos = _read_uvarint(buf, pos)
        rows = []
        doc_id = 0
        for _ in range(n):
            delta, pos = _read_uvarint(buf, pos)
            tf, pos = _read_uvarint(buf, pos)
            doc_id += delta
            rows.append((doc_id, tf))
        postings[term] = rows

    doc_lengths = {int(k): v for k, v in meta["doc_lengths"].items()}
    stats = TermStats(
        doc_count=meta["n_docs"],
        doc_freq={t: len(rows) for t, rows in postings.items()},
        avgdl=meta["avgdl"],
    )
    return TableIndex(meta["table"], postings, doc_lengths, stats, meta["k1"], meta["b"])
