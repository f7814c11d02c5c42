"""Attribute tokenization: table/column-prefixed discrete terms.

A term has the surface form ``TABLE.COLUMN=token``. Prefixing keeps lexically
identical values from different columns distinct (USER.status=active and
BIZ.status=active never collide). Categorical values become one term each,
numeric values are discretized into equal-width bins, text values are reduced
to a handful of salient keywords, and key/timestamp columns yield no terms at
all (identifiers are structure, not vocabulary).
"""

from __future__ import annotations

import json
import math
import re
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable

from .schema import ColumnSpec, Database, Kind, Table
from .stopwords import STOPWORDS

if TYPE_CHECKING:
    from .index import TermStats

#: term surface string, "TABLE.COLUMN=token"
Term = str

#: extractor signature: (text, corpus_stats, max_keywords) -> keyword list
KeywordExtractor = Callable[[str, "TermStats | None", int], list[str]]

DEFAULT_KEYWORDS_PER_TEXT = 5

_WORD_SPLIT = re.compile(r"[^0-9a-z]+")
_MIN_WORD_LEN = 3


def make_term(table: str, column: str, token: str) -> Term:
    return f"{table}.{column}={token}"


def split_term(term: Term) -> tuple[str, str, str]:
    """Inverse of make_term; splits at the first '='."""
    prefix, _, token = term.partition("=")
    table, _, column = prefix.partition(".")
    return table, column, token


# ---------------------------------------------------------------------------
# numeric binning

def bin_count_for(n: int) -> int:
    """Number of equal-width bins for a column with n distinct values.

    Small columns (n < 1000) get ceil(1 + log2 n) bins, large ones
    ceil(2 * cbrt(n)). Both ceilings are computed with exact integer
    arithmetic so exact powers never round the wrong way.
    """
    if n < 1:
        raise ValueError(f"distinct count must be >= 1, got {n}")
    if n < 1000:
        # smallest b with 2**(b-1) >= n, i.e. ceil(1 + log2 n)
        return (n - 1).bit_length() + 1
    # smallest b with b**3 >= 8n, i.e. ceil(2 * n**(1/3))
    b = max(1, int(round((8 * n) ** (1.0 / 3.0))) - 2)
    while b ** 3 < 8 * n:
        b += 1
    return b


@dataclass(frozen=True)
class BinPlan:
    """Equal-width binning of one numeric column."""

    column: str  # qualified "TABLE.COLUMN"
    edges: tuple[float, ...]
    bin_count: int

    def bin_index(self, v: float) -> int:
        """Bin containing v; out-of-range values clamp to the first/last bin."""
        i = bisect_right(self.edges, v) - 1
        return min(max(i, 0), self.bin_count - 1)

    def to_json(self) -> dict:
        return {"column": self.column, "edges": list(self.edges), "bin_count": self.bin_count}

    @classmethod
    def from_json(cls, obj: dict) -> "BinPlan":
        return cls(obj["column"], tuple(obj["edges"]), obj["bin_count"])


def plan_bins(
    values: Iterable[float], distinct_count: int | None = None, column: str = ""
) -> BinPlan:
    """Build a BinPlan over the observed values.

    ``distinct_count`` drives the bin-count rule; when omitted it is computed
    from the values. A constant column degenerates to one unit-width bin
    around the single value.
    """
    values = list(values)
    if not values:
        raise ValueError("plan_bins requires at least one value")
    if distinct_count is None:
        distinct_count = len(set(values))
    b = bin_count_for(distinct_count)
    lo, hi = min(values), max(values)
    if lo == hi:
        return BinPlan(column, (lo - 0.5, hi + 0.5), 1)
    edges = [lo + i * (hi - lo) / b for i in range(b + 1)]
    edges[-1] = hi
    if any(x >= y for x, y in zip(edges, edges[1:])):
        # range too narrow for this many distinct floats
        return BinPlan(column, (lo, hi), 1)
    return BinPlan(column, tuple(edges), b)


# ---------------------------------------------------------------------------
# keyword extraction

def word_tokens(text: str, stopwords: frozenset[str] = STOPWORDS) -> list[str]:
    """Lowercased alphanumeric words, stopwords and short tokens removed."""
    return [
        w for w in _WORD_SPLIT.split(text.lower())
        if len(w) >= _MIN_WORD_LEN and w not in stopwords
    ]


def default_keyword_extract(
    text: str, corpus_stats: "TermStats | None", m: int,
    stopwords: frozenset[str] = STOPWORDS,
) -> list[str]:
    """Deterministic TF-IDF stand-in for a topic model.

    Candidate words are ranked by (frequency in this text) * log(N / df),
    df taken from the column's corpus stats; ties break lexicographically.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    counts: dict[str, int] = {}
    for w in word_tokens(text, stopwords):
        counts[w] = counts.get(w, 0) + 1
    if not counts:
        return []

    def idf(word: str) -> float:
        if corpus_stats is None or corpus_stats.doc_count == 0:
            return 1.0  # no corpus: fall back to plain TF ranking
        df = max(1, corpus_stats.doc_freq.get(word, 1))
        return math.log(corpus_stats.doc_count / df)

    ranked = sorted(counts, key=lambda w: (-counts[w] * idf(w), w))
    return ranked[:m]


# ---------------------------------------------------------------------------
# value tokenization

def tokenize_value(
    table: str,
    column: ColumnSpec,
    v,
    plan: BinPlan | None = None,
    kx: KeywordExtractor = default_keyword_extract,
    corpus_stats: "TermStats | None" = None,
    m: int = DEFAULT_KEYWORDS_PER_TEXT,
) -> list[Term]:
    """Terms for one attribute value. Nulls, keys, and timestamps yield none."""
    if v is None:
        return []
    kind = column.kind
    if kind is Kind.CATEGORICAL:
        return [make_term(table, column.name, v)]
    if kind is Kind.NUMERIC:
        if plan is None:
            raise ValueError(f"numeric column {table}.{column.name} needs a BinPlan")
        return [make_term(table, column.name, f"bin{plan.bin_index(v)}")]
    if kind is Kind.TEXT:
        return [make_term(table, column.name, w) for w in kx(v, corpus_stats, m)]
    return []  # pk, fk, timestamp


# ---------------------------------------------------------------------------
# per-database tokenizer bundle

class TokenizerBundle:
    """Precomputed binning plans and text-column stats for one database.

    Build once, then tokenize any tuple; per-tuple term lists are cached so
    repeated document construction does not re-tokenize.
    """

    def __init__(
        self,
        db: Database,
        keywords_per_text: int = DEFAULT_KEYWORDS_PER_TEXT,
        stopwords: frozenset[str] = STOPWORDS,
        keyword_extractor: KeywordExtractor | None = None,
    ):
        from .index import TermStats  # deferred: index builds on tokens

        self.db = db
        self.keywords_per_text = keywords_per_text
        self.stopwords = stopwords
        self._kx = keyword_extractor
        self.bin_plans: dict[str, BinPlan] = {}
        self.text_stats: dict[str, TermStats] = {}
        self._cache: dict[tuple[str, int], tuple[Term, ...]] = {}

        for name in db.table_names():
            table = db.tables[name]
            for col in table.columns:
                qual = f"{name}.{col.name}"
                i = table.column_index(col.name)
                if col.kind is Kind.NUMERIC:
                    values = [r.values[i] for r in table.rows if r.values[i] is not None]
                    if values:
                        self.bin_plans[qual] = plan_bins(values, column=qual)
                elif col.kind is Kind.TEXT:
                    texts = [r.values[i] for r in table.rows if r.values[i] is not None]
                    doc_freq: dict[str, int] = {}
                    lengths = 0
                    for text in texts:
                        words = set(word_tokens(text, stopwords))
                        lengths += len(words)
                        for w in words:
                            doc_freq[w] = doc_freq.get(w, 0) + 1
                    self.text_stats[qual] = TermStats(
                        doc_count=len(texts),
                        doc_freq=doc_freq,
                        avgdl=lengths / len(texts) if texts else 0.0,
                    )

    def extract_keywords(self, qual: str, text: str) -> list[str]:
        stats = self.text_stats.get(qual)
        if self._kx is not None:
            return self._kx(text, stats, self.keywords_per_text)
        return default_keyword_extract(
            text, stats, self.keywords_per_text, self.stopwords
        )

    def tokenize_tuple(self, table_name: str, row_id: int) -> tuple[Term, ...]:
        key = (table_name, row_id)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        table: Table = self.db.table(table_name)
        row = table.row(row_id)
        terms: list[Term] = []
        for col, v in zip(table.columns, row.values):
            if v is None:
                continue
            qual = f"{table_name}.{col.name}"
            if col.kind is Kind.TEXT:
                terms.extend(
                    make_term(table_name, col.name, w)
                    for w in self.extract_keywords(qual, v)
                )
            else:
                terms.extend(
                    tokenize_value(table_name, col, v, self.bin_plans.get(qual))
                )
        out = tuple(terms)
        self._cache[key] = out
        return out

    def dump_bin_plans(self, path: str | Path) -> None:
        """Serialize all bin plans for reproducibility audits."""
        payload = [self.bin_plans[q].to_json() for q in sorted(self.bin_plans)]
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
