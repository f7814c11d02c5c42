"""Inverted index, BM25 scoring, retrieval, normalization, disk snapshot."""

from __future__ import annotations

import random

import pytest

from relaug.documents import TupleDocument
from relaug.errors import EmptyIndexError, NormalizationError, NotFoundError
from relaug.graph import NodeRef
from relaug.index import (
    ENTITY,
    RELATIONSHIP,
    bm25_score,
    build_index,
    classify_tables,
    normalize_by_self,
    read_index,
    retrieve,
    write_index,
)

from helpers import make_db
from oracles import bm25_brute_force


def doc(table, row_id, **counts):
    return TupleDocument.from_counts(NodeRef(table, row_id), dict(counts))


def random_corpus(rng, table="T", max_docs=50, max_terms=30):
    vocab = [f"{table}.c=t{i}" for i in range(rng.randint(1, max_terms))]
    docs = []
    for rid in range(rng.randint(1, max_docs)):
        n_terms = rng.randint(1, len(vocab))
        counts = {t: rng.randint(1, 6) for t in rng.sample(vocab, n_terms)}
        docs.append(doc(table, rid, **counts))
    return docs


class TestClassify:
    def test_heuristic(self, tmp_path):
        manifest = {
            "tables": [
                {
                    "name": "USER",
                    "columns": [
                        {"name": "id", "kind": "pk"},
                        {"name": "a", "kind": "categorical"},
                        {"name": "b", "kind": "categorical"},
                        {"name": "c", "kind": "categorical"},
                        {"name": "d", "kind": "numeric"},
                        {"name": "e", "kind": "text"},
                    ],
                    "csv": "user.csv",
                },
                {
                    "name": "BIZ",
                    "columns": [{"name": "id", "kind": "pk"}],
                    "csv": "biz.csv",
                },
                {
                    "name": "RATE",
                    "columns": [
                        {"name": "user_id", "kind": "fk:USER.id"},
                        {"name": "biz_id", "kind": "fk:BIZ.id"},
                        {"name": "stars", "kind": "numeric"},
                    ],
                    "csv": "rate.csv",
                },
            ]
        }
        db = make_db(
            tmp_path,
            manifest,
            {
                "user.csv": "id,a,b,c,d,e\n",
                "biz.csv": "id\n",
                "rate.csv": "user_id,biz_id,stars\n",
            },
        )
        got = classify_tables(db)
        assert got == {"USER": ENTITY, "BIZ": ENTITY, "RATE": RELATIONSHIP}

    def test_referenced_table_is_entity(self, tmp_path):
        # two FKs and few attributes, but referenced by another table
        manifest = {
            "tables": [
                {"name": "A", "columns": [{"name": "id", "kind": "pk"}], "csv": "a.csv"},
                {
                    "name": "LINK",
                    "columns": [
                        {"name": "id", "kind": "pk"},
                        {"name": "a1", "kind": "fk:A.id"},
                        {"name": "a2", "kind": "fk:A.id"},
                    ],
                    "csv": "l.csv",
                },
                {
                    "name": "NOTE",
                    "columns": [{"name": "link_id", "kind": "fk:LINK.id"}],
                    "csv": "n.csv",
                },
            ]
        }
        db = make_db(
            tmp_path,
            manifest,
            {"a.csv": "id\n", "l.csv": "id,a1,a2\n", "n.csv": "link_id\n"},
        )
        assert classify_tables(db)["LINK"] == ENTITY

    def test_manifest_override_wins(self, tmp_path):
        manifest = {
            "tables": [
                {"name": "A", "columns": [{"name": "id", "kind": "pk"}], "csv": "a.csv"},
                {"name": "B", "columns": [{"name": "id", "kind": "pk"}], "csv": "b.csv",
                 "classification": "relationship"},
                {
                    "name": "RATE",
                    "columns": [
                        {"name": "x", "kind": "fk:A.id"},
                        {"name": "y", "kind": "fk:B.id"},
                    ],
                    "csv": "r.csv",
                    "classification": "entity",
                },
            ]
        }
        db = make_db(
            tmp_path, manifest, {"a.csv": "id\n", "b.csv": "id\n", "r.csv": "x,y\n"}
        )
        got = classify_tables(db)
        assert got["RATE"] == ENTITY
        assert got["B"] == RELATIONSHIP


class TestBuild:
    def test_single_doc_statistics(self):
        idx = build_index([doc("T", 0, **{"T.c=a": 2, "T.c=b": 1})])
        assert idx.stats.doc_count == 1
        assert idx.stats.avgdl == 3
        assert idx.stats.doc_freq == {"T.c=a": 1, "T.c=b": 1}

    def test_two_identical_docs(self):
        d0 = doc("T", 0, **{"T.c=a": 2, "T.c=b": 1})
        d1 = doc("T", 1, **{"T.c=a": 2, "T.c=b": 1})
        idx = build_index([d0, d1])
        assert idx.stats.doc_freq == {"T.c=a": 2, "T.c=b": 2}
        assert idx.stats.avgdl == 3

    def test_empty_rejected(self):
        with pytest.raises(EmptyIndexError):
            build_index([])

    def test_mixed_tables_rejected(self):
        with pytest.raises(ValueError):
            build_index([doc("A", 0, **{"A.c=x": 1}), doc("B", 0, **{"B.c=x": 1})])

    def test_postings_sorted_by_doc_id(self):
        docs = [doc("T", rid, **{"T.c=x": 1}) for rid in (4, 1, 3)]
        idx = build_index(docs)
        assert idx.postings["T.c=x"] == [(1, 1), (3, 1), (4, 1)]

    def test_param_validation(self):
        d = [doc("T", 0, **{"T.c=a": 1})]
        with pytest.raises(ValueError):
            build_index(d, k1=0.0)
        with pytest.raises(ValueError):
            build_index(d, b=1.5)


class TestScore:
    def test_no_shared_terms_scores_zero(self):
        idx = build_index([doc("T", 0, **{"T.c=a": 1})])
        q = doc("T", 99, **{"T.c=zzz": 3})
        assert bm25_score(idx, q, 0) == 0.0

    def test_unknown_doc(self):
        idx = build_index([doc("T", 0, **{"T.c=a": 1})])
        with pytest.raises(NotFoundError):
            bm25_score(idx, doc("T", 0, **{"T.c=a": 1}), 123)

    def test_b_zero_ignores_length(self):
        short = doc("T", 0, **{"T.c=a": 2})
        long = doc("T", 1, **{"T.c=a": 2, "T.c=pad": 40})
        idx = build_index([short, long], b=0.0)
        q = doc("T", 9, **{"T.c=a": 1})
        assert bm25_score(idx, q, 0) == bm25_score(idx, q, 1)

    def test_matches_brute_force_on_random_corpora(self):
        rng = random.Random(2024)
        for _ in range(60):
            docs = random_corpus(rng)
            k1 = rng.uniform(0.5, 2.0)
            b = rng.uniform(0.0, 1.0)
            idx = build_index(docs, k1=k1, b=b)
            corpus = {d.root.row_id: d.term_counts for d in docs}
            for _ in range(3):
                query = rng.choice(docs)
                target = rng.choice(docs)
                got = bm25_score(idx, query, target.root.row_id)
                want = bm25_brute_force(
                    corpus, list(query.term_counts), target.root.row_id, k1, b
                )
                assert abs(got - want) < 1e-9

    def test_adding_doc_keeps_tf_monotone_df(self):
        base = [doc("T", 0, **{"T.c=a": 2}), doc("T", 1, **{"T.c=b": 1})]
        grown = base + [doc("T", 2, **{"T.c=a": 5, "T.c=c": 1})]
        idx1, idx2 = build_index(base), build_index(grown)
        for term, rows in idx1.postings.items():
            assert [r for r in idx2.postings[term] if r[0] in {0, 1}] == rows
            assert idx2.stats.doc_freq[term] >= idx1.stats.doc_freq[term]


class TestRetrieve:
    def test_no_candidates(self):
        idx = build_index([doc("T", 0, **{"T.c=a": 1})])
        assert retrieve(idx, doc("T", 9, **{"T.c=q": 1}), 5) == []

    def test_top_k_exceeds_candidates(self):
        idx = build_index([doc("T", i, **{"T.c=a": 1}) for i in range(3)])
        hits = retrieve(idx, doc("T", 9, **{"T.c=a": 1}), 100)
        assert len(hits) == 3

    def test_tie_breaks_by_doc_id(self):
        idx = build_index([doc("T", 5, **{"T.c=a": 1}), doc("T", 2, **{"T.c=a": 1})])
        hits = retrieve(idx, doc("T", 9, **{"T.c=a": 1}), 2)
        assert [h.doc_id.row_id for h in hits] == [2, 5]
        assert hits[0].score == hits[1].score

    def test_scores_match_bm25_score(self):
        rng = random.Random(5)
        docs = random_corpus(rng, max_docs=20, max_terms=10)
        idx = build_index(docs)
        query = docs[0]
        for hit in retrieve(idx, query, 50):
            assert hit.score == bm25_score(idx, query, hit.doc_id.row_id)

    def test_ordering_stable_across_runs(self):
        rng = random.Random(6)
        docs = random_corpus(rng, max_docs=30, max_terms=8)
        idx = build_index(docs)
        q = docs[1]
        assert retrieve(idx, q, 10) == retrieve(idx, q, 10)


class TestNormalize:
    def test_self_hit_normalizes_to_one(self):
        docs = [doc("T", 0, **{"T.c=a": 2, "T.c=b": 1}), doc("T", 1, **{"T.c=a": 1})]
        idx = build_index(docs)
        hits = retrieve(idx, docs[0], 5)
        normed = normalize_by_self(idx, docs[0], hits)
        by_id = {h.doc_id.row_id: h for h in normed}
        assert by_id[0].normalized == 1.0

    def test_half_score_normalizes_to_half(self):
        docs = [doc("T", 0, **{"T.c=a": 1})]
        idx = build_index(docs)
        self_score = bm25_score(idx, docs[0], 0)
        from relaug.index import ScoredHit

        fake = [ScoredHit(NodeRef("T", 0), self_score / 2)]
        normed = normalize_by_self(idx, docs[0], fake)
        assert normed[0].normalized == pytest.approx(0.5)

    def test_zero_self_score_raises(self):
        idx = build_index([doc("T", 0, **{"T.c=a": 1}), doc("T", 1, **{"T.c=b": 1})])
        # query claims row 1 but shares no terms with it
        phantom = doc("T", 1, **{"T.c=zzz": 1})
        with pytest.raises(NormalizationError):
            normalize_by_self(idx, phantom, [])


class TestDiskSnapshot:
    def test_round_trip_scores_bit_for_bit(self, tmp_path):
        rng = random.Random(11)
        docs = random_corpus(rng, max_docs=40, max_terms=25)
        idx = build_index(docs, k1=1.37, b=0.61)
        write_index(idx, tmp_path / "index")
        again = read_index(tmp_path / "index" / "T")
        assert again.stats.doc_count == idx.stats.doc_count
        assert again.stats.avgdl == idx.stats.avgdl
        assert again.postings == idx.postings
        for d in docs[:10]:
            for target in docs[:10]:
                assert bm25_score(again, d, target.root.row_id) == bm25_score(
                    idx, d, target.root.row_id
                )

    def test_snapshot_bytes_deterministic(self, tmp_path):
        docs = [doc("T", i, **{"T.c=a": 1 + i % 3, "T.c=b": 1}) for i in range(7)]
        idx = build_index(docs)
        d1 = write_index(idx, tmp_path / "x")
        d2 = write_index(idx, tmp_path / "y")
        for name in ("terms.dict", "postings.bin", "meta.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
