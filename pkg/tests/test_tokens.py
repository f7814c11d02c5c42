"""Binning rule, prefixed terms, and keyword extraction."""

from __future__ import annotations

import random

import pytest

from relaug.schema import ColumnSpec, Kind
from relaug.stopwords import STOPWORDS
from relaug.tokens import (
    BinPlan,
    TokenizerBundle,
    bin_count_for,
    default_keyword_extract,
    make_term,
    plan_bins,
    split_term,
    tokenize_value,
    word_tokens,
)

from helpers import make_db


class TestBinCount:
    def test_power_of_two_small_branch(self):
        assert bin_count_for(512) == 10

    def test_exact_cube_large_branch(self):
        assert bin_count_for(8000) == 40

    def test_branch_boundary_at_1000(self):
        # 1000 is not < 1000, so the cube-root rule applies: 2 * 10 = 20
        assert bin_count_for(1000) == 20

    def test_n_one(self):
        assert bin_count_for(1) == 1

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            bin_count_for(0)

    def test_law_on_random_n(self):
        # independent characterization: smallest b with 2**(b-1) >= n,
        # respectively smallest b with b**3 >= 8n
        rng = random.Random(7)
        for _ in range(500):
            n = rng.randrange(1, 200_000)
            b = bin_count_for(n)
            if n < 1000:
                assert 2 ** (b - 1) >= n and (b == 1 or 2 ** (b - 2) < n)
            else:
                assert b**3 >= 8 * n and (b - 1) ** 3 < 8 * n


class TestBinPlan:
    def test_edges_equidistant(self):
        plan = plan_bins([0.0, 10.0], column="T.x")
        assert plan.bin_count == 2
        assert plan.edges == (0.0, 5.0, 10.0)

    def test_degenerate_constant_column(self):
        plan = plan_bins([3.0, 3.0, 3.0])
        assert plan.bin_count == 1
        assert plan.edges[0] < 3.0 < plan.edges[1]
        assert plan.bin_index(3.0) == 0

    def test_clamping(self):
        plan = plan_bins([0.0, 10.0])
        assert plan.bin_index(-100.0) == 0
        assert plan.bin_index(+100.0) == plan.bin_count - 1
        assert plan.bin_index(10.0) == plan.bin_count - 1

    def test_monotone(self):
        rng = random.Random(3)
        values = [rng.uniform(-50, 50) for _ in range(200)]
        plan = plan_bins(values)
        probes = sorted(rng.uniform(-60, 60) for _ in range(300))
        indices = [plan.bin_index(v) for v in probes]
        assert indices == sorted(indices)

    def test_json_round_trip(self):
        plan = plan_bins([1.0, 2.0, 5.0], column="T.amt")
        again = BinPlan.from_json(plan.to_json())
        assert again == plan


class TestTerms:
    def test_categorical_term(self):
        col = ColumnSpec("status", Kind.CATEGORICAL)
        assert tokenize_value("USER", col, "active") == ["USER.status=active"]

    def test_same_value_different_tables_distinct(self):
        col = ColumnSpec("status", Kind.CATEGORICAL)
        a = tokenize_value("USER", col, "active")
        b = tokenize_value("BIZ", col, "active")
        assert a != b and a[0] != b[0]

    def test_null_yields_nothing(self):
        col = ColumnSpec("amt", Kind.NUMERIC)
        assert tokenize_value("X", col, None) == []

    def test_keys_and_timestamps_yield_nothing(self):
        for kind in (Kind.PRIMARY_KEY, Kind.TIMESTAMP):
            col = ColumnSpec("c", kind)
            assert tokenize_value("X", col, "v" if kind is Kind.PRIMARY_KEY else 5) == []
        fk = ColumnSpec("c", Kind.FOREIGN_KEY, target_table="T", target_column="id")
        assert tokenize_value("X", fk, "v") == []

    def test_numeric_needs_plan(self):
        col = ColumnSpec("amt", Kind.NUMERIC)
        with pytest.raises(ValueError):
            tokenize_value("X", col, 1.0)
        plan = plan_bins([0.0, 10.0], column="X.amt")
        assert tokenize_value("X", col, 0.1, plan) == ["X.amt=bin0"]

    def test_split_round_trip(self):
        term = make_term("T", "c", "a=b.c")
        assert split_term(term) == ("T", "c", "a=b.c")

    def test_pure_function(self):
        col = ColumnSpec("status", Kind.CATEGORICAL)
        runs = {tuple(tokenize_value("USER", col, "active")) for _ in range(50)}
        assert len(runs) == 1


class TestKeywordExtract:
    def test_stopword_only_text(self):
        assert default_keyword_extract("the and of to", None, 3) == []

    def test_tf_breaks_equal_rarity(self):
        from relaug.index import TermStats

        stats = TermStats(doc_count=4, doc_freq={"hoppy": 2, "lager": 2}, avgdl=2.0)
        got = default_keyword_extract("hoppy hoppy lager", stats, 1)
        assert got == ["hoppy"]

    def test_m_larger_than_candidates(self):
        got = default_keyword_extract("amber citrus", None, 10)
        assert sorted(got) == ["amber", "citrus"]

    def test_rarity_outranks_frequency(self):
        from relaug.index import TermStats

        # "common" is in every doc (idf 0), "rare" in one of ten
        stats = TermStats(doc_count=10, doc_freq={"common": 10, "rare": 1}, avgdl=3.0)
        got = default_keyword_extract("common common common rare", stats, 1)
        assert got == ["rare"]

    def test_short_tokens_dropped(self):
        assert word_tokens("go at it ox segment") == ["segment"]

    def test_outputs_lowercase_from_text(self):
        got = default_keyword_extract("Stout STOUT Porter", None, 2)
        assert got == ["stout", "porter"]
        assert all(w not in STOPWORDS for w in got)


class TestBundle:
    def test_bundle_tokenizes_rows(self, tmp_path):
        manifest = {
            "tables": [
                {
                    "name": "BEER",
                    "columns": [
                        {"name": "id", "kind": "pk"},
                        {"name": "style", "kind": "categorical"},
                        {"name": "abv", "kind": "numeric"},
                        {"name": "notes", "kind": "text"},
                        {"name": "created", "kind": "timestamp"},
                    ],
                    "csv": "beer.csv",
                }
            ]
        }
        db = make_db(
            tmp_path,
            manifest,
            {
                "beer.csv": (
                    "id,style,abv,notes,created\n"
                    "b1,ipa,6.5,piney hop bomb,100\n"
                    "b2,stout,9.0,roasted coffee notes,200\n"
                    "b3,ipa,,“citrus hops”,300\n"
                )
            },
        )
        bundle = TokenizerBundle(db)
        terms = bundle.tokenize_tuple("BEER", 0)
        assert "BEER.style=ipa" in terms
        assert any(t.startswith("BEER.abv=bin") for t in terms)
        assert any(t.startswith("BEER.notes=") for t in terms)
        assert not any("created" in t or "id" in t.split("=")[0] for t in terms)
        # null numeric: no abv term for row 2
        assert not any(t.startswith("BEER.abv=") for t in bundle.tokenize_tuple("BEER", 2))

    def test_bundle_cache_is_stable(self, tmp_path):
        manifest = {
            "tables": [
                {
                    "name": "T",
                    "columns": [
                        {"name": "id", "kind": "pk"},
                        {"name": "c", "kind": "categorical"},
                    ],
                    "csv": "t.csv",
                }
            ]
        }
        db = make_db(tmp_path, manifest, {"t.csv": "id,c\nx,alpha\n"})
        bundle = TokenizerBundle(db)
        assert bundle.tokenize_tuple("T", 0) is bundle.tokenize_tuple("T", 0)
