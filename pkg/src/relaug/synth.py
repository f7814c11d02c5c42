"""Parameterized synthetic databases for tests and experiments.

Two generators:

* :func:`write_cohort_db` — a customer/product/transaction schema with
  planted cohorts. Rows of a cohort share signature categoricals, themed
  description words, and a numeric band; transactions mostly link matching
  cohorts, so cross-table semantic affinity flows through the graph. Labels
  (with a temporal split) are derived from the cohort, not stored as a
  column, and written to labels.csv alongside the CSVs.

* :func:`write_random_tree_db` — random tree-shaped schemas of small tables
  for structural property tests; guarantees table pairs at schema distance
  greater than one once there are three or more tables.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from random import Random

THEMES = [
    ["vegan", "bakery", "brunch", "sourdough", "pastry", "espresso"],
    ["vinyl", "turntable", "jazz", "analog", "records", "acoustic"],
    ["trail", "climbing", "outdoor", "alpine", "camping", "summit"],
    ["arcade", "pixel", "retro", "console", "joystick", "speedrun"],
    ["garden", "succulent", "botanical", "orchid", "compost", "greenhouse"],
    ["cycling", "gravel", "peloton", "derailleur", "commuter", "saddle"],
    ["pottery", "ceramic", "kiln", "glaze", "wheel", "stoneware"],
    ["astronomy", "telescope", "nebula", "stargazing", "eclipse", "orbit"],
]

@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_cust: int = 80
    n_prod: int = 80
    n_txn: int = 200
    n_cohorts: int = 4
    signature_noise: float = 0.02  # chance a signature column deviates
    cross_affinity: float = 0.98   # chance a transaction stays in-cohort
    label_noise: float = 0.1


def _bio(rng: Random, cohort: int) -> str:
    words = rng.sample(THEMES[cohort % len(THEMES)], 4)
    return " ".join(words)


def write_cohort_db(out_dir: str | Path, cfg: SynthConfig = SynthConfig()) -> Path:
    """Write manifest + CSVs + labels.csv; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = Random(cfg.seed)
    k = cfg.n_cohorts

    def signature(cohort: int, prefix: str, cardinality: int) -> str:
        if rng.random() < cfg.signature_noise:
            return f"{prefix}{rng.randrange(cardinality)}"
        return f"{prefix}{cohort}"

    cust_rows = []
    cust_cohort = []
    for i in range(cfg.n_cust):
        c = i % k
        cust_cohort.append(c)
        spend = 100.0 * (c + 1) + rng.uniform(-20.0, 20.0)
        cust_rows.append(
            [f"c{i}", signature(c, "tier", k), signature(c, "region", k),
             f"{spend:.2f}", _bio(rng, c), str(1000 + i)]
        )

    prod_rows = []
    prod_cohort = []
    for i in range(cfg.n_prod):
        c = i % k
        prod_cohort.append(c)
        price = 10.0 * (c + 1) + rng.uniform(-2.0, 2.0)
        prod_rows.append(
            [f"p{i}", signature(c, "kind", k), f"{price:.2f}",
             _bio(rng, c), str(2000 + i)]
        )

    by_cohort_prod: dict[int, list[int]] = {}
    for i, c in enumerate(prod_cohort):
        by_cohort_prod.setdefault(c, []).append(i)

    txn_rows = []
    for i in range(cfg.n_txn):
        ci = rng.randrange(cfg.n_cust)
        c = cust_cohort[ci]
        if rng.random() < cfg.cross_affinity and by_cohort_prod.get(c):
            pi = rng.choice(by_cohort_prod[c])
        else:
            pi = rng.randrange(cfg.n_prod)
        # amounts band with the customer's cohort, like spend and price
        amount = 20.0 * (c + 1) + rng.uniform(-4.0, 4.0)
        txn_rows.append([f"c{ci}", f"p{pi}", f"{amount:.2f}", str(3000 + i)])

    manifest = {
        "tables": [
            {
                "name": "CUST",
                "columns": [
                    {"name": "id", "kind": "pk"},
                    {"name": "tier", "kind": "categorical"},
                    {"name": "region", "kind": "categorical"},
                    {"name": "spend", "kind": "numeric"},
                    {"name": "bio", "kind": "text"},
                    {"name": "joined", "kind": "timestamp"},
                ],
                "csv": "cust.csv",
            },
            {
                "name": "PROD",
                "columns": [
                    {"name": "id", "kind": "pk"},
                    {"name": "kind", "kind": "categorical"},
                    {"name": "price", "kind": "numeric"},
                    {"name": "descr", "kind": "text"},
                    {"name": "added", "kind": "timestamp"},
                ],
                "csv": "prod.csv",
            },
            {
                "name": "TXN",
                "columns": [
                    {"name": "cust_id", "kind": "fk:CUST.id"},
                    {"name": "prod_id", "kind": "fk:PROD.id"},
                    {"name": "amount", "kind": "numeric"},
                    {"name": "at", "kind": "timestamp"},
                ],
                "csv": "txn.csv",
            },
        ]
    }

    def dump(name: str, header: list[str], rows: list[list[str]]) -> None:
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    dump("cust.csv", ["id", "tier", "region", "spend", "bio", "joined"], cust_rows)
    dump("prod.csv", ["id", "kind", "price", "descr", "added"], prod_rows)
    dump("txn.csv", ["cust_id", "prod_id", "amount", "at"], txn_rows)

    # labels: cohort parity with noise, temporal split on the joined column
    n = cfg.n_cust
    train_end, valid_end = int(n * 0.7), int(n * 0.85)
    label_rows = []
    for i, c in enumerate(cust_cohort):
        label = (c % 2) ^ (1 if rng.random() < cfg.label_noise else 0)
        split = "train" if i < train_end else ("valid" if i < valid_end else "test")
        label_rows.append(["CUST", str(i), str(label), split])
    dump("labels.csv", ["table", "row_id", "label", "split"], label_rows)

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


def write_random_tree_db(
    out_dir: str | Path,
    seed: int = 0,
    min_tables: int = 2,
    max_tables: int = 5,
    max_rows: int = 50,
    null_fk_rate: float = 0.15,
) -> Path:
    """Random tree schema T0..Tk, each later table keyed to an earlier one.

    Any tree of three or more tables contains a table pair at schema
    distance greater than one.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = Random(seed)
    n_tables = rng.randint(min_tables, max_tables)
    parents = [None] + [rng.randrange(i) for i in range(1, n_tables)]
    row_counts = [rng.randint(1, max_rows) for _ in range(n_tables)]

    entries = []
    for t in range(n_tables):
        columns = [
            {"name": "id", "kind": "pk"},
            {"name": "lab", "kind": "categorical"},
        ]
        if parents[t] is not None:
            columns.insert(1, {"name": "parent", "kind": f"fk:T{parents[t]}.id"})
        entries.append({"name": f"T{t}", "columns": columns, "csv": f"t{t}.csv"})

        with open(out_dir / f"t{t}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([c["name"] for c in columns])
            for r in range(row_counts[t]):
                row = [f"T{t}r{r}"]
                if parents[t] is not None:
                    if rng.random() < null_fk_rate:
                        row.append("")
                    else:
                        row.append(f"T{parents[t]}r{rng.randrange(row_counts[parents[t]])}")
                row.append(f"L{rng.randrange(6)}")
                w.writerow(row)

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps({"tables": entries}, indent=2) + "\n", encoding="utf-8"
    )
    return manifest_path
