"""Shared construction helpers for the test suite."""

from __future__ import annotations

import json

from relaug.graph import build_graph
from relaug.schema import ingest


def make_db(tmp_path, manifest, csvs):
    (tmp_path / "manifest.json").write_text(json.dumps(manifest), encoding="utf-8")
    for name, content in csvs.items():
        (tmp_path / name).write_text(content, encoding="utf-8")
    return ingest(tmp_path / "manifest.json", tmp_path)


def linked_table_manifest():
    """Single table N with an optional link to another row of N."""
    return {
        "tables": [
            {
                "name": "N",
                "columns": [
                    {"name": "id", "kind": "pk"},
                    {"name": "prev", "kind": "fk:N.id"},
                    {"name": "lab", "kind": "categorical"},
                ],
                "csv": "n.csv",
            }
        ]
    }


def path_db(tmp_path, n):
    """Database whose graph is a path of n nodes: 0 - 1 - ... - n-1."""
    rows = ["id,prev,lab"]
    for i in range(n):
        prev = f"v{i - 1}" if i > 0 else ""
        rows.append(f"v{i},{prev},L{i}")
    return make_db(tmp_path, linked_table_manifest(), {"n.csv": "\n".join(rows) + "\n"})


def star_db(tmp_path, leaves):
    """Database whose graph is a star: node 0 is the hub."""
    rows = ["id,prev,lab", "v0,,HUB"]
    for i in range(1, leaves + 1):
        rows.append(f"v{i},v0,L{i}")
    return make_db(tmp_path, linked_table_manifest(), {"n.csv": "\n".join(rows) + "\n"})


def path_graph(tmp_path, n):
    return build_graph(path_db(tmp_path, n))
