"""Heterogeneous tuple graph: typed nodes per table, typed edges per constraint.

Every edge is stored as a directed arc. Schema edge types (one per FK column)
are materialized in both directions at build time; augmented edge types keep
whatever direction they were added with. Graph values are immutable:
:func:`add_edges` returns a new graph sharing node storage with the old one.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ConstraintError, NotFoundError
from .schema import Database

#: distinguished schema_distance result for disconnected table pairs
UNREACHABLE = math.inf

#: relation selector meaning "all edge types"
ALL = "all"


@dataclass(frozen=True, order=True)
class NodeRef:
    table: str
    row_id: int


@dataclass(frozen=True, order=True)
class EdgeType:
    """Schema types are named by their FK column; augmented by a table pair."""

    kind: str  # "schema" | "augmented"
    a: str
    b: str

    @classmethod
    def schema(cls, table: str, fk_column: str) -> "EdgeType":
        return cls("schema", table, fk_column)

    @classmethod
    def augmented(cls, src_table: str, dst_table: str) -> "EdgeType":
        return cls("augmented", src_table, dst_table)

    @property
    def name(self) -> str:
        if self.kind == "schema":
            return f"fk__{self.a}__{self.b}"
        return f"aug__{self.a}__{self.b}"

    @classmethod
    def from_name(cls, name: str) -> "EdgeType":
        prefix, _, rest = name.partition("__")
        a, _, b = rest.partition("__")
        if prefix == "fk" and a and b:
            return cls.schema(a, b)
        if prefix == "aug" and a and b:
            return cls.augmented(a, b)
        raise NotFoundError(f"cannot parse edge type name {name!r}")


class HeteroGraph:
    """Immutable typed graph over the tuples of a database."""

    def __init__(
        self,
        node_ids: dict[str, tuple[int, ...]],
        edges: dict[EdgeType, tuple[tuple[int, ...], ...]],
        table_adjacency: dict[str, frozenset[str]],
    ):
        self.node_ids = node_ids
        self.node_types = sorted(node_ids)
        self.table_adjacency = table_adjacency

        self._offset: dict[str, int] = {}
        self._local: dict[str, dict[int, int]] = {}
        gid_table: list[str] = []
        gid_row: list[int] = []
        base = 0
        for table in self.node_types:
            rows = node_ids[table]
            self._offset[table] = base
            self._local[table] = {rid: i for i, rid in enumerate(rows)}
            gid_table.extend([table] * len(rows))
            gid_row.extend(rows)
            base += len(rows)
        self.n_nodes = base
        self._gid_table = gid_table
        self._gid_row = gid_row

        self.edges = edges
        self._all_adj: list[tuple[int, ...]] | None = None
        self._undirected_adj: list[tuple[int, ...]] | None = None

    # -- node addressing ---------------------------------------------------

    def to_gid(self, ref: NodeRef) -> int:
        local = self._local.get(ref.table)
        if local is None:
            raise NotFoundError(f"unknown table {ref.table!r}")
        idx = local.get(ref.row_id)
        if idx is None:
            raise NotFoundError(f"no node {ref.table}/{ref.row_id}")
        return self._offset[ref.table] + idx

    def from_gid(self, gid: int) -> NodeRef:
        return NodeRef(self._gid_table[gid], self._gid_row[gid])

    def node_refs(self) -> list[NodeRef]:
        """All nodes in canonical (table, row_id) order."""
        return [NodeRef(t, r) for t, r in zip(self._gid_table, self._gid_row)]

    def has_node(self, ref: NodeRef) -> bool:
        local = self._local.get(ref.table)
        return local is not None and ref.row_id in local

    # -- adjacency views -----------------------------------------------------

    def edge_types(self) -> list[EdgeType]:
        return sorted(self.edges)

    def out_neighbors(self, gid: int, edge_type: EdgeType) -> tuple[int, ...]:
        adj = self.edges.get(edge_type)
        return adj[gid] if adj is not None else ()

    def all_out_neighbors(self, gid: int) -> tuple[int, ...]:
        """Concatenated out-neighbors across edge types (multigraph view)."""
        if self._all_adj is None:
            merged: list[list[int]] = [[] for _ in range(self.n_nodes)]
            for et in self.edge_types():
                for src, nbrs in enumerate(self.edges[et]):
                    if nbrs:
                        merged[src].extend(nbrs)
            self._all_adj = [tuple(n) for n in merged]
        return self._all_adj[gid]

    def undirected_neighbors(self, gid: int) -> tuple[int, ...]:
        """Simple-graph neighbors: union of arcs in either direction."""
        if self._undirected_adj is None:
            merged: list[set[int]] = [set() for _ in range(self.n_nodes)]
            for adj in self.edges.values():
                for src, nbrs in enumerate(adj):
                    for dst in nbrs:
                        merged[src].add(dst)
                        merged[dst].add(src)
            self._undirected_adj = [tuple(sorted(n)) for n in merged]
        return self._undirected_adj[gid]

    def undirected_edge_count(self) -> int:
        """Distinct unordered node pairs connected by at least one arc."""
        return sum(len(self.undirected_neighbors(g)) for g in range(self.n_nodes)) // 2

    def schema_edge_count(self) -> int:
        """Undirected schema edges; equals the number of non-null FK cells."""
        total = 0
        for et, adj in self.edges.items():
            if et.kind == "schema":
                total += sum(len(nbrs) for nbrs in adj) // 2
        return total

    def arcs(self, edge_type: EdgeType) -> list[tuple[NodeRef, NodeRef]]:
        adj = self.edges.get(edge_type)
        if adj is None:
            return []
        out = []
        for src, nbrs in enumerate(adj):
            for dst in nbrs:
                out.append((self.from_gid(src), self.from_gid(dst)))
        return out


# ---------------------------------------------------------------------------


def build_graph(db: Database) -> HeteroGraph:
    """One node per tuple; one bidirectional schema edge per non-null FK cell.

    Self-referencing FK cells (a row pointing at itself) are dropped.
    """
    node_ids = {
        name: tuple(r.row_id for r in table.rows) for name, table in db.tables.items()
    }
    table_adj: dict[str, set[str]] = {name: set() for name in db.tables}

    # temporary graph for gid addressing
    g = HeteroGraph(node_ids, {}, {})

    edges: dict[EdgeType, tuple[tuple[int, ...], ...]] = {}
    for name in sorted(db.tables):
        table = db.tables[name]
        for fk in table.fk_columns:
            et = EdgeType.schema(name, fk.name)
            target = db.table(fk.target_table)
            pk_to_row = target.pk_index()
            i = table.column_index(fk.name)
            adj: list[set[int]] = [set() for _ in range(g.n_nodes)]
            for row in table.rows:
                v = row.values[i]
                if v is None:
                    continue
                src = g.to_gid(NodeRef(name, row.row_id))
                dst = g.to_gid(NodeRef(fk.target_table, pk_to_row[v]))
                if src == dst:
                    continue  # self-loop: pathological self-reference
                adj[src].add(dst)
                adj[dst].add(src)
            edges[et] = tuple(tuple(sorted(s)) for s in adj)
            if fk.target_table != name:
                table_adj[name].add(fk.target_table)
                table_adj[fk.target_table].add(name)

    frozen_adj = {t: frozenset(n) for t, n in table_adj.items()}
    return HeteroGraph(node_ids, edges, frozen_adj)


def schema_distance(g: HeteroGraph, table_a: str, table_b: str) -> float:
    """Shortest path length in the table-level schema graph.

    Augmented edges never count. Returns UNREACHABLE (inf) for disconnected
    pairs, so ``schema_distance(...) > 1`` holds for them.
    """
    for t in (table_a, table_b):
        if t not in g.table_adjacency:
            raise NotFoundError(f"unknown table {t!r}")
    if table_a == table_b:
        return 0
    dist = {table_a: 0}
    frontier = [table_a]
    while frontier:
        nxt = []
        for t in frontier:
            for u in g.table_adjacency[t]:
                if u not in dist:
                    dist[u] = dist[t] + 1
                    if u == table_b:
                        return dist[u]
                    nxt.append(u)
        frontier = nxt
    return UNREACHABLE


def add_edges(
    g: HeteroGraph,
    edge_type: EdgeType,
    new_edges: list[tuple[NodeRef, NodeRef]],
) -> HeteroGraph:
    """Return a graph with the given augmented arcs merged in.

    Arcs keep the direction given. Duplicates (within the edge type) are
    silently dropped; the node set is never altered.
    """
    if edge_type.kind != "augmented":
        raise ConstraintError("only augmented edge types can be added")
    if schema_distance(g, edge_type.a, edge_type.b) <= 1:
        raise ConstraintError(
            f"tables {edge_type.a!r} and {edge_type.b!r} are directly connected "
            "in the schema; augmented edges require schema distance > 1"
        )

    existing = g.edges.get(edge_type)
    adj: list[set[int]] = [
        set(existing[i]) if existing is not None else set() for i in range(g.n_nodes)
    ]
    changed = False
    for src, dst in new_edges:
        if src.table != edge_type.a or dst.table != edge_type.b:
            raise ConstraintError(
                f"edge {src} -> {dst} does not match edge type "
                f"{edge_type.a} -> {edge_type.b}"
            )
        s, d = g.to_gid(src), g.to_gid(dst)
        if d not in adj[s]:
            adj[s].add(d)
            changed = True
    if not changed:
        return g

    edges = dict(g.edges)
    edges[edge_type] = tuple(tuple(sorted(s)) for s in adj)
    return HeteroGraph(g.node_ids, edges, g.table_adjacency)


def neighbors(
    g: HeteroGraph,
    v: NodeRef,
    relation: EdgeType | str = ALL,
    max_neighbors: int = 10,
    rng_seed: int = 0,
) -> list[NodeRef]:
    """Uniform sample (without replacement) of v's out-neighbors.

    Returns every neighbor when there are at most ``max_neighbors``; the
    sample is deterministic for a fixed seed.
    """
    gid = g.to_gid(v)
    if relation == ALL:
        nbrs = g.all_out_neighbors(gid)
    else:
        nbrs = g.out_neighbors(gid, relation)
    if len(nbrs) <= max_neighbors:
        picked = list(nbrs)
    else:
        picked = random.Random(rng_seed).sample(list(nbrs), max_neighbors)
    return [g.from_gid(n) for n in picked]


# ---------------------------------------------------------------------------
# export

def export_graph(g: HeteroGraph, out_dir: str | Path) -> list[Path]:
    """Write nodes.tsv plus one edges_<type>.tsv per edge type.

    Rows are ordered by (table, row_id) then destination, so repeated runs
    produce identical bytes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    nodes_path = out_dir / "nodes.tsv"
    with open(nodes_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("table\trow_id\n")
        for ref in g.node_refs():
            fh.write(f"{ref.table}\t{ref.row_id}\n")
    written.append(nodes_path)

    for et in g.edge_types():
        path = out_dir / f"edges_{et.name}.tsv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("src_table\tsrc_id\tdst_table\tdst_id\n")
            rows = [
                (a.table, a.row_id, b.table, b.row_id) for a, b in g.arcs(et)
            ]
            for row in sorted(rows):
                fh.write("\t".join(str(x) for x in row) + "\n")
        written.append(path)
    return written
