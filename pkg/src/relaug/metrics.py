"""Interpretability metrics: graph profile, path distributions, cohort ratio.

Shortest-path and degree metrics are computed on the undirected simple view
of the graph (shortcut edges are directed for message passing, but topology
metrics are undirected notions). All means and standard deviations are
derived from exact integer sums, so independently computed references land
on bit-identical floats.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .augment import AtraPair
from .errors import NoDataError, NotFoundError
from .graph import HeteroGraph, NodeRef
from .schema import Database

EXACT_PATH_CUTOFF = 2000
DEFAULT_SAMPLE_SOURCES = 512


@dataclass(frozen=True)
class GraphProfile:
    connected_components: int
    avg_degree: float
    avg_shortest_path: float
    avg_clustering: float
    method_notes: tuple[tuple[str, str], ...]

    def to_json(self) -> dict:
        return {
            "connected_components": self.connected_components,
            "avg_degree": self.avg_degree,
            "avg_shortest_path": self.avg_shortest_path,
            "avg_clustering": self.avg_clustering,
            "method_notes": dict(self.method_notes),
        }


@dataclass(frozen=True)
class PathDistribution:
    src_table: str
    dst_table: str
    lengths: dict[int, int]
    mean: float
    std: float
    unreachable_count: int


@dataclass(frozen=True)
class CohortRule:
    """Tuples are cohort-mates when they agree (non-null) on these columns."""

    table: str
    columns: tuple[str, ...]


def _bfs_distances(g: HeteroGraph, source: int) -> list[int]:
    dist = [-1] * g.n_nodes
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u]
        for v in g.undirected_neighbors(u):
            if dist[v] < 0:
                dist[v] = du + 1
                queue.append(v)
    return dist


def _mean_std_from_moments(n: int, s1: int, s2: int) -> tuple[float, float]:
    mean = s1 / n
    var = s2 / n - mean * mean
    return mean, math.sqrt(max(var, 0.0))


def profile(
    g: HeteroGraph,
    undirected_view: bool = True,
    sample_sources: int = DEFAULT_SAMPLE_SOURCES,
    seed: int = 0,
) -> GraphProfile:
    """Connected components, mean degree, mean finite path length, clustering.

    Path lengths are exact all-pairs BFS up to EXACT_PATH_CUTOFF nodes, then
    BFS from a seeded sample of sources; method_notes records which. The
    clustering coefficient is 0 for nodes of degree < 2; unreachable pairs
    are excluded from the path average.
    """
    if g.n_nodes == 0:
        raise NoDataError("cannot profile an empty graph")

    # components (union of arcs, undirected semantics either way)
    parent = list(range(g.n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u in range(g.n_nodes):
        for v in g.undirected_neighbors(u):
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
    components = sum(1 for x in range(g.n_nodes) if find(x) == x)

    if undirected_view:
        avg_degree = 2 * g.undirected_edge_count() / g.n_nodes
    else:
        avg_degree = sum(
            len(g.all_out_neighbors(u)) for u in range(g.n_nodes)
        ) / g.n_nodes

    # clustering on the undirected simple view
    cc_values = []
    for u in range(g.n_nodes):
        nbrs = g.undirected_neighbors(u)
        deg = len(nbrs)
        if deg < 2:
            cc_values.append(0.0)
            continue
        nbr_set = set(nbrs)
        closed = sum(len(nbr_set.intersection(g.undirected_neighbors(v))) for v in nbrs)
        cc_values.append(closed / (deg * (deg - 1)))
    avg_clustering = sum(cc_values) / g.n_nodes

    # shortest paths
    if g.n_nodes <= EXACT_PATH_CUTOFF:
        sources = range(g.n_nodes)
        notes = (("paths", "exact"), ("view", "undirected" if undirected_view else "directed"))
    else:
        count = min(sample_sources, g.n_nodes)
        sources = sorted(Random(seed).sample(range(g.n_nodes), count))
        notes = (
            ("paths", f"sampled:{count}"),
            ("view", "undirected" if undirected_view else "directed"),
        )
    total = 0
    pairs = 0
    for s in sources:
        for d in _bfs_distances(g, s):
            if d > 0:
                total += d
                pairs += 1
    avg_path = total / pairs if pairs else 0.0
    return GraphProfile(components, avg_degree, avg_path, avg_clustering, notes)


def path_distribution(
    g: HeteroGraph,
    src_table: str,
    dst_table: str,
    sample_pairs: int = 1_000_000,
    seed: int = 0,
) -> PathDistribution:
    """Histogram of shortest-path lengths from src-table to dst-table nodes.

    All (src, dst) node pairs are measured while their count stays within
    sample_pairs; beyond that, BFS runs from a seeded sample of sources
    against every destination. The identical node counts as distance 0.
    """
    for t in (src_table, dst_table):
        if t not in g.node_ids:
            raise NotFoundError(f"unknown table {t!r}")
    srcs = [g.to_gid(NodeRef(src_table, r)) for r in g.node_ids[src_table]]
    dsts = [g.to_gid(NodeRef(dst_table, r)) for r in g.node_ids[dst_table]]
    if not srcs or not dsts:
        return PathDistribution(src_table, dst_table, {}, 0.0, 0.0, 0)

    if len(srcs) * len(dsts) > sample_pairs:
        n_src = max(1, sample_pairs // len(dsts))
        srcs = sorted(Random(seed).sample(srcs, min(n_src, len(srcs))))

    hist: dict[int, int] = {}
    unreachable = 0
    for s in srcs:
        dist = _bfs_distances(g, s)
        for d in dsts:
            length = dist[d]
            if length < 0:
                unreachable += 1
            else:
                hist[length] = hist.get(length, 0) + 1

    n = sum(hist.values())
    if n == 0:
        return PathDistribution(src_table, dst_table, {}, 0.0, 0.0, unreachable)
    s1 = sum(length * c for length, c in sorted(hist.items()))
    s2 = sum(length * length * c for length, c in sorted(hist.items()))
    mean, std = _mean_std_from_moments(n, s1, s2)
    return PathDistribution(src_table, dst_table, dict(sorted(hist.items())), mean, std, unreachable)


def cohort_ratio(pairs: list[AtraPair], db: Database, rule: CohortRule) -> float:
    """Fraction of pairs agreeing (non-null) on every rule column."""
    table = db.table(rule.table)
    for column in rule.columns:
        table.column_index(column)  # raises NotFoundError on bad rules
    if not pairs:
        raise NoDataError(f"no pairs to evaluate for table {rule.table!r}")
    hits = 0
    for p in pairs:
        if p.table != rule.table:
            raise ValueError(f"pair {p} does not belong to table {rule.table!r}")
        match = True
        for column in rule.columns:
            va = table.value(p.a.row_id, column)
            vb = table.value(p.b.row_id, column)
            if va is None or vb is None or va != vb:
                match = False
                break
        hits += match
    return hits / len(pairs)


# ---------------------------------------------------------------------------
# file interfaces

def load_cohort_rules(path: str | Path) -> list[CohortRule]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return [CohortRule(r["table"], tuple(r["columns"])) for r in obj["rules"]]


def write_metrics_json(profiles: dict[str, GraphProfile], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {name: prof.to_json() for name, prof in sorted(profiles.items())}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_path_distribution(dist: PathDistribution, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"path_dist_{dist.src_table}_{dist.dst_table}.csv"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("length,count\n")
        for length, count in sorted(dist.lengths.items()):
            fh.write(f"{length},{count}\n")
    return path


def write_cohort_ratios(
    rows: list[tuple[str, CohortRule, float]], path: str | Path
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("table,rule,ratio\n")
        for table, rule, ratio in rows:
            fh.write(f"{table},{'+'.join(rule.columns)},{ratio!r}\n")
    return path
