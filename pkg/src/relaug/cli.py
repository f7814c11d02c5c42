"""Pipeline driver.

Subcommands mirror the pipeline stages; ``all`` chains them. Every knob can
come from flags or a --config JSON file (flags win), and two runs with the
same configuration and inputs produce byte-identical output trees at any
--threads setting.

Exit codes: 0 success, 2 missing stage input, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import augment as aug
from . import metrics as met
from .documents import RwrConfig, build_all_documents, read_documents, write_documents
from .errors import RelaugError
from .graph import EdgeType, add_edges, build_graph, export_graph
from .index import ENTITY, build_index, classify_tables, read_index, write_index
from .schema import Database, ingest, serialize
from .synth import SynthConfig, write_cohort_db
from .tokens import TokenizerBundle

log = logging.getLogger("relaug")

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_VALIDATION = 3


@dataclass
class PipelineConfig:
    manifest: str = ""
    data_dir: str = ""
    out_dir: str = "out"
    alpha: float = 0.15
    steps: int = 2000
    k1: float = 1.2
    b: float = 0.75
    theta_a: float = 0.7
    k_sigma: float = 2.0
    top_k: int = 20
    sample_rate: float | None = None
    seed: int = 0
    threads: int = 1

    def echo(self) -> dict:
        """The reproducibility record written next to augmentation outputs."""
        return {
            "alpha": self.alpha,
            "total_steps": self.steps,
            "k1": self.k1,
            "b": self.b,
            "theta_a": self.theta_a,
            "k_sigma": self.k_sigma,
            "top_k": self.top_k,
            "sample_rate": self.sample_rate,
            "seed": self.seed,
        }


class StageInputMissing(Exception):
    def __init__(self, path: Path, stage: str):
        super().__init__(f"missing input {path}; run the '{stage}' stage first")


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageInputMissing(path, stage)
    return path


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for f in fields(PipelineConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**values)


# ---------------------------------------------------------------------------
# stage implementations (shared by individual subcommands and `all`)

def _load_db(cfg: PipelineConfig) -> Database:
    if not cfg.manifest or not cfg.data_dir:
        raise ValueError("--manifest and --data-dir are required for this stage")
    return ingest(cfg.manifest, cfg.data_dir)


def stage_ingest(cfg: PipelineConfig) -> None:
    db = _load_db(cfg)
    out = Path(cfg.out_dir) / "db"
    serialize(db, out)
    log.info("ingest: %d tables, %d rows -> %s", len(db.tables), db.row_count(), out)


def stage_graph(cfg: PipelineConfig) -> None:
    db = _load_db(cfg)
    g = build_graph(db)
    export_graph(g, Path(cfg.out_dir) / "graph")
    log.info("graph: %d nodes, %d undirected edges", g.n_nodes, g.undirected_edge_count())


def stage_document(cfg: PipelineConfig) -> None:
    db = _load_db(cfg)
    g = build_graph(db)
    tok = TokenizerBundle(db)
    docs = build_all_documents(
        g, db, RwrConfig(cfg.alpha, cfg.steps, cfg.seed), tok, threads=cfg.threads
    )
    out = Path(cfg.out_dir)
    write_documents(docs, out / "documents.jsonl")
    tok.dump_bin_plans(out / "bin_plans.json")
    log.info("document: %d documents", len(docs))


def stage_index(cfg: PipelineConfig) -> None:
    db = _load_db(cfg)
    out = Path(cfg.out_dir)
    docs_path = _require(out / "documents.jsonl", "document")
    docs = read_documents(docs_path)
    classes = classify_tables(db)
    by_table: dict[str, list] = {}
    for d in docs:
        if classes.get(d.root.table) == ENTITY:
            by_table.setdefault(d.root.table, []).append(d)
    index_dir = out / "index"
    if index_dir.exists():
        shutil.rmtree(index_dir)
    for table in sorted(by_table):
        idx = build_index(by_table[table], k1=cfg.k1, b=cfg.b)
        write_index(idx, index_dir)
    log.info("index: %d entity tables indexed", len(by_table))


def _load_indices(out: Path) -> dict:
    index_dir = _require(out / "index", "index")
    indices = {}
    for sub in sorted(index_dir.iterdir()):
        if sub.is_dir():
            indices[sub.name] = read_index(sub)
    return indices


def _entity_docs(cfg: PipelineConfig, db: Database) -> list:
    out = Path(cfg.out_dir)
    docs = read_documents(_require(out / "documents.jsonl", "document"))
    classes = classify_tables(db)
    return [d for d in docs if classes.get(d.root.table) == ENTITY]


def stage_atra(cfg: PipelineConfig) -> None:
    db = _load_db(cfg)
    out = Path(cfg.out_dir)
    indices = _load_indices(out)
    docs = _entity_docs(cfg, db)
    pairs = aug.run_atra(
        indices, docs,
        theta_a=cfg.theta_a, sample_rate=cfg.sample_rate,
        top_k=cfg.top_k, seed=cfg.seed, threads=cfg.threads,
    )
    signals = out / "signals"
    aug.write_atra_pairs(pairs, signals / "atra_pairs.tsv")
    _write_config_echo(cfg, signals)
    log.info("atra: %d positive pairs", len(pairs))


def stage_etra(cfg: PipelineConfig) -> None:
    db = _load_db(cfg)
    out = Path(cfg.out_dir)
    g = build_graph(db)
    indices = _load_indices(out)
    docs = _entity_docs(cfg, db)
    edges = aug.run_etra(
        indices, docs, g, k_sigma=cfg.k_sigma, top_k=cfg.top_k, threads=cfg.threads
    )
    signals = out / "signals"
    aug.write_etra_edges(edges, signals / "etra_edges.tsv")
    _write_config_echo(cfg, signals)
    log.info("etra: %d shortcut edges", len(edges))


def _write_config_echo(cfg: PipelineConfig, signals_dir: Path) -> None:
    signals_dir.mkdir(parents=True, exist_ok=True)
    (signals_dir / "config.json").write_text(
        json.dumps(cfg.echo(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _augmented_graph(cfg: PipelineConfig, db: Database):
    g = build_graph(db)
    edges_path = _require(Path(cfg.out_dir) / "signals" / "etra_edges.tsv", "etra")
    by_type: dict[EdgeType, list] = {}
    for e in aug.read_etra_edges(edges_path):
        by_type.setdefault(EdgeType.augmented(e.src.table, e.dst.table), []).append(
            (e.src, e.dst)
        )
    for et in sorted(by_type):
        g = add_edges(g, et, by_type[et])
    return g


def stage_augment_graph(cfg: PipelineConfig) -> None:
    db = _load_db(cfg)
    g = _augmented_graph(cfg, db)
    export_graph(g, Path(cfg.out_dir) / "graph_augmented")
    log.info("augment-graph: %d undirected edges", g.undirected_edge_count())


def stage_metrics(
    cfg: PipelineConfig,
    before: bool = True,
    after: bool = True,
    pair_specs: list[str] | None = None,
    cohorts: str | None = None,
) -> None:
    db = _load_db(cfg)
    out = Path(cfg.out_dir)
    metrics_dir = out / "metrics"
    profiles = {}
    graphs = {}
    if before:
        graphs["before"] = build_graph(db)
    if after:
        graphs["after"] = _augmented_graph(cfg, db)
    for name, g in graphs.items():
        profiles[name] = met.profile(g, seed=cfg.seed)
        for spec in pair_specs or []:
            src, _, dst = spec.partition(":")
            dist = met.path_distribution(g, src, dst, seed=cfg.seed)
            met.write_path_distribution(dist, metrics_dir / name)
    met.write_metrics_json(profiles, metrics_dir / "metrics.json")

    if cohorts:
        pairs = aug.read_atra_pairs(
            _require(out / "signals" / "atra_pairs.tsv", "atra")
        )
        rows = []
        for rule in met.load_cohort_rules(cohorts):
            table_pairs = [p for p in pairs if p.table == rule.table]
            if not table_pairs:
                log.warning("cohorts: no pairs for table %s, skipped", rule.table)
                continue
            rows.append((rule.table, rule, met.cohort_ratio(table_pairs, db, rule)))
        met.write_cohort_ratios(rows, metrics_dir / "cohort_ratios.csv")
    log.info("metrics: wrote %s", metrics_dir)


def stage_export(cfg: PipelineConfig) -> None:
    out = Path(cfg.out_dir)
    export_dir = out / "export"
    export_dir.mkdir(parents=True, exist_ok=True)

    graph_dir = out / "graph_augmented"
    if not graph_dir.exists():
        graph_dir = _require(out / "graph", "graph")
    for tsv in sorted(graph_dir.glob("*.tsv")):
        shutil.copyfile(tsv, export_dir / tsv.name)

    shutil.copyfile(
        _require(out / "documents.jsonl", "document"), export_dir / "documents.jsonl"
    )
    shutil.copyfile(
        _require(out / "signals" / "atra_pairs.tsv", "atra"),
        export_dir / "atra_pairs.tsv",
    )
    shutil.copyfile(Path(cfg.manifest), export_dir / "manifest.json")
    labels = Path(cfg.data_dir) / "labels.csv"
    if labels.exists():
        shutil.copyfile(labels, export_dir / "labels.csv")
    log.info("export: %s", export_dir)


# ---------------------------------------------------------------------------
# argument parsing

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="schema manifest JSON path")
    p.add_argument("--data-dir", dest="data_dir", help="directory with the CSV files")
    p.add_argument("--out-dir", dest="out_dir", help="pipeline output directory (default: out)")
    p.add_argument("--alpha", type=float, help="walk restart probability (default: 0.15)")
    p.add_argument("--steps", type=int, help="walk steps per root tuple (default: 2000)")
    p.add_argument("--k1", type=float, help="BM25 term-frequency saturation (default: 1.2)")
    p.add_argument("--b", type=float, help="BM25 length normalization (default: 0.75)")
    p.add_argument("--theta-a", dest="theta_a", type=float,
                   help="normalized-score threshold for positive pairs (default: 0.7)")
    p.add_argument("--k-sigma", dest="k_sigma", type=float,
                   help="stddev multiplier for shortcut-edge threshold (default: 2.0)")
    p.add_argument("--top-k", dest="top_k", type=int,
                   help="retrieved candidates per query (default: 20)")
    p.add_argument("--sample-rate", dest="sample_rate", type=float,
                   help="fraction of tuples used as queries "
                        "(default: 1.0, or 0.1 beyond 100k rows)")
    p.add_argument("--seed", type=int, help="global RNG seed (default: 0)")
    p.add_argument("--threads", type=int, help="worker thread cap (default: 1)")
    p.add_argument("--config", help="JSON file supplying any of the above (flags win)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaug",
        description="Retrieval-driven augmentation signals for relational databases.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    stages = {
        "ingest": "validate the manifest/CSVs and write a canonical copy",
        "graph": "build and export the schema graph",
        "document": "build walk-weighted tuple documents",
        "index": "build per-entity-table retrieval indices",
        "atra": "extract same-table positive pairs",
        "etra": "extract cross-table shortcut edges",
        "augment-graph": "merge shortcut edges into the graph and export it",
        "metrics": "graph profiles, path distributions, cohort ratios",
        "export": "assemble the trainer-facing bundle",
        "all": "run every stage in order",
    }
    for name, help_text in stages.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        _add_config_flags(p)
        if name == "metrics":
            p.add_argument("--before", action="store_true",
                           help="profile the schema graph (default if neither flag given)")
            p.add_argument("--after", action="store_true",
                           help="profile the augmented graph too")
            p.add_argument("--pairs", default="",
                           help="comma list of SRC:DST table pairs for path distributions")
            p.add_argument("--cohorts", help="cohort rules JSON for pair-quality ratios")

    p = sub.add_parser("synth", help="generate the synthetic cohort database",
                       description="generate the synthetic cohort database")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cust", type=int, default=80, help="customer rows")
    p.add_argument("--prod", type=int, default=80, help="product rows")
    p.add_argument("--txn", type=int, default=200, help="transaction rows")
    p.add_argument("--cohorts", type=int, default=4, help="planted cohort count")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        if args.command == "synth":
            manifest = write_cohort_db(
                args.out_dir,
                SynthConfig(seed=args.seed, n_cust=args.cust,
                            n_prod=args.prod, n_txn=args.txn,
                            n_cohorts=args.cohorts),
            )
            print(manifest)
            return EXIT_OK

        cfg = _resolve_config(args)
        if args.command == "ingest":
            stage_ingest(cfg)
        elif args.command == "graph":
            stage_graph(cfg)
        elif args.command == "document":
            stage_document(cfg)
        elif args.command == "index":
            stage_index(cfg)
        elif args.command == "atra":
            stage_atra(cfg)
        elif args.command == "etra":
            stage_etra(cfg)
        elif args.command == "augment-graph":
            stage_augment_graph(cfg)
        elif args.command == "metrics":
            pair_specs = [p for p in args.pairs.split(",") if p]
            both = not args.before and not args.after
            stage_metrics(
                cfg,
                before=args.before or both,
                after=args.after or both,
                pair_specs=pair_specs,
                cohorts=args.cohorts,
            )
        elif args.command == "all":
            stage_ingest(cfg)
            stage_graph(cfg)
            stage_document(cfg)
            stage_index(cfg)
            stage_atra(cfg)
            stage_etra(cfg)
            stage_augment_graph(cfg)
            stage_metrics(cfg)
            stage_export(cfg)
        elif args.command == "export":
            stage_export(cfg)
        return EXIT_OK
    except StageInputMissing as exc:
        print(f"relaug: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except FileNotFoundError as exc:
        print(f"relaug: missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (RelaugError, ValueError, json.JSONDecodeError) as exc:
        print(f"relaug: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
