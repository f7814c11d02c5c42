"""Typed in-memory relational database: manifest + CSV ingest, time snapshots.

Cell values are plain Python objects whose interpretation is fixed by the
owning column's kind:

    numeric      -> float
    categorical  -> str
    text         -> str
    pk / fk      -> str (opaque key)
    timestamp    -> int (epoch seconds)
    null         -> None (any kind except pk)

An empty CSV cell is null for every kind. Dangling foreign keys are a hard
ingest error; only :func:`snapshot` may null an FK, when it filters the
referenced row out of a time slice.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .errors import IngestError, NotFoundError, PkError, ReferentialError

#: Sentinel accepted by :func:`snapshot` meaning "no time filtering".
TIME_INFINITY = math.inf


class Kind(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TEXT = "text"
    PRIMARY_KEY = "pk"
    FOREIGN_KEY = "fk"
    TIMESTAMP = "timestamp"


@dataclass(frozen=True)
class ColumnSpec:
    """One column: a name, a kind, and (for FKs) the referenced PK column."""

    name: str
    kind: Kind
    target_table: str | None = None
    target_column: str | None = None

    @property
    def is_key(self) -> bool:
        return self.kind in (Kind.PRIMARY_KEY, Kind.FOREIGN_KEY)

    def kind_string(self) -> str:
        """Manifest encoding of the kind, e.g. ``fk:USER.id``."""
        if self.kind is Kind.FOREIGN_KEY:
            return f"fk:{self.target_table}.{self.target_column}"
        return self.kind.value


@dataclass(frozen=True)
class Tuple:
    row_id: int
    values: tuple


@dataclass
class Table:
    name: str
    columns: list[ColumnSpec]
    rows: list[Tuple] = field(default_factory=list)
    #: optional manifest override for entity/relationship classification
    classification_override: str | None = None

    def __post_init__(self) -> None:
        self._col_index = {c.name: i for i, c in enumerate(self.columns)}
        self._row_index = {r.row_id: r for r in self.rows}

    def column_index(self, name: str) -> int:
        try:
            return self._col_index[name]
        except KeyError:
            raise NotFoundError(f"table {self.name!r} has no column {name!r}") from None

    def column(self, name: str) -> ColumnSpec:
        return self.columns[self.column_index(name)]

    def row(self, row_id: int) -> Tuple:
        try:
            return self._row_index[row_id]
        except KeyError:
            raise NotFoundError(f"table {self.name!r} has no row {row_id}") from None

    def has_row(self, row_id: int) -> bool:
        return row_id in self._row_index

    def value(self, row_id: int, column: str):
        return self.row(row_id).values[self.column_index(column)]

    @property
    def pk_column(self) -> ColumnSpec | None:
        for c in self.columns:
            if c.kind is Kind.PRIMARY_KEY:
                return c
        return None

    @property
    def fk_columns(self) -> list[ColumnSpec]:
        return [c for c in self.columns if c.kind is Kind.FOREIGN_KEY]

    @property
    def timestamp_column(self) -> ColumnSpec | None:
        """The designated snapshot column: the first declared timestamp."""
        for c in self.columns:
            if c.kind is Kind.TIMESTAMP:
                return c
        return None

    def pk_index(self) -> dict[str, int]:
        """Map from primary-key value to row_id. Empty for PK-less tables."""
        pk = self.pk_column
        if pk is None:
            return {}
        i = self.column_index(pk.name)
        return {r.values[i]: r.row_id for r in self.rows}


@dataclass
class Database:
    tables: dict[str, Table]
    manifest_path: str = ""

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise NotFoundError(f"unknown table {name!r}") from None

    def table_names(self) -> list[str]:
        return sorted(self.tables)

    def row_count(self) -> int:
        return sum(len(t.rows) for t in self.tables.values())


# ---------------------------------------------------------------------------
# manifest parsing

_RESERVED_NAME_CHARS = (".", "=")


def _check_name(what: str, name: str) -> None:
    if not name:
        raise IngestError(f"empty {what} name")
    for ch in _RESERVED_NAME_CHARS:
        if ch in name:
            raise IngestError(f"{what} name {name!r} contains reserved character {ch!r}")


def _parse_kind(raw: str, table: str, column: str) -> ColumnSpec:
    if raw.startswith("fk:"):
        target = raw[3:]
        if target.count(".") != 1:
            raise IngestError(
                f"table {table!r} column {column!r}: fk target {target!r} "
                "must be TABLE.COLUMN"
            )
        t, c = target.split(".")
        return ColumnSpec(column, Kind.FOREIGN_KEY, target_table=t, target_column=c)
    try:
        kind = Kind(raw)
    except ValueError:
        raise IngestError(
            f"table {table!r} column {column!r}: unknown kind {raw!r}"
        ) from None
    if kind is Kind.FOREIGN_KEY:
        raise IngestError(
            f"table {table!r} column {column!r}: fk kind needs a target (fk:TABLE.COLUMN)"
        )
    return ColumnSpec(column, kind)


def parse_manifest(manifest_path: Path) -> list[tuple[Table, str]]:
    """Parse and validate a manifest; returns (empty table, csv relpath) pairs."""
    try:
        spec = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read manifest {manifest_path}: {exc}") from exc

    if not isinstance(spec, dict) or "tables" not in spec:
        raise IngestError(f"manifest {manifest_path} lacks a 'tables' list")

    out: list[tuple[Table, str]] = []
    seen: set[str] = set()
    for entry in spec["tables"]:
        tname = entry.get("name", "")
        _check_name("table", tname)
        if tname in seen:
            raise IngestError(f"duplicate table {tname!r} in manifest")
        seen.add(tname)

        columns: list[ColumnSpec] = []
        pk_count = 0
        col_names: set[str] = set()
        for cspec in entry.get("columns", []):
            cname = cspec.get("name", "")
            _check_name("column", cname)
            if cname in col_names:
                raise IngestError(f"table {tname!r}: duplicate column {cname!r}")
            col_names.add(cname)
            col = _parse_kind(cspec.get("kind", ""), tname, cname)
            if col.kind is Kind.PRIMARY_KEY:
                pk_count += 1
                if pk_count > 1:
                    raise IngestError(f"table {tname!r} declares more than one primary key")
            columns.append(col)
        if not columns:
            raise IngestError(f"table {tname!r} declares no columns")

        override = entry.get("classification")
        if override not in (None, "entity", "relationship"):
            raise IngestError(
                f"table {tname!r}: classification must be 'entity' or 'relationship'"
            )
        csv_rel = entry.get("csv")
        if not csv_rel:
            raise IngestError(f"table {tname!r} has no csv path")
        out.append((Table(tname, columns, [], classification_override=override), csv_rel))

    # cross-table FK validation
    by_name = {t.name: t for t, _ in out}
    for t, _ in out:
        for fk in t.fk_columns:
            target = by_name.get(fk.target_table)
            if target is None:
                raise IngestError(
                    f"table {t.name!r} column {fk.name!r}: fk target table "
                    f"{fk.target_table!r} does not exist"
                )
            pk = target.pk_column
            if pk is None or pk.name != fk.target_column:
                raise IngestError(
                    f"table {t.name!r} column {fk.name!r}: fk must reference the "
                    f"primary key of {fk.target_table!r}"
                )
    return out


# ---------------------------------------------------------------------------
# value parsing

def _parse_timestamp(raw: str, table: str, column: str) -> int:
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError:
        raise IngestError(
            f"table {table!r} column {column!r}: bad timestamp {raw!r}"
        ) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_value(raw: str, col: ColumnSpec, table: str):
    if raw == "":
        return None
    if col.kind is Kind.NUMERIC:
        try:
            return float(raw)
        except ValueError:
            raise IngestError(
                f"table {table!r} column {col.name!r}: bad numeric {raw!r}"
            ) from None
    if col.kind is Kind.TIMESTAMP:
        return _parse_timestamp(raw, table, col.name)
    return raw  # categorical, text, pk, fk: kept verbatim


# ---------------------------------------------------------------------------
# ingest / snapshot / serialize

def ingest(manifest_path: str | Path, data_dir: str | Path) -> Database:
    """Load a manifest plus one CSV per table into a validated Database.

    Row order follows file order and assigns row_ids 0..N-1. Raises
    IngestError on structural problems, PkError on duplicate/null primary
    keys, and ReferentialError on dangling foreign keys.
    """
    manifest_path = Path(manifest_path)
    data_dir = Path(data_dir)
    tables: dict[str, Table] = {}

    for table, csv_rel in parse_manifest(manifest_path):
        csv_path = data_dir / csv_rel
        if not csv_path.is_file():
            raise IngestError(f"table {table.name!r}: csv file {csv_path} not found")
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IngestError(f"table {table.name!r}: csv {csv_path} is empty") from None
            expected = [c.name for c in table.columns]
            if header != expected:
                raise IngestError(
                    f"table {table.name!r}: csv header {header} does not match "
                    f"declared columns {expected}"
                )
            rows: list[Tuple] = []
            i = 0
            for record in reader:
                if not record:
                    continue  # blank line
                if len(record) != len(table.columns):
                    raise IngestError(
                        f"table {table.name!r} row {i}: {len(record)} values for "
                        f"{len(table.columns)} columns"
                    )
                values = tuple(
                    _parse_value(raw, col, table.name)
                    for raw, col in zip(record, table.columns)
                )
                rows.append(Tuple(row_id=i, values=values))
                i += 1
        tables[table.name] = Table(
            table.name, table.columns, rows,
            classification_override=table.classification_override,
        )

    db = Database(tables, manifest_path=str(manifest_path))
    _check_pk_uniqueness(db)
    _check_references(db)
    return db


def _check_pk_uniqueness(db: Database) -> None:
    for table in db.tables.values():
        pk = table.pk_column
        if pk is None:
            continue
        i = table.column_index(pk.name)
        seen: dict[str, int] = {}
        for row in table.rows:
            v = row.values[i]
            if v is None:
                raise PkError(f"table {table.name!r} row {row.row_id}: null primary key")
            if v in seen:
                raise PkError(
                    f"table {table.name!r}: primary key {v!r} duplicated on rows "
                    f"{seen[v]} and {row.row_id}"
                )
            seen[v] = row.row_id


def _check_references(db: Database) -> None:
    pk_sets = {
        name: set(t.pk_index()) for name, t in db.tables.items() if t.pk_column
    }
    for table in db.tables.values():
        for fk in table.fk_columns:
            i = table.column_index(fk.name)
            valid = pk_sets.get(fk.target_table, set())
            bad = [r.row_id for r in table.rows
                   if r.values[i] is not None and r.values[i] not in valid]
            if bad:
                raise ReferentialError(
                    f"table {table.name!r} column {fk.name!r}: rows {bad} reference "
                    f"missing {fk.target_table}.{fk.target_column} values"
                )


def snapshot(db: Database, t: float) -> Database:
    """Time slice: keep rows whose designated timestamp is <= t.

    Tables without a timestamp column, and rows whose timestamp is null, are
    always retained. Foreign keys whose referenced row was filtered out are
    nulled (time filtering is expected; this is not an integrity failure).
    """
    retained: dict[str, list[Tuple]] = {}
    for name, table in db.tables.items():
        ts = table.timestamp_column
        if ts is None or t == TIME_INFINITY:
            retained[name] = list(table.rows)
        else:
            i = table.column_index(ts.name)
            retained[name] = [
                r for r in table.rows if r.values[i] is None or r.values[i] <= t
            ]

    # pk values that survived the slice, for FK nulling
    surviving: dict[str, set] = {}
    for name, table in db.tables.items():
        pk = table.pk_column
        if pk is not None:
            i = table.column_index(pk.name)
            surviving[name] = {r.values[i] for r in retained[name]}

    filtered: dict[str, Table] = {}
    for name, table in db.tables.items():
        rows = retained[name]
        fk_idx = [
            (table.column_index(c.name), surviving.get(c.target_table, set()))
            for c in table.fk_columns
        ]
        if fk_idx:
            patched = []
            for row in rows:
                values = row.values
                patch = None
                for i, valid in fk_idx:
                    if values[i] is not None and values[i] not in valid:
                        if patch is None:
                            patch = list(values)
                        patch[i] = None
                patched.append(row if patch is None else replace(row, values=tuple(patch)))
            rows = patched
        filtered[name] = Table(
            name, table.columns, rows,
            classification_override=table.classification_override,
        )
    return Database(filtered, manifest_path=db.manifest_path)


def _format_value(v, col: ColumnSpec) -> str:
    if v is None:
        return ""
    if col.kind is Kind.NUMERIC:
        return repr(v)
    if col.kind is Kind.TIMESTAMP:
        return str(v)
    return v


def serialize(db: Database, out_dir: str | Path) -> Path:
    """Write a canonical manifest + CSV copy of the database.

    The output re-ingests to an equivalent database (row counts, column
    kinds, and PK sets are preserved). Returns the manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name in db.table_names():
        table = db.tables[name]
        csv_rel = f"{name.lower()}.csv"
        entry = {
            "name": name,
            "columns": [{"name": c.name, "kind": c.kind_string()} for c in table.columns],
            "csv": csv_rel,
        }
        if table.classification_override:
            entry["classification"] = table.classification_override
        entries.append(entry)
        with open(out_dir / csv_rel, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([c.name for c in table.columns])
            for row in table.rows:
                writer.writerow(
                    [_format_value(v, c) for v, c in zip(row.values, table.columns)]
                )
    manifest = out_dir / "manifest.json"
    manifest.write_text(
        json.dumps({"tables": entries}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return manifest
