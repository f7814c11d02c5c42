"""Exception hierarchy for the relaug pipeline."""

from __future__ import annotations


class RelaugError(Exception):
    """Base class for all relaug errors."""


class IngestError(RelaugError):
    """Manifest/CSV structural mismatch or an unparseable cell value."""


class PkError(RelaugError):
    """Duplicate or null primary-key value."""


class ReferentialError(RelaugError):
    """Foreign-key value with no matching primary key at ingest time."""


class NotFoundError(RelaugError):
    """Unknown table, node, or document id."""


class ConstraintError(RelaugError):
    """Edge addition that violates a graph constraint."""


class EmptyDocumentError(RelaugError):
    """Document construction produced no terms at all."""


class EmptyIndexError(RelaugError):
    """Index build invoked with an empty document list."""


class NormalizationError(RelaugError):
    """Self-retrieval score is zero, so scores cannot be normalized."""


class NoDataError(RelaugError):
    """Metric requested over an empty input collection."""
