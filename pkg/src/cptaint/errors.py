"""Exception types raised across the toolkit."""


class CpTaintError(Exception):
    """Base class for all toolkit errors."""


class MalformedId(CpTaintError):
    """Node-id text does not match the <cycle>-<event>-<variable> shape."""


class OutOfRange(CpTaintError):
    """Node-id component outside its valid range."""


class HeaderMismatch(CpTaintError):
    """CSV header differs from the documented schema."""


class RowCountMismatch(CpTaintError):
    """Dataset row count does not equal cycle_len * n_cycles."""


class NonMonotoneTime(CpTaintError):
    """Dataset timestamps are not strictly increasing by 1 ms."""


class NumericParse(CpTaintError):
    """A CSV cell could not be parsed as a number."""


class UnknownNodeType(CpTaintError):
    """Node-type code outside {ts, arm, an, cs, sd}."""


class InconsistentType(CpTaintError):
    """Same variable mapped to two different node types."""


class StageViolation(CpTaintError):
    """Edge violates the ts < arm < an < cs < sd stage order."""


class SourceOutOfRange(CpTaintError):
    """Taint source refers to a variable or node not in the graph."""


class EmptyDataset(CpTaintError):
    """Operation requires at least one event record."""


class UnknownNode(CpTaintError):
    """Node id not present in the graph."""


class ShapeMismatch(CpTaintError):
    """Baseline dataset shape differs from the graph's event grid."""


class MissingBaseline(CpTaintError):
    """No baseline value available for the requested node."""


class InvalidParams(CpTaintError):
    """Simulator parameters fail their physical sanity checks."""


class NumericalBlowup(CpTaintError):
    """Simulator state exceeded sanity bounds; run aborted."""
