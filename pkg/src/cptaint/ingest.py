"""Dataset and topology-template I/O.

Two CSV formats live here:

* dataset CSV: header ``seconds,us_d,us_q,m_PWM,is_a,is_b,is_c,theta,
  omega_actual_mech`` with an optional trailing ``speed_ref`` column,
  one row per millisecond;
* graph-info CSV: header ``source_node,destination_node,value_s,value_d,
  taint_label_s,taint_label_d,node_type_s,node_type_d``.  The seed
  template (event 0) uses bare variable indices in the node columns;
  expanded files use full canonical node ids.

Floats are printed in shortest round-trip form, so parse -> emit is
byte-stable for canonical input.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import (
    HeaderMismatch,
    InconsistentType,
    NonMonotoneTime,
    NumericParse,
    OutOfRange,
    RowCountMismatch,
    StageViolation,
)
from .model import (
    DATA_COLUMNS,
    DEFAULT_NODE_TYPES,
    DT_CONTROL,
    SPEED_REF_COLUMN,
    VARS_PER_EVENT,
    Dataset,
    EventRecord,
    NodeType,
    Variable,
    label_code,
)

DATASET_HEADER = ("seconds",) + DATA_COLUMNS
GRAPH_INFO_HEADER = (
    "source_node",
    "destination_node",
    "value_s",
    "value_d",
    "taint_label_s",
    "taint_label_d",
    "node_type_s",
    "node_type_d",
)

#: grid tolerance when checking the 1 ms time step
_TIME_EPS = 1e-9


def _fmt(value: float) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(value))


def _parse_float(cell: str, where: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise NumericParse(f"cannot parse {cell!r} as a number ({where})") from None


# Dataset CSV -----------------------------------------------------------


def parse_dataset(
    text: str,
    cycle_len: int = 64,
    n_cycles: int = 99,
    speed_ref_default: float = 0.0,
    allow_partial: bool = False,
) -> Dataset:
    """Parse a dataset CSV into cycle_len * n_cycles event records.

    A missing speed_ref column is filled with speed_ref_default.  The row
    count must be exactly cycle_len * n_cycles unless allow_partial is
    set, in which case a short final cycle is accepted.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise HeaderMismatch("empty stream, expected a dataset header row") from None
    has_speed_ref = header == DATASET_HEADER + (SPEED_REF_COLUMN,)
    if not has_speed_ref and header != DATASET_HEADER:
        raise HeaderMismatch(
            f"dataset header {','.join(header)!r} does not match "
            f"{','.join(DATASET_HEADER)!r} (optionally + ',speed_ref')"
        )

    width = len(DATASET_HEADER) + (1 if has_speed_ref else 0)
    records: list[EventRecord] = []
    prev_seconds: float | None = None
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise NumericParse(f"row {lineno} has {len(row)} cells, expected {width}")
        cells = [_parse_float(c, f"row {lineno}") for c in row]
        seconds = cells[0]
        if seconds < 0:
            raise NonMonotoneTime(f"negative timestamp {seconds} at row {lineno}")
        if prev_seconds is not None and abs(seconds - prev_seconds - DT_CONTROL) > _TIME_EPS:
            raise NonMonotoneTime(
                f"row {lineno}: expected {prev_seconds + DT_CONTROL:.3f}s, got {seconds}"
            )
        prev_seconds = seconds
        speed_ref = cells[9] if has_speed_ref else speed_ref_default
        records.append(EventRecord(*cells[:9], speed_ref=speed_ref))

    expected = cycle_len * n_cycles
    if len(records) != expected and not allow_partial:
        raise RowCountMismatch(
            f"{len(records)} rows, expected {expected} ({n_cycles} cycles of {cycle_len})"
        )
    if allow_partial and not records:
        raise RowCountMismatch("no data rows")
    if allow_partial:
        n_cycles = (len(records) + cycle_len - 1) // cycle_len
    return Dataset(tuple(records), cycle_len=cycle_len, n_cycles=n_cycles)


def emit_dataset(dataset: Dataset, include_speed_ref: bool = True) -> str:
    """Dataset CSV text; inverse of parse_dataset."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = DATASET_HEADER + ((SPEED_REF_COLUMN,) if include_speed_ref else ())
    writer.writerow(header)
    for rec in dataset.records:
        row = [_fmt(rec.seconds)] + [_fmt(getattr(rec, col)) for col in DATA_COLUMNS]
        if include_speed_ref:
            row.append(_fmt(rec.speed_ref))
        writer.writerow(row)
    return out.getvalue()


# Topology template -----------------------------------------------------


@dataclass(frozen=True)
class TemplateEdge:
    """One edge of the per-event pattern.

    crosses_event=True means the destination belongs to the next event;
    that is how sensor readings feed the controller board of the
    following millisecond.
    """

    src: Variable
    dst: Variable
    crosses_event: bool
    src_type: NodeType
    dst_type: NodeType


@dataclass(frozen=True)
class TopologyTemplate:
    """Edge pattern applied at every event, plus the variable typing."""

    edges: tuple[TemplateEdge, ...]
    node_types: Mapping[Variable, NodeType]

    def __post_init__(self) -> None:
        for e in self.edges:
            if e.crosses_event:
                if e.src_type is not NodeType.SENSOR_DATA or e.dst_type is not NodeType.ARM:
                    raise StageViolation(
                        f"cross-event edge {e.src.value}->{e.dst.value} must be sd->arm"
                    )
            elif e.src_type.stage >= e.dst_type.stage:
                raise StageViolation(
                    f"intra-event edge {e.src.value}->{e.dst.value} violates stage order "
                    f"({e.src_type.code} !< {e.dst_type.code})"
                )
        missing = [v for v in Variable if v not in self.node_types]
        if missing:
            raise InconsistentType(f"variables missing a node type: {missing}")

    def type_of(self, variable: Variable) -> NodeType:
        return self.node_types[variable]

    @property
    def intra_edges(self) -> tuple[TemplateEdge, ...]:
        return tuple(e for e in self.edges if not e.crosses_event)

    @property
    def cross_edges(self) -> tuple[TemplateEdge, ...]:
        return tuple(e for e in self.edges if e.crosses_event)


_INTRA_PAIRS = ((0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5), (4, 6), (4, 7), (4, 8), (4, 9))
_CROSS_PAIRS = ((5, 1), (6, 1), (7, 1), (8, 1), (9, 1))


def default_template() -> TopologyTemplate:
    """The built-in 15-edge pattern: command -> board -> voltage commands ->
    modulation index -> sensor readings, with sensors feeding the next
    event's board."""
    types = dict(DEFAULT_NODE_TYPES)
    edges = [
        TemplateEdge(Variable(s), Variable(d), False, types[Variable(s)], types[Variable(d)])
        for s, d in _INTRA_PAIRS
    ] + [
        TemplateEdge(Variable(s), Variable(d), True, types[Variable(s)], types[Variable(d)])
        for s, d in _CROSS_PAIRS
    ]
    return TopologyTemplate(tuple(edges), types)


def _parse_variable(cell: str, lineno: int) -> Variable:
    try:
        idx = int(cell)
    except ValueError:
        raise NumericParse(f"row {lineno}: variable index {cell!r} is not an integer") from None
    if not 0 <= idx < VARS_PER_EVENT:
        raise OutOfRange(f"row {lineno}: variable index {idx} outside 0..9")
    return Variable(idx)


def parse_template(text: str) -> TopologyTemplate:
    """Parse a seed graph-info file (event 0) into a topology template.

    Node columns hold bare variable indices.  Rows typed sd->arm are
    cross-event edges into the next event's board node; a same-event
    sd->arm edge would close a cycle.  Values and taint labels in the
    file describe event 0 only and are ignored for topology.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise HeaderMismatch("empty stream, expected a graph-info header row") from None
    if header != GRAPH_INFO_HEADER:
        raise HeaderMismatch(
            f"template header {','.join(header)!r} does not match {','.join(GRAPH_INFO_HEADER)!r}"
        )

    edges: list[TemplateEdge] = []
    node_types: dict[Variable, NodeType] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(GRAPH_INFO_HEADER):
            raise NumericParse(f"row {lineno} has {len(row)} cells, expected 8")
        src = _parse_variable(row[0], lineno)
        dst = _parse_variable(row[1], lineno)
        src_type = NodeType.from_code(row[6].strip())
        dst_type = NodeType.from_code(row[7].strip())
        for var, node_type in ((src, src_type), (dst, dst_type)):
            seen = node_types.setdefault(var, node_type)
            if seen is not node_type:
                raise InconsistentType(
                    f"row {lineno}: variable {var.value} typed both "
                    f"{seen.code!r} and {node_type.code!r}"
                )
        crosses = src_type is NodeType.SENSOR_DATA and dst_type is NodeType.ARM
        edges.append(TemplateEdge(src, dst, crosses, src_type, dst_type))

    return TopologyTemplate(tuple(edges), node_types)


def emit_template(
    template: TopologyTemplate,
    event0: EventRecord | None = None,
    tainted: Iterable[Variable] = (),
) -> str:
    """Seed graph-info CSV for event 0; inverse of parse_template.

    Without an event record, values are N/A except the board's constant
    1.0.  The speed command value is never written (it is not a collected
    variable); pass ``tainted`` to mark selected source variables.
    """
    tainted_set = set(tainted)

    def value_cell(var: Variable) -> str:
        if var is Variable.ARM_BOARD:
            return _fmt(1.0)
        if event0 is None or var is Variable.SPEED_REF:
            return "N/A"
        return _fmt(event0.value_of(var))

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(GRAPH_INFO_HEADER)
    for e in template.edges:
        writer.writerow(
            [
                str(e.src.value),
                str(e.dst.value),
                value_cell(e.src),
                value_cell(e.dst),
                "1" if e.src in tainted_set else "0",
                "1" if e.dst in tainted_set else "0",
                e.src_type.code,
                e.dst_type.code,
            ]
        )
    return out.getvalue()


# Template expansion ----------------------------------------------------


@dataclass(frozen=True)
class GraphInfoRow:
    """One edge row of an expanded graph-info file (full node ids)."""

    src_id: str
    dst_id: str
    value_s: float
    value_d: float
    tags_s: frozenset[str]
    tags_d: frozenset[str]
    type_s: NodeType
    type_d: NodeType


def expand_template(template: TopologyTemplate, dataset: Dataset) -> list[GraphInfoRow]:
    """Instantiate the per-event pattern across every recorded event.

    Event e gets the intra-event edges with event-e values; every event
    but the last additionally gets the cross-event edges into event e+1.
    Taint labels are all "0": taint is assigned when a graph is built
    with a selected source.
    """
    rows: list[GraphInfoRow] = []
    cycle_len = dataset.cycle_len
    n_events = dataset.n_events
    for flat_event in range(n_events):
        cycle, event = divmod(flat_event, cycle_len)
        rec = dataset.records[flat_event]
        next_rec = dataset.records[flat_event + 1] if flat_event + 1 < n_events else None
        for e in template.edges:
            if e.crosses_event:
                if next_rec is None:
                    continue
                dst_cycle, dst_event = divmod(flat_event + 1, cycle_len)
                dst_id = f"{dst_cycle + 1}-{dst_event}-{e.dst.value}"
                value_d = next_rec.value_of(e.dst)
            else:
                dst_id = f"{cycle + 1}-{event}-{e.dst.value}"
                value_d = rec.value_of(e.dst)
            rows.append(
                GraphInfoRow(
                    src_id=f"{cycle + 1}-{event}-{e.src.value}",
                    dst_id=dst_id,
                    value_s=rec.value_of(e.src),
                    value_d=value_d,
                    tags_s=frozenset(),
                    tags_d=frozenset(),
                    type_s=e.src_type,
                    type_d=e.dst_type,
                )
            )
    return rows


EXTENDED_GRAPH_INFO_HEADER = GRAPH_INFO_HEADER + ("label_tags_s", "label_tags_d")


def emit_graph_info(rows: Sequence[GraphInfoRow], extended: bool = False) -> str:
    """Graph-info CSV text.

    Taint labels collapse to 0/1 in the plain format; extended=True
    appends label_tags_s/label_tags_d columns carrying the full
    scenario-tag sets, semicolon separated.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EXTENDED_GRAPH_INFO_HEADER if extended else GRAPH_INFO_HEADER)
    for r in rows:
        base = [
            r.src_id,
            r.dst_id,
            _fmt(r.value_s),
            _fmt(r.value_d),
            label_code(r.tags_s),
            label_code(r.tags_d),
            r.type_s.code,
            r.type_d.code,
        ]
        if extended:
            base += [";".join(sorted(r.tags_s)), ";".join(sorted(r.tags_d))]
        writer.writerow(base)
    return out.getvalue()


def _parse_tags(label: str, tags_cell: str | None, where: str) -> frozenset[str]:
    if tags_cell is not None and tags_cell:
        return frozenset(tags_cell.split(";"))
    if label == "0":
        return frozenset()
    if label == "1":
        return frozenset({"tainted"})
    raise NumericParse(f"{where}: taint label must be 0 or 1, got {label!r}")


def parse_graph_info(text: str) -> list[GraphInfoRow]:
    """Parse an expanded graph-info CSV (plain or extended) back into rows.

    Plain 0/1 labels lose the scenario-tag identity; a bare "1" comes
    back as the single tag "tainted".
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise HeaderMismatch("empty stream, expected a graph-info header row") from None
    if header == EXTENDED_GRAPH_INFO_HEADER:
        extended = True
    elif header == GRAPH_INFO_HEADER:
        extended = False
    else:
        raise HeaderMismatch(
            f"graph-info header {','.join(header)!r} does not match {','.join(GRAPH_INFO_HEADER)!r}"
        )
    width = len(header)
    rows: list[GraphInfoRow] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise NumericParse(f"row {lineno} has {len(row)} cells, expected {width}")
        where = f"row {lineno}"
        rows.append(
            GraphInfoRow(
                src_id=row[0].strip(),
                dst_id=row[1].strip(),
                value_s=_parse_float(row[2], where),
                value_d=_parse_float(row[3], where),
                tags_s=_parse_tags(row[4], row[8] if extended else None, where),
                tags_d=_parse_tags(row[5], row[9] if extended else None, where),
                type_s=NodeType.from_code(row[6].strip()),
                type_d=NodeType.from_code(row[7].strip()),
            )
        )
    return rows
