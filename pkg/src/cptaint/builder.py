"""Taint-graph construction, validation and export.

The builder walks the dataset once and materializes the per-event
topology into flat adjacency lists (node n = flat_event*10 + variable),
then marks the selected taint sources.  The result is frozen; tracking
queries never mutate it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .errors import EmptyDataset, InconsistentType, MalformedId, SourceOutOfRange
from .ingest import GraphInfoRow, TopologyTemplate, emit_graph_info, parse_graph_info
from .model import (
    VARS_PER_EVENT,
    Dataset,
    NodeId,
    NodeType,
    TaintGraph,
    Variable,
    format_node_id,
    node_flat_index,
    parse_node_id,
)

TaintSource = tuple["Variable | NodeId", str]


def build_graph(
    dataset: Dataset,
    template: TopologyTemplate,
    sources: Iterable[TaintSource] = (),
) -> TaintGraph:
    """Construct the whole taint graph for a run.

    A Variable source marks that variable's node in every event
    (persistent compromise); a NodeId source marks the one node
    (transient compromise).  All other labels stay empty: damage sets
    are computed by the tracking queries, not stored in the graph.
    """
    n_events = dataset.n_events
    if n_events == 0:
        raise EmptyDataset("cannot build a graph from zero events")
    cycle_len = dataset.cycle_len
    node_types = tuple(template.node_types[Variable(v)] for v in range(VARS_PER_EVENT))

    values: list[float] = []
    for rec in dataset.records:
        values.extend(rec.value_of(Variable(v)) for v in range(VARS_PER_EVENT))

    intra = [(e.src.value, e.dst.value) for e in template.intra_edges]
    cross = [(e.src.value, e.dst.value) for e in template.cross_edges]
    intra_succs: list[list[int]] = [[] for _ in range(VARS_PER_EVENT)]
    cross_succs: list[list[int]] = [[] for _ in range(VARS_PER_EVENT)]
    for s, d in intra:
        intra_succs[s].append(d)
    for s, d in cross:
        cross_succs[s].append(d)

    fwd: list[list[int]] = []
    bwd: list[list[int]] = [[] for _ in range(n_events * VARS_PER_EVENT)]
    for flat_event in range(n_events):
        base = flat_event * VARS_PER_EVENT
        last = flat_event == n_events - 1
        for var in range(VARS_PER_EVENT):
            succs = [base + d for d in intra_succs[var]]
            if not last:
                succs += [base + VARS_PER_EVENT + d for d in cross_succs[var]]
            succs.sort()
            fwd.append(succs)
            src = base + var
            for dst in succs:
                bwd[dst].append(src)
    for preds in bwd:
        preds.sort()

    tags: dict[int, frozenset[str]] = {}

    def add_tag(flat: int, tag: str) -> None:
        tags[flat] = tags.get(flat, frozenset()) | {tag}

    graph = TaintGraph(
        cycle_len=cycle_len,
        n_events=n_events,
        node_types=node_types,
        values=values,
        tags=tags,
        fwd=fwd,
        bwd=bwd,
    )

    for source, tag in sources:
        if isinstance(source, Variable):
            for flat_event in range(n_events):
                add_tag(flat_event * VARS_PER_EVENT + source.value, tag)
        elif isinstance(source, NodeId):
            if not graph.contains(source):
                raise SourceOutOfRange(
                    f"source node {format_node_id(source)} outside the {n_events}-event run"
                )
            add_tag(graph.flat(source), tag)
        else:
            raise SourceOutOfRange(f"source must be a Variable or NodeId, got {source!r}")

    return graph


# Validation ------------------------------------------------------------


@dataclass
class ValidationReport:
    """Findings from validate_graph; empty violations means a clean graph."""

    n_nodes: int
    n_edges: int
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [f"nodes: {self.n_nodes}", f"edges: {self.n_edges}"]
        if self.ok:
            lines.append("result: ok")
        else:
            lines.append(f"result: {len(self.violations)} violation(s)")
            lines.extend(f"  - {v}" for v in self.violations)
        return "\n".join(lines) + "\n"


def _expected_in_degree(graph: TaintGraph, flat: int) -> int | None:
    node_type = graph.node_types[flat % VARS_PER_EVENT]
    first_event = flat < VARS_PER_EVENT
    if node_type is NodeType.TAINT_SOURCE:
        return 0
    if node_type is NodeType.ARM:
        return 1 if first_event else 6
    if node_type is NodeType.ATTRIBUTE:
        return 1
    if node_type is NodeType.CONTROL_SIGNAL:
        return 2
    if node_type is NodeType.SENSOR_DATA:
        return 1
    return None


def validate_graph(graph: TaintGraph) -> ValidationReport:
    """Check structural invariants and report every violation found.

    Covers: acyclicity (edges advance the event clock or the intra-event
    stage), the node/edge count formulas, board-node values, the
    per-type in-degree profile of the standard topology, theta range,
    and forward/backward adjacency being exact inverses.
    """
    report = ValidationReport(n_nodes=graph.n_nodes, n_edges=graph.n_edges)
    v = report.violations.append
    n = graph.n_events

    expected_nodes = 10 * n
    expected_edges = 10 * n + 5 * (n - 1)
    if graph.n_nodes != expected_nodes:
        v(f"node count {graph.n_nodes} != 10*E = {expected_nodes}")
    if graph.n_edges != expected_edges:
        v(f"edge count {graph.n_edges} != 10*E + 5*(E-1) = {expected_edges}")

    for src, dst in graph.iter_edges_flat():
        src_event, src_var = divmod(src, VARS_PER_EVENT)
        dst_event, dst_var = divmod(dst, VARS_PER_EVENT)
        if dst_event < src_event:
            v(f"edge {graph.id_of(src)}->{graph.id_of(dst)} points to an earlier event")
        elif dst_event == src_event:
            s_stage = graph.node_types[src_var].stage
            d_stage = graph.node_types[dst_var].stage
            if s_stage >= d_stage:
                v(
                    f"edge {graph.id_of(src)}->{graph.id_of(dst)} violates stage order "
                    f"({graph.node_types[src_var].code} !< {graph.node_types[dst_var].code})"
                )

    in_deg = [0] * graph.n_nodes
    for _, dst in graph.iter_edges_flat():
        in_deg[dst] += 1
    for flat in range(graph.n_nodes):
        expected = _expected_in_degree(graph, flat)
        if expected is not None and in_deg[flat] != expected:
            v(f"node {graph.id_of(flat)} in-degree {in_deg[flat]}, expected {expected}")

    arm = Variable.ARM_BOARD.value
    theta = Variable.THETA.value
    for flat_event in range(n):
        base = flat_event * VARS_PER_EVENT
        if graph.values[base + arm] != 1.0:
            v(f"arm node {graph.id_of(base + arm)} value {graph.values[base + arm]} != 1.0")
        t = graph.values[base + theta]
        if not (-180.0 <= t < 180.0):
            v(f"theta node {graph.id_of(base + theta)} value {t} outside [-180, 180)")

    fwd_pairs = {(s, d) for s, d in graph.iter_edges_flat()}
    bwd_pairs = {(s, d) for d, preds in enumerate(graph.bwd) for s in preds}
    if fwd_pairs != bwd_pairs:
        v("forward and backward adjacency are not exact inverses")

    return report


# Export / import -------------------------------------------------------


def graph_rows(graph: TaintGraph) -> list[GraphInfoRow]:
    """Edge rows ordered by (source event, source variable, destination)."""
    rows: list[GraphInfoRow] = []
    empty: frozenset[str] = frozenset()
    for src, dst in graph.iter_edges_flat():
        src_id = graph.id_of(src)
        dst_id = graph.id_of(dst)
        rows.append(
            GraphInfoRow(
                src_id=format_node_id(src_id),
                dst_id=format_node_id(dst_id),
                value_s=graph.values[src],
                value_d=graph.values[dst],
                tags_s=graph.tags.get(src, empty),
                tags_d=graph.tags.get(dst, empty),
                type_s=graph.node_types[src % VARS_PER_EVENT],
                type_d=graph.node_types[dst % VARS_PER_EVENT],
            )
        )
    return rows


def export_edges(graph: TaintGraph, extended: bool = False) -> str:
    """Graph-info CSV with full node ids, one row per edge, deterministic order."""
    return emit_graph_info(graph_rows(graph), extended=extended)


def load_graph(text: str, cycle_len: int | None = None) -> TaintGraph:
    """Rebuild a TaintGraph from an exported graph-info CSV.

    The cycle length is inferred as max(event)+1, which is exact for
    rectangular runs; pass cycle_len explicitly for partial final
    cycles.  Plain 0/1 labels come back as the tag "tainted".
    """
    rows = parse_graph_info(text)
    if not rows:
        raise EmptyDataset("graph-info file holds no edges")

    if cycle_len is None:
        max_event = 0
        for r in rows:
            for cell in (r.src_id, r.dst_id):
                m = cell.split("-")
                if len(m) != 3:
                    raise MalformedId(f"node id {cell!r} does not match <cycle>-<event>-<variable>")
                try:
                    max_event = max(max_event, int(m[1]))
                except ValueError:
                    raise MalformedId(f"node id {cell!r} has non-integer components") from None
        cycle_len = max_event + 1

    node_types: list[NodeType | None] = [None] * VARS_PER_EVENT
    values: dict[int, float] = {}
    tags: dict[int, frozenset[str]] = {}
    edges: list[tuple[int, int]] = []

    def intern(id_text: str, value: float, node_tags: frozenset[str], node_type: NodeType) -> int:
        node_id = parse_node_id(id_text, cycle_len)
        flat = node_flat_index(node_id, cycle_len)
        var = node_id.variable.value
        if node_types[var] is None:
            node_types[var] = node_type
        elif node_types[var] is not node_type:
            raise InconsistentType(
                f"variable {var} typed both {node_types[var].code!r} and {node_type.code!r}"
            )
        seen = values.setdefault(flat, value)
        if seen != value:
            raise InconsistentType(f"node {id_text} carries two values: {seen} and {value}")
        if node_tags:
            tags[flat] = tags.get(flat, frozenset()) | node_tags
        return flat

    for r in rows:
        src = intern(r.src_id, r.value_s, r.tags_s, r.type_s)
        dst = intern(r.dst_id, r.value_d, r.tags_d, r.type_d)
        edges.append((src, dst))

    n_events = max(values) // VARS_PER_EVENT + 1
    n_nodes = n_events * VARS_PER_EVENT
    missing = [f for f in range(n_nodes) if f not in values]
    if missing:
        raise InconsistentType(
            f"{len(missing)} node(s) missing from the edge list, first at flat index {missing[0]}"
        )
    full_types = [t if t is not None else NodeType.SENSOR_DATA for t in node_types]

    fwd: list[list[int]] = [[] for _ in range(n_nodes)]
    bwd: list[list[int]] = [[] for _ in range(n_nodes)]
    for src, dst in edges:
        fwd[src].append(dst)
        bwd[dst].append(src)
    for adj in fwd:
        adj.sort()
    for adj in bwd:
        adj.sort()

    return TaintGraph(
        cycle_len=cycle_len,
        n_events=n_events,
        node_types=tuple(full_types),
        values=[values[f] for f in range(n_nodes)],
        tags=tags,
        fwd=fwd,
        bwd=bwd,
    )


# DOT rendering ---------------------------------------------------------

_DOT_HIGHLIGHT = ' style=filled fillcolor="orange"'


def export_dot(graph: TaintGraph, highlight: Iterable[NodeId] = ()) -> str:
    """Deterministic DOT text; events become clusters, highlighted nodes are filled."""
    marked = {graph.flat(n) for n in highlight}
    lines = [
        "digraph taint_graph {",
        "  rankdir=LR;",
        '  node [shape=box fontsize=10 fontname="monospace"];',
    ]
    for flat_event in range(graph.n_events):
        base = flat_event * VARS_PER_EVENT
        cycle, event = divmod(flat_event, graph.cycle_len)
        lines.append(f"  subgraph cluster_event_{flat_event} {{")
        lines.append(f'    label="cycle {cycle + 1} event {event}";')
        for var in range(VARS_PER_EVENT):
            flat = base + var
            node_id = graph.id_of(flat)
            name = Variable(var).display_name
            extra = _DOT_HIGHLIGHT if flat in marked else ""
            lines.append(
                f'    "{format_node_id(node_id)}" '
                f'[label="{format_node_id(node_id)}\\n{name}={graph.values[flat]!r}"{extra}];'
            )
        lines.append("  }")
    for src, dst in graph.iter_edges_flat():
        lines.append(f'  "{format_node_id(graph.id_of(src))}" -> "{format_node_id(graph.id_of(dst))}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
