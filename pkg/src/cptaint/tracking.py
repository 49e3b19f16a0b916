"""Forward/backward taint tracking and intrusion diagnosis.

Forward tracking answers "if X is compromised, what is the damage?";
backward tracking answers "if damage Y is observed, which nodes could
have caused it?".  Backward candidates are screened by comparing node
values against a clean baseline run recorded under the same
configuration; the pattern of mismatching node types then classifies
the root cause as cyber or physical.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import MissingBaseline, ShapeMismatch, UnknownNode
from .model import (
    VARS_PER_EVENT,
    Dataset,
    NodeId,
    NodeType,
    TaintGraph,
    TaintNode,
    Variable,
    format_node_id,
)

#: node types living in the controller (cyber) half of an event
CYBER_TYPES = frozenset(
    {NodeType.TAINT_SOURCE, NodeType.ARM, NodeType.ATTRIBUTE, NodeType.CONTROL_SIGNAL}
)


# Reachability ----------------------------------------------------------


def _bfs(adj: list[list[int]], start: Iterable[int]) -> set[int]:
    seen = set(start)
    queue = deque(seen)
    while queue:
        for nxt in adj[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def forward_taint(graph: TaintGraph, sources: Iterable[NodeId]) -> set[NodeId]:
    """All nodes reachable from the sources, sources included: the damage set."""
    flats = [graph.flat(s) for s in sources]
    return {graph.id_of(f) for f in _bfs(graph.fwd, flats)}


def backward_taint(graph: TaintGraph, sink: NodeId) -> set[NodeId]:
    """All nodes from which the sink is reachable, sink included: the causal cone."""
    return {graph.id_of(f) for f in _bfs(graph.bwd, [graph.flat(sink)])}


def backward_trace(graph: TaintGraph, sink: NodeId) -> list[list[NodeId]]:
    """Backward reachability grouped in BFS layers from the sink.

    layer 0 is the sink itself; layer k holds nodes first reached after
    k backward steps, each layer sorted by node id.
    """
    layers: list[list[NodeId]] = []
    seen = {graph.flat(sink)}
    frontier = [graph.flat(sink)]
    while frontier:
        layers.append(sorted(graph.id_of(f) for f in frontier))
        nxt: set[int] = set()
        for flat in frontier:
            for pred in graph.bwd[flat]:
                if pred not in seen:
                    seen.add(pred)
                    nxt.add(pred)
        frontier = sorted(nxt)
    return layers


def is_damaged(graph: TaintGraph, x: NodeId, y: NodeId) -> bool:
    """Would y be part of the damage if x were compromised?"""
    target = graph.flat(y)
    start = graph.flat(x)
    if start == target:
        return True
    seen = {start}
    queue = deque((start,))
    while queue:
        for nxt in graph.fwd[queue.popleft()]:
            if nxt == target:
                return True
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False


# Baseline comparison ---------------------------------------------------


@dataclass(frozen=True)
class MismatchPolicy:
    """Thresholds for flagging a node value as deviating from baseline.

    A value mismatches when |v - b| > max(abs_tol, rel_tol * |b|); the
    absolute floor is per-variable (abs_tol_overrides wins over the
    shared abs_tol).  With angle_aware set, theta deviations are
    measured as shortest angular distance on the circle.
    """

    rel_tol: float = 0.05
    abs_tol: float = 0.01
    abs_tol_overrides: Mapping[Variable, float] = field(default_factory=dict)
    angle_aware: bool = True

    def __post_init__(self) -> None:
        if self.rel_tol < 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be >= 0")

    def abs_tol_for(self, variable: Variable) -> float:
        return self.abs_tol_overrides.get(variable, self.abs_tol)


def angular_distance(a_deg: float, b_deg: float) -> float:
    """Shortest distance between two angles, degrees in [0, 180]."""
    return abs((a_deg - b_deg + 180.0) % 360.0 - 180.0)


def mismatch(node: TaintNode, baseline_value: float | None, policy: MismatchPolicy) -> bool:
    """True when the node's value deviates beyond the policy thresholds."""
    if baseline_value is None:
        raise MissingBaseline(f"no baseline value for node {format_node_id(node.id)}")
    if policy.angle_aware and node.id.variable is Variable.THETA:
        delta = angular_distance(node.value, baseline_value)
    else:
        delta = abs(node.value - baseline_value)
    return delta > max(policy.abs_tol_for(node.id.variable), policy.rel_tol * abs(baseline_value))


def _deviation(value: float, baseline: float, variable: Variable, policy: MismatchPolicy) -> float:
    if policy.angle_aware and variable is Variable.THETA:
        delta = angular_distance(value, baseline)
    else:
        delta = abs(value - baseline)
    return delta / max(abs(baseline), 1e-12)


def _check_shape(graph: TaintGraph, baseline: Dataset) -> None:
    if baseline.n_events != graph.n_events or baseline.cycle_len != graph.cycle_len:
        raise ShapeMismatch(
            f"baseline is {baseline.n_events} events of cycle {baseline.cycle_len}, "
            f"graph is {graph.n_events} of cycle {graph.cycle_len}"
        )


@dataclass(frozen=True)
class CausingFactor:
    """One backward-set node annotated against the baseline."""

    node_id: NodeId
    mismatch: bool
    deviation: float


def causing_factors(
    graph: TaintGraph,
    baseline: Dataset,
    y: NodeId,
    policy: MismatchPolicy = MismatchPolicy(),
) -> list[CausingFactor]:
    """Backward set of y annotated with baseline mismatches.

    Ordered newest event first (then variable), so the suspicious
    candidates closest to the observed damage come first.
    """
    _check_shape(graph, baseline)
    members = sorted(
        backward_taint(graph, y),
        key=lambda n: (-(graph.flat(n) // VARS_PER_EVENT), n.variable.value),
    )
    out: list[CausingFactor] = []
    for node_id in members:
        flat_event = graph.flat(node_id) // VARS_PER_EVENT
        base_value = baseline.value(flat_event, node_id.variable)
        node = graph.node(node_id)
        out.append(
            CausingFactor(
                node_id=node_id,
                mismatch=mismatch(node, base_value, policy),
                deviation=_deviation(node.value, base_value, node_id.variable, policy),
            )
        )
    return out


def first_mismatched_node(
    graph: TaintGraph,
    baseline: Dataset,
    variable: Variable,
    policy: MismatchPolicy = MismatchPolicy(),
) -> NodeId | None:
    """Earliest node of the given variable that deviates from baseline."""
    _check_shape(graph, baseline)
    for flat_event in range(graph.n_events):
        node_id = graph.id_of(flat_event * VARS_PER_EVENT + variable.value)
        base_value = baseline.value(flat_event, variable)
        if mismatch(graph.node(node_id), base_value, policy):
            return node_id
    return None


# Diagnosis -------------------------------------------------------------


class Classification(Enum):
    CYBER_CANDIDATE = "CyberCandidate"
    PHYSICAL_CANDIDATE = "PhysicalCandidate"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class DiagnosisReport:
    """Answers to the four intrusion-diagnosis questions for one observation.

    q1: backward step sequences from the damage to mismatched nodes;
    q2: components reachable from mismatched cyber nodes, by type;
    q3: the earliest mismatched node (entry-point estimate);
    q4: cyber-vs-physical classification of the root cause.
    """

    damage_node: NodeId
    backward_set: set[NodeId]
    mismatched: set[NodeId]
    q1_paths: list[list[NodeId]]
    q2_components: dict[NodeType, set[NodeId]]
    q3_entry_point: NodeId | None
    q4_classification: Classification

    def to_text(self) -> str:
        def ids(nodes: Iterable[NodeId]) -> str:
            return " ".join(format_node_id(n) for n in sorted(nodes))

        lines = [
            f"damage_node: {format_node_id(self.damage_node)}",
            f"classification: {self.q4_classification.value}",
            "entry_point: "
            + (format_node_id(self.q3_entry_point) if self.q3_entry_point else "none"),
            f"backward_set_size: {len(self.backward_set)}",
            f"mismatched: {ids(self.mismatched) if self.mismatched else 'none'}",
            f"paths: {len(self.q1_paths)}",
        ]
        for path in self.q1_paths:
            lines.append("  " + " <- ".join(format_node_id(n) for n in path))
        for node_type in sorted(self.q2_components, key=lambda t: t.stage):
            lines.append(
                f"compromised[{node_type.code}]: {ids(self.q2_components[node_type])}"
            )
        return "\n".join(lines) + "\n"


def _backward_paths(
    graph: TaintGraph, start: int, targets: set[int], max_paths: int
) -> list[list[int]]:
    """Depth-first path enumeration from start along backward edges.

    Every path prefix ending on a target is recorded.  Predecessors are
    visited lower variable first; enumeration stops at max_paths.  The
    walk is pruned to ancestors that still lead to a target, which keeps
    the cost near max_paths * path length instead of the exponential
    path count.
    """
    if not targets or max_paths <= 0:
        return []
    live = _bfs(graph.fwd, targets)  # nodes with a target among their ancestors-or-self
    if start not in live:
        return []

    def live_preds(flat: int) -> list[int]:
        return sorted(
            (f for f in graph.bwd[flat] if f in live),
            key=lambda f: (f % VARS_PER_EVENT, f),
        )

    paths: list[list[int]] = []
    path = [start]
    pending = [iter(live_preds(start))]
    if start in targets:
        paths.append(list(path))
    while pending and len(paths) < max_paths:
        nxt = next(pending[-1], None)
        if nxt is None:
            pending.pop()
            path.pop()
            continue
        path.append(nxt)
        pending.append(iter(live_preds(nxt)))
        if nxt in targets:
            paths.append(list(path))
    return paths


def diagnose(
    graph: TaintGraph,
    baseline: Dataset,
    y: NodeId,
    policy: MismatchPolicy = MismatchPolicy(),
    max_paths: int = 10,
) -> DiagnosisReport:
    """Run the full backward diagnosis for an observed damage node y."""
    _check_shape(graph, baseline)
    back = backward_taint(graph, y)

    mismatched: set[NodeId] = set()
    for node_id in back:
        flat_event = graph.flat(node_id) // VARS_PER_EVENT
        base_value = baseline.value(flat_event, node_id.variable)
        if mismatch(graph.node(node_id), base_value, policy):
            mismatched.add(node_id)

    targets = {graph.flat(n) for n in mismatched}
    q1_paths = [
        [graph.id_of(f) for f in path]
        for path in _backward_paths(graph, graph.flat(y), targets, max_paths)
    ]

    cyber_mismatched = [
        n for n in mismatched if graph.node_type_of(n.variable) in CYBER_TYPES
    ]
    q2: dict[NodeType, set[NodeId]] = {}
    if cyber_mismatched:
        for node_id in forward_taint(graph, cyber_mismatched):
            q2.setdefault(graph.node_type_of(node_id.variable), set()).add(node_id)

    q3: NodeId | None = None
    if mismatched:
        q3 = min(
            mismatched,
            key=lambda n: (
                graph.flat(n) // VARS_PER_EVENT,
                graph.node_type_of(n.variable).stage,
                n.variable.value,
            ),
        )

    if not mismatched:
        q4 = Classification.INCONCLUSIVE
    elif cyber_mismatched:
        q4 = Classification.CYBER_CANDIDATE
    else:
        q4 = Classification.PHYSICAL_CANDIDATE

    return DiagnosisReport(
        damage_node=y,
        backward_set=back,
        mismatched=mismatched,
        q1_paths=q1_paths,
        q2_components=q2,
        q3_entry_point=q3,
        q4_classification=q4,
    )
