"""Domain types shared by the whole toolkit.

A run of E one-millisecond events is modelled as 10 nodes per event
(one per control variable, plus the controller board itself) wired by a
fixed per-event topology.  Node identity is hierarchical:
cycle (1-based) / event within the cycle (0-based) / variable index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterator, Mapping

from .errors import EmptyDataset, MalformedId, OutOfRange, UnknownNode, UnknownNodeType

#: events per control step are 1 ms apart
DT_CONTROL = 0.001

#: number of graph nodes per event
VARS_PER_EVENT = 10


class Variable(IntEnum):
    """Fixed variable-id assignment for the ten per-event nodes."""

    SPEED_REF = 0
    ARM_BOARD = 1
    US_D = 2
    US_Q = 3
    M_PWM = 4
    IS_A = 5
    IS_B = 6
    IS_C = 7
    THETA = 8
    OMEGA_ACTUAL_MECH = 9

    @property
    def display_name(self) -> str:
        return _VARIABLE_NAMES[self]


_VARIABLE_NAMES = {
    Variable.SPEED_REF: "speed_ref",
    Variable.ARM_BOARD: "arm_board",
    Variable.US_D: "us_d",
    Variable.US_Q: "us_q",
    Variable.M_PWM: "m_PWM",
    Variable.IS_A: "is_a",
    Variable.IS_B: "is_b",
    Variable.IS_C: "is_c",
    Variable.THETA: "theta",
    Variable.OMEGA_ACTUAL_MECH: "omega_actual_mech",
}


class NodeType(Enum):
    """Node role inside one event. Text codes are the wire format."""

    TAINT_SOURCE = "ts"
    ARM = "arm"
    ATTRIBUTE = "an"
    CONTROL_SIGNAL = "cs"
    SENSOR_DATA = "sd"

    @property
    def code(self) -> str:
        return self.value

    @property
    def stage(self) -> int:
        """Position in the intra-event flow order ts < arm < an < cs < sd."""
        return _STAGE[self]

    @classmethod
    def from_code(cls, code: str) -> "NodeType":
        try:
            return cls(code)
        except ValueError:
            raise UnknownNodeType(f"unknown node type code {code!r}") from None


_STAGE = {
    NodeType.TAINT_SOURCE: 0,
    NodeType.ARM: 1,
    NodeType.ATTRIBUTE: 2,
    NodeType.CONTROL_SIGNAL: 3,
    NodeType.SENSOR_DATA: 4,
}


#: default variable -> node-type assignment of the standard topology
DEFAULT_NODE_TYPES: Mapping[Variable, NodeType] = {
    Variable.SPEED_REF: NodeType.TAINT_SOURCE,
    Variable.ARM_BOARD: NodeType.ARM,
    Variable.US_D: NodeType.ATTRIBUTE,
    Variable.US_Q: NodeType.ATTRIBUTE,
    Variable.M_PWM: NodeType.CONTROL_SIGNAL,
    Variable.IS_A: NodeType.SENSOR_DATA,
    Variable.IS_B: NodeType.SENSOR_DATA,
    Variable.IS_C: NodeType.SENSOR_DATA,
    Variable.THETA: NodeType.SENSOR_DATA,
    Variable.OMEGA_ACTUAL_MECH: NodeType.SENSOR_DATA,
}


@dataclass(frozen=True, order=True)
class NodeId:
    """Hierarchical node identity; orders lexicographically on (cycle, event, variable)."""

    cycle: int
    event: int
    variable: Variable

    def __post_init__(self) -> None:
        if self.cycle < 1:
            raise OutOfRange(f"cycle must be >= 1, got {self.cycle}")
        if self.event < 0:
            raise OutOfRange(f"event must be >= 0, got {self.event}")
        if not isinstance(self.variable, Variable):
            object.__setattr__(self, "variable", Variable(self.variable))

    def __str__(self) -> str:
        return format_node_id(self)


def format_node_id(node_id: NodeId) -> str:
    """Canonical unpadded text form "<cycle>-<event>-<variable>"."""
    return f"{node_id.cycle}-{node_id.event}-{node_id.variable.value}"


_NODE_ID_RE = re.compile(r"^(\d+)-(\d+)-(\d+)$")


def parse_node_id(text: str, cycle_len: int) -> NodeId:
    """Parse "<cycle>-<event>-<variable>"; zero padding is accepted.

    Raises MalformedId on shape errors and OutOfRange when the event does
    not fit the cycle length or the variable/cycle is out of range.
    """
    m = _NODE_ID_RE.match(text.strip())
    if m is None:
        raise MalformedId(f"node id {text!r} does not match <cycle>-<event>-<variable>")
    cycle, event, variable = (int(g) for g in m.groups())
    if cycle < 1:
        raise OutOfRange(f"cycle must be >= 1 in {text!r}")
    if event >= cycle_len:
        raise OutOfRange(f"event {event} >= cycle length {cycle_len} in {text!r}")
    if variable >= VARS_PER_EVENT:
        raise OutOfRange(f"variable {variable} > 9 in {text!r}")
    return NodeId(cycle, event, Variable(variable))


def flat_event_index(node_id: NodeId, cycle_len: int) -> int:
    """Position of the node's event in the flattened run: (cycle-1)*cycle_len + event."""
    return (node_id.cycle - 1) * cycle_len + node_id.event


def node_flat_index(node_id: NodeId, cycle_len: int) -> int:
    """Dense storage index: flat event index * 10 + variable."""
    return flat_event_index(node_id, cycle_len) * VARS_PER_EVENT + node_id.variable.value


def node_id_from_flat(flat: int, cycle_len: int) -> NodeId:
    """Inverse of node_flat_index."""
    event_idx, variable = divmod(flat, VARS_PER_EVENT)
    cycle, event = divmod(event_idx, cycle_len)
    return NodeId(cycle + 1, event, Variable(variable))


@dataclass(frozen=True)
class TaintNode:
    """A typed, valued, taint-labelled graph node.

    Values carry engineering units per variable (V for us_d/us_q, A for
    phase currents, degrees for theta, rpm for speeds, unitless for the
    modulation index); the controller-board node is the constant 1.0.
    """

    id: NodeId
    node_type: NodeType
    value: float
    labels: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.id.variable is Variable.ARM_BOARD and self.value != 1.0:
            raise OutOfRange(f"arm node {self.id} must carry value 1.0, got {self.value}")
        if self.id.variable is Variable.THETA and not (-180.0 <= self.value < 180.0):
            raise OutOfRange(f"theta node {self.id} outside [-180, 180): {self.value}")

    @property
    def tainted(self) -> bool:
        return bool(self.labels)


def label_code(labels: frozenset[str]) -> str:
    """Wire form of a taint label: "0" untainted, "1" tainted."""
    return "1" if labels else "0"


# Dataset ---------------------------------------------------------------

#: dataset CSV columns, in file order, excluding the leading seconds column
DATA_COLUMNS = (
    "us_d",
    "us_q",
    "m_PWM",
    "is_a",
    "is_b",
    "is_c",
    "theta",
    "omega_actual_mech",
)

SPEED_REF_COLUMN = "speed_ref"


@dataclass(frozen=True)
class EventRecord:
    """One millisecond of collected control variables plus the speed command."""

    seconds: float
    us_d: float
    us_q: float
    m_PWM: float
    is_a: float
    is_b: float
    is_c: float
    theta: float
    omega_actual_mech: float
    speed_ref: float

    def value_of(self, variable: Variable) -> float:
        """Graph node value for this event; the board node is fixed at 1.0."""
        if variable is Variable.ARM_BOARD:
            return 1.0
        if variable is Variable.SPEED_REF:
            return self.speed_ref
        return getattr(self, DATA_COLUMNS[variable.value - 2])


@dataclass(frozen=True)
class Dataset:
    """Ordered 1 ms event records arranged as n_cycles cycles of cycle_len events."""

    records: tuple[EventRecord, ...]
    cycle_len: int = 64
    n_cycles: int = 99

    def __post_init__(self) -> None:
        if self.cycle_len < 1 or self.n_cycles < 1:
            raise OutOfRange("cycle_len and n_cycles must be >= 1")
        n = len(self.records)
        if not (self.cycle_len * (self.n_cycles - 1) < n <= self.cycle_len * self.n_cycles):
            raise OutOfRange(
                f"{n} records do not fit {self.n_cycles} cycles of {self.cycle_len}"
            )

    @property
    def n_events(self) -> int:
        return len(self.records)

    def record(self, flat_event: int) -> EventRecord:
        return self.records[flat_event]

    def value(self, flat_event: int, variable: Variable) -> float:
        return self.records[flat_event].value_of(variable)


# Taint graph -----------------------------------------------------------


@dataclass
class TaintGraph:
    """Immutable DAG over all events of a run.

    Storage is flat: node n = flat_event*10 + variable, adjacency lists are
    lists of flat indices.  The structure is frozen once built; all
    accessors are read-only and safe to share across threads.
    """

    cycle_len: int
    n_events: int
    node_types: tuple[NodeType, ...]  # variable index -> type
    values: list[float]  # flat node index -> value
    tags: dict[int, frozenset[str]]  # flat node index -> scenario tags (sparse)
    fwd: list[list[int]]  # flat node index -> successor flats, ascending
    bwd: list[list[int]]  # flat node index -> predecessor flats, ascending

    @property
    def n_nodes(self) -> int:
        return self.n_events * VARS_PER_EVENT

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.fwd)

    def contains(self, node_id: NodeId) -> bool:
        return (
            0 <= node_id.event < self.cycle_len
            and 0 <= flat_event_index(node_id, self.cycle_len) < self.n_events
        )

    def flat(self, node_id: NodeId) -> int:
        if not self.contains(node_id):
            raise UnknownNode(f"node {format_node_id(node_id)} not in graph")
        return node_flat_index(node_id, self.cycle_len)

    def id_of(self, flat: int) -> NodeId:
        return node_id_from_flat(flat, self.cycle_len)

    def node(self, node_id: NodeId) -> TaintNode:
        flat = self.flat(node_id)
        return TaintNode(
            id=node_id,
            node_type=self.node_types[node_id.variable.value],
            value=self.values[flat],
            labels=self.tags.get(flat, frozenset()),
        )

    def node_type_of(self, variable: Variable) -> NodeType:
        return self.node_types[variable.value]

    def labels_of(self, node_id: NodeId) -> frozenset[str]:
        return self.tags.get(self.flat(node_id), frozenset())

    def successors(self, node_id: NodeId) -> list[NodeId]:
        return [self.id_of(f) for f in self.fwd[self.flat(node_id)]]

    def predecessors(self, node_id: NodeId) -> list[NodeId]:
        return [self.id_of(f) for f in self.bwd[self.flat(node_id)]]

    def iter_node_ids(self) -> Iterator[NodeId]:
        for flat in range(self.n_nodes):
            yield self.id_of(flat)

    def iter_edges_flat(self) -> Iterator[tuple[int, int]]:
        """Edges ordered by (source flat index, destination flat index)."""
        for src, succs in enumerate(self.fwd):
            for dst in succs:
                yield src, dst

    def require_nonempty(self) -> None:
        if self.n_events == 0:
            raise EmptyDataset("graph holds no events")
