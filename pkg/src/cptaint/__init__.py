"""Cyber-physical taint graphs and intrusion diagnosis for motor-drive event data."""

from .builder import (
    ValidationReport,
    build_graph,
    export_dot,
    export_edges,
    graph_rows,
    load_graph,
    validate_graph,
)
from .ingest import (
    GraphInfoRow,
    TemplateEdge,
    TopologyTemplate,
    default_template,
    emit_dataset,
    emit_graph_info,
    emit_template,
    expand_template,
    parse_dataset,
    parse_graph_info,
    parse_template,
)
from .model import (
    Dataset,
    EventRecord,
    NodeId,
    NodeType,
    TaintGraph,
    TaintNode,
    Variable,
    flat_event_index,
    format_node_id,
    parse_node_id,
)
from .sim import (
    ControllerParams,
    GroundTruthLog,
    Injection,
    InjectionKind,
    MotorParams,
    Scenario,
    clarke,
    inverse_clarke,
    inverse_park,
    park,
    parse_injection,
    parse_scenario_config,
    simulate,
    simulate_pair,
)
from .tracking import (
    CausingFactor,
    Classification,
    DiagnosisReport,
    MismatchPolicy,
    backward_taint,
    backward_trace,
    causing_factors,
    diagnose,
    first_mismatched_node,
    forward_taint,
    is_damaged,
    mismatch,
)

__version__ = "0.1.0"
