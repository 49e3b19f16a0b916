import pytest

from cptaint.errors import (
    HeaderMismatch,
    InconsistentType,
    NonMonotoneTime,
    NumericParse,
    RowCountMismatch,
    StageViolation,
    UnknownNodeType,
)
from cptaint.ingest import (
    default_template,
    emit_dataset,
    emit_graph_info,
    emit_template,
    expand_template,
    parse_dataset,
    parse_graph_info,
    parse_template,
)
from cptaint.model import NodeType, Variable
from cptaint.sim import Scenario, simulate
from conftest import synth_dataset

# First five rows of the testbed capture used throughout the docs.
SNIPPET_HEADER = "seconds,us_d,us_q,m_PWM,is_a,is_b,is_c,theta,omega_actual_mech"
SNIPPET_ROWS = [
    "0,0.0591724,-3.25714,0.490139,0.0040703,0.0557747,-0.059845,63.3087,1023.32",
    "0.001,0.00780477,-3.29621,0.411041,-0.209606,0.162613,0.0469933,178.248,1001.01",
    "0.002,-0.0758674,-3.27923,0.341721,-0.316444,0.299976,0.016468,-32.333,961.48",
    "0.003,-0.0818229,-3.21599,0.290157,-0.163818,0.406815,-0.242996,-159.07,954.77",
    "0.004,0.011224,-3.18299,0.273483,-0.011192,0.345764,-0.334572,-84.919,996.79",
]
SNIPPET_CSV = SNIPPET_HEADER + "\n" + "\n".join(SNIPPET_ROWS) + "\n"


def snippet_dataset(speed_ref=1000.0):
    return parse_dataset(SNIPPET_CSV, cycle_len=5, n_cycles=1, speed_ref_default=speed_ref)


# Dataset CSV ------------------------------------------------------------


def test_parse_snippet_first_row():
    ds = snippet_dataset()
    rec = ds.records[0]
    assert rec.seconds == 0.0
    assert rec.us_d == 0.0591724
    assert rec.us_q == -3.25714
    assert rec.m_PWM == 0.490139
    assert rec.is_a == 0.0040703
    assert rec.is_b == 0.0557747
    assert rec.is_c == -0.059845
    assert rec.theta == 63.3087
    assert rec.omega_actual_mech == 1023.32
    assert rec.speed_ref == 1000.0  # filled from the default


def test_dataset_round_trip_is_value_exact():
    ds = snippet_dataset()
    text = emit_dataset(ds, include_speed_ref=False)
    again = parse_dataset(text, cycle_len=5, n_cycles=1, speed_ref_default=1000.0)
    assert again == ds
    # shortest round-trip printing reproduces the canonical cells verbatim
    for cell in ("0.0591724", "-3.25714", "0.490139", "178.248", "-159.07", "1023.32"):
        assert cell in text


def test_dataset_speed_ref_column_round_trip():
    ds = snippet_dataset(speed_ref=123.5)
    text = emit_dataset(ds)
    assert text.splitlines()[0].endswith(",speed_ref")
    again = parse_dataset(text, cycle_len=5, n_cycles=1)
    assert again.records[0].speed_ref == 123.5


def test_parse_dataset_from_two_cycle_simulator_run():
    ds, _ = simulate(scenario=Scenario(cycles=2, cycle_len=64))
    text = emit_dataset(ds)
    parsed = parse_dataset(text, cycle_len=64, n_cycles=2)
    assert parsed.n_events == 128
    assert parsed.records[0].seconds == 0.0
    assert parsed.records[-1].seconds == 0.127
    assert parsed == ds


def test_parse_dataset_errors():
    with pytest.raises(HeaderMismatch):
        parse_dataset("", cycle_len=5, n_cycles=1)
    with pytest.raises(HeaderMismatch):
        parse_dataset("time,us_d\n0,1\n", cycle_len=5, n_cycles=1)
    with pytest.raises(RowCountMismatch):
        parse_dataset(SNIPPET_CSV, cycle_len=5, n_cycles=2)
    bad_time = SNIPPET_CSV.replace("0.004,", "0.009,")
    with pytest.raises(NonMonotoneTime):
        parse_dataset(bad_time, cycle_len=5, n_cycles=1)
    bad_cell = SNIPPET_CSV.replace("963.3087", "x").replace("63.3087", "x")
    with pytest.raises(NumericParse):
        parse_dataset(bad_cell, cycle_len=5, n_cycles=1)


def test_parse_dataset_allow_partial():
    ds = parse_dataset(SNIPPET_CSV, cycle_len=3, n_cycles=9, allow_partial=True)
    assert ds.n_events == 5
    assert ds.n_cycles == 2


# Template ---------------------------------------------------------------


def test_default_template_shape():
    t = default_template()
    assert len(t.edges) == 15
    assert len(t.intra_edges) == 10
    assert len(t.cross_edges) == 5
    first = t.edges[0]
    assert (first.src, first.dst, first.crosses_event) == (Variable(0), Variable(1), False)
    assert (first.src_type, first.dst_type) == (NodeType.TAINT_SOURCE, NodeType.ARM)
    last = t.edges[-1]
    assert (last.src, last.dst, last.crosses_event) == (Variable(9), Variable(1), True)
    assert (last.src_type, last.dst_type) == (NodeType.SENSOR_DATA, NodeType.ARM)
    intra_pairs = {(e.src.value, e.dst.value) for e in t.intra_edges}
    assert intra_pairs == {(0, 1), (1, 2), (1, 3), (2, 4), (3, 4), (4, 5), (4, 6), (4, 7), (4, 8), (4, 9)}
    cross_pairs = {(e.src.value, e.dst.value) for e in t.cross_edges}
    assert cross_pairs == {(5, 1), (6, 1), (7, 1), (8, 1), (9, 1)}
    assert t.type_of(Variable(4)) is NodeType.CONTROL_SIGNAL


def test_template_round_trip():
    t = default_template()
    assert parse_template(emit_template(t)) == t


def test_parse_template_accepts_seed_rows_with_values():
    text = (
        "source_node,destination_node,value_s,value_d,taint_label_s,taint_label_d,node_type_s,node_type_d\n"
        "0,1,N/A,1.0,1,0,ts,arm\n"
        "1,2,1.0,0.0591724,0,0,arm,an\n"
        "1,3,1.0,-3.25714,0,0,arm,an\n"
        "2,4,0.0591724,0.490139,0,0,an,cs\n"
        "3,4,-3.25714,0.490139,0,0,an,cs\n"
        "4,5,0.490139,0.0040703,0,0,cs,sd\n"
        "4,6,0.490139,0.0557747,0,0,cs,sd\n"
        "4,7,0.490139,-0.059845,0,0,cs,sd\n"
        "4,8,0.490139,63.3087,0,0,cs,sd\n"
        "4,9,0.490139,1023.32,0,0,cs,sd\n"
        "5,1,0.0040703,1.0,0,0,sd,arm\n"
        "6,1,0.0557747,1.0,0,0,sd,arm\n"
        "7,1,-0.059845,1.0,0,0,sd,arm\n"
        "8,1,63.3087,1.0,0,0,sd,arm\n"
        "9,1,1023.32,1.0,0,0,sd,arm\n"
    )
    t = parse_template(text)
    assert t == default_template()
    # sd -> arm rows were recognized as next-event edges
    assert all(e.crosses_event for e in t.edges if e.src_type is NodeType.SENSOR_DATA)


def test_parse_template_errors():
    header = "source_node,destination_node,value_s,value_d,taint_label_s,taint_label_d,node_type_s,node_type_d\n"
    with pytest.raises(HeaderMismatch):
        parse_template("a,b\n")
    with pytest.raises(StageViolation):
        parse_template(header + "4,2,0,0,0,0,cs,an\n")
    with pytest.raises(UnknownNodeType):
        parse_template(header + "0,1,0,0,0,0,xx,arm\n")
    with pytest.raises(InconsistentType):
        parse_template(header + "0,1,0,0,0,0,ts,arm\n1,2,0,0,0,0,an,cs\n")


# Expansion --------------------------------------------------------------


def test_expand_single_event_has_no_cross_edges(template):
    ds = synth_dataset(1, 1)
    rows = expand_template(template, ds)
    assert len(rows) == 10
    assert all(r.src_id.startswith("1-0-") and r.dst_id.startswith("1-0-") for r in rows)


def test_expand_two_events(template, dataset_e2):
    rows = expand_template(template, dataset_e2)
    assert len(rows) == 25  # 10 + 5 + 10


@pytest.mark.parametrize("cycle_len,n_cycles", [(1, 1), (2, 1), (3, 1), (4, 2), (5, 3)])
def test_expand_row_count_formula(template, cycle_len, n_cycles):
    ds = synth_dataset(cycle_len, n_cycles)
    rows = expand_template(template, ds)
    e = ds.n_events
    assert len(rows) == 10 * e + 5 * (e - 1)


def test_expand_event0_values_match_snippet(template):
    ds = snippet_dataset()
    rows = expand_template(template, ds)
    row_1_3 = next(r for r in rows if r.src_id == "1-0-1" and r.dst_id == "1-0-3")
    assert row_1_3.value_s == 1.0
    assert row_1_3.value_d == -3.25714
    cross = next(r for r in rows if r.src_id == "1-0-9")
    assert cross.dst_id == "1-1-1"
    assert cross.value_s == 1023.32
    assert cross.value_d == 1.0


def test_expand_values_are_bit_exact(template, dataset_e3):
    rows = expand_template(template, dataset_e3)
    for r in rows:
        for node, value in ((r.src_id, r.value_s), (r.dst_id, r.value_d)):
            cycle, event, var = (int(x) for x in node.split("-"))
            expected = dataset_e3.value((cycle - 1) * 3 + event, Variable(var))
            assert value == expected


def test_graph_info_round_trip(template, dataset_e2):
    rows = expand_template(template, dataset_e2)
    assert parse_graph_info(emit_graph_info(rows)) == rows
    assert parse_graph_info(emit_graph_info(rows, extended=True)) == rows
