import pytest
from hypothesis import given
from hypothesis import strategies as st

from cptaint.errors import MalformedId, OutOfRange
from cptaint.model import (
    Dataset,
    EventRecord,
    NodeId,
    NodeType,
    TaintNode,
    Variable,
    flat_event_index,
    format_node_id,
    label_code,
    node_flat_index,
    node_id_from_flat,
    parse_node_id,
)
from conftest import synth_dataset, synth_record


def test_variable_mapping_is_fixed():
    assert Variable.SPEED_REF == 0
    assert Variable.ARM_BOARD == 1
    assert Variable.US_D == 2
    assert Variable.US_Q == 3
    assert Variable.M_PWM == 4
    assert Variable.IS_A == 5
    assert Variable.IS_B == 6
    assert Variable.IS_C == 7
    assert Variable.THETA == 8
    assert Variable.OMEGA_ACTUAL_MECH == 9
    # bijective index <-> name
    names = {v.display_name for v in Variable}
    assert len(names) == 10
    assert Variable.M_PWM.display_name == "m_PWM"


def test_node_type_codes():
    assert [t.code for t in NodeType] == ["ts", "arm", "an", "cs", "sd"]
    assert NodeType.from_code("sd") is NodeType.SENSOR_DATA
    stages = [NodeType.from_code(c).stage for c in ("ts", "arm", "an", "cs", "sd")]
    assert stages == [0, 1, 2, 3, 4]


def test_format_node_id_examples():
    assert format_node_id(NodeId(66, 35, Variable(4))) == "66-35-4"
    assert format_node_id(NodeId(1, 0, Variable(0))) == "1-0-0"
    assert format_node_id(NodeId(1, 1, Variable(9))) == "1-1-9"


def test_parse_node_id_examples():
    assert parse_node_id("66-35-04", cycle_len=64) == NodeId(66, 35, Variable(4))
    assert parse_node_id("1-0-0", cycle_len=64) == NodeId(1, 0, Variable(0))
    with pytest.raises(OutOfRange):
        parse_node_id("1-64-0", cycle_len=64)


@pytest.mark.parametrize("bad", ["", "1-2", "1-2-3-4", "a-b-c", "1.5-0-0", "-1-0-0", "1- 0-0"])
def test_parse_node_id_malformed(bad):
    with pytest.raises(MalformedId):
        parse_node_id(bad, cycle_len=64)


@pytest.mark.parametrize("bad", ["0-0-0", "1-0-10", "1-99-0"])
def test_parse_node_id_out_of_range(bad):
    with pytest.raises(OutOfRange):
        parse_node_id(bad, cycle_len=64)


@given(
    cycle=st.integers(min_value=1, max_value=10_000),
    event=st.integers(min_value=0, max_value=63),
    var=st.integers(min_value=0, max_value=9),
)
def test_parse_format_round_trip(cycle, event, var):
    node = NodeId(cycle, event, Variable(var))
    assert parse_node_id(format_node_id(node), cycle_len=64) == node


@given(
    a=st.tuples(st.integers(1, 50), st.integers(0, 7), st.integers(0, 9)),
    b=st.tuples(st.integers(1, 50), st.integers(0, 7), st.integers(0, 9)),
)
def test_order_agrees_with_flat_index(a, b):
    cycle_len = 8
    na = NodeId(a[0], a[1], Variable(a[2]))
    nb = NodeId(b[0], b[1], Variable(b[2]))
    key_a = (flat_event_index(na, cycle_len), na.variable.value)
    key_b = (flat_event_index(nb, cycle_len), nb.variable.value)
    assert (na < nb) == (key_a < key_b)
    assert (na == nb) == (key_a == key_b)


def test_flat_index_bijection():
    cycle_len, n_events = 4, 12
    seen = set()
    for flat in range(n_events * 10):
        node = node_id_from_flat(flat, cycle_len)
        assert node_flat_index(node, cycle_len) == flat
        seen.add(node)
    assert len(seen) == n_events * 10


def test_taint_node_invariants():
    arm = TaintNode(NodeId(1, 0, Variable.ARM_BOARD), NodeType.ARM, 1.0)
    assert not arm.tainted
    with pytest.raises(OutOfRange):
        TaintNode(NodeId(1, 0, Variable.ARM_BOARD), NodeType.ARM, 2.0)
    with pytest.raises(OutOfRange):
        TaintNode(NodeId(1, 0, Variable.THETA), NodeType.SENSOR_DATA, 180.0)
    ok = TaintNode(NodeId(1, 0, Variable.THETA), NodeType.SENSOR_DATA, -180.0)
    assert ok.value == -180.0


def test_label_code():
    assert label_code(frozenset()) == "0"
    assert label_code(frozenset({"s1"})) == "1"
    assert label_code(frozenset({"s1", "s2"})) == "1"


def test_event_record_value_of():
    rec = synth_record(3)
    assert rec.value_of(Variable.SPEED_REF) == rec.speed_ref
    assert rec.value_of(Variable.ARM_BOARD) == 1.0
    assert rec.value_of(Variable.US_D) == rec.us_d
    assert rec.value_of(Variable.OMEGA_ACTUAL_MECH) == rec.omega_actual_mech


def test_dataset_shape_validation():
    ds = synth_dataset(2, 3)
    assert ds.n_events == 6
    with pytest.raises(OutOfRange):
        Dataset(ds.records, cycle_len=2, n_cycles=4)
    with pytest.raises(OutOfRange):
        Dataset(ds.records, cycle_len=2, n_cycles=2)
    # partial final cycle is representable when explicitly constructed
    partial = Dataset(ds.records[:5], cycle_len=2, n_cycles=3)
    assert partial.n_events == 5
