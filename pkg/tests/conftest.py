from dataclasses import replace

import pytest

from cptaint.ingest import default_template
from cptaint.model import Dataset, EventRecord


def synth_record(flat_event: int, speed_ref: float = 1000.0) -> EventRecord:
    """Deterministic, per-node-distinct values; theta stays in range."""
    e = flat_event
    return EventRecord(
        seconds=e / 1000.0,
        us_d=0.05 + 0.001 * e,
        us_q=-3.2 - 0.001 * e,
        m_PWM=0.4 + 1e-4 * e,
        is_a=0.1 + 0.01 * e,
        is_b=0.2 + 0.01 * e,
        is_c=-0.3 - 0.02 * e,
        theta=float((e * 37) % 360 - 180),
        omega_actual_mech=1000.0 + e,
        speed_ref=speed_ref,
    )


def synth_dataset(cycle_len: int, n_cycles: int) -> Dataset:
    n = cycle_len * n_cycles
    return Dataset(
        tuple(synth_record(e) for e in range(n)),
        cycle_len=cycle_len,
        n_cycles=n_cycles,
    )


def tamper(dataset: Dataset, flat_event: int, **fields) -> Dataset:
    """Copy of the dataset with one record's fields overwritten."""
    records = list(dataset.records)
    records[flat_event] = replace(records[flat_event], **fields)
    return replace(dataset, records=tuple(records))


@pytest.fixture
def template():
    return default_template()


@pytest.fixture
def dataset_e2():
    """Two events: one cycle of length 2."""
    return synth_dataset(2, 1)


@pytest.fixture
def dataset_e3():
    return synth_dataset(3, 1)
