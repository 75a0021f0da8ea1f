import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from pdnnsim.dataset import DatasetSpec, generate_dataset  # noqa: E402
from pdnnsim.network import ChipState, PhotonicChip, calibrate_operating_point  # noqa: E402
from pdnnsim.optics import ImageFormer  # noqa: E402
from pdnnsim.training import (  # noqa: E402
    TrainConfig,
    build_lookup_table,
    record_calibration_pixels,
    train_digital_twin,
    weights_to_currents,
)


@pytest.fixture(scope="session")
def former():
    return ImageFormer()


@pytest.fixture(scope="session")
def chip(former):
    c = PhotonicChip()
    return c.with_op(calibrate_operating_point(c, former.reference_frame()))


@pytest.fixture(scope="session")
def lut():
    return build_lookup_table()


def random_weights(rng, lo=0.05, hi=1.0):
    return (rng.uniform(lo, hi, (4, 12)), rng.uniform(lo, hi, (3, 4)), rng.uniform(lo, hi, (2, 3)))


def state_for(chip, weights, lut):
    from pdnnsim.training import WeightSolution

    currents, _ = weights_to_currents(WeightSolution(*weights), lut)
    return ChipState(currents, chip.aligned_heater_voltages(), chip.op.relu_biases)


@pytest.fixture(scope="session")
def two_class_solution(former):
    ds = generate_dataset(DatasetSpec(2, seed=11))
    px = record_calibration_pixels(ds.grids, former)
    return train_digital_twin(px, ds.labels, TrainConfig.for_classes(2, epochs=60)), ds


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[i])
