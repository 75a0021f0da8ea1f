import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_weights
from oracles import attenuator_t, central_difference, rel_err
from pdnnsim.errors import TrainingError, ValidationError
from pdnnsim.network import ChipState, forward, ideal_output_scale, reference_forward
from pdnnsim.optics import GRID_SHAPE, default_routing_plan
from pdnnsim.training import (
    ORDINAL_LEVELS,
    LookupTable,
    TrainConfig,
    WeightSolution,
    build_lookup_table,
    extract_patches,
    loss_and_grad,
    predict,
    record_calibration_pixels,
    train_digital_twin,
    weights_to_currents,
    write_loss_csv,
)

PLAN = default_routing_plan()


def _toy_data(rng, n=24, k=2):
    px = rng.uniform(0, 1.2, (n, *GRID_SHAPE))
    return px, rng.integers(0, k, n)


@pytest.mark.parametrize("loss_kind,k", [("cross_entropy2", 2), ("ordinal4", 4)])
def test_gradient_matches_finite_differences(loss_kind, k):
    rng = np.random.default_rng(0)
    px, labels = _toy_data(rng, k=k)
    patches = extract_patches(px, PLAN)
    cfg = TrainConfig(loss_kind=loss_kind)
    weights = [w for w in random_weights(rng, lo=0.2)]
    _, grads = loss_and_grad(weights, patches, labels, cfg)
    for layer in range(3):
        for _ in range(4):
            idx = tuple(rng.integers(0, s) for s in weights[layer].shape)

            def f(w, layer=layer):
                ws = list(weights)
                ws[layer] = w
                return loss_and_grad(ws, patches, labels, cfg)[0]

            fd = central_difference(f, weights[layer], idx, h=1e-6)
            assert grads[layer][idx] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_training_is_deterministic_and_projected():
    rng = np.random.default_rng(1)
    px, labels = _toy_data(rng, n=40)
    cfg = TrainConfig(epochs=5, seed=3)
    seen = []
    a = train_digital_twin(px, labels, cfg, step_hook=lambda ws: seen.append(min(w.min() for w in ws)))
    b = train_digital_twin(px, labels, cfg)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
        assert wa.min() >= cfg.weight_floor and wa.max() <= 1.0
    assert min(seen) >= cfg.weight_floor
    assert len(a.train_metrics["epoch_losses"]) == 5


def test_clamp_after_mode_ends_in_range():
    rng = np.random.default_rng(2)
    px, labels = _toy_data(rng)
    sol = train_digital_twin(px, labels, TrainConfig(epochs=3, constraint="clamp_after", learning_rate=5.0))
    for w in sol.weights:
        assert w.min() >= 1e-4 and w.max() <= 1.0


def test_training_errors():
    rng = np.random.default_rng(3)
    px, labels = _toy_data(rng)
    with pytest.raises(TrainingError):
        train_digital_twin(px[:0], labels[:0], TrainConfig(epochs=1))
    with pytest.raises(TrainingError):
        train_digital_twin(px, labels + 5, TrainConfig(epochs=1))

    def poison(ws):
        ws[0][0, 0] = np.nan

    with pytest.raises(TrainingError):
        train_digital_twin(px, labels, TrainConfig(epochs=2), step_hook=poison)
    with pytest.raises(ValidationError):
        TrainConfig(loss_kind="hinge")
    with pytest.raises(ValidationError):
        TrainConfig.for_classes(3)


def test_for_classes_defaults():
    assert TrainConfig.for_classes(2).loss_kind == "cross_entropy2"
    four = TrainConfig.for_classes(4, epochs=7)
    assert four.loss_kind == "ordinal4" and four.learning_rate == 0.02 and four.epochs == 7
    assert TrainConfig.for_classes(4).epochs == 500


def test_two_class_twin_learns(two_class_solution):
    sol, ds = two_class_solution
    assert sol.train_metrics["train_accuracy"] >= 0.95
    losses = sol.train_metrics["epoch_losses"]
    assert losses[-1] < losses[0]


def test_ordinal_prediction_levels():
    cfg = TrainConfig(loss_kind="ordinal4")
    # a network whose output is exactly the ordinal targets
    levels = np.asarray(ORDINAL_LEVELS)
    w = random_weights(np.random.default_rng(4))
    out = reference_forward(w, np.ones((1, *GRID_SHAPE)))
    assert out.shape == (1, 2)
    pred = predict(w, extract_patches(np.ones((1, *GRID_SHAPE)), PLAN), cfg)
    v = out[0, 0] - out[0, 1]
    assert pred[0] == int(np.argmin(np.abs(v - levels)))


def test_record_calibration_pixels_normalizes(former):
    px = record_calibration_pixels(np.ones((2, *GRID_SHAPE)), former)
    assert px.mean() == pytest.approx(1.0)
    assert px.shape == (2, *GRID_SHAPE)


def test_lookup_table_inverse():
    lut = build_lookup_table()
    assert lut.floor == pytest.approx(1e-4)
    t = np.geomspace(1e-4, 1.0, 200)
    cur = lut.current(t)
    assert np.allclose(attenuator_t(cur), t, rtol=1e-9)
    assert np.all(np.diff(cur) <= 0)
    with pytest.raises(ValidationError):
        build_lookup_table(n_points=8)
    with pytest.raises(ValidationError):
        LookupTable([0, 1, 2], [1.0, 1.0, 0.5])
    back = LookupTable.from_dict(lut.to_dict())
    assert np.array_equal(back.currents, lut.currents)


@given(st.floats(1e-4, 1.0))
def test_lookup_roundtrip(t):
    lut = build_lookup_table()
    assert lut.transmission(lut.current(t)) == pytest.approx(t, rel=0.05)


def test_compile_clamps_below_floor():
    rng = np.random.default_rng(5)
    w1, w2, w3 = random_weights(rng)
    w1[0, 0] = 0.0
    w2[1, 2] = 5e-5
    currents, rep = weights_to_currents(WeightSolution(w1, w2, w3), build_lookup_table())
    assert rep.n_clamped == 2
    assert (1, 0, 0) in rep.clamped and (2, 1, 2) in rep.clamped
    assert currents[0][0, 0] == 5.0 and currents[1][1, 2] == 5.0
    with pytest.raises(ValidationError):
        WeightSolution(w1 + 1.0, w2, w3)


def test_compiled_chip_reproduces_twin(chip, former, two_class_solution):
    sol, ds = two_class_solution
    currents, rep = weights_to_currents(sol, build_lookup_table())
    state = ChipState(currents, chip.aligned_heater_voltages(), chip.op.relu_biases)
    frames = former.form_image(ds.grids[:30])
    scale = former.reference_frame().mean()
    got = forward(chip, state, frames, "ideal").out
    ref = ideal_output_scale(chip, scale) * reference_forward(sol.weights, frames / scale)
    mask = np.abs(ref) > 1e-12
    assert rel_err(got[mask], ref[mask]) < 1e-6


def test_weight_solution_io(tmp_path, two_class_solution):
    sol, _ = two_class_solution
    sol.save(tmp_path / "w.json")
    back = WeightSolution.load(tmp_path / "w.json")
    assert all(np.array_equal(a, b) for a, b in zip(back.weights, sol.weights))
    write_loss_csv(sol, tmp_path / "loss.csv")
    rows = list(csv.reader(open(tmp_path / "loss.csv")))
    assert rows[0] == ["epoch", "loss"] and len(rows) == 61
