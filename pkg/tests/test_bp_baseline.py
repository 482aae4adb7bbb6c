import io
import json
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError

from tools.bp_baseline import (
    FIT_COLUMNS,
    ModelFileError,
    NetworkParams,
    Normalizer,
    TrainConfig,
    code_from_output,
    dump_model_json,
    fit,
    fit_rows_csv,
    forward,
    forward_batch,
    gradients,
    init_network,
    init_state,
    mse,
    parse_model_json,
    predict_class,
    predict_raw,
    rprop_step,
    train,
    training_curve_csv,
)
from tools.dataset import ExperimentRecord
from tools.knowledge_base import FlowPattern, OperatingPoint


def _numeric_gradients(params, X, y, h=1e-5):
    arrays = [a.copy() for a in params.arrays()]
    result = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            original = a[idx]
            a[idx] = original + h
            up = mse(forward_batch(NetworkParams.from_arrays(arrays), X)[0], y)
            a[idx] = original - h
            down = mse(forward_batch(NetworkParams.from_arrays(arrays), X)[0], y)
            a[idx] = original
            g[idx] = (up - down) / (2 * h)
        result.append(g)
    return result


# ─────────────────────────────────────────
# Network and gradients
# ─────────────────────────────────────────

def test_init_is_seeded_and_bounded():
    params = init_network(3, 5, 4)
    assert params.equals(init_network(3, 5, 4))
    assert not params.equals(init_network(4, 5, 4))
    assert params.layer_sizes == (3, 5, 4, 1)
    for w, b in zip(params.weights, params.biases):
        bound = 1 / math.sqrt(w.shape[0])
        assert np.all(np.abs(w) <= bound) and np.all(np.abs(b) <= bound)


def test_forward_shapes():
    params = init_network(0)
    y, activations = forward_batch(params, np.zeros((5, 3)))
    assert y.shape == (5,)
    assert [a.shape for a in activations] == [(5, 3), (5, 8), (5, 6), (5, 1)]
    single, _ = forward(params, [0.1, -0.2, 0.3])
    assert isinstance(single, float)


def test_mse_examples():
    assert mse([1, 2, 3], [1, 2, 3]) == 0.0
    assert mse([1, 2], [2, 2]) == 0.5
    rng = np.random.default_rng(5)
    p, t = rng.normal(size=20), rng.normal(size=20)
    assert mse(p, t) == pytest.approx(sum((a - b) ** 2 for a, b in zip(p, t)) / 20, rel=1e-12)
    with pytest.raises(ValueError):
        mse([], [])
    with pytest.raises(ValueError):
        mse([1, 2], [1])


@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    params = init_network(seed, 5, 4)
    X = rng.uniform(-1, 1, size=(7, 3))
    y = rng.uniform(1, 4, size=7)
    analytic = gradients(params, X, y).arrays()
    numeric = _numeric_gradients(params, X, y)
    for a, n in zip(analytic, numeric):
        rel = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), 1e-3)
        assert rel.max() < 1e-6


def test_gradient_vanishes_at_minimum():
    params = init_network(0).map(np.zeros_like)
    y = np.array([1.0, 2.0, 4.0])
    biases = list(params.biases)
    biases[-1] = np.array([y.mean()])
    params = NetworkParams(params.weights, tuple(biases))
    grads = gradients(params, np.random.default_rng(1).normal(size=(3, 3)), y)
    assert all(np.allclose(g, 0.0, atol=1e-12) for g in grads.arrays())


def test_gradient_points_toward_larger_error():
    params = init_network(2)
    X = np.random.default_rng(2).uniform(-1, 1, size=(6, 3))
    out = forward_batch(params, X)[0]
    grads = gradients(params, X, out - 1.0)
    # targets below the outputs: raising the output bias grows the error
    assert grads.biases[-1][0] > 0


# ─────────────────────────────────────────
# Rprop
# ─────────────────────────────────────────

def _constant(params, value):
    return params.map(lambda a: np.full_like(a, value))


def test_constant_sign_grows_step_geometrically():
    config = TrainConfig()
    params = init_network(0)
    state = init_state(params, config)
    for _ in range(6):
        state, params = rprop_step(state, _constant(params, 1.0), params, config)
    expected = config.delta0 * config.eta_plus ** 5
    assert all(np.allclose(s, expected) for s in state.step_sizes.arrays())

    for _ in range(100):
        state, params = rprop_step(state, _constant(params, 1.0), params, config)
    assert all(np.all(s == config.delta_max) for s in state.step_sizes.arrays())


def test_sign_flip_shrinks_step_and_clears_memory():
    config = TrainConfig()
    params = init_network(0)
    state = init_state(params, config)
    state, params = rprop_step(state, _constant(params, 1.0), params, config)
    before = params
    state, params = rprop_step(state, _constant(params, -1.0), params, config)
    shrunk = config.delta0 * config.eta_minus
    assert all(np.allclose(s, shrunk) for s in state.step_sizes.arrays())
    assert all(np.all(g == 0) for g in state.prev_gradients.arrays())
    # the weight still moves against the new gradient by the shrunken step
    for old, new in zip(before.arrays(), params.arrays()):
        np.testing.assert_allclose(new, old + shrunk)

    # cleared memory: the epoch after a flip keeps the step as is
    state, params = rprop_step(state, _constant(params, -1.0), params, config)
    assert all(np.allclose(s, shrunk) for s in state.step_sizes.arrays())

    sign = 1.0
    for _ in range(80):
        sign = -sign
        state, params = rprop_step(state, _constant(params, sign), params, config)
    assert all(np.all(s == config.delta_min) for s in state.step_sizes.arrays())


def test_zero_gradient_leaves_weight_and_step():
    config = TrainConfig()
    params = init_network(0)
    state = init_state(params, config)
    state, params = rprop_step(state, _constant(params, 1.0), params, config)
    steps = state.step_sizes
    next_state, next_params = rprop_step(state, params.map(np.zeros_like), params, config)
    assert next_params.equals(params)
    assert next_state.step_sizes.equals(steps)


def test_first_step_moves_against_gradient():
    config = TrainConfig()
    params = init_network(0)
    _, moved = rprop_step(init_state(params, config), _constant(params, 2.0), params, config)
    for before, after in zip(params.arrays(), moved.arrays()):
        np.testing.assert_allclose(after, before - config.delta0)


# ─────────────────────────────────────────
# Config and training
# ─────────────────────────────────────────

@pytest.mark.parametrize("kwargs", [
    {"epochs": 0},
    {"eta_plus": 0.9},
    {"eta_minus": 1.0},
    {"delta0": 100.0},
    {"hidden": (0, 6)},
    {"learning_rate": 0.05},
])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ValidationError):
        TrainConfig(**kwargs)


def _toy_records():
    wo = [ExperimentRecord(a, 100.0 + 10 * i, 0.2, FlowPattern.WO) for i, a in enumerate((0, 10, 20))]
    dwo = [ExperimentRecord(a, 500.0 + 10 * i, 0.8, FlowPattern.DWO) for i, a in enumerate((70, 80, 90))]
    return wo + dwo


def test_training_reduces_loss():
    model = train(TrainConfig(seed=1, epochs=100), _toy_records())
    assert model.history.final_mse < model.history.initial_mse
    assert len(model.history.mse) == model.history.epochs_run
    for r in _toy_records():
        assert predict_class(model.params, model.normalizer, r.point) is r.pattern


def test_infinite_goal_runs_every_epoch():
    model = train(TrainConfig(seed=1, epochs=37, goal_mse=math.inf), _toy_records())
    assert model.history.epochs_run == 37
    assert model.history.stop_reason == "epochs"
    assert model.state.epoch == 37


def test_goal_stops_early():
    model = train(TrainConfig(seed=1, epochs=300, goal_mse=20.0), _toy_records())
    assert model.history.epochs_run == 1
    assert model.history.converged and model.history.stop_reason == "goal"


def test_step_sizes_stay_in_bounds(paper_split):
    config = TrainConfig(seed=3)
    model = train(config, paper_split[0])
    for s in model.state.step_sizes.arrays():
        assert np.all(s >= config.delta_min) and np.all(s <= config.delta_max)


def test_training_is_deterministic(paper_split):
    first = train(TrainConfig(seed=42), paper_split[0])
    second = train(TrainConfig(seed=42), paper_split[0])
    assert first.params.equals(second.params)
    assert first.history.mse == second.history.mse
    assert dump_model_json(first) == dump_model_json(second)


def test_fits_reconstructed_training_set(paper_split):
    train_set = paper_split[0]
    assert len(train_set) == 42
    model = train(TrainConfig(seed=42, epochs=300), train_set)
    assert model.history.final_mse <= 0.25


def test_conflicting_duplicates_are_flagged():
    records = [
        ExperimentRecord(45, 300, 0.5, FlowPattern.WO),
        ExperimentRecord(45, 300, 0.5, FlowPattern.DWO),
    ]
    model = train(TrainConfig(seed=0, epochs=50), records)
    assert model.history.degenerate
    assert not model.history.converged
    assert model.history.final_mse >= 2.25 - 1e-9


def test_training_needs_two_records():
    with pytest.raises(ValueError):
        train(TrainConfig(), _toy_records()[:1])
    with pytest.raises(ValueError):
        fit(TrainConfig(), np.zeros((1, 3)), np.ones(1))


# ─────────────────────────────────────────
# Normalization and output coding
# ─────────────────────────────────────────

@given(st.lists(st.tuples(st.floats(0, 90), st.floats(100, 600), st.floats(0, 1)),
                min_size=2, max_size=20))
def test_normalizer_round_trip(rows):
    X = np.array(rows)
    normalizer = Normalizer.fit(X)
    Z = normalizer.normalize(X)
    assert np.all(Z >= -1 - 1e-12) and np.all(Z <= 1 + 1e-12)
    np.testing.assert_allclose(normalizer.denormalize(Z), X, atol=1e-12, rtol=0)


def test_normalizer_zero_span():
    normalizer = Normalizer.fit([[45, 300, 0.5], [45, 300, 0.5]])
    np.testing.assert_array_equal(normalizer.normalize([[45, 300, 0.5]]), [[-1, -1, -1]])


@pytest.mark.parametrize("raw, code", [
    (3.2, 3), (-7, 1), (2.5, 2), (1.5, 1), (3.5, 3), (2.51, 3), (4.7, 4), (1.0, 1), (99, 4),
])
def test_code_from_output(raw, code):
    assert code_from_output(raw) == code


def test_code_from_nan_raises():
    with pytest.raises(ValueError):
        code_from_output(float("nan"))


@given(st.floats(-10, 10))
def test_code_breaks_only_at_half_integers(raw):
    code = code_from_output(raw)
    nearest = min(max(raw, 1), 4)
    assert abs(code - nearest) <= 0.5
    if abs(nearest - round(nearest)) != 0.5:
        assert code == round(nearest)


def test_predict_raw_matches_forward():
    model = train(TrainConfig(seed=1, epochs=20), _toy_records())
    point = OperatingPoint(30, 200, 0.4)
    x = model.normalizer.normalize([30, 200, 0.4])
    assert predict_raw(model.params, model.normalizer, point) == forward(model.params, x)[0]


# ─────────────────────────────────────────
# Model file
# ─────────────────────────────────────────

def test_model_file_round_trip():
    model = train(TrainConfig(seed=5, epochs=30), _toy_records())
    text = dump_model_json(model)
    loaded = parse_model_json(text)
    assert loaded.params.equals(model.params)
    np.testing.assert_array_equal(loaded.normalizer.lo, model.normalizer.lo)
    assert loaded.config == model.config
    assert loaded.history.final_mse == model.history.final_mse
    assert loaded.history.mse == model.history.mse
    assert len(loaded.history.mse) == 30
    assert dump_model_json(loaded) == text


@pytest.mark.parametrize("mutate", [
    lambda d: d["weights"][1].pop(),
    lambda d: d["biases"][2].append(0.0),
    lambda d: d.update(layer_sizes=[3, 8, 1]),
    lambda d: d["normalizer"].update(lo=[0.0, 0.0]),
    lambda d: d.update(format="something-else"),
    lambda d: d["config"].update(epochs=0),
    lambda d: d["history"].update(mse=["not a number"]),
])
def test_malformed_model_files(mutate):
    data = json.loads(dump_model_json(train(TrainConfig(seed=5, epochs=5), _toy_records())))
    mutate(data)
    with pytest.raises(ModelFileError):
        parse_model_json(json.dumps(data))


def test_model_file_not_json():
    with pytest.raises(ModelFileError, match="line 1"):
        parse_model_json("{not json")


def test_model_file_without_curve_keeps_final_mse():
    model = train(TrainConfig(seed=5, epochs=10), _toy_records())
    data = json.loads(dump_model_json(model))
    del data["history"]["mse"]
    loaded = parse_model_json(json.dumps(data))
    assert loaded.history.mse == (model.history.final_mse,)


# ─────────────────────────────────────────
# Exports
# ─────────────────────────────────────────

def test_training_curve_csv():
    model = train(TrainConfig(seed=1, epochs=25, goal_mse=math.inf), _toy_records())
    text = training_curve_csv(model.history)
    assert text.splitlines()[0] == "epoch,mse"
    frame = pd.read_csv(io.StringIO(text))
    assert frame["epoch"].tolist() == list(range(26))
    np.testing.assert_allclose(frame["mse"].iloc[0], model.history.initial_mse, rtol=1e-9)
    np.testing.assert_allclose(frame["mse"].iloc[1:], model.history.mse, rtol=1e-9)


def test_fit_rows_csv():
    records = _toy_records()
    model = train(TrainConfig(seed=1, epochs=100), records)
    frame = pd.read_csv(io.StringIO(fit_rows_csv(model, records)))
    assert tuple(frame.columns) == FIT_COLUMNS
    assert len(frame) == len(records)
    for r, (_, row) in zip(records, frame.iterrows()):
        assert (row["angle_deg"], row["flow_m3d"], row["pattern"]) == (r.angle, r.flow, r.pattern.label)
        assert row["bp_pattern"] == predict_class(model.params, model.normalizer, r.point).label
        assert row["bp_raw"] == pytest.approx(predict_raw(model.params, model.normalizer, r.point),
                                              rel=1e-9)
