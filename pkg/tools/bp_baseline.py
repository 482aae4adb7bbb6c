"""
BP Baseline

Feedforward comparison network for the fuzzy classifier:
3 inputs → tanh(h1) → tanh(h2) → linear 1 output, regressing the numeric
flow-pattern code (W/O=1, ST=2, DO/W&W=3, DW/O&O/W=4) and classifying by
the nearest code.

Training is full-batch resilient backpropagation without weight
backtracking (Rprop−): per-weight step sizes grow by η+ while the gradient
sign holds and shrink by η− on a sign flip. Every weight with a non-zero
gradient moves by −sign(gradient)·Δ; after a flip the gradient memory is
zeroed so the next epoch neither grows nor shrinks that step.

Input:  TrainConfig + records (angle, flow, watercut, pattern)
Output: TrainedModel (params, normalizer, config, history), model file JSON

Deterministic given the seed. No network calls.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from tools.knowledge_base import FlowPattern, OperatingPoint

logger = logging.getLogger(__name__)

N_INPUTS = 3
DEFAULT_HIDDEN = (8, 6)
MIN_CODE = 1
MAX_CODE = 4
MODEL_FORMAT = "flowfis-bp-model"
MODEL_FORMAT_VERSION = "1.0.0"
FIT_COLUMNS = ("angle_deg", "flow_m3d", "watercut_frac", "pattern", "bp_raw", "bp_pattern")


class ModelFileError(ValueError):
    """Model document is malformed or its arrays disagree with its layer sizes."""


class TrainConfig(BaseModel):
    """Hyperparameters; delta0 plays the role of the 0.05 learning rate."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(300, gt=0)
    goal_mse: float = Field(1e-5, ge=0)
    delta0: float = 0.05
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    delta_max: float = 50.0
    delta_min: float = 1e-6
    seed: int = 0
    hidden: tuple[int, int] = DEFAULT_HIDDEN

    @model_validator(mode="after")
    def _check_ranges(self):
        if not 0 < self.eta_minus < 1 < self.eta_plus:
            raise ValueError("need 0 < eta_minus < 1 < eta_plus")
        if not 0 < self.delta_min < self.delta0 < self.delta_max:
            raise ValueError("need 0 < delta_min < delta0 < delta_max")
        if min(self.hidden) < 1:
            raise ValueError(f"hidden sizes must be ≥ 1, got {self.hidden}")
        return self


# ─────────────────────────────────────────
# Network
# ─────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class NetworkParams:
    """Weights[i] has shape (fan_in, fan_out); biases[i] has shape (fan_out,)."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> tuple[np.ndarray, ...]:
        return self.weights + self.biases

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        half = len(arrays) // 2
        return cls(tuple(arrays[:half]), tuple(arrays[half:]))

    def map(self, fn) -> "NetworkParams":
        return NetworkParams.from_arrays([fn(a) for a in self.arrays()])

    def equals(self, other: "NetworkParams") -> bool:
        mine, theirs = self.arrays(), other.arrays()
        return len(mine) == len(theirs) and all(
            a.shape == b.shape and np.array_equal(a, b) for a, b in zip(mine, theirs)
        )


def init_network(seed: int, h1: int = DEFAULT_HIDDEN[0], h2: int = DEFAULT_HIDDEN[1]) -> NetworkParams:
    """Uniform(−1/√fan_in, 1/√fan_in) weights and biases, deterministic in seed."""
    if h1 < 1 or h2 < 1:
        raise ValueError(f"hidden sizes must be ≥ 1, got ({h1}, {h2})")
    rng = np.random.default_rng(seed)
    sizes = (N_INPUTS, h1, h2, 1)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return NetworkParams(tuple(weights), tuple(biases))


def forward_batch(params: NetworkParams, X) -> tuple[np.ndarray, list[np.ndarray]]:
    """Outputs for each row of X plus the activations of every layer.

    Returns:
        (y of shape (n,), [X, hidden_1, hidden_2, output]).
    """
    a = np.atleast_2d(np.asarray(X, dtype=float))
    activations = [a]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = z if i == last else np.tanh(z)
        activations.append(a)
    return a[:, 0], activations


def forward(params: NetworkParams, x) -> tuple[float, list[np.ndarray]]:
    y, activations = forward_batch(params, np.asarray(x, dtype=float).reshape(1, -1))
    return float(y[0]), activations


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets, dtype=float).ravel()
    if p.size == 0:
        raise ValueError("mse of an empty batch is undefined")
    if p.shape != t.shape:
        raise ValueError(f"mse needs equal lengths, got {p.size} and {t.size}")
    return float(np.mean((p - t) ** 2))


def gradients(params: NetworkParams, X, y) -> NetworkParams:
    """Exact gradient of the batch MSE with respect to every weight and bias."""
    targets = np.asarray(y, dtype=float).ravel()
    if targets.size == 0:
        raise ValueError("gradients need a non-empty batch")
    out, activations = forward_batch(params, X)
    n = targets.size

    delta = (2.0 / n) * (out - targets)[:, None]
    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (1.0 - activations[i] ** 2)
    return NetworkParams(tuple(grad_w), tuple(grad_b))


# ─────────────────────────────────────────
# Rprop
# ─────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class TrainState:
    step_sizes: NetworkParams
    prev_gradients: NetworkParams
    epoch: int = 0
    mse_history: tuple[float, ...] = ()


def init_state(params: NetworkParams, config: TrainConfig) -> TrainState:
    return TrainState(
        step_sizes=params.map(lambda a: np.full_like(a, config.delta0)),
        prev_gradients=params.map(np.zeros_like),
    )


def rprop_step(state: TrainState, grads: NetworkParams, params: NetworkParams,
               config: TrainConfig) -> tuple[TrainState, NetworkParams]:
    """One Rprop− update of every weight; inputs are left untouched."""
    new_params, new_grads, new_steps = [], [], []
    for w, g, prev_g, step in zip(params.arrays(), grads.arrays(),
                                  state.prev_gradients.arrays(), state.step_sizes.arrays()):
        agreement = np.sign(g) * np.sign(prev_g)
        step = np.where(agreement > 0, np.minimum(step * config.eta_plus, config.delta_max), step)
        step = np.where(agreement < 0, np.maximum(step * config.eta_minus, config.delta_min), step)
        new_params.append(w - np.sign(g) * step)
        # the shrunken step is applied now; only the memory forgets the flip
        new_grads.append(np.where(agreement < 0, 0.0, g))
        new_steps.append(step)

    next_state = TrainState(
        step_sizes=NetworkParams.from_arrays(new_steps),
        prev_gradients=NetworkParams.from_arrays(new_grads),
        epoch=state.epoch + 1,
        mse_history=state.mse_history,
    )
    return next_state, NetworkParams.from_arrays(new_params)


@dataclass(frozen=True)
class TrainingHistory:
    initial_mse: float
    mse: tuple[float, ...]
    epochs_run: int
    stop_reason: Literal["goal", "epochs"]
    converged: bool
    degenerate: bool = False

    @property
    def final_mse(self) -> float:
        return self.mse[-1] if self.mse else self.initial_mse

    def summary(self) -> dict:
        return {
            "initial_mse": self.initial_mse,
            "final_mse": self.final_mse,
            "epochs_run": self.epochs_run,
            "stop_reason": self.stop_reason,
            "converged": self.converged,
            "degenerate": self.degenerate,
        }


def _has_conflicts(X: np.ndarray, y: np.ndarray) -> bool:
    seen = {}
    for row, target in zip(map(tuple, X), y):
        if seen.setdefault(row, target) != target:
            return True
    return False


def fit(config: TrainConfig, X, y) -> tuple[NetworkParams, TrainingHistory, TrainState]:
    """Full-batch Rprop on already-normalized inputs.

    Runs config.epochs epochs, stopping early once mse ≤ goal_mse. An
    infinite goal_mse disables the early stop.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 2 or X.shape[0] != len(y):
        raise ValueError(f"training needs ≥ 2 aligned rows, got X {X.shape} and y {y.shape}")

    degenerate = _has_conflicts(X, y)
    if degenerate:
        logger.warning("training data has identical inputs with conflicting targets")

    params = init_network(config.seed, *config.hidden)
    state = init_state(params, config)
    initial = mse(forward_batch(params, X)[0], y)
    goal_enabled = math.isfinite(config.goal_mse)

    history = []
    stop_reason = "epochs"
    for epoch in range(1, config.epochs + 1):
        state, params = rprop_step(state, gradients(params, X, y), params, config)
        loss = mse(forward_batch(params, X)[0], y)
        history.append(loss)
        if epoch % 50 == 0:
            logger.debug("epoch %d mse %.6g", epoch, loss)
        if goal_enabled and loss <= config.goal_mse:
            stop_reason = "goal"
            break

    state = TrainState(state.step_sizes, state.prev_gradients, state.epoch, tuple(history))
    converged = stop_reason == "goal"
    if not converged:
        logger.info("goal mse %g not reached after %d epochs (mse %.6g)",
                    config.goal_mse, len(history), history[-1])
    return params, TrainingHistory(
        initial_mse=initial,
        mse=tuple(history),
        epochs_run=len(history),
        stop_reason=stop_reason,
        converged=converged,
        degenerate=degenerate,
    ), state


# ─────────────────────────────────────────
# Normalization and prediction
# ─────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-feature affine map of [min, max] onto [−1, 1]; a zero span maps through 1."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, X) -> "Normalizer":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(X.min(axis=0), X.max(axis=0))

    @property
    def span(self) -> np.ndarray:
        span = self.hi - self.lo
        return np.where(span == 0, 1.0, span)

    def normalize(self, X) -> np.ndarray:
        return 2.0 * (np.asarray(X, dtype=float) - self.lo) / self.span - 1.0

    def denormalize(self, Z) -> np.ndarray:
        return (np.asarray(Z, dtype=float) + 1.0) * self.span / 2.0 + self.lo


def code_from_output(raw: float) -> int:
    """Nearest code after clamping to [1, 4]; x.5 rounds down."""
    raw = float(raw)
    if math.isnan(raw):
        raise ValueError("network output is NaN")
    clamped = min(max(raw, MIN_CODE), MAX_CODE)
    return int(math.ceil(clamped - 0.5))


@dataclass(frozen=True, eq=False)
class TrainedModel:
    params: NetworkParams
    normalizer: Normalizer
    config: TrainConfig
    history: TrainingHistory
    state: Optional[TrainState] = field(default=None, repr=False)


def _features(records) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([[r.angle, r.flow, r.watercut] for r in records], dtype=float)
    y = np.array([r.pattern.code for r in records], dtype=float)
    return X, y


def train(config: TrainConfig, records: Iterable) -> TrainedModel:
    """Fit a normalizer and network on records with .angle/.flow/.watercut/.pattern."""
    records = list(records)
    if len(records) < 2:
        raise ValueError(f"training needs at least 2 records, got {len(records)}")
    X, y = _features(records)
    normalizer = Normalizer.fit(X)
    params, history, state = fit(config, normalizer.normalize(X), y)
    return TrainedModel(params, normalizer, config, history, state)


def predict_raw(params: NetworkParams, normalizer: Normalizer, point: OperatingPoint) -> float:
    x = normalizer.normalize([point.angle, point.flow, point.watercut])
    return forward(params, x)[0]


def predict_class(params: NetworkParams, normalizer: Normalizer, point: OperatingPoint) -> FlowPattern:
    return FlowPattern.from_code(code_from_output(predict_raw(params, normalizer, point)))


def training_curve_csv(history: TrainingHistory) -> str:
    """epoch,mse with one row per epoch run, epoch 0 being the untrained network."""
    frame = pd.DataFrame(
        {"epoch": range(len(history.mse) + 1), "mse": (history.initial_mse,) + history.mse},
    )
    return frame.to_csv(index=False, lineterminator="\n", float_format="%.10g")


def fit_rows_csv(model: TrainedModel, records: Iterable) -> str:
    """Per-record fit of a trained model: inputs, true pattern, raw output, predicted pattern."""
    rows = []
    for r in records:
        raw = predict_raw(model.params, model.normalizer, r.point)
        rows.append((r.angle, r.flow, r.watercut, r.pattern.label, raw,
                     FlowPattern.from_code(code_from_output(raw)).label))
    frame = pd.DataFrame(rows, columns=list(FIT_COLUMNS))
    return frame.to_csv(index=False, lineterminator="\n", float_format="%.10g")


# ─────────────────────────────────────────
# Model file
# ─────────────────────────────────────────

class NormalizerDoc(BaseModel):
    lo: list[float]
    hi: list[float]


class ModelDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal["flowfis-bp-model"] = MODEL_FORMAT
    version: str = MODEL_FORMAT_VERSION
    layer_sizes: list[int]
    weights: list[list[list[float]]]
    biases: list[list[float]]
    normalizer: NormalizerDoc
    config: TrainConfig
    history: dict


def model_to_doc(model: TrainedModel) -> ModelDoc:
    return ModelDoc(
        layer_sizes=list(model.params.layer_sizes),
        weights=[w.tolist() for w in model.params.weights],
        biases=[b.tolist() for b in model.params.biases],
        normalizer=NormalizerDoc(lo=model.normalizer.lo.tolist(), hi=model.normalizer.hi.tolist()),
        config=model.config,
        history={**model.history.summary(), "mse": list(model.history.mse)},
    )


def _mse_curve(history: dict) -> tuple[float, ...]:
    # files without the per-epoch curve keep only the last value
    if "mse" not in history:
        return (history["final_mse"],) if "final_mse" in history else ()
    try:
        return tuple(float(v) for v in history["mse"])
    except (TypeError, ValueError) as e:
        raise ModelFileError(f"history.mse: {e}") from e


def model_from_doc(doc: ModelDoc) -> TrainedModel:
    params = NetworkParams(
        tuple(np.array(w, dtype=float) for w in doc.weights),
        tuple(np.array(b, dtype=float) for b in doc.biases),
    )
    sizes = doc.layer_sizes
    if len(params.weights) != len(sizes) - 1 or len(params.biases) != len(sizes) - 1:
        raise ModelFileError(f"layer_sizes {sizes} disagree with {len(params.weights)} weight matrices")
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
            raise ModelFileError(
                f"layer {i}: expected weights {(sizes[i], sizes[i + 1])} and bias "
                f"({sizes[i + 1]},), got {w.shape} and {b.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelFileError(f"layer {i} holds non-finite values")
    lo, hi = np.array(doc.normalizer.lo), np.array(doc.normalizer.hi)
    if lo.shape != (sizes[0],) or hi.shape != (sizes[0],):
        raise ModelFileError(f"normalizer needs {sizes[0]} features")
    h = doc.history
    history = TrainingHistory(
        initial_mse=h.get("initial_mse", float("nan")),
        mse=_mse_curve(h),
        epochs_run=h.get("epochs_run", 0),
        stop_reason=h.get("stop_reason", "epochs"),
        converged=h.get("converged", False),
        degenerate=h.get("degenerate", False),
    )
    return TrainedModel(params, Normalizer(lo, hi), doc.config, history)


def dump_model_json(model: TrainedModel) -> str:
    return json.dumps(model_to_doc(model).model_dump(), indent=2) + "\n"


def save_model_file(path: str, model: TrainedModel) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_model_json(model))
    return path


def parse_model_json(text: str) -> TrainedModel:
    try:
        doc = ModelDoc.model_validate(json.loads(text))
    except json.JSONDecodeError as e:
        raise ModelFileError(f"line {e.lineno}, column {e.colno}: {e.msg}") from e
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(p) for p in first["loc"])
        raise ModelFileError(f"{location}: {first['msg']}") from e
    return model_from_doc(doc)


def load_model_file(path: str) -> TrainedModel:
    with open(path, encoding="utf-8") as f:
        return parse_model_json(f.read())


# --- Self-check ---
if __name__ == "__main__":
    print("=== BP Baseline Self-Check ===\n")

    print("Test 1: Initialization")
    p1, p2 = init_network(1), init_network(1)
    assert p1.equals(p2) and not p1.equals(init_network(2))
    assert [w.shape for w in p1.weights] == [(3, 8), (8, 6), (6, 1)]
    print(f"  Layer sizes: {p1.layer_sizes}")
    print("  [OK]")

    print("\nTest 2: Gradient vs central differences")
    rng = np.random.default_rng(0)
    X, y = rng.uniform(-1, 1, (12, 3)), rng.uniform(1, 4, 12)
    analytic = gradients(p1, X, y)
    w = p1.weights[1].copy()
    eps = 1e-5
    plus = NetworkParams((p1.weights[0], w + np.eye(8, 6) * eps, p1.weights[2]), p1.biases)
    minus = NetworkParams((p1.weights[0], w - np.eye(8, 6) * eps, p1.weights[2]), p1.biases)
    numeric = (mse(forward_batch(plus, X)[0], y) - mse(forward_batch(minus, X)[0], y)) / (2 * eps)
    assert abs(numeric - np.trace(analytic.weights[1][:6, :6])) < 1e-7
    print("  [OK]")

    print("\nTest 3: Nearest-code rounding")
    assert [code_from_output(v) for v in (3.2, -7, 2.5, 4.9)] == [3, 1, 2, 4]
    print("  [OK]")

    print("\nTest 4: Training reduces loss")
    model_params, history, _ = fit(TrainConfig(epochs=100, seed=3), X, np.round(y))
    assert history.final_mse < history.initial_mse
    print(f"  mse {history.initial_mse:.4f} → {history.final_mse:.4f}")
    print("  [OK]")

    print("\n=== All bp_baseline checks passed ===")
