"""Multilayer perceptron written directly against numpy.

Layer ``k`` maps ``h_k = act_k(W_k @ h_{k-1} + b_k)`` with ``W_k`` stored as
an (out, in) matrix. Hidden layers use tanh and the output layer is linear.
Gradients are derived by hand; see ``tests/test_nn.py`` for the
finite-difference check.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .errors import (
    CorruptModelFile,
    EmptyBatch,
    EmptySplit,
    InvalidArchitecture,
    InvalidTrainConfig,
    LengthMismatch,
    MissingNormalizer,
    NonFiniteLoss,
    VersionMismatch,
)
from .pipeline import DataSplits, Normalizer, feature_matrix, fit_normalizer, target_vector

FORMAT_VERSION = 1
ACTIVATIONS = ("tanh", "linear")
LOG_EVERY = 250

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpConfig:
    layer_sizes: tuple[int, ...] = (3, 75, 1)
    hidden_activation: str = "tanh"
    output_activation: str = "linear"
    init_seed: int = 0

    def __post_init__(self):
        sizes = tuple(self.layer_sizes)
        if len(sizes) < 3:
            raise InvalidArchitecture(
                f"need input, at least one hidden and an output layer, got {list(sizes)}"
            )
        if any(isinstance(s, bool) or not isinstance(s, (int, np.integer)) or s < 1 for s in sizes):
            raise InvalidArchitecture(f"layer sizes must be positive integers, got {list(sizes)}")
        if self.hidden_activation != "tanh":
            raise InvalidArchitecture(f"unsupported hidden activation {self.hidden_activation!r}")
        if self.output_activation != "linear":
            raise InvalidArchitecture(f"unsupported output activation {self.output_activation!r}")
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in sizes))


def parse_arch(text: str) -> tuple[int, ...]:
    """``"3-75-1"`` -> ``(3, 75, 1)``."""
    try:
        sizes = tuple(int(p) for p in text.strip().split("-"))
    except ValueError:
        raise InvalidArchitecture(f"architecture must look like 3-75-1, got {text!r}") from None
    MlpConfig(sizes)
    return sizes


@dataclass(frozen=True, eq=False)
class Mlp:
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]
    normalizer: Normalizer | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise InvalidArchitecture("an MLP needs at least two layers")
        ws = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        bs = tuple(np.array(b, dtype=np.float64) for b in self.biases)
        n = len(sizes) - 1
        if len(ws) != n or len(bs) != n or len(self.activations) != n:
            raise InvalidArchitecture("number of weight/bias/activation entries must match layers")
        for k in range(n):
            if ws[k].shape != (sizes[k + 1], sizes[k]) or bs[k].shape != (sizes[k + 1],):
                raise InvalidArchitecture(f"layer {k} shapes inconsistent with sizes {list(sizes)}")
            if not (np.all(np.isfinite(ws[k])) and np.all(np.isfinite(bs[k]))):
                raise InvalidArchitecture(f"layer {k} holds non-finite parameters")
            if self.activations[k] not in ACTIVATIONS:
                raise InvalidArchitecture(f"unknown activation {self.activations[k]!r}")
            ws[k].setflags(write=False)
            bs[k].setflags(write=False)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "activations", tuple(self.activations))

    def with_normalizer(self, nz: Normalizer | None) -> "Mlp":
        return Mlp(self.layer_sizes, self.weights, self.biases, self.activations, nz)

    def with_params(self, weights, biases) -> "Mlp":
        return Mlp(self.layer_sizes, tuple(weights), tuple(biases), self.activations, self.normalizer)


def init(config: MlpConfig) -> Mlp:
    """Glorot-uniform weights and zero biases, drawn from ``config.init_seed``."""
    if not isinstance(config, MlpConfig):
        raise InvalidArchitecture("init expects an MlpConfig")
    rng = np.random.default_rng(config.init_seed)
    sizes = config.layer_sizes
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    acts = (config.hidden_activation,) * (len(sizes) - 2) + (config.output_activation,)
    return Mlp(sizes, tuple(weights), tuple(biases), acts)


def _activate(z: np.ndarray, name: str) -> np.ndarray:
    return np.tanh(z) if name == "tanh" else z


def _layer_outputs(weights, biases, activations, x: np.ndarray) -> list[np.ndarray]:
    outs = [x]
    h = x
    for w, b, act in zip(weights, biases, activations):
        h = _activate(h @ w.T + b, act)
        outs.append(h)
    return outs


def forward(m: Mlp, x) -> np.ndarray | float:
    """Network output for normalized inputs.

    A single input vector gives a float (or a vector for multi-output nets);
    a 2-D batch of shape (n, inputs) gives shape (n,) or (n, outputs).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    y = _layer_outputs(m.weights, m.biases, m.activations, np.atleast_2d(x))[-1]
    if y.shape[1] == 1:
        y = y[:, 0]
        return float(y[0]) if single else y
    return y[0] if single else y


def loss_mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    target = np.asarray(target, dtype=np.float64).ravel()
    if pred.shape != target.shape:
        raise LengthMismatch(f"pred has {pred.size} entries, target has {target.size}")
    if pred.size == 0:
        raise EmptyBatch("mean squared error of an empty batch")
    diff = pred - target
    return float(np.mean(diff * diff))


def _backprop(weights, biases, activations, x, t):
    outs = _layer_outputs(weights, biases, activations, x)
    y = outs[-1]
    t = t.reshape(y.shape)
    diff = y - t
    loss = float(np.mean(diff * diff))
    # d loss / d y for the mean over every output entry
    delta = 2.0 * diff / diff.size
    n_layers = len(weights)
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for k in range(n_layers - 1, -1, -1):
        if activations[k] == "tanh":
            delta = delta * (1.0 - outs[k + 1] ** 2)
        gw[k] = delta.T @ outs[k]
        gb[k] = delta.sum(axis=0)
        if k:
            delta = delta @ weights[k]
    return gw, gb, loss


def backward(m: Mlp, x, t) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of the batch-mean squared error w.r.t. every weight and bias.

    ``x`` is a normalized (n, inputs) batch and ``t`` the matching targets.
    Returns ``(weight_grads, bias_grads)`` with the parameter shapes.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64)
    if x.shape[0] == 0:
        raise EmptyBatch("backward on an empty batch")
    if t.size != x.shape[0] * m.layer_sizes[-1]:
        raise LengthMismatch(f"{x.shape[0]} inputs but {t.size} targets")
    gw, gb, _ = _backprop(m.weights, m.biases, m.activations, x, t)
    return gw, gb


# --- training -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 5000
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 32
    early_stop_patience: int = 50
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        for name in ("max_epochs", "batch_size"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidTrainConfig(f"{name} must be a positive integer, got {v!r}")
        p = self.early_stop_patience
        if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 0:
            raise InvalidTrainConfig(f"early_stop_patience must be a non-negative integer, got {p!r}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidTrainConfig(f"learning_rate must be positive, got {self.learning_rate!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidTrainConfig(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")


@dataclass
class TrainReport:
    epochs_run: int
    best_epoch: int
    train_loss_history: list[float] = field(default_factory=list)
    validation_loss_history: list[float] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def best_validation_loss(self) -> float:
        return min(self.validation_loss_history)


def train(m: Mlp, splits: DataSplits, cfg: TrainConfig = TrainConfig()) -> tuple[Mlp, TrainReport]:
    """Mini-batch training with early stopping on validation MSE.

    Inputs and targets are scaled with the model's normalizer, which is fitted
    on ``splits.train`` when the model does not carry one. The returned model
    holds the parameters of the best validation epoch.
    """
    if not splits.train:
        raise EmptySplit("training subset is empty")
    if not splits.validation:
        raise EmptySplit("validation subset is empty")
    if m.layer_sizes[0] != 3 or m.layer_sizes[-1] != 1:
        raise InvalidArchitecture(
            f"crack-length regression needs 3 inputs and 1 output, got {list(m.layer_sizes)}"
        )
    nz = m.normalizer if m.normalizer is not None else fit_normalizer(splits.train)

    x_tr = nz.scale_features(feature_matrix(splits.train))
    t_tr = nz.scale_target(target_vector(splits.train))
    x_val = nz.scale_features(feature_matrix(splits.validation))
    t_val = nz.scale_target(target_vector(splits.validation))

    weights = [w.copy() for w in m.weights]
    biases = [b.copy() for b in m.biases]
    acts = m.activations
    params = weights + biases
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.eps
    adam = cfg.optimizer == "adam"

    rng = np.random.default_rng(cfg.seed)
    n = x_tr.shape[0]
    bs = cfg.batch_size
    step = 0
    best_val = math.inf
    best_epoch = 0
    best_params = [p.copy() for p in params]
    since_best = 0
    train_hist: list[float] = []
    val_hist: list[float] = []
    start = time.perf_counter()

    # divergence surfaces as NonFiniteLoss below, not as numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.max_epochs + 1):
            order = rng.permutation(n)
            total = 0.0
            for lo in range(0, n, bs):
                idx = order[lo : lo + bs]
                gw, gb, loss = _backprop(weights, biases, acts, x_tr[idx], t_tr[idx])
                total += loss * idx.size
                step += 1
                if adam:
                    c1 = 1.0 - b1**step
                    c2 = 1.0 - b2**step
                    for p, g, mm, vv in zip(params, gw + gb, m1, m2):
                        mm *= b1
                        mm += (1.0 - b1) * g
                        vv *= b2
                        vv += (1.0 - b2) * (g * g)
                        p -= lr * (mm / c1) / (np.sqrt(vv / c2) + eps)
                else:
                    for p, g in zip(params, gw + gb):
                        p -= lr * g
            train_loss = total / n
            y_val = _layer_outputs(weights, biases, acts, x_val)[-1][:, 0]
            val_loss = loss_mse(y_val, t_val)
            if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                raise NonFiniteLoss(epoch)
            train_hist.append(train_loss)
            val_hist.append(val_loss)
            if epoch % LOG_EVERY == 0:
                log.info("epoch %d train_mse=%.3e val_mse=%.3e", epoch, train_loss, val_loss)
            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                best_params = [p.copy() for p in params]
                since_best = 0
            else:
                since_best += 1
                if since_best > cfg.early_stop_patience:
                    break

    k = len(weights)
    model = Mlp(m.layer_sizes, tuple(best_params[:k]), tuple(best_params[k:]), acts, nz)
    report = TrainReport(
        epochs_run=len(val_hist),
        best_epoch=best_epoch,
        train_loss_history=train_hist,
        validation_loss_history=val_hist,
        wall_time=time.perf_counter() - start,
    )
    return model, report


def predict(m: Mlp, raw) -> np.ndarray | float:
    """Crack length in mm for raw ``(N, R, R_ol)`` input(s)."""
    if m.normalizer is None:
        raise MissingNormalizer("model has no fitted normalizer; train it or load a trained file")
    raw = np.asarray(raw, dtype=np.float64)
    y = forward(m, m.normalizer.scale_features(raw))
    out = m.normalizer.unscale_target(y)
    return float(out) if np.ndim(out) == 0 else out


# --- persistence ----------------------------------------------------------------


def to_dict(m: Mlp) -> dict:
    nz = m.normalizer
    return {
        "format_version": FORMAT_VERSION,
        "layer_sizes": list(m.layer_sizes),
        "activations": list(m.activations),
        "normalizer": None if nz is None else {"min": list(nz.minimum), "max": list(nz.maximum)},
        "weights": [w.tolist() for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
    }


def save(m: Mlp, sink: TextIO | str | Path) -> None:
    """Write the model as JSON; floats use shortest round-trip representation."""
    text = json.dumps(to_dict(m), indent=1) + "\n"
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def from_dict(data: dict) -> Mlp:
    if not isinstance(data, dict) or "format_version" not in data:
        raise CorruptModelFile("missing format_version")
    if data["format_version"] != FORMAT_VERSION:
        raise VersionMismatch(
            f"model file has format_version {data['format_version']!r}, expected {FORMAT_VERSION}"
        )
    try:
        nz_data = data["normalizer"]
        nz = None if nz_data is None else Normalizer(tuple(nz_data["min"]), tuple(nz_data["max"]))
        return Mlp(
            tuple(data["layer_sizes"]),
            tuple(np.array(w, dtype=np.float64) for w in data["weights"]),
            tuple(np.array(b, dtype=np.float64) for b in data["biases"]),
            tuple(data["activations"]),
            nz,
        )
    except (KeyError, TypeError, ValueError, InvalidArchitecture) as exc:
        raise CorruptModelFile(f"invalid model contents: {exc}") from None


def load(source: TextIO | str | Path) -> Mlp:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelFile(f"model file is not valid JSON: {exc}") from None
    return from_dict(data)


def zero_like(m: Mlp, output_bias: Sequence[float] | float = 0.0) -> Mlp:
    """Same architecture with all weights zero; handy for degenerate cases."""
    ws = [np.zeros_like(w) for w in m.weights]
    bs = [np.zeros_like(b) for b in m.biases]
    bs[-1] = bs[-1] + np.asarray(output_bias, dtype=np.float64)
    return m.with_params(ws, bs)
