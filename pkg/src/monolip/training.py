"""Reverse-mode gradients, losses, optimizers and the training loop."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constraints import Mode, Scheme, lipschitz_product, project_in_place
from .network import Activation, ConfigError, MonotonicNetwork, propagate

__all__ = [
    "LossKind",
    "OptimizerKind",
    "TrainConfig",
    "TrainingError",
    "StaleTapeError",
    "Tape",
    "Gradients",
    "forward_with_tape",
    "backward",
    "loss_bce_with_logit",
    "loss_mse",
    "SGD",
    "Adam",
    "EpochRecord",
    "History",
    "train",
    "kink_margin",
]


class LossKind(str, enum.Enum):
    BCE = "bce_with_logit"
    MSE = "mse"


class OptimizerKind(str, enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


class TrainingError(RuntimeError):
    pass


class StaleTapeError(RuntimeError):
    """The network changed after the tape was recorded."""


@dataclass(frozen=True)
class TrainConfig:
    loss: LossKind = LossKind.BCE
    optimizer: OptimizerKind = OptimizerKind.ADAM
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "loss", LossKind(self.loss))
            object.__setattr__(self, "optimizer", OptimizerKind(self.optimizer))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        # lr == 0 is allowed: it freezes the parameters.
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise ConfigError(f"learning rate must be non-negative, got {self.lr}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError("Adam betas must lie in (0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")


# -- losses ---------------------------------------------------------------


def loss_bce_with_logit(z, label) -> np.ndarray | float:
    """Binary cross entropy of logit ``z``: ``max(z, 0) - z*y + log1p(exp(-|z|))``."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    out = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return float(out) if out.ndim == 0 else out


def _bce_grad(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # sigmoid without overflow
    e = np.exp(-np.abs(z))
    sig = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return sig - y


def loss_mse(pred, target) -> np.ndarray | float:
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    out = d * d
    return float(out) if out.ndim == 0 else out


# -- reverse mode ---------------------------------------------------------


@dataclass
class Tape:
    version: int
    inputs: np.ndarray
    layers: list[dict]
    output: np.ndarray


@dataclass
class Gradients:
    inputs: np.ndarray  # (batch, n)
    weights: list[np.ndarray]  # w.r.t. raw weights
    biases: list[np.ndarray]

    def flat(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


def forward_with_tape(net: MonotonicNetwork, X) -> tuple[np.ndarray, Tape]:
    """Batched ``f`` plus the tape needed by :func:`backward`."""
    X = net._check_batch(X)
    records: list[dict] = []
    g = propagate(net, X * net.input_scale, tape=records)
    out = g + net.residual(X)
    return out, Tape(net.version, X, records, out)


def backward(net: MonotonicNetwork, tape: Tape, upstream) -> Gradients:
    """Propagate ``upstream = dL/df`` (one value per row) back through the tape.

    Weight and bias gradients are summed over the batch.
    """
    if tape.version != net.version:
        raise StaleTapeError("network parameters changed since the forward pass was recorded")
    up = np.broadcast_to(np.asarray(upstream, dtype=np.float64), tape.output.shape)
    spec = net.spec
    scheme = net.norm_scheme
    direct = spec.norm_mode is Mode.DIRECT
    n_layers = len(net.layers)
    w_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]

    dA = up[:, np.newaxis]  # d/d(last pre-activation)
    for i in range(n_layers - 1, -1, -1):
        rec = tape.layers[i]
        dZ = dA
        if i != n_layers - 1:
            if spec.activation is Activation.GROUPSORT:
                g = spec.group_size
                B, width = dA.shape
                dZ = np.empty_like(dA).reshape(B, width // g, g)
                np.put_along_axis(dZ, rec["perm"], dA.reshape(B, width // g, g), axis=-1)
                dZ = dZ.reshape(B, width)
            else:
                dZ = dA * (rec["pre"] > 0)
        dW_eff = dZ.T @ rec["input"]
        b_grads[i] = dZ.sum(axis=0)
        if direct:
            w_grads[i] = scheme.vjp(net.layers[i].weights, dW_eff, rec["active"])
        else:
            w_grads[i] = dW_eff
        dA = dZ @ rec["w_eff"]

    dx = dA * net.input_scale
    idx = list(spec.monotone_indices)
    if idx:
        dx[:, idx] += up[:, np.newaxis] * net.input_lambdas[idx]
    return Gradients(dx, w_grads, b_grads)


def kink_margin(net: MonotonicNetwork, X, include_weights: bool = True) -> float:
    """Distance of the evaluation at ``X`` to the nearest non-differentiable point.

    Covers GroupSort ties, ReLU zeros and, in DIRECT mode, the ``max(1, .)``
    branch, argmax ties between column sums and zero entries inside the
    columns that the active normalization differentiates through.
    """
    X = net._check_batch(X)
    records: list[dict] = []
    propagate(net, X * net.input_scale, tape=records)
    spec = net.spec
    margins = [np.inf]
    for rec in records[:-1]:
        Z = rec["pre"]
        if spec.activation is Activation.GROUPSORT:
            g = spec.group_size
            if g > 1:
                s = np.sort(Z.reshape(Z.shape[0], -1, g), axis=-1)
                margins.append(float(np.diff(s, axis=-1).min()))
        else:
            margins.append(float(np.abs(Z).min()))
    if include_weights and spec.norm_mode is Mode.DIRECT and spec.norm_scheme is not Scheme.NONE:
        scheme = net.norm_scheme
        for layer in net.layers:
            W = layer.weights
            sums = np.abs(W).sum(axis=0)
            if scheme.variant is Scheme.COLUMN_WISE:
                margins.append(float(np.abs(sums - scheme.budget).min()))
                act = sums > scheme.budget
                if act.any():
                    margins.append(float(np.abs(W[:, act]).min()))
                continue
            ref = 1.0 if scheme.variant is Scheme.VARIANT_A else scheme.budget
            margins.append(abs(float(sums.max()) - ref))
            if sums.max() > ref:
                if sums.size > 1:
                    top = np.sort(sums)[-2:]
                    margins.append(float(top[1] - top[0]))
                margins.append(float(np.abs(W[:, int(np.argmax(sums))]).min()))
    return min(margins)


# -- optimizers -----------------------------------------------------------


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer is OptimizerKind.SGD:
        return SGD(cfg.lr)
    return Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)


# -- training loop --------------------------------------------------------


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None
    lipschitz_product: float


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)

    @property
    def train_loss(self) -> list[float]:
        return [r.train_loss for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lipschitz_product"])
        for r in self.records:
            w.writerow([r.epoch, repr(r.train_loss), "" if r.val_loss is None else repr(r.val_loss), repr(r.lipschitz_product)])
        return buf.getvalue()


def _loss_and_grad(kind: LossKind, out: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if kind is LossKind.BCE:
        return loss_bce_with_logit(out, y), _bce_grad(out, y)
    return loss_mse(out, y), 2.0 * (out - y)


def evaluate_loss(net: MonotonicNetwork, X, y, kind: LossKind = LossKind.BCE) -> float:
    out = net.f(X)
    return float(np.mean(_loss_and_grad(LossKind(kind), out, np.asarray(y, dtype=np.float64))[0]))


def train(
    net: MonotonicNetwork,
    X,
    y,
    cfg: TrainConfig,
    validation: tuple[np.ndarray, np.ndarray] | None = None,
    callback: Callable[[int, MonotonicNetwork], None] | None = None,
) -> History:
    """Minibatch training of ``net`` in place; returns the per-epoch history.

    In PROJECT mode the weights are projected after every optimizer step, so
    ``callback(step, net)`` always sees a feasible network.
    """
    X = net._check_batch(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] == 0:
        raise TrainingError("empty dataset")
    if y.shape[0] != X.shape[0]:
        raise TrainingError(f"{X.shape[0]} samples but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise TrainingError("targets contain non-finite values")
    if cfg.loss is LossKind.BCE and not np.all((y == 0) | (y == 1)):
        raise TrainingError("binary cross entropy needs labels in {0, 1}")

    rng = np.random.default_rng(cfg.seed)
    opt = make_optimizer(cfg)
    project = net.spec.norm_mode is Mode.PROJECT and net.spec.norm_scheme is not Scheme.NONE
    history = History()
    n = X.shape[0]
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start : start + cfg.batch_size]
            out, tape = forward_with_tape(net, X[sel])
            with np.errstate(over="ignore", invalid="ignore"):
                losses, dout = _loss_and_grad(cfg.loss, out, y[sel])
            loss = float(np.mean(losses))
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            total += loss * sel.size
            grads = backward(net, tape, dout / sel.size)
            opt.step(net.parameters(), [g for g in grads.flat()])
            net.bump_version()
            if project:
                project_in_place(net)
            step += 1
            if callback is not None:
                callback(step, net)
        val = None
        if validation is not None:
            val = evaluate_loss(net, validation[0], validation[1], cfg.loss)
        history.records.append(EpochRecord(epoch, total / n, val, lipschitz_product(net)))
    return history
