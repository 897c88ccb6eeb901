"""Dense Lipschitz network ``g`` and the monotonic residual wrapper ``f``.

``f(x) = g(x_tilde) + sum_{i in I} lam_i * x_i`` with ``x_tilde_i = x_i * lam_i / lam``.
Because ``g`` is ``lam``-Lipschitz in the 1-norm of ``x_tilde``, every partial
``df/dx_i`` for ``i`` in ``I`` is at least ``lam_i - lam_i = 0``.
"""

from __future__ import annotations

import copy
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .constraints import Mode, NormScheme, Scheme, project_in_place
from .linalg import ShapeError, as_vector

__all__ = [
    "ConfigError",
    "Activation",
    "NetworkSpec",
    "DenseLayer",
    "MonotonicNetwork",
    "group_sort",
    "initialize",
    "forward_g",
    "forward_f",
    "FORMAT_VERSION",
]

FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Invalid network or training configuration."""


class Activation(str, enum.Enum):
    GROUPSORT = "groupsort"
    RELU = "relu"


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture and constraint configuration.

    ``hidden_widths`` lists the hidden layer widths, so the network has
    ``len(hidden_widths) + 1`` weight layers. ``group_size`` is only used by
    the GroupSort activation.
    """

    input_dim: int
    hidden_widths: tuple[int, ...] = (16, 16)
    output_dim: int = 1
    activation: Activation = Activation.GROUPSORT
    group_size: int = 2
    lam: float = 1.0
    lambda_per_input: tuple[float, ...] | None = None
    monotone_indices: tuple[int, ...] = ()
    norm_scheme: Scheme = Scheme.COLUMN_WISE
    norm_mode: Mode = Mode.DIRECT
    seed: int = 0

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("hidden_widths", tuple(int(w) for w in self.hidden_widths))
        set_("monotone_indices", tuple(sorted({int(i) for i in self.monotone_indices})))
        if self.lambda_per_input is not None:
            set_("lambda_per_input", tuple(float(v) for v in self.lambda_per_input))
        try:
            set_("activation", Activation(self.activation))
            set_("norm_scheme", Scheme(self.norm_scheme))
            set_("norm_mode", Mode(self.norm_mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        set_("lam", float(self.lam))
        self._validate()

    def _validate(self):
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if self.output_dim != 1:
            raise ConfigError("the monotonic wrapper needs a scalar output (output_dim=1)")
        if any(w < 1 for w in self.hidden_widths):
            raise ConfigError(f"hidden widths must be positive: {self.hidden_widths}")
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise ConfigError(f"lambda must be a positive finite number, got {self.lam}")
        if self.activation is Activation.GROUPSORT:
            if self.group_size < 1:
                raise ConfigError(f"group_size must be positive, got {self.group_size}")
            bad = [w for w in self.hidden_widths if w % self.group_size]
            if bad:
                raise ConfigError(f"group_size {self.group_size} does not divide hidden widths {bad}")
        for i in self.monotone_indices:
            if not 0 <= i < self.input_dim:
                raise ConfigError(f"monotone index {i} outside [0, {self.input_dim})")
        if self.lambda_per_input is not None:
            if len(self.lambda_per_input) != self.input_dim:
                raise ConfigError("lambda_per_input needs one entry per input")
            if not all(v > 0 and np.isfinite(v) for v in self.lambda_per_input):
                raise ConfigError("lambda_per_input entries must be positive and finite")

    @property
    def num_layers(self) -> int:
        return len(self.hidden_widths) + 1

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "output_dim": self.output_dim,
            "activation": self.activation.value,
            "group_size": self.group_size,
            "lambda": self.lam,
            "lambda_per_input": None if self.lambda_per_input is None else list(self.lambda_per_input),
            "monotone_indices": list(self.monotone_indices),
            "norm_scheme": self.norm_scheme.value,
            "norm_mode": self.norm_mode.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "NetworkSpec":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass
class DenseLayer:
    weights: np.ndarray  # raw, shape (out, in)
    bias: np.ndarray  # shape (out,)


def group_sort(v, group_size: int) -> np.ndarray:
    """Sort each contiguous block of ``group_size`` entries in ascending order."""
    v = as_vector(v)
    if group_size < 1 or v.shape[0] % group_size:
        raise ConfigError(f"group size {group_size} does not divide length {v.shape[0]}")
    return sort_groups(v[np.newaxis, :], group_size)[0][0]


def sort_groups(Z: np.ndarray, group_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-batched GroupSort; also returns the within-group source indices."""
    B, width = Z.shape
    blocks = Z.reshape(B, width // group_size, group_size)
    idx = np.argsort(blocks, axis=-1, kind="stable")
    out = np.take_along_axis(blocks, idx, axis=-1)
    return out.reshape(B, width), idx


@dataclass
class MonotonicNetwork:
    spec: NetworkSpec
    layers: list[DenseLayer]
    extras: dict[str, Any] = field(default_factory=dict)
    version: int = 0

    def __post_init__(self):
        widths = self.spec.widths
        if len(self.layers) != len(widths) - 1:
            raise ConfigError(f"expected {len(widths) - 1} layers, got {len(self.layers)}")
        for i, layer in enumerate(self.layers):
            layer.weights = np.asarray(layer.weights, dtype=np.float64)
            layer.bias = np.asarray(layer.bias, dtype=np.float64)
            if layer.weights.shape != (widths[i + 1], widths[i]) or layer.bias.shape != (widths[i + 1],):
                raise ConfigError(
                    f"layer {i}: weights {layer.weights.shape} / bias {layer.bias.shape} "
                    f"do not match widths {widths[i]} -> {widths[i + 1]}"
                )

    @property
    def norm_scheme(self) -> NormScheme:
        return NormScheme(self.spec.norm_scheme, self.spec.lam, self.spec.num_layers)

    @property
    def input_lambdas(self) -> np.ndarray:
        """Per-input budgets ``lam_i`` (all equal to ``lam`` when not given)."""
        if self.spec.lambda_per_input is None:
            return np.full(self.spec.input_dim, self.spec.lam)
        return np.array(self.spec.lambda_per_input)

    @property
    def input_scale(self) -> np.ndarray:
        return self.input_lambdas / self.spec.lam

    def bump_version(self) -> None:
        """Mark parameters as modified, invalidating recorded tapes."""
        self.version += 1

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out

    def copy(self) -> "MonotonicNetwork":
        return copy.deepcopy(self)

    # -- evaluation -----------------------------------------------------

    def _check_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        if X.ndim != 2 or X.shape[1] != self.spec.input_dim:
            raise ShapeError(f"expected inputs with {self.spec.input_dim} features, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("inputs contain non-finite values")
        return X

    def g(self, X) -> np.ndarray:
        """Batched ``g``; ``X`` has shape (batch, n) and is used as given."""
        return propagate(self, self._check_batch(X))

    def f(self, X) -> np.ndarray:
        """Batched monotonic output ``f``."""
        X = self._check_batch(X)
        return propagate(self, X * self.input_scale) + self.residual(X)

    def residual(self, X: np.ndarray) -> np.ndarray:
        idx = list(self.spec.monotone_indices)
        if not idx:
            return np.zeros(X.shape[0])
        return X[:, idx] @ self.input_lambdas[idx]

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        d = {
            "format_version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "layers": [
                {
                    "rows": int(layer.weights.shape[0]),
                    "cols": int(layer.weights.shape[1]),
                    "weights": layer.weights.ravel().tolist(),
                    "bias": layer.bias.tolist(),
                }
                for layer in self.layers
            ],
        }
        if self.extras:
            d["extras"] = self.extras
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MonotonicNetwork":
        if d.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported model format_version {d.get('format_version')!r}")
        spec = NetworkSpec.from_dict(d["spec"])
        layers = []
        for entry in d["layers"]:
            W = np.array(entry["weights"], dtype=np.float64)
            if W.size != entry["rows"] * entry["cols"]:
                raise ConfigError("layer weight count does not match rows*cols")
            layers.append(DenseLayer(W.reshape(entry["rows"], entry["cols"]), np.array(entry["bias"], dtype=np.float64)))
        return cls(spec, layers, extras=d.get("extras", {}))

    @classmethod
    def from_json(cls, text: str) -> "MonotonicNetwork":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "MonotonicNetwork":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def propagate(net: MonotonicNetwork, Xt: np.ndarray, tape: list | None = None) -> np.ndarray:
    """Evaluate ``g`` on already-rescaled inputs.

    When ``tape`` is a list, one dict per layer is appended with everything
    the reverse pass needs.
    """
    spec = net.spec
    scheme = net.norm_scheme
    direct = spec.norm_mode is Mode.DIRECT
    A = Xt
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        W = layer.weights
        W_eff = scheme.apply(W) if direct else W
        Z = A @ W_eff.T + layer.bias
        rec = None
        if tape is not None:
            rec = {"input": A, "w_eff": W_eff, "pre": Z}
            if direct:
                rec["active"] = scheme.active(W)
            tape.append(rec)
        if i == last:
            A = Z
            break
        if spec.activation is Activation.GROUPSORT:
            A, idx = sort_groups(Z, spec.group_size)
            if rec is not None:
                rec["perm"] = idx
        else:
            A = np.maximum(Z, 0.0)
    return A[:, 0]


def initialize(spec: NetworkSpec) -> MonotonicNetwork:
    """Uniform weights in ``[-1/fan_in, 1/fan_in]``, zero biases, then one projection."""
    rng = np.random.default_rng(spec.seed)
    widths = spec.widths
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        a = 1.0 / fan_in
        layers.append(DenseLayer(rng.uniform(-a, a, size=(fan_out, fan_in)), np.zeros(fan_out)))
    net = MonotonicNetwork(spec, layers)
    project_in_place(net)
    return net


def forward_g(net: MonotonicNetwork, x: Sequence[float]) -> float:
    x = as_vector(x)
    if x.shape[0] != net.spec.input_dim:
        raise ShapeError(f"expected {net.spec.input_dim} inputs, got {x.shape[0]}")
    return float(net.g(x)[0])


def forward_f(net: MonotonicNetwork, x: Sequence[float]) -> float:
    x = as_vector(x)
    if x.shape[0] != net.spec.input_dim:
        raise ShapeError(f"expected {net.spec.input_dim} inputs, got {x.shape[0]}")
    return float(net.f(x)[0])

