"""Weight normalizations that bound the 1-norm Lipschitz constant of a dense net.

With ``m`` weight layers and a 1-Lipschitz activation, the network is
``lam``-Lipschitz whenever every layer has operator 1-norm at most
``lam ** (1 / m)``. Three ways of getting there are provided:

* ``VARIANT_A``:   ``W' = lam**(1/m) * W / max(1, ||W||_1)``
* ``VARIANT_B``:   ``W' = W / max(1, lam**(-1/m) * ||W||_1)``
* ``COLUMN_WISE``: every column is divided by ``max(1, lam**(-1/m) * sum_j |W_jk|)``

and two ways of applying them: ``DIRECT`` (normalize inside every forward
pass, gradients flow through the normalization) and ``PROJECT`` (store
feasible weights and pull them back after each optimizer step).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .linalg import as_matrix, column_abs_sums

if TYPE_CHECKING:  # pragma: no cover
    from .network import MonotonicNetwork

__all__ = [
    "Scheme",
    "Mode",
    "NormScheme",
    "layer_budget",
    "effective_weights_variant_a",
    "effective_weights_variant_b",
    "effective_weights_colwise",
    "project_in_place",
    "effective_weights",
    "lipschitz_product",
]

# Relative slack used only when deciding whether a stored matrix is already
# feasible in PROJECT mode; makes projection exactly idempotent despite the
# rounding of the rescaled norm.
PROJECTION_RTOL = 1e-14


class Scheme(str, enum.Enum):
    VARIANT_A = "variant_a"
    VARIANT_B = "variant_b"
    COLUMN_WISE = "columnwise"
    # Unconstrained baseline, not a normalization.
    NONE = "none"


class Mode(str, enum.Enum):
    DIRECT = "direct"
    PROJECT = "project"


def layer_budget(lam: float, m: int) -> float:
    """Per-layer norm budget ``lam ** (1/m)``."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if m < 1:
        raise ValueError(f"number of layers must be >= 1, got {m}")
    return float(lam ** (1.0 / m))


def effective_weights_variant_a(W, lam: float, m: int) -> np.ndarray:
    W = as_matrix(W)
    norm = column_abs_sums(W).max()
    return layer_budget(lam, m) * W / max(1.0, norm)


def effective_weights_variant_b(W, lam: float, m: int) -> np.ndarray:
    W = as_matrix(W)
    norm = column_abs_sums(W).max()
    return W / max(1.0, norm / layer_budget(lam, m))


def effective_weights_colwise(W, lam: float, m: int) -> np.ndarray:
    W = as_matrix(W)
    sums = column_abs_sums(W)
    return W / np.maximum(1.0, sums / layer_budget(lam, m))[np.newaxis, :]


@dataclass(frozen=True)
class NormScheme:
    """A normalization variant together with its global budget and depth."""

    variant: Scheme
    lam: float
    num_layers: int

    def __post_init__(self):
        object.__setattr__(self, "variant", Scheme(self.variant))
        layer_budget(self.lam, self.num_layers)

    @property
    def budget(self) -> float:
        return layer_budget(self.lam, self.num_layers)

    def apply(self, W: np.ndarray) -> np.ndarray:
        """Normalized (effective) weights for raw weights ``W``."""
        if self.variant is Scheme.VARIANT_A:
            return effective_weights_variant_a(W, self.lam, self.num_layers)
        if self.variant is Scheme.VARIANT_B:
            return effective_weights_variant_b(W, self.lam, self.num_layers)
        if self.variant is Scheme.COLUMN_WISE:
            return effective_weights_colwise(W, self.lam, self.num_layers)
        return np.array(W, dtype=np.float64)

    def active(self, W: np.ndarray) -> np.ndarray:
        """Branch flags of the ``max(1, .)``: one per matrix, or one per column.

        Equality with the budget counts as inactive.
        """
        sums = np.abs(W).sum(axis=0)
        if self.variant is Scheme.VARIANT_A:
            return np.array([sums.max() > 1.0])
        if self.variant is Scheme.VARIANT_B:
            return np.array([sums.max() / self.budget > 1.0])
        if self.variant is Scheme.COLUMN_WISE:
            return sums / self.budget > 1.0
        return np.array([False])

    def vjp(self, W: np.ndarray, G: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
        """Pull the gradient ``G`` w.r.t. effective weights back to raw weights.

        The non-smooth max over columns uses the first argmax column; the
        derivative of ``|w|`` at zero is taken as zero.
        """
        if active is None:
            active = self.active(W)
        if self.variant is Scheme.NONE:
            return G.copy()
        sums = np.abs(W).sum(axis=0)
        if self.variant is Scheme.COLUMN_WISE:
            c = 1.0 / self.budget
            dW = G.copy()
            cols = np.flatnonzero(active)
            if cols.size:
                s = sums[cols]
                inner = (G[:, cols] * W[:, cols]).sum(axis=0)
                dW[:, cols] = G[:, cols] / (c * s) - (inner / (c * s * s)) * np.sign(W[:, cols])
            return dW
        r = self.budget
        if self.variant is Scheme.VARIANT_A:
            if not active[0]:
                return r * G
            gain, denom_scale = r, 1.0  # W' = r W / N
        else:
            if not active[0]:
                return G.copy()
            gain, denom_scale = 1.0, 1.0 / r  # W' = W / (N / r)
        k = int(np.argmax(sums))
        norm = sums[k] * denom_scale
        dW = gain * G / norm
        dW[:, k] -= gain * float(np.sum(G * W)) * denom_scale / (norm * norm) * np.sign(W[:, k])
        return dW

    def project(self, W: np.ndarray) -> np.ndarray:
        """Map ``W`` into the feasible set ``{||W||_1 <= budget}``.

        Matrices that are already feasible come back unchanged, which makes
        the operation idempotent. Infeasible ones get the scheme's rescaling.
        """
        if self.variant is Scheme.NONE:
            return W
        limit = self.budget * (1.0 + PROJECTION_RTOL)
        sums = np.abs(W).sum(axis=0)
        if self.variant is Scheme.COLUMN_WISE:
            bad = sums > limit
            if not bad.any():
                return W
            out = W.copy()
            out[:, bad] = W[:, bad] * (self.budget / sums[bad])
            return out
        if sums.max() <= limit:
            return W
        return self.apply(W)


def project_in_place(net: "MonotonicNetwork") -> None:
    """Replace every layer's raw weights by their projection."""
    scheme = net.norm_scheme
    changed = False
    for layer in net.layers:
        projected = scheme.project(layer.weights)
        if projected is not layer.weights:
            layer.weights = projected
            changed = True
    if changed:
        net.bump_version()


def effective_weights(net: "MonotonicNetwork", layer_index: int) -> np.ndarray:
    """Weights actually used by the forward pass of layer ``layer_index``."""
    if not 0 <= layer_index < len(net.layers):
        raise IndexError(f"layer index {layer_index} out of range for {len(net.layers)} layers")
    W = net.layers[layer_index].weights
    if net.spec.norm_mode is Mode.PROJECT:
        return W
    return net.norm_scheme.apply(W)


def lipschitz_product(net: "MonotonicNetwork") -> float:
    """Product over layers of the 1-norm of the effective weights."""
    prod = 1.0
    for i in range(len(net.layers)):
        prod *= float(np.abs(effective_weights(net, i)).sum(axis=0).max())
    return prod
