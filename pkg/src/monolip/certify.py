"""Post-hoc checks of trained networks.

The Lipschitz certificate combines the exact product-of-norms bound with a
sampled lower estimate; the monotonicity certificate compares analytic and
finite-difference partials at sampled points. ``abs_fit_experiment`` fits
``|x|`` with norm-constrained GroupSort and ReLU networks.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .constraints import Mode, Scheme, lipschitz_product
from .network import Activation, MonotonicNetwork, NetworkSpec, initialize
from .training import LossKind, TrainConfig, backward, forward_with_tape, train

__all__ = [
    "Box",
    "Certificate",
    "certify_lipschitz",
    "certify_monotone",
    "certify",
    "abs_fit_experiment",
    "MONOTONE_TOL",
]

MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).ravel()
        hi = np.asarray(self.hi, dtype=np.float64).ravel()
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("box bounds must be non-empty and of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(hi <= lo):
            raise ValueError("degenerate box: every upper bound must exceed its lower bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @classmethod
    def around(cls, X, inflate: float = 0.5) -> "Box":
        """Bounding box of ``X`` with its width grown by ``inflate`` (split evenly)."""
        X = np.asarray(X, dtype=np.float64)
        lo, hi = X.min(axis=0), X.max(axis=0)
        pad = 0.5 * inflate * np.where(hi > lo, hi - lo, 1.0)
        return cls(lo - pad, hi + pad)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lo + self.width * rng.random((n, self.lo.size))


@dataclass
class Certificate:
    lipschitz_product: float
    lambda_budget: float
    empirical_lipschitz: float
    monotone_ok: bool | None  # None when no input is declared monotone
    worst_partial: float | None
    worst_fd_partial: float | None
    samples: int
    seed: int

    @property
    def product_ok(self) -> bool:
        return self.lipschitz_product <= self.lambda_budget * (1 + 1e-9)

    def to_json(self) -> str:
        d = asdict(self)
        d["product_ok"] = self.product_ok
        return json.dumps(d, indent=1, sort_keys=True) + "\n"


def _check_box(net: MonotonicNetwork, box: Box) -> None:
    if box.lo.size != net.spec.input_dim:
        raise ValueError(f"box has {box.lo.size} dimensions, network expects {net.spec.input_dim}")


def certify_lipschitz(net: MonotonicNetwork, num_pairs: int, box: Box, seed: int = 0) -> tuple[float, float]:
    """Return ``(lipschitz_product, empirical_lipschitz)`` for ``g``.

    The empirical value is the largest ``|g(u) - g(v)| / ||u - v||_1`` over
    sampled pairs in the rescaled input space (where ``g`` is meant to be
    ``lam``-Lipschitz). Half the pairs are independent uniform draws, the
    other half differ in a single coordinate.
    """
    if num_pairs < 1:
        raise ValueError("num_pairs must be >= 1")
    _check_box(net, box)
    rng = np.random.default_rng(seed)
    n = net.spec.input_dim
    scale = net.input_scale
    n_uniform = (num_pairs + 1) // 2
    n_axis = num_pairs - n_uniform
    U = box.sample(rng, num_pairs)
    V = np.empty_like(U)
    V[:n_uniform] = box.sample(rng, n_uniform)
    V[n_uniform:] = U[n_uniform:]
    axes = rng.integers(0, n, n_axis)
    rows = np.arange(n_uniform, num_pairs)
    V[rows, axes] = box.lo[axes] + box.width[axes] * rng.random(n_axis)
    U, V = U * scale, V * scale
    dist = np.abs(U - V).sum(axis=1)
    keep = dist > 0
    ratio = np.abs(net.g(U[keep]) - net.g(V[keep])) / dist[keep]
    return lipschitz_product(net), float(ratio.max()) if ratio.size else 0.0


def certify_monotone(
    net: MonotonicNetwork, num_points: int, box: Box, eps: float = 1e-4, seed: int = 0
) -> tuple[bool, float, float]:
    """Check ``df/dx_i >= 0`` for all declared monotone inputs.

    Returns ``(monotone_ok, min analytic partial, min finite-difference
    partial)``. The finite-difference step is ``eps`` times the box width of
    the feature.
    """
    idx = list(net.spec.monotone_indices)
    if not idx:
        raise ValueError("network declares no monotone inputs; skip the monotonicity certificate")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if num_points < 1:
        raise ValueError("num_points must be >= 1")
    _check_box(net, box)
    rng = np.random.default_rng(seed)
    X = box.sample(rng, num_points)
    _, tape = forward_with_tape(net, X)
    analytic = backward(net, tape, 1.0).inputs[:, idx]
    fd = np.empty_like(analytic)
    for j, i in enumerate(idx):
        h = eps * box.width[i]
        Xp, Xm = X.copy(), X.copy()
        Xp[:, i] += h
        Xm[:, i] -= h
        fd[:, j] = (net.f(Xp) - net.f(Xm)) / (2 * h)
    worst_a, worst_fd = float(analytic.min()), float(fd.min())
    return min(worst_a, worst_fd) >= -MONOTONE_TOL, worst_a, worst_fd


def certify(
    net: MonotonicNetwork, box: Box, num_pairs: int = 100_000, num_points: int = 10_000, eps: float = 1e-4, seed: int = 0
) -> Certificate:
    product, empirical = certify_lipschitz(net, num_pairs, box, seed)
    mono, worst, worst_fd = None, None, None
    if net.spec.monotone_indices:
        mono, worst, worst_fd = certify_monotone(net, num_points, box, eps, seed)
    return Certificate(product, net.spec.lam, empirical, mono, worst, worst_fd, num_pairs, seed)


def abs_fit_experiment(
    activation: Activation | str = Activation.GROUPSORT,
    depth: int = 3,
    width: int = 16,
    lam: float = 1.0,
    seed: int = 0,
    target: str = "abs",
    epochs: int = 2000,
    batch_size: int = 64,
    norm_scheme: Scheme | str = Scheme.COLUMN_WISE,
    norm_mode: Mode | str = Mode.DIRECT,
) -> float:
    """Fit ``|x|`` (or ``x`` with ``target="linear"``) on [-1, 1]; return the test MSE.

    ``depth`` counts weight layers. Training uses 1024 uniform points and Adam
    with default settings; the test set is a 2001-point grid.
    """
    funcs = {"abs": np.abs, "linear": lambda x: x}
    if target not in funcs:
        raise ValueError(f"target must be one of {sorted(funcs)}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(1024, 1))
    spec = NetworkSpec(
        input_dim=1,
        hidden_widths=(width,) * (depth - 1),
        activation=activation,
        group_size=2,
        lam=lam,
        norm_scheme=norm_scheme,
        norm_mode=norm_mode,
        seed=seed,
    )
    net = initialize(spec)
    cfg = TrainConfig(loss=LossKind.MSE, epochs=epochs, batch_size=batch_size, seed=seed)
    train(net, X, funcs[target](X[:, 0]), cfg)
    grid = np.linspace(-1.0, 1.0, 2001)[:, np.newaxis]
    return float(np.mean((net.f(grid) - funcs[target](grid[:, 0])) ** 2))
