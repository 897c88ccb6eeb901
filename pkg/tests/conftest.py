import numpy as np
import pytest

from monolip.network import NetworkSpec, initialize


def numeric_grad(fun, x, eps=1e-5):
    """Central finite differences of scalar ``fun`` at array ``x`` (any shape)."""
    x = np.array(x, dtype=np.float64)
    out = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + eps
        fp = fun(x)
        x[idx] = old - eps
        fm = fun(x)
        x[idx] = old
        out[idx] = (fp - fm) / (2 * eps)
    return out


def rel_err(a, b, floor=1e-10):
    """Max-norm relative error; ``floor`` guards gradients that are exactly zero."""
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.abs(a).max(), np.abs(b).max(), floor)
    return float(np.abs(a - b).max() / scale)


def perturbed_net(spec, rng, noise=1.0):
    """Initialized net with large random raw weights so normalizations are active."""
    net = initialize(spec)
    for layer in net.layers:
        layer.weights = layer.weights + rng.normal(0.0, noise, layer.weights.shape)
        layer.bias = rng.normal(0.0, 0.5, layer.bias.shape)
    net.bump_version()
    return net


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_spec():
    return NetworkSpec(input_dim=3, hidden_widths=(4, 4), group_size=2, lam=2.0, monotone_indices=(0,), seed=7)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    seen = {}
    for name, ok, detail in results:
        if not ok or name not in seen:
            seen[name] = (ok, detail)
    for name, (ok, detail) in seen.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
