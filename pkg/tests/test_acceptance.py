"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is printed
in the pytest terminal summary."""

import itertools
import time

import numpy as np
import pytest

from monolip.certify import Box, abs_fit_experiment, certify_lipschitz, certify_monotone
from monolip.constraints import Mode, Scheme, lipschitz_product, project_in_place
from monolip.data import generate_synthetic, standardize
from monolip.linalg import one_norm
from monolip.network import NetworkSpec, initialize
from monolip.training import TrainConfig, backward, forward_with_tape, kink_margin, train
from monolip.trigger import (
    efficiency_nondecreasing,
    efficiency_vs_lifetime,
    grid_monotone,
    heatmap,
    model_response,
    roc_auc,
    threshold_for_rate,
)

from conftest import numeric_grad, perturbed_net, rel_err

RESULTS: list[tuple[str, bool, str]] = []

SCHEMES = [Scheme.VARIANT_A, Scheme.VARIANT_B, Scheme.COLUMN_WISE]
MODES = [Mode.DIRECT, Mode.PROJECT]


def record(name: str, ok: bool, detail: str) -> None:
    RESULTS.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


def random_spec(rng, k, input_dim=None, max_width=64, max_depth=5, monotone=()):
    scheme, mode = list(itertools.product(SCHEMES, MODES))[k % 6]
    depth = int(rng.integers(1, max_depth + 1))
    act = "groupsort" if rng.random() < 0.75 else "relu"
    g = int(rng.choice([1, 2, 4]))
    widths = tuple(int(g * rng.integers(1, max_width // g + 1)) for _ in range(depth - 1))
    return NetworkSpec(
        input_dim=input_dim or int(rng.integers(1, 7)),
        hidden_widths=widths,
        activation=act,
        group_size=g,
        lam=float(rng.choice([0.5, 1.0, 2.0, 10.0])),
        monotone_indices=monotone,
        norm_scheme=scheme,
        norm_mode=mode,
        seed=k,
    )


def test_c1_lipschitz_certificate():
    rng = np.random.default_rng(1)
    t0 = time.process_time()
    worst_product = worst_empirical = -np.inf
    for k in range(50):
        spec = random_spec(rng, k)
        net = initialize(spec)
        X = rng.normal(0, 2, size=(100 * 32, spec.input_dim))
        # random targets steeper than the budget allows, so training presses on the constraint
        a = rng.normal(size=spec.input_dim)
        y = 3 * spec.lam * np.sin(X @ a)
        train(net, X, y, TrainConfig(loss="mse", lr=0.05, epochs=1, batch_size=32, seed=k))
        product, empirical = certify_lipschitz(net, 100_000, Box.around(X), seed=k)
        worst_product = max(worst_product, product / spec.lam)
        worst_empirical = max(worst_empirical, empirical / spec.lam)
        if product > spec.lam * (1 + 1e-9) or empirical > spec.lam + 1e-6:
            record("C1 Lipschitz certificate", False, f"spec {k}: product {product}, empirical {empirical}, lambda {spec.lam}")
    cpu = time.process_time() - t0
    record(
        "C1 Lipschitz certificate",
        cpu < 300,
        f"50 nets: max product/lambda = {worst_product:.6f}, max empirical/lambda = {worst_empirical:.6f}, cpu {cpu:.0f}s",
    )


def test_c2_monotonicity_certificate():
    rng = np.random.default_rng(2)
    worst = np.inf
    for k in range(20):
        n = int(rng.integers(2, 6))
        idx = tuple(sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist()))
        spec = random_spec(rng, k, input_dim=n, max_width=16, max_depth=4, monotone=idx)
        if k % 3 == 0:
            spec = NetworkSpec.from_dict({**spec.to_dict(), "lambda_per_input": rng.uniform(0.3, 3.0, n).tolist()})
        net = initialize(spec)
        X = rng.normal(size=(1000, n))
        # targets that decrease in several inputs, pushing against the constraint
        y = (np.sin(3 * X[:, 0]) - X[:, 1 % n] ** 2 - X[:, -1] > -0.5).astype(float)
        train(net, X, y, TrainConfig(lr=0.01, epochs=10, batch_size=50, seed=k))
        ok, wa, wfd = certify_monotone(net, 10_000, Box.around(X), eps=1e-4, seed=k)
        worst = min(worst, wa, wfd)
        if not ok:
            record("C2 monotonicity certificate", False, f"model {k}: analytic {wa}, fd {wfd}")
    record("C2 monotonicity certificate", worst >= -1e-9, f"20 models: min partial {worst:.3e} (tolerance -1e-9)")


def test_c3_gradient_correctness():
    rng = np.random.default_rng(3)
    combos = list(itertools.product(SCHEMES + [Scheme.NONE], MODES, ["groupsort", "relu"]))
    t0 = time.process_time()
    worst = 0.0
    done = resampled = 0
    while done < 100:
        scheme, mode, act = combos[done % len(combos)]
        n = int(rng.integers(1, 5))
        depth = int(rng.integers(1, 4))
        spec = NetworkSpec(
            input_dim=n,
            hidden_widths=tuple(int(2 * rng.integers(1, 4)) for _ in range(depth - 1)),
            activation=act,
            group_size=2,
            lam=float(rng.choice([0.5, 1.0, 2.0, 10.0])),
            lambda_per_input=tuple(rng.uniform(0.5, 2.0, n)) if rng.random() < 0.3 else None,
            monotone_indices=tuple(i for i in range(n) if rng.random() < 0.5),
            norm_scheme=scheme,
            norm_mode=mode,
            seed=done,
        )
        net = perturbed_net(spec, rng, noise=float(rng.choice([0.3, 2.0])))
        x = rng.normal(size=(1, n))
        if kink_margin(net, x) < 1e-4:
            resampled += 1
            continue
        _, tape = forward_with_tape(net, x)
        grads = backward(net, tape, 1.0)
        errs = [rel_err(grads.inputs[0], numeric_grad(lambda v: net.f(v[None])[0], x[0]))]
        for layer, gw, gb in zip(net.layers, grads.weights, grads.biases):
            for attr, g in (("weights", gw), ("bias", gb)):
                def fun(p, layer=layer, attr=attr):
                    old = getattr(layer, attr)
                    setattr(layer, attr, p)
                    try:
                        return net.f(x)[0]
                    finally:
                        setattr(layer, attr, old)

                errs.append(rel_err(g, numeric_grad(fun, getattr(layer, attr))))
        worst = max(worst, max(errs))
        done += 1
    cpu = time.process_time() - t0
    record(
        "C3 gradient correctness",
        worst < 1e-5 and cpu < 60,
        f"100 configs ({resampled} resampled near kinks): max relative error {worst:.2e}, cpu {cpu:.1f}s",
    )


def test_c4_abs_expressiveness():
    t0 = time.process_time()
    mse_gs = abs_fit_experiment("groupsort", depth=3, width=16, lam=1.0, seed=0)
    mse_relu = abs_fit_experiment("relu", depth=3, width=16, lam=1.0, seed=0)
    cpu = time.process_time() - t0
    record(
        "C4 |x| expressiveness",
        mse_gs < 1e-4 and mse_relu >= 10 * mse_gs and cpu < 120,
        f"GroupSort MSE {mse_gs:.2e}, ReLU MSE {mse_relu:.2e} (ratio {mse_relu / max(mse_gs, 1e-300):.1e}), cpu {cpu:.0f}s",
    )


@pytest.fixture(scope="module")
def trigger_sample():
    ds = generate_synthetic(100_000, seed=0)
    return ds.split(0.5, seed=0)


NAMES2 = ("sum_pt", "min_ipchi2")


def _fit_two_feature(train_ds, monotone: bool):
    tr = standardize(train_ds, names=NAMES2)
    spec = NetworkSpec(
        input_dim=2,
        hidden_widths=(20, 20),
        group_size=20,
        lam=2.0,
        monotone_indices=(0, 1) if monotone else (),
        norm_scheme=Scheme.COLUMN_WISE if monotone else Scheme.NONE,
        seed=0,
    )
    net = initialize(spec)
    train(net, tr.design_matrix(NAMES2), tr.label, TrainConfig(epochs=30, batch_size=256, seed=0))
    net.extras["standardization"] = tr.standardization.to_dict()
    return net


def _efficiency(net, test_ds):
    r = model_response(net, test_ds.columns(NAMES2))
    t = threshold_for_rate(r[test_ds.label == 0], 0.10)
    sig = test_ds.label == 1
    return efficiency_vs_lifetime(r[sig], test_ds.lifetime[sig], t)


def test_c5_trigger_analog(trigger_sample):
    train_ds, test_ds = trigger_sample
    t0 = time.process_time()
    mono = _fit_two_feature(train_ds, monotone=True)
    base = _fit_two_feature(train_ds, monotone=False)

    pt = test_ds.columns(["sum_pt"])[:, 0]
    ip = test_ds.columns(["min_ipchi2"])[:, 0]
    xs = np.geomspace(pt.min(), pt.max() * 10, 60)
    ys = np.geomspace(max(ip.min(), 1e-6), ip.max() * 10, 60)
    grid = heatmap(mono, "sum_pt", "min_ipchi2", xs, ys)
    heat_ok = grid_monotone(grid, axis=0) and grid_monotone(grid, axis=1)

    eff_mono = _efficiency(mono, test_ds)
    eff_base = _efficiency(base, test_ds)
    mono_ok = efficiency_nondecreasing(eff_mono, above=2.0)
    base_violates = not efficiency_nondecreasing(eff_base, above=2.0)
    cpu = time.process_time() - t0

    def fmt(bins):
        return " ".join(f"{b.efficiency:.2f}" for b in bins if b.lo >= 2.0 and not b.low_stat)

    record(
        "C5 trigger analog",
        heat_ok and mono_ok and base_violates and cpu < 600,
        f"heatmap monotone={heat_ok}; eff>2ps monotone model [{fmt(eff_mono)}] ok={mono_ok}; "
        f"baseline [{fmt(eff_base)}] violates={base_violates}; cpu {cpu:.0f}s",
    )


def test_c6_determinism_and_seed_stability(trigger_sample):
    train_ds, test_ds = trigger_sample
    tr = standardize(train_ds)
    te = standardize(test_ds, fit_on=train_ds)

    def fit(seed):
        spec = NetworkSpec(
            input_dim=4, hidden_widths=(20, 20), group_size=20, lam=2.0, monotone_indices=(0, 1, 3), seed=seed
        )
        net = initialize(spec)
        train(net, tr.design_matrix(), tr.label, TrainConfig(epochs=10, batch_size=256, seed=seed))
        return net

    same = fit(0).to_json().encode() == fit(0).to_json().encode()
    aucs = np.array([roc_auc(fit(s).f(te.design_matrix()), te.label) for s in range(10)])
    sd = float(aucs.std(ddof=1))
    record(
        "C6 determinism and seed stability",
        same and sd < 0.01,
        f"byte-identical={same}; AUC over 10 seeds mean {aucs.mean():.4f}, sd {sd:.2e} (< 1e-2)",
    )


def test_c7_idempotence_and_feasibility():
    rng = np.random.default_rng(7)
    worst_delta = 0.0
    for k in range(60):
        spec = NetworkSpec.from_dict({**random_spec(rng, k, max_width=32).to_dict(), "norm_mode": "project"})
        net = perturbed_net(spec, rng, noise=float(rng.choice([0.1, 1.0, 5.0])))
        project_in_place(net)
        once = [l.weights.copy() for l in net.layers]
        project_in_place(net)
        worst_delta = max(worst_delta, max(np.abs(a - l.weights).max() for a, l in zip(once, net.layers)))

    infeasible_steps = 0
    steps = 0
    for k, scheme in enumerate(SCHEMES * 2):
        spec = NetworkSpec(3, (8, 8), group_size=2, lam=float([0.5, 2.0][k % 2]), norm_scheme=scheme, norm_mode="project")
        net = initialize(spec)
        budget = net.norm_scheme.budget
        X = rng.normal(size=(400, 3))
        y = (X[:, 0] * X[:, 1] > 0).astype(float)

        def check(step, n):
            nonlocal infeasible_steps, steps
            steps += 1
            if any(one_norm(l.weights) > budget + 1e-12 for l in n.layers):
                infeasible_steps += 1
            if lipschitz_product(n) > spec.lam * (1 + 1e-9):
                infeasible_steps += 1

        train(net, X, y, TrainConfig(lr=0.05, epochs=5, batch_size=20, seed=k), callback=check)
    record(
        "C7 idempotence and feasibility",
        worst_delta <= 1e-15 and infeasible_steps == 0,
        f"max change on re-projection {worst_delta:.1e}; {infeasible_steps}/{steps} infeasible checkpoints",
    )
