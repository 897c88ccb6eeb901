"""Command-line front end.

Every subcommand takes an optional ``--config`` JSON file whose keys are the
long option names (with underscores); explicit flags override it. Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .certify import Box, abs_fit_experiment, certify
from .data import FEATURES, DataError, Dataset, GeneratorConfig, dataset_to_csv, generate_synthetic, load_csv, standardize
from .io import write_atomic
from .network import ConfigError, MonotonicNetwork, NetworkSpec, initialize
from .training import TrainConfig, TrainingError, train
from .trigger import (
    default_grid_axis,
    efficiency_vs_lifetime,
    heatmap,
    lifetime_bins,
    model_features,
    model_response,
    threshold_for_rate,
)


class UsageError(Exception):
    pass


# Defaults per subcommand; also the set of keys a config file may use.
DEFAULTS: dict[str, dict[str, Any]] = {
    "generate": {"n": 100_000, "seed": 0, "generator": None, "out": None},
    "train": {
        "data": None,
        "out_dir": None,
        "features": list(FEATURES),
        "monotone": ["sum_pt", "min_ipchi2", "fd_chi2"],
        "hidden": [20, 20],
        "activation": "groupsort",
        "group_size": 20,
        "lam": 2.0,
        "lambda_per_input": None,
        "scheme": "columnwise",
        "mode": "direct",
        "epochs": 20,
        "batch_size": 256,
        "lr": 1e-3,
        "optimizer": "adam",
        "validation_fraction": 0.2,
        "seed": 0,
        "cert_pairs": 100_000,
        "cert_points": 10_000,
    },
    "certify": {"model": None, "data": None, "pairs": 100_000, "points": 10_000, "eps": 1e-4, "seed": 0, "out": None},
    "threshold": {"model": None, "data": None, "rate": 0.1, "out": None},
    "heatmap": {
        "model": None,
        "data": None,
        "x": "sum_pt",
        "y": "min_ipchi2",
        "grid": 50,
        "x_range": None,
        "y_range": None,
        "fixed": [],
        "out": None,
    },
    "efficiency": {
        "model": None,
        "data": None,
        "threshold": None,
        "rate": None,
        "bins": 20,
        "lifetime_range": [0.1, 20.0],
        "out": None,
    },
    "abs-experiment": {
        "activation": "groupsort",
        "depth": 3,
        "width": 16,
        "lam": 1.0,
        "epochs": 2000,
        "target": "abs",
        "seed": 0,
        "out": None,
    },
}


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def _names(text: str) -> list[str]:
    return [t for t in text.split(",") if t]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="monolip", description="Monotonic Lipschitz networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def new(name, help_):
        sp = sub.add_parser(name, help=help_, argument_default=S)
        sp.add_argument("--config", help="JSON file with option values")
        return sp

    sp = new("generate", "write a synthetic decay-vertex CSV")
    sp.add_argument("--n", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--generator", help="JSON file with generator parameters")
    sp.add_argument("--out", help="output CSV (default: stdout)")

    sp = new("train", "train a model and certify it")
    sp.add_argument("--data", help="training CSV")
    sp.add_argument("--out-dir", help="directory for model.json, history.csv, certificate.json")
    sp.add_argument("--features", type=_names, help="comma-separated input features")
    sp.add_argument("--monotone", type=_names, help="comma-separated monotone features ('' for none)")
    sp.add_argument("--hidden", type=_ints, help="comma-separated hidden widths")
    sp.add_argument("--activation", choices=["groupsort", "relu"])
    sp.add_argument("--group-size", type=int)
    sp.add_argument("--lam", type=float, help="Lipschitz budget lambda")
    sp.add_argument("--lambda-per-input", type=_floats)
    sp.add_argument("--scheme", choices=["variant_a", "variant_b", "columnwise", "none"])
    sp.add_argument("--mode", choices=["direct", "project"])
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--optimizer", choices=["adam", "sgd"])
    sp.add_argument("--validation-fraction", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cert-pairs", type=int)
    sp.add_argument("--cert-points", type=int)

    sp = new("certify", "Lipschitz and monotonicity certificate for a model")
    sp.add_argument("--model")
    sp.add_argument("--data", help="CSV used to define the sampling box")
    sp.add_argument("--pairs", type=int)
    sp.add_argument("--points", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")

    sp = new("threshold", "response threshold for a background acceptance rate")
    sp.add_argument("--model")
    sp.add_argument("--data")
    sp.add_argument("--rate", type=float)
    sp.add_argument("--out")

    sp = new("heatmap", "response on a 2-D grid of raw feature values")
    sp.add_argument("--model")
    sp.add_argument("--data", help="CSV supplying default ranges and fixed values (medians)")
    sp.add_argument("--x")
    sp.add_argument("--y")
    sp.add_argument("--grid", type=int)
    sp.add_argument("--x-range", type=_floats)
    sp.add_argument("--y-range", type=_floats)
    sp.add_argument("--fixed", action="append", help="name=value, repeatable")
    sp.add_argument("--out")

    sp = new("efficiency", "signal efficiency versus true lifetime")
    sp.add_argument("--model")
    sp.add_argument("--data")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--rate", type=float, help="fix the threshold from this background rate instead")
    sp.add_argument("--bins", type=int)
    sp.add_argument("--lifetime-range", type=_floats)
    sp.add_argument("--out")

    sp = new("abs-experiment", "fit |x| with a norm-constrained network")
    sp.add_argument("--activation", choices=["groupsort", "relu"])
    sp.add_argument("--depth", type=int)
    sp.add_argument("--width", type=int)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--target", choices=["abs", "linear"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    return p


def resolve(command: str, ns: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, the config file and explicit flags (in that order)."""
    opts = dict(DEFAULTS[command])
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    cfg_path = getattr(ns, "config", None)
    if cfg_path:
        try:
            cfg = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {cfg_path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{cfg_path}: invalid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{cfg_path}: expected a JSON object")
        unknown = sorted(set(cfg) - set(opts))
        if unknown:
            raise UsageError(f"{cfg_path}: unknown keys {unknown}")
        opts.update(cfg)
    opts.update(flags)
    return opts


def _require(opts: dict, *keys: str) -> None:
    for k in keys:
        if opts.get(k) is None:
            raise UsageError(f"missing required option --{k.replace('_', '-')}")


def _dataset(path) -> Dataset:
    if not Path(path).is_file():
        raise UsageError(f"dataset not found: {path}")
    return load_csv(path)


def _model(path) -> MonotonicNetwork:
    if not Path(path).is_file():
        raise UsageError(f"model not found: {path}")
    return MonotonicNetwork.load(path)


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def cmd_generate(o: dict) -> None:
    gen = GeneratorConfig()
    if o["generator"]:
        if not Path(o["generator"]).is_file():
            raise UsageError(f"generator config not found: {o['generator']}")
        gen = GeneratorConfig.from_json(o["generator"])
    ds = generate_synthetic(int(o["n"]), gen, seed=int(o["seed"]))
    _emit(dataset_to_csv(ds), o["out"])


def cmd_train(o: dict) -> None:
    _require(o, "data", "out_dir")
    ds = _dataset(o["data"])
    names = list(o["features"])
    unknown = [m for m in o["monotone"] if m not in names]
    if unknown:
        raise UsageError(f"monotone features {unknown} are not among the inputs {names}")
    spec = NetworkSpec(
        input_dim=len(names),
        hidden_widths=tuple(o["hidden"]),
        activation=o["activation"],
        group_size=int(o["group_size"]),
        lam=float(o["lam"]),
        lambda_per_input=o["lambda_per_input"],
        monotone_indices=tuple(names.index(m) for m in o["monotone"]),
        norm_scheme=o["scheme"],
        norm_mode=o["mode"],
        seed=int(o["seed"]),
    )
    cfg = TrainConfig(
        optimizer=o["optimizer"], lr=float(o["lr"]), epochs=int(o["epochs"]), batch_size=int(o["batch_size"]), seed=int(o["seed"])
    )
    tr, val = ds.split(float(o["validation_fraction"]), seed=int(o["seed"]))
    tr = standardize(tr, names=names)
    val = standardize(val, fit_on=tr, names=names)
    net = initialize(spec)
    X = tr.design_matrix(names)
    history = train(net, X, tr.label, cfg, validation=(val.design_matrix(names), val.label))
    net.extras["standardization"] = tr.standardization.to_dict()
    cert = certify(net, Box.around(X), int(o["cert_pairs"]), int(o["cert_points"]), seed=int(o["seed"]))

    out = Path(o["out_dir"])
    write_atomic(out / "model.json", net.to_json())
    write_atomic(out / "history.csv", history.to_csv())
    write_atomic(out / "certificate.json", cert.to_json())
    print(f"wrote {out / 'model.json'}; lipschitz_product={cert.lipschitz_product:.6g} monotone_ok={cert.monotone_ok}")


def _box_for(net: MonotonicNetwork, o: dict) -> Box:
    names = model_features(net)
    if o["data"]:
        ds = _dataset(o["data"])
        from .data import Standardizer

        return Box.around(Standardizer.from_dict(net.extras["standardization"]).transform(ds.columns(names)))
    # standardized features: default to +-4 standard deviations
    return Box(np.full(len(names), -4.0), np.full(len(names), 4.0))


def cmd_certify(o: dict) -> None:
    _require(o, "model")
    net = _model(o["model"])
    cert = certify(net, _box_for(net, o), int(o["pairs"]), int(o["points"]), float(o["eps"]), int(o["seed"]))
    _emit(cert.to_json(), o["out"])


def _background_threshold(net, ds: Dataset, rate: float) -> float:
    names = model_features(net)
    bkg = ds.label == 0
    if not bkg.any():
        raise DataError("dataset contains no background events")
    return threshold_for_rate(model_response(net, ds.columns(names)[bkg]), rate)


def cmd_threshold(o: dict) -> None:
    _require(o, "model", "data")
    net, ds = _model(o["model"]), _dataset(o["data"])
    t = _background_threshold(net, ds, float(o["rate"]))
    _emit(json.dumps({"background_rate": float(o["rate"]), "threshold": t}) + "\n", o["out"])


def cmd_heatmap(o: dict) -> None:
    _require(o, "model")
    net = _model(o["model"])
    names = model_features(net)
    for f in (o["x"], o["y"]):
        if f not in names:
            raise UsageError(f"unknown feature {f!r}; model features are {list(names)}")
    grid = int(o["grid"])
    if grid < 2:
        raise UsageError("--grid must be at least 2")
    ds = _dataset(o["data"]) if o["data"] else None
    fixed: dict[str, float] = {}
    if ds is not None:
        med = np.median(ds.columns(names), axis=0)
        fixed.update(zip(names, med.tolist()))
    for item in o["fixed"] or []:
        key, _, val = item.partition("=")
        if key not in names:
            raise UsageError(f"unknown feature in --fixed: {key!r}")
        fixed[key] = float(val)

    def axis(feature, rng_opt):
        if rng_opt:
            lo, hi = rng_opt
            return np.linspace(lo, hi, grid)
        if ds is None:
            raise UsageError(f"give --data or a range for {feature}")
        return default_grid_axis(ds, feature, grid)

    xs, ys = axis(o["x"], o["x_range"]), axis(o["y"], o["y_range"])
    resp = heatmap(net, o["x"], o["y"], xs, ys, fixed)
    lines = [f"{o['x']},{o['y']},response"]
    for j, yv in enumerate(ys):
        for i, xv in enumerate(xs):
            lines.append(f"{float(xv)!r},{float(yv)!r},{float(resp[j, i])!r}")
    _emit("\n".join(lines) + "\n", o["out"])


def cmd_efficiency(o: dict) -> None:
    _require(o, "model", "data")
    net, ds = _model(o["model"]), _dataset(o["data"])
    if (o["threshold"] is None) == (o["rate"] is None):
        raise UsageError("give exactly one of --threshold and --rate")
    t = o["threshold"] if o["threshold"] is not None else _background_threshold(net, ds, float(o["rate"]))
    sig = ds.label == 1
    if not sig.any():
        raise DataError("dataset contains no signal events")
    names = model_features(net)
    resp = model_response(net, ds.columns(names)[sig])
    lo, hi = o["lifetime_range"]
    bins = efficiency_vs_lifetime(resp, ds.lifetime[sig], float(t), lifetime_bins(lo, hi, int(o["bins"])))
    lines = ["lifetime_lo_ps,lifetime_hi_ps,n,passed,efficiency,error,low_stat"]
    for b in bins:
        lines.append(f"{b.lo!r},{b.hi!r},{b.n},{b.passed},{b.efficiency!r},{b.error!r},{int(b.low_stat)}")
    _emit("\n".join(lines) + "\n", o["out"])


def cmd_abs_experiment(o: dict) -> None:
    mse = abs_fit_experiment(
        o["activation"], int(o["depth"]), int(o["width"]), float(o["lam"]), int(o["seed"]), o["target"], int(o["epochs"])
    )
    _emit(json.dumps({**{k: o[k] for k in ("activation", "depth", "width", "lam", "target", "epochs", "seed")}, "test_mse": mse}) + "\n", o["out"])


COMMANDS: dict[str, Callable[[dict], None]] = {
    "generate": cmd_generate,
    "train": cmd_train,
    "certify": cmd_certify,
    "threshold": cmd_threshold,
    "heatmap": cmd_heatmap,
    "efficiency": cmd_efficiency,
    "abs-experiment": cmd_abs_experiment,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)  # exits with status 2 on bad usage
    try:
        opts = resolve(ns.command, ns)
        COMMANDS[ns.command](opts)
    except (UsageError, ConfigError, DataError) as exc:
        print(f"monolip {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, OSError, ValueError) as exc:
        print(f"monolip {ns.command}: failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
