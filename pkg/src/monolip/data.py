"""Synthetic decay-vertex samples, CSV I/O and feature standardization.

The generator is a qualitative stand-in for a trigger simulation: one signal
population and three background populations.

* signal:   long-lived decays; displacement grows with the true lifetime
* prompt:   zero true displacement smeared by resolution, soft momenta
* material: secondary interactions far from the collision, soft momenta
* fake:     mis-reconstructed tracks with a heavy-tailed momentum spectrum
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "FEATURES",
    "CSV_COLUMNS",
    "BACKGROUND_KINDS",
    "DataError",
    "DvEvent",
    "Standardizer",
    "Dataset",
    "GeneratorConfig",
    "generate_synthetic",
    "load_csv",
    "save_csv",
    "dataset_to_csv",
    "standardize",
]

FEATURES = ("sum_pt", "min_ipchi2", "vertex_chi2", "fd_chi2")
CSV_COLUMNS = (*FEATURES, "label", "background_kind", "true_lifetime_ps")
BACKGROUND_KINDS = ("prompt", "material", "fake")
POPULATIONS = ("signal", *BACKGROUND_KINDS)

# speed of light in mm/ps
C_MM_PER_PS = 0.299792458


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class DvEvent:
    sum_pt: float
    min_ipchi2: float
    vertex_chi2: float
    fd_chi2: float
    label: int  # 1 signal, 0 background
    background_kind: str | None = None
    true_lifetime_ps: float | None = None


@dataclass(frozen=True)
class Standardizer:
    """``log1p`` followed by ``(x - shift) / scale`` per feature."""

    feature_names: tuple[str, ...]
    shift: tuple[float, ...]
    scale: tuple[float, ...]

    @classmethod
    def fit(cls, X: np.ndarray, feature_names: Sequence[str]) -> "Standardizer":
        L = np.log1p(np.asarray(X, dtype=np.float64))
        mean = L.mean(axis=0)
        std = L.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(tuple(feature_names), tuple(mean.tolist()), tuple(std.tolist()))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise DataError(f"expected {len(self.feature_names)} feature columns, got shape {X.shape}")
        if np.any(X <= -1):
            raise DataError("log1p standardization needs feature values > -1")
        return (np.log1p(X) - np.array(self.shift)) / np.array(self.scale)

    def inverse(self, Z) -> np.ndarray:
        return np.expm1(np.asarray(Z) * np.array(self.scale) + np.array(self.shift))

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names), "shift": list(self.shift), "scale": list(self.scale)}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(tuple(d["feature_names"]), tuple(d["shift"]), tuple(d["scale"]))


@dataclass(frozen=True)
class Dataset:
    """Column-oriented collection of DV candidates.

    ``lifetime`` is NaN and ``kind`` is empty for background and signal
    respectively.
    """

    features: np.ndarray  # (N, 4) raw values in FEATURES order
    label: np.ndarray  # (N,) ints
    kind: np.ndarray  # (N,) str: "" for signal
    lifetime: np.ndarray  # (N,) floats, NaN for background
    standardization: Standardizer | None = None

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2 or self.features.shape[1] != len(FEATURES):
            raise DataError(f"features must have shape (N, {len(FEATURES)})")
        if not (self.label.shape == self.kind.shape == self.lifetime.shape == (n,)):
            raise DataError("column lengths differ")

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.features, other.features)
            and np.array_equal(self.label, other.label)
            and np.array_equal(self.kind, other.kind)
            and np.array_equal(self.lifetime, other.lifetime, equal_nan=True)
            and self.standardization == other.standardization
        )

    @property
    def feature_names(self) -> tuple[str, ...]:
        return FEATURES

    def columns(self, names: Sequence[str]) -> np.ndarray:
        try:
            idx = [FEATURES.index(n) for n in names]
        except ValueError:
            raise DataError(f"unknown feature in {list(names)}; known: {list(FEATURES)}") from None
        return self.features[:, idx]

    def design_matrix(self, names: Sequence[str] = FEATURES) -> np.ndarray:
        """Selected features, standardized when a standardization is attached."""
        X = self.columns(names)
        if self.standardization is None:
            return X
        if tuple(names) != self.standardization.feature_names:
            raise DataError(
                f"standardization was fitted on {self.standardization.feature_names}, not {tuple(names)}"
            )
        return self.standardization.transform(X)

    def subset(self, mask_or_index) -> "Dataset":
        return replace(
            self,
            features=self.features[mask_or_index],
            label=self.label[mask_or_index],
            kind=self.kind[mask_or_index],
            lifetime=self.lifetime[mask_or_index],
        )

    def split(self, test_fraction: float, seed: int) -> tuple["Dataset", "Dataset"]:
        """Random train/test split."""
        if not 0 < test_fraction < 1:
            raise DataError("test_fraction must lie in (0, 1)")
        perm = np.random.default_rng(seed).permutation(len(self))
        n_test = int(round(test_fraction * len(self)))
        return self.subset(np.sort(perm[n_test:])), self.subset(np.sort(perm[:n_test]))

    def events(self) -> Iterator[DvEvent]:
        for row, lab, k, tau in zip(self.features, self.label, self.kind, self.lifetime):
            yield DvEvent(
                *map(float, row),
                label=int(lab),
                background_kind=str(k) or None,
                true_lifetime_ps=None if math.isnan(tau) else float(tau),
            )

    @classmethod
    def from_events(cls, events: Sequence[DvEvent]) -> "Dataset":
        events = list(events)
        if not events:
            raise DataError("no events")
        for ev in events:
            _validate_event(ev)
        return cls(
            np.array([[getattr(e, f) for f in FEATURES] for e in events], dtype=np.float64),
            np.array([e.label for e in events], dtype=np.int64),
            np.array([e.background_kind or "" for e in events], dtype="<U8"),
            np.array([np.nan if e.true_lifetime_ps is None else e.true_lifetime_ps for e in events]),
        )


def _validate_event(ev: DvEvent) -> None:
    vals = [getattr(ev, f) for f in FEATURES]
    if not all(math.isfinite(v) and v > 0 for v in vals):
        raise DataError(f"feature values must be finite and positive: {vals}")
    if ev.label == 1:
        if ev.true_lifetime_ps is None or not ev.true_lifetime_ps > 0 or ev.background_kind:
            raise DataError("signal events need a positive lifetime and no background kind")
    elif ev.label == 0:
        if ev.true_lifetime_ps is not None or ev.background_kind not in BACKGROUND_KINDS:
            raise DataError("background events need a background kind and no lifetime")
    else:
        raise DataError(f"label must be 0 or 1, got {ev.label!r}")


def standardize(ds: Dataset, fit_on: Dataset | None = None, names: Sequence[str] = FEATURES) -> Dataset:
    """Attach a log1p + z-score standardization fitted on ``fit_on`` (default ``ds``)."""
    ref = ds if fit_on is None else fit_on
    return replace(ds, standardization=Standardizer.fit(ref.columns(names), names))


# -- generator ------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    """Population fractions and distribution parameters (pT in GeV)."""

    fractions: tuple[float, float, float, float] = (0.3, 0.4, 0.15, 0.15)  # signal, prompt, material, fake
    mean_lifetime_ps: float = 1.5
    # signal
    signal_pt_median: float = 5.0
    signal_pt_sigma: float = 0.45
    boost_shape: float = 4.0
    boost_scale: float = 2.5
    opening_angle_median: float = 0.04
    opening_angle_sigma: float = 0.6
    ip_resolution_mm: float = 0.015
    fd_resolution_mm: float = 0.25
    # prompt
    prompt_pt_median: float = 2.0
    prompt_pt_sigma: float = 0.45
    prompt_ip_smear: float = 2.0
    # material
    material_pt_median: float = 3.0
    material_pt_sigma: float = 0.45
    material_ipchi2_median: float = 2000.0
    material_ipchi2_sigma: float = 0.8
    material_fdchi2_median: float = 5000.0
    # fake
    fake_pt_scale: float = 3.5
    fake_pt_alpha: float = 1.5
    fake_ipchi2_median: float = 15.0
    fake_ipchi2_sigma: float = 1.3
    fake_vertex_chi2_median: float = 8.0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        object.__setattr__(self, "fractions", fr)
        if len(fr) != 4 or any(f < 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise DataError(f"fractions for {POPULATIONS} must be 4 non-negative numbers summing to 1, got {fr}")
        if self.mean_lifetime_ps <= 0:
            raise DataError("mean lifetime must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown generator parameters: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "GeneratorConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fractions"] = list(self.fractions)
        return d


def _lognormal(rng, median, sigma, n):
    return median * np.exp(sigma * rng.standard_normal(n))


def _chi2_from_significance(rng, significance):
    # resolution noise added in significance units, then squared
    return (significance + rng.standard_normal(significance.shape)) ** 2


def generate_synthetic(n: int, config: GeneratorConfig | None = None, seed: int = 0) -> Dataset:
    """Draw ``n`` candidates with population sizes multinomial in the fractions."""
    cfg = config or GeneratorConfig()
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DataError(f"number of events must be a positive integer, got {n!r}")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, cfg.fractions)
    parts = []

    ns = counts[0]
    tau = rng.exponential(cfg.mean_lifetime_ps, ns)
    boost = rng.gamma(cfg.boost_shape, cfg.boost_scale, ns)
    flight = C_MM_PER_PS * tau * boost
    angle = _lognormal(rng, cfg.opening_angle_median, cfg.opening_angle_sigma, ns)
    sig = dict(
        sum_pt=_lognormal(rng, cfg.signal_pt_median, cfg.signal_pt_sigma, ns),
        min_ipchi2=_chi2_from_significance(rng, flight * angle / cfg.ip_resolution_mm),
        vertex_chi2=rng.chisquare(1, ns),
        fd_chi2=_chi2_from_significance(rng, flight / cfg.fd_resolution_mm),
    )
    parts.append((sig, np.ones(ns, int), np.full(ns, ""), tau))

    nb = counts[1]
    smear = _lognormal(rng, cfg.prompt_ip_smear, 0.3, nb)
    prompt = dict(
        sum_pt=_lognormal(rng, cfg.prompt_pt_median, cfg.prompt_pt_sigma, nb),
        min_ipchi2=(smear * rng.standard_normal(nb)) ** 2,
        vertex_chi2=rng.chisquare(1, nb),
        fd_chi2=(smear * rng.standard_normal(nb)) ** 2,
    )
    parts.append((prompt, np.zeros(nb, int), np.full(nb, "prompt"), np.full(nb, np.nan)))

    nm = counts[2]
    material = dict(
        sum_pt=_lognormal(rng, cfg.material_pt_median, cfg.material_pt_sigma, nm),
        min_ipchi2=_lognormal(rng, cfg.material_ipchi2_median, cfg.material_ipchi2_sigma, nm),
        vertex_chi2=rng.chisquare(2, nm),
        fd_chi2=_lognormal(rng, cfg.material_fdchi2_median, 0.8, nm),
    )
    parts.append((material, np.zeros(nm, int), np.full(nm, "material"), np.full(nm, np.nan)))

    nf = counts[3]
    fake = dict(
        sum_pt=cfg.fake_pt_scale * (1.0 + rng.pareto(cfg.fake_pt_alpha, nf)),
        min_ipchi2=_lognormal(rng, cfg.fake_ipchi2_median, cfg.fake_ipchi2_sigma, nf),
        vertex_chi2=_lognormal(rng, cfg.fake_vertex_chi2_median, 0.8, nf),
        fd_chi2=_lognormal(rng, 3 * cfg.fake_ipchi2_median, cfg.fake_ipchi2_sigma, nf),
    )
    parts.append((fake, np.zeros(nf, int), np.full(nf, "fake"), np.full(nf, np.nan)))

    features = np.concatenate([np.column_stack([p[0][f] for f in FEATURES]) for p in parts])
    # squared Gaussian draws can underflow to exactly zero; features are strictly positive
    features = np.maximum(features, np.finfo(np.float64).tiny)
    label = np.concatenate([p[1] for p in parts])
    kind = np.concatenate([p[2] for p in parts]).astype("<U8")
    lifetime = np.concatenate([p[3] for p in parts])
    order = rng.permutation(n)
    return Dataset(features[order], label[order], kind[order], lifetime[order])


# -- CSV ------------------------------------------------------------------


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row, lab, k, tau in zip(ds.features, ds.label, ds.kind, ds.lifetime):
        w.writerow([*(repr(float(v)) for v in row), int(lab), str(k), "" if math.isnan(tau) else repr(float(tau))])
    return buf.getvalue()


def save_csv(ds: Dataset, path: str | Path) -> None:
    from .io import write_atomic

    write_atomic(path, dataset_to_csv(ds))


def load_csv(path: str | Path, schema: Sequence[str] = CSV_COLUMNS) -> Dataset:
    """Read a dataset written by :func:`save_csv`; errors carry line numbers."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header != list(schema):
        raise DataError(f"{path}:1: header {header} does not match expected {list(schema)}")
    col = {name: i for i, name in enumerate(header)}
    feats, labels, kinds, taus = [], [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(row[col[f]]) for f in FEATURES]
            lab = row[col["label"]].strip().lower()
            label = {"1": 1, "0": 0, "signal": 1, "background": 0}[lab]
            kind = row[col["background_kind"]].strip()
            tau_s = row[col["true_lifetime_ps"]].strip()
            tau = float(tau_s) if tau_s else None
            _validate_event(DvEvent(*vals, label=label, background_kind=kind or None, true_lifetime_ps=tau))
        except (ValueError, KeyError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        feats.append(vals)
        labels.append(label)
        kinds.append(kind)
        taus.append(np.nan if tau is None else tau)
    if not feats:
        raise DataError(f"{path}: no data rows")
    return Dataset(
        np.array(feats, dtype=np.float64),
        np.array(labels, dtype=np.int64),
        np.array(kinds, dtype="<U8"),
        np.array(taus, dtype=np.float64),
    )
