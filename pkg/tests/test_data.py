import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monolip.data import (
    CSV_COLUMNS,
    DataError,
    Dataset,
    DvEvent,
    GeneratorConfig,
    Standardizer,
    dataset_to_csv,
    generate_synthetic,
    load_csv,
    save_csv,
    standardize,
)


@pytest.fixture(scope="module")
def big():
    return generate_synthetic(100_000, seed=0)


def _median(ds, kind, feature):
    m = ds.label == 1 if kind == "signal" else ds.kind == kind
    return float(np.median(ds.columns([feature])[m]))


def test_rejects_bad_requests():
    with pytest.raises(DataError):
        generate_synthetic(0)
    with pytest.raises(DataError):
        GeneratorConfig(fractions=(0.5, 0.5, 0.5, 0.0))
    with pytest.raises(DataError):
        GeneratorConfig.from_dict({"bogus": 1})


def test_population_medians_are_ordered(big):
    disp = {k: _median(big, k, "min_ipchi2") for k in ("signal", "prompt", "material")}
    assert disp["prompt"] < disp["signal"] < disp["material"]
    pt = {k: _median(big, k, "sum_pt") for k in ("signal", "prompt", "material", "fake")}
    assert pt["prompt"] < pt["signal"] and pt["material"] < pt["signal"]
    assert pt["fake"] >= 0.9 * pt["signal"]


def test_event_structure(big):
    sig = big.label == 1
    assert np.all(np.isfinite(big.lifetime[sig])) and np.all(big.lifetime[sig] > 0)
    assert np.all(np.isnan(big.lifetime[~sig]))
    assert set(big.kind[~sig]) == {"prompt", "material", "fake"}
    assert np.all(big.kind[sig] == "")
    assert np.all(big.features > 0) and np.all(np.isfinite(big.features))
    # exponential lifetimes with the configured mean
    tau = big.lifetime[sig]
    assert abs(tau.mean() - 1.5) < 4 * 1.5 / np.sqrt(tau.size)


def test_generator_deterministic():
    assert generate_synthetic(500, seed=3) == generate_synthetic(500, seed=3)
    assert generate_synthetic(500, seed=3) != generate_synthetic(500, seed=4)


def test_signal_to_prompt_ratio_increases_with_pt_and_displacement(big):
    sig, prompt = big.label == 1, big.kind == "prompt"
    for feature in ("sum_pt", "min_ipchi2"):
        v = np.log(big.columns([feature])[:, 0])
        edges = np.quantile(v[sig | prompt], np.linspace(0, 1, 11))
        ratios, errs = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            inb = (v >= lo) & (v <= hi)
            s, p = (inb & sig).sum(), (inb & prompt).sum()
            if s < 20 or p < 20:
                continue
            r = s / p
            ratios.append(r)
            errs.append(r * np.sqrt(1 / s + 1 / p))
        for i in range(len(ratios) - 1):
            assert ratios[i + 1] >= ratios[i] - 2 * np.hypot(errs[i], errs[i + 1]), feature


def test_csv_round_trip(tmp_path):
    ds = generate_synthetic(2000, seed=1)
    path = tmp_path / "d.csv"
    save_csv(ds, path)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert "\r" not in text
    assert load_csv(path) == ds


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**31))
def test_csv_round_trip_property(tmp_path_factory, n, seed):
    ds = generate_synthetic(n, seed=seed)
    path = tmp_path_factory.mktemp("rt") / "d.csv"
    save_csv(ds, path)
    assert load_csv(path) == ds


def test_load_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty.csv"):
        load_csv(empty)
    with pytest.raises(DataError, match="missing.csv"):
        load_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    header = ",".join(CSV_COLUMNS)
    bad.write_text(f"{header}\n1,2,3,4,1,,1.0\n1,x,3,4,0,prompt,\n")
    with pytest.raises(DataError, match=r"bad.csv:3"):
        load_csv(bad)
    wrong = tmp_path / "wrong.csv"
    wrong.write_text("a,b\n1,2\n")
    with pytest.raises(DataError, match=":1:"):
        load_csv(wrong)
    inconsistent = tmp_path / "inc.csv"
    inconsistent.write_text(f"{header}\n1,2,3,4,0,,\n")
    with pytest.raises(DataError, match=":2:"):
        load_csv(inconsistent)


def test_events_round_trip():
    ds = generate_synthetic(50, seed=2)
    events = list(ds.events())
    assert all(isinstance(e, DvEvent) for e in events)
    assert Dataset.from_events(events) == ds


def test_standardization():
    ds = generate_synthetic(5000, seed=0)
    train, test = ds.split(0.3, seed=0)
    tr = standardize(train)
    te = standardize(test, fit_on=train)
    Z = tr.design_matrix()
    np.testing.assert_allclose(Z.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(Z.std(axis=0), 1, atol=1e-12)
    assert te.standardization == tr.standardization
    np.testing.assert_allclose(tr.standardization.inverse(Z), train.features, rtol=1e-10, atol=1e-12)


def test_constant_column_falls_back_to_unit_scale():
    X = np.column_stack([np.full(10, 3.0), np.arange(1.0, 11.0)])
    s = Standardizer.fit(X, ("a", "b"))
    assert s.scale[0] == 1.0
    Z = s.transform(X)
    assert np.all(np.isfinite(Z)) and np.all(Z[:, 0] == 0)
