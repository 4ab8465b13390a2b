import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcg.counterfactuals import CounterfactualExplainer
from dcg.exceptions import EmptySamples
from dcg.reporting import (
    EFFECT_COLUMNS,
    binned_tv,
    compare_batches,
    fit_report,
    kde,
    read_effect_report,
    silverman_bandwidth,
    write_effect_report,
    write_fit_report,
    write_kde_csv,
)
from dcg.synth import Shapes3dConfig, generate_shapes3d, shapes3d_spec

from oracles import simpson, std_normal_density, table_logit, table_model


def test_single_kernel():
    assert kde([0.0], [0.0], bandwidth=1.0).density[0] == pytest.approx(0.39894, abs=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50))
def test_kde_integrates_to_one(samples):
    h = silverman_bandwidth(samples)
    grid = np.linspace(min(samples) - 5 * h, max(samples) + 5 * h, 4001)
    curve = kde(samples, grid)
    assert np.trapezoid(curve.density, grid) == pytest.approx(1.0, abs=0.01)


def test_kde_of_standard_normal(rng):
    x = rng.standard_normal(100_000)
    assert simpson(std_normal_density, -8, 8) == pytest.approx(1.0, abs=1e-9)
    assert kde(x, [0.0]).density[0] == pytest.approx(std_normal_density(0.0), abs=0.01)


def test_silverman_rule(rng):
    x = rng.normal(size=1000)
    assert silverman_bandwidth(x) == pytest.approx(1.06 * np.std(x, ddof=1) * 1000 ** -0.2)
    assert silverman_bandwidth([2.0, 2.0]) > 0


def test_kde_input_errors():
    with pytest.raises(EmptySamples):
        kde([], [0.0])
    with pytest.raises(ValueError):
        kde([0.0], [1.0, 0.0])


def test_binned_tv():
    assert binned_tv([0.1] * 10, [0.9] * 10, 0, 1) == 1.0
    a = np.linspace(0, 1, 1000)
    assert binned_tv(a, a[::-1], 0, 1) == 0.0


def test_dataset_against_itself():
    # halves of a default-size dataset; at 10k per half the 50-bin noise
    # floor of the broad marginals is already about 0.035
    X, _ = generate_shapes3d(Shapes3dConfig(seed=5))
    rep = compare_batches(shapes3d_spec(), X[:25_000], X[25_000:])
    for fit in rep.nodes.values():
        assert (fit.tv if fit.tv is not None else fit.gap) < 0.03


def test_model_against_its_own_samples(wet_model):
    data = wet_model.sample(10_000, 11)
    rep = fit_report(wet_model, data, n_gen=10_000, random_state=0)
    for fit in rep.nodes.values():
        assert fit.gap < 0.02
        assert fit.gap == pytest.approx(np.max(np.abs(np.subtract(fit.freq_real, fit.freq_fake))))


def test_bernoulli_gap_definition(wet_model):
    data = wet_model.sample(5000, 1)
    rep = fit_report(wet_model, data, n_gen=5000, random_state=2)
    fake = wet_model.sample(5000, np.random.default_rng(2))
    assert rep["Rain"].gap == pytest.approx(abs(data[:, 1].mean() - fake[:, 1].mean()))


def test_report_writers(tmp_path, wet_model):
    g = shapes3d_spec()
    X, _ = generate_shapes3d(Shapes3dConfig(n_rows=2000, seed=0))
    rep = compare_batches(g, X[:1000], X[1000:])
    write_fit_report(rep, tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert set(d["nodes"]) == set(g.names) and "tv" in d["nodes"]["Brightness"]
    write_kde_csv(rep, tmp_path / "k.csv")
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "node,grid,density_real,density_fake"
    assert len(lines) == 1 + 5 * 200


def test_effect_report(tmp_path):
    m = table_model()
    x = [0, 1, 1]
    ex = CounterfactualExplainer(m, table_logit, samples=10)
    curves = ex.explain(x)
    path = tmp_path / "e.csv"
    write_effect_report(m.graph_, curves, x, ex.base_logit(x), path)
    rows = read_effect_report(path)
    assert list(rows[0]) == EFFECT_COLUMNS
    assert [r["node"] for r in rows] == ["A"] * 2 + ["C"] * 3 + ["D"] * 2
    assert {r["base_value"] for r in rows if r["node"] == "C"} == {"1"}
    assert all(r["weighted_mean"] == "" and r["n_samples"] == "10" for r in rows)
    base = [r for r in rows if r["node"] == "D" and r["value"] == "1"][0]
    assert float(base["std_logit"]) == 0.0
    assert float(base["mean_logit"]) == float(base["base_logit"])
