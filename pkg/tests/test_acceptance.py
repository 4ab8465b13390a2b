"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its measured value.
"""

import time

import numpy as np
import pytest
from scipy import stats

from dcg import cli
from dcg import distributions as dist
from dcg.counterfactuals import (
    CounterfactualExplainer,
    EffectQuery,
    counterfactual_samples,
    effect_curve,
    intervened_samples,
)
from dcg.graph import BERNOULLI, CATEGORICAL_FAMILY, TRUNCATED_NORMAL, NodeSpec, ValueDomain
from dcg.model import DistributionalCausalGraph, params_from_raw, raw_log_prob_grad
from dcg.nets import ParamNet
from dcg.reporting import fit_report
from dcg.synth import Shapes3dConfig, generate_shapes3d, shapes3d_spec, train_target_classifier, wet_floor_model

from oracles import (
    WET_NAMES,
    empirical,
    ks_statistic,
    marginal,
    table_effect,
    table_logit,
    table_model,
    tv,
    wet_floor_joint,
)

SUMMER_EVIDENCE = {"Season": 2, "Rain": 0, "Sprinkler": 1, "Wet": 1, "Slippery": 1}


@pytest.fixture(scope="module")
def shapes_run():
    """Fixed-seed 50k dataset, trained DCG and fit report, with wall-clock time."""
    start = time.perf_counter()
    X, _ = generate_shapes3d(Shapes3dConfig(n_rows=50_000, seed=0))
    model = DistributionalCausalGraph(shapes3d_spec(), random_state=0).fit(X)
    report = fit_report(model, X, n_gen=10_000, random_state=1)
    fake = model.sample(10_000, 2)
    elapsed = time.perf_counter() - start
    return X, model, report, fake, elapsed


def test_criterion_1_wet_floor_counterfactual(criterion):
    start = time.perf_counter()
    model = wet_floor_model()
    cf = counterfactual_samples(model, SUMMER_EVIDENCE, {"Sprinkler": 0}, 1000, 0)
    elapsed = time.perf_counter() - start
    names = model.graph_.names
    col = {n: cf[:, names.index(n)] for n in names}
    ok = (
        len(cf) == 1000
        and np.all(col["Wet"] == 0) and np.all(col["Slippery"] == 0)
        and np.all(col["Season"] == 2) and np.all(col["Rain"] == 0)
        and np.all(col["Sprinkler"] == 0)
        and elapsed < 1.0
    )
    criterion(1, ok, f"1000/1000 counterfactuals dry with evidence kept; {elapsed:.3f}s (< 1s)"
              if ok else f"counterfactual rows {np.unique(cf, axis=0).tolist()}, {elapsed:.3f}s")


def test_criterion_2_distributional_fit(criterion, shapes_run):
    X, model, report, fake, elapsed = shapes_run
    gaps = {n: report[n].gap for n in ("Type", "Shape")}
    tvs = {n: report[n].tv for n in ("FloorHue", "WallHue", "ObjectHue", "Brightness", "Scale")}
    b = fake[:, model.graph_.index("Brightness")]
    in_window = float(np.mean((b >= 0.35) & (b <= 0.65)))
    ok = (
        max(gaps.values()) < 0.02
        and max(tvs.values()) < 0.10
        and in_window >= 0.95
        and elapsed < 180
    )
    detail = (
        "gaps " + ", ".join(f"{k} {v:.4f}" for k, v in gaps.items())
        + "; TV " + ", ".join(f"{k} {v:.3f}" for k, v in tvs.items())
        + f"; Brightness in [0.35, 0.65] {in_window:.3f}; {elapsed:.1f}s (< 180s)"
    )
    criterion(2, ok, detail)


def test_criterion_3_interventional_distributions(criterion, wet_model):
    worst = 0.0
    for k, do in enumerate([{"Sprinkler": 0}, {"Sprinkler": 1}] + [{"Season": s} for s in range(4)]):
        X = intervened_samples(wet_model, do, 100_000, 100 + k)
        worst = max(worst, tv(empirical(X), wet_floor_joint(do)))
    obs = wet_floor_joint()
    p_rain = marginal(obs, WET_NAMES, ["Rain"])[(1,)]
    p_rain_do = marginal(wet_floor_joint({"Sprinkler": 1}), WET_NAMES, ["Rain"])[(1,)]
    joint = marginal(obs, WET_NAMES, ["Rain", "Sprinkler"])
    p_rain_given = joint[(1, 1)] / (joint[(1, 1)] + joint[(0, 1)])
    ok = worst < 0.02 and p_rain_do == p_rain and abs(p_rain_given - p_rain) > 0.05
    criterion(3, ok, f"max TV {worst:.4f} (< 0.02); P(Rain)={p_rain:.4f}, "
                     f"P(Rain|do(Sprinkler=1))={p_rain_do:.4f}, P(Rain|Sprinkler=1)={p_rain_given:.4f}")


def test_criterion_4_effect_oracle(criterion):
    model = table_model()
    m = 10_000
    worst = 0.0
    for weighting in ("none", "likelihood", "proximity"):
        for seed, x in enumerate([(0, 0, 0), (1, 2, 1), (0, 1, 1)]):
            for target in ("A", "C"):
                q = EffectQuery(base=list(x), target=target, samples=m, weighting=weighting, sigma_prox=0.8)
                for est in effect_curve(model, table_logit, q, seed):
                    mean, std = table_effect(x, target, est.value, weighting, 0.8)
                    got = est.mean_logit if weighting == "none" else est.weighted_mean
                    worst = max(worst, abs(got - mean) / (3 * std / np.sqrt(m)) if std > 0
                                else (0.0 if got == mean else np.inf))
    criterion(4, worst < 1.0, f"worst |estimate - exact| = {worst:.3f} x (3 std / sqrt(M)), M={m}, 3 weightings")


FAMILY_NODES = [
    NodeSpec("A", BERNOULLI, ValueDomain.binary()),
    NodeSpec("C", CATEGORICAL_FAMILY, ValueDomain.categorical(4)),
    NodeSpec("H", TRUNCATED_NORMAL, ValueDomain.continuous(0.75, 1.25)),
]


def _composed_log_prob(net, node, x, values):
    return float(np.sum(dist.log_prob(params_from_raw(node, net.forward(x)), values)))


def test_criterion_5_gradient_integrity(criterion):
    rng = np.random.default_rng(5)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        in_width = int(rng.integers(1, 5))
        hidden = tuple(int(w) for w in rng.integers(1, 6, size=rng.integers(0, 3)))
        x = rng.normal(size=(4, in_width))
        for node in FAMILY_NODES:
            out = {BERNOULLI: 1, CATEGORICAL_FAMILY: 4, TRUNCATED_NORMAL: 2}[node.family]
            net = ParamNet.initialize(in_width, hidden, out, rng)
            for _, b in net.layers:
                b += rng.normal(scale=0.3, size=b.shape)
            raw = net.forward(x)
            values = dist.sample_reparam(params_from_raw(node, raw),
                                         dist.draw_noise(node.family, node.domain, rng, size=len(x)))
            _, graw = raw_log_prob_grad(node, raw, values)
            grads, _ = net.backward(x, graw)
            for (w, b), (dw, db) in zip(net.layers, grads):
                for param, grad in ((w, dw), (b, db)):
                    for idx in np.ndindex(param.shape):
                        old = param[idx]
                        param[idx] = old + h
                        up = _composed_log_prob(net, node, x, values)
                        param[idx] = old - h
                        down = _composed_log_prob(net, node, x, values)
                        param[idx] = old
                        fd = (up - down) / (2 * h)
                        worst = max(worst, abs(grad[idx] - fd) / max(abs(fd), abs(grad[idx]), 1.0))
    criterion(5, worst < 1e-4, f"max relative error {worst:.2e} over 100 nets x 3 families (< 1e-4)")


def test_criterion_6_sampler_integrity(criterion):
    rng = np.random.default_rng(6)
    n = 100_000
    noise = dist.draw_noise(BERNOULLI, ValueDomain.binary(), rng, size=n)
    bern_gap = abs(dist.sample_reparam(dist.Bernoulli(0.4), noise).mean() - 0.4)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    noise = dist.draw_noise(CATEGORICAL_FAMILY, ValueDomain.categorical(4), rng, size=n)
    cat_gap = np.max(np.abs(np.bincount(dist.sample_reparam(dist.Categorical(p), noise), minlength=4) / n - p))
    worst_ks, in_bounds = 0.0, True
    for mu, sigma, lo, hi in [(0.5, 0.2, 0, 1), (0.95, 0.1, 0.75, 1.25), (0.02, 0.05, 0, 1), (0.5, 3.0, 0, 1)]:
        params = dist.TruncatedNormal(mu, sigma, lo, hi)
        x = dist.sample_reparam(params, dist.draw_noise(TRUNCATED_NORMAL, ValueDomain.continuous(lo, hi), rng, size=n))
        in_bounds &= bool(np.all((x >= lo) & (x <= hi)))
        ref = stats.truncnorm(params.alpha, params.beta, loc=mu, scale=sigma)
        worst_ks = max(worst_ks, ks_statistic(x, ref.cdf))
    ok = max(bern_gap, cat_gap) < 0.01 and worst_ks < 0.01 and in_bounds
    criterion(6, ok, f"Bernoulli gap {bern_gap:.4f}, Categorical gap {cat_gap:.4f}, "
                     f"truncated-normal KS {worst_ks:.4f}, all in bounds: {in_bounds}")


def test_criterion_7_floor_hue_explanation(criterion, shapes_run):
    X, model, _, _, _ = shapes_run
    clf = train_target_classifier(X, seed=0)
    test = clf.holdout_index_
    pred = clf.predict(X[test])
    truth = X[test, 0].astype(int)
    wrong = test[pred != truth]
    # prefer false positives (predicted 1, truly 0), the case the curve should flip
    preferred = test[(pred == 1) & (truth == 0)]
    row = int(preferred[0] if len(preferred) else wrong[0])
    explainer = CounterfactualExplainer(model, clf, samples=100, n_grid=20, random_state=0)
    x = X[row]
    base = explainer.base_logit(x)
    curves = explainer.explain(x)
    crossing = [n for n, est in curves.items()
                if any(np.sign(e.mean_logit) != np.sign(base) for e in est)]
    ok = "FloorHue" in crossing
    criterion(7, ok, f"row {row} (true {int(X[row, 0])}, logit {base:.3f}); crossing nodes {crossing}; "
                     f"FloorHue the only one: {crossing == ['FloorHue']} (reported, not gated)")


def _run_cli(tmp, tag, capsys):
    d = tmp / tag
    d.mkdir()
    wet = d / "wet.csv"
    wet.write_text("Season,Rain,Sprinkler,Wet,Slippery\n2,0,1,1,1\n")
    steps = [
        ["gendata", "--n", "2000", "--seed", "3", "--out", d / "data.csv", "--sidecar", d / "gt.json"],
        ["gendata", "--scm", "wetfloor", "--n", "300", "--seed", "3", "--out", d / "wf.csv"],
        ["train", "--data", d / "data.csv", "--epochs", "2", "--seed", "3", "--out", d / "model.json"],
        ["train", "--data", d / "wf.csv", "--graph", "builtin:wetfloor", "--epochs", "2", "--out", d / "wf.json"],
        ["train-clf", "--data", d / "data.csv", "--epochs", "3", "--seed", "3", "--out", d / "clf.json"],
        ["explain", "--model", d / "model.json", "--classifier", d / "clf.json", "--data", d / "data.csv",
         "--row", "5", "--samples", "30", "--threads", "4", "--seed", "3", "--out", d / "e4.csv"],
        ["explain", "--model", d / "model.json", "--classifier", d / "clf.json", "--data", d / "data.csv",
         "--row", "5", "--samples", "30", "--threads", "1", "--seed", "3", "--out", d / "e1.csv"],
        ["explain", "--model", d / "model.json", "--classifier", d / "clf.json", "--data", d / "data.csv",
         "--row", "7", "--samples", "20", "--weighting", "likelihood", "--threads", "3", "--out", d / "ew.csv"],
        ["evalfit", "--model", d / "model.json", "--data", d / "data.csv", "--n-gen", "1000", "--seed", "3",
         "--out", d / "r.json", "--kde", d / "k.csv"],
        ["sample", "--model", d / "model.json", "--n", "500", "--seed", "3", "--out", d / "s.csv"],
        ["sample", "--model", "builtin:wetfloor", "--n", "50", "--seed", "3"],
        ["loglik", "--model", d / "model.json", "--data", d / "data.csv", "--out", d / "ll.csv"],
        ["cf", "--model", d / "model.json", "--data", d / "data.csv", "--row", "1", "--do", "FloorHue=0.7,Shape=2",
         "--n", "40", "--seed", "3", "--out", d / "cf.csv"],
        ["cf", "--model", "builtin:wetfloor", "--data", wet, "--row", "0", "--do", "Sprinkler=0", "--n", "20"],
    ]
    outputs = {}
    for i, argv in enumerate(steps):
        code = cli.main([str(a) for a in argv])
        outputs[f"stdout {i} {argv[0]}"] = (code, capsys.readouterr().out.encode())
    for path in sorted(d.iterdir()):
        outputs[path.name] = path.read_bytes()
    return outputs


def test_criterion_8_cli_determinism(criterion, tmp_path, capsys):
    first = _run_cli(tmp_path, "a", capsys)
    second = _run_cli(tmp_path, "b", capsys)
    codes_ok = all(v[0] == 0 for k, v in first.items() if k.startswith("stdout"))
    differing = [k for k in first if first[k] != second.get(k)]
    threads_equal = first["e4.csv"] == first["e1.csv"]
    ok = codes_ok and not differing and set(first) == set(second) and threads_equal
    criterion(8, ok, f"{len(first)} outputs compared across two runs; differing {differing}; "
                     f"--threads 4 == --threads 1: {threads_equal}")
