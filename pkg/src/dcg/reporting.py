"""Fit diagnostics (KDE curves, parameter gaps, binned TV) and report writers."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .counterfactuals import EffectEstimate
from .exceptions import EmptySamples
from .graph import GraphSpec
from .model import DistributionalCausalGraph, format_value
from .validation import check_factors, check_generator

TV_BINS = 50
KDE_POINTS = 200

EFFECT_COLUMNS = [
    "node", "value", "mean_logit", "std_logit", "ci_mean_low", "ci_mean_high",
    "band_low", "band_high", "weighted_mean", "weighting", "n_samples",
    "base_value", "base_logit",
]


def silverman_bandwidth(samples) -> float:
    """Normal-reference bandwidth ``1.06 * sd * n**(-1/5)``."""
    x = np.asarray(samples, dtype=float)
    sd = np.std(x, ddof=1) if len(x) > 1 else 0.0
    bw = 1.06 * sd * len(x) ** (-0.2)
    # constant samples would give a zero bandwidth
    return float(bw) if bw > 0 else 1e-3


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def kde(samples, grid, bandwidth=None, chunk=4096) -> KdeCurve:
    """Gaussian kernel density estimate evaluated on ``grid``."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if len(x) == 0:
        raise EmptySamples("KDE needs at least one sample")
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if len(grid) > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("KDE grid must be strictly increasing")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    density = np.zeros(len(grid))
    for start in range(0, len(x), chunk):
        z = (grid[:, None] - x[None, start:start + chunk]) / h
        density += np.exp(-0.5 * z * z).sum(axis=1)
    density /= len(x) * h * np.sqrt(2 * np.pi)
    return KdeCurve(grid, density, h)


def binned_tv(a, b, lo, hi, bins=TV_BINS) -> float:
    """Total-variation distance between the histograms of ``a`` and ``b`` on ``bins`` equal bins."""
    edges = np.linspace(lo, hi, bins + 1)
    pa = np.histogram(np.clip(a, lo, hi), edges)[0] / max(len(a), 1)
    pb = np.histogram(np.clip(b, lo, hi), edges)[0] / max(len(b), 1)
    return float(0.5 * np.abs(pa - pb).sum())


def class_frequencies(values, n_classes) -> np.ndarray:
    return np.bincount(np.asarray(values, dtype=int), minlength=n_classes) / max(len(values), 1)


@dataclass
class NodeFit:
    node: str
    kind: str
    gap: float | None = None
    freq_real: list | None = None
    freq_fake: list | None = None
    tv: float | None = None
    kde_real: KdeCurve | None = field(default=None, repr=False)
    kde_fake: KdeCurve | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = {"node": self.node, "kind": self.kind}
        if self.gap is not None:
            d.update(gap=self.gap, freq_real=self.freq_real, freq_fake=self.freq_fake)
        if self.tv is not None:
            d.update(tv=self.tv, bandwidth_real=self.kde_real.bandwidth,
                     bandwidth_fake=self.kde_fake.bandwidth)
        return d


@dataclass
class FitReport:
    n_real: int
    n_fake: int
    nodes: dict = field(default_factory=dict)

    def __getitem__(self, name) -> NodeFit:
        return self.nodes[name]

    def to_dict(self) -> dict:
        return {"n_real": self.n_real, "n_fake": self.n_fake,
                "nodes": {k: v.to_dict() for k, v in self.nodes.items()}}


def compare_batches(graph: GraphSpec, real, fake, kde_points=KDE_POINTS) -> FitReport:
    """Per-node comparison of two factor batches (real data vs generated)."""
    report = FitReport(len(real), len(fake))
    for j, node in enumerate(graph.nodes):
        d = node.domain
        if d.is_discrete:
            fr = class_frequencies(real[:, j], d.n_classes)
            ff = class_frequencies(fake[:, j], d.n_classes)
            report.nodes[node.name] = NodeFit(
                node.name, d.kind, gap=float(np.max(np.abs(fr - ff))),
                freq_real=fr.tolist(), freq_fake=ff.tolist(),
            )
        else:
            grid = np.linspace(d.lo, d.hi, kde_points)
            report.nodes[node.name] = NodeFit(
                node.name, d.kind,
                tv=binned_tv(real[:, j], fake[:, j], d.lo, d.hi),
                kde_real=kde(real[:, j], grid),
                kde_fake=kde(fake[:, j], grid),
            )
    return report


def fit_report(model: DistributionalCausalGraph, X, n_gen=10_000, random_state=0,
               kde_points=KDE_POINTS) -> FitReport:
    """Compare ``n_gen`` model samples against (at most ``n_gen``) rows of the data."""
    graph = model.graph_
    X = check_factors(graph, X)
    rng = check_generator(random_state)
    real = X if len(X) <= n_gen else X[np.sort(rng.choice(len(X), n_gen, replace=False))]
    fake = model.sample(n_gen, rng)
    return compare_batches(graph, real, fake, kde_points)


def write_fit_report(report: FitReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def write_kde_csv(report: FitReport, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["node", "grid", "density_real", "density_fake"])
        for name, fit in report.nodes.items():
            if fit.kde_real is None:
                continue
            for g, r, k in zip(fit.kde_real.grid, fit.kde_real.density, fit.kde_fake.density):
                w.writerow([name, repr(float(g)), repr(float(r)), repr(float(k))])


def _num(v):
    return "" if v is None else repr(float(v))


def effect_rows(graph: GraphSpec, curves, base, base_logit):
    """Rows of the effect report, one block per node, in the order of ``curves``."""
    for name, estimates in curves.items():
        node = graph[name]
        base_value = base[name] if isinstance(base, dict) else base[graph.index(name)]
        for e in estimates:
            yield {
                "node": name,
                "value": format_value(node, e.value),
                "mean_logit": _num(e.mean_logit),
                "std_logit": _num(e.std_logit),
                "ci_mean_low": _num(e.ci_low),
                "ci_mean_high": _num(e.ci_high),
                "band_low": _num(e.band_low),
                "band_high": _num(e.band_high),
                "weighted_mean": _num(e.weighted_mean),
                "weighting": e.weighting,
                "n_samples": str(e.n),
                "base_value": format_value(node, base_value),
                "base_logit": _num(base_logit),
            }


def write_effect_report(graph: GraphSpec, curves: dict[str, list[EffectEstimate]], base,
                        base_logit, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, EFFECT_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(effect_rows(graph, curves, base, base_logit))


def read_effect_report(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))

