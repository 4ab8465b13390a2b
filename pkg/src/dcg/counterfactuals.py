"""Interventions, weakly stable counterfactuals and intervention effects.

A counterfactual keeps every node that does not descend from an intervened
node exactly at its observed value, forces the intervened nodes, and
redraws the descendants with fresh noise given their updated parents. No
noise is inferred from the observation.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainViolation, EmptyIntervention, UnknownNode
from .graph import GraphSpec, descendants
from .model import DistributionalCausalGraph
from .validation import array_to_vector, check_factors, spawn_generators, vector_to_array

logger = logging.getLogger(__name__)

WEIGHTINGS = ("none", "likelihood", "proximity")


@dataclass(frozen=True)
class Intervention:
    """Forced values ``do(node=value, ...)``."""

    assignments: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))

    @property
    def nodes(self) -> list[str]:
        return list(self.assignments)

    def __bool__(self):
        return bool(self.assignments)

    def check(self, graph: GraphSpec) -> Intervention:
        for name, value in self.assignments.items():
            if name not in graph:
                raise UnknownNode(f"cannot intervene on unknown node {name!r}")
            if not graph[name].domain.contains(value):
                raise DomainViolation(f"do({name}={value!r}) is outside the node's domain")
        return self

    @classmethod
    def parse(cls, text: str, graph: GraphSpec) -> Intervention:
        """Parse ``"Node=value,Node=value"``; values are typed by each node's domain."""
        out = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            name, sep, raw = part.partition("=")
            name, raw = name.strip(), raw.strip()
            if not sep or not name or not raw:
                raise ValueError(f"cannot parse intervention {part!r}; expected Node=value")
            if name not in graph:
                raise UnknownNode(f"cannot intervene on unknown node {name!r}")
            try:
                value = int(raw) if graph[name].domain.is_discrete else float(raw)
            except ValueError:
                raise DomainViolation(f"{name}: {raw!r} is not a valid value") from None
            out[name] = value
        return cls(out).check(graph)


def _as_intervention(iv) -> Intervention:
    return iv if isinstance(iv, Intervention) else Intervention(iv or {})


def _forced(model, iv, X):
    for name, value in iv.assignments.items():
        X[:, model.graph_.index(name)] = value
    return X


def intervened_samples(model: DistributionalCausalGraph, iv, n_samples=1, random_state=None) -> np.ndarray:
    """Samples from the model with the intervened mechanisms replaced by constants."""
    check_is_fitted(model)
    iv = _as_intervention(iv).check(model.graph_)
    X = _forced(model, iv, np.zeros((int(n_samples), len(model.graph_))))
    free = [n for n in model.graph_.names if n not in iv.assignments]
    return model.resample(X, free, random_state)


def intervened_sample(model, iv, rng=None) -> dict:
    return array_to_vector(model.graph_, intervened_samples(model, iv, 1, rng)[0])


def counterfactual_samples(model: DistributionalCausalGraph, x, iv, n_samples=1,
                           random_state=None) -> np.ndarray:
    """``n_samples`` weakly stable counterfactuals of observation ``x`` under ``iv``."""
    check_is_fitted(model)
    graph = model.graph_
    iv = _as_intervention(iv)
    if not iv:
        raise EmptyIntervention("a counterfactual needs at least one intervened node")
    iv.check(graph)
    row = vector_to_array(graph, x) if isinstance(x, Mapping) else np.asarray(x, dtype=float)
    row = check_factors(graph, row[None, :])[0]
    X = _forced(model, iv, np.tile(row, (int(n_samples), 1)))
    redraw = descendants(graph, iv.nodes) - set(iv.nodes)
    return model.resample(X, redraw, random_state)


def counterfactual_sample(model, x, iv, rng=None) -> dict:
    return array_to_vector(model.graph_, counterfactual_samples(model, x, iv, 1, rng)[0])


# -- weighting ---------------------------------------------------------------

def likelihood_weight(model: DistributionalCausalGraph, cf) -> float:
    row = vector_to_array(model.graph_, cf) if isinstance(cf, Mapping) else cf
    return float(np.exp(model.score_samples(np.atleast_2d(row))[0]))


def squared_distance(graph: GraphSpec, x, cf) -> np.ndarray:
    """Per-row squared distance: domain-scaled for continuous nodes, 0/1 mismatch otherwise."""
    x = np.asarray(x, dtype=float)
    cf = np.atleast_2d(np.asarray(cf, dtype=float))
    d2 = np.zeros(len(cf))
    for j, node in enumerate(graph.nodes):
        if node.domain.is_discrete:
            d2 += cf[:, j] != x[j]
        else:
            d2 += ((cf[:, j] - x[j]) / (node.domain.hi - node.domain.lo)) ** 2
    return d2


def proximity_weight(graph: GraphSpec, x, cf, sigma_prox=0.25) -> float:
    if isinstance(x, Mapping):
        x = vector_to_array(graph, x)
    if isinstance(cf, Mapping):
        cf = vector_to_array(graph, cf)
    return float(np.exp(-squared_distance(graph, x, cf)[0] / (2 * sigma_prox**2)))


def log_weights(model, x_row, cf_rows, weighting, sigma_prox=0.25) -> np.ndarray:
    if weighting == "likelihood":
        return model.score_samples(cf_rows)
    if weighting == "proximity":
        return -squared_distance(model.graph_, x_row, cf_rows) / (2 * sigma_prox**2)
    if weighting == "none":
        return np.zeros(len(cf_rows))
    raise ValueError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")


def weighted_mean(values, log_w):
    """Self-normalised weighted mean from log-weights.

    Returns ``(mean, degenerate)``; when every weight is zero the plain mean
    is returned with ``degenerate=True``.
    """
    values = np.asarray(values, dtype=float)
    log_w = np.asarray(log_w, dtype=float)
    top = np.max(log_w)
    if not np.isfinite(top):
        return float(np.mean(values)), True
    w = np.exp(log_w - top)
    return float(np.sum(w * values) / np.sum(w)), False


# -- effect estimation -------------------------------------------------------

def as_logit_function(clf) -> Callable[[np.ndarray], np.ndarray]:
    """Adapt a classifier to ``rows -> logits``; rows are full factor vectors in graph order."""
    if hasattr(clf, "decision_function"):
        return lambda X: np.asarray(clf.decision_function(X), dtype=float).reshape(-1)
    if callable(clf):
        return lambda X: np.asarray(clf(X), dtype=float).reshape(-1)
    raise TypeError("classifier must define decision_function or be callable")


@dataclass(frozen=True)
class EffectQuery:
    base: Mapping
    target: str
    grid: Sequence | None = None
    samples: int = 100
    weighting: str = "none"
    sigma_prox: float = 0.25
    ci_z: float = 1.96
    n_grid: int = 20

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValueError("samples per value must be at least 1")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}; choose from {WEIGHTINGS}")
        if self.sigma_prox <= 0:
            raise ValueError("sigma_prox must be positive")


@dataclass(frozen=True)
class EffectEstimate:
    node: str
    value: float
    mean_logit: float
    std_logit: float
    ci_low: float
    ci_high: float
    band_low: float
    band_high: float
    weighted_mean: float | None
    weighting: str
    n: int
    degenerate_weights: bool = False


def default_grid(graph: GraphSpec, node: str, n_grid=20, base_value=None) -> list:
    """Full support for discrete nodes; ``n_grid`` even points (plus the base value) otherwise."""
    d = graph[node].domain
    if d.is_discrete:
        return d.support()
    grid = np.linspace(d.lo, d.hi, int(n_grid))
    if base_value is not None and not np.any(np.isclose(grid, base_value, rtol=0, atol=1e-12)):
        grid = np.sort(np.append(grid, float(base_value)))
    return [float(v) for v in grid]


def summarize(node, value, logits, log_w=None, weighting="none", ci_z=1.96) -> EffectEstimate:
    logits = np.asarray(logits, dtype=float)
    m = len(logits)
    # moments about the first sample so that a constant response gives std exactly 0
    shifted = logits - logits[0]
    mean = float(logits[0] + np.mean(shifted))
    std = float(np.std(shifted, ddof=1)) if m > 1 else 0.0
    half = ci_z * std / np.sqrt(m)
    wmean, degenerate = None, False
    if weighting != "none":
        wmean, degenerate = weighted_mean(logits, log_w)
        if degenerate:
            logger.warning("all %s weights vanished for %s=%r; using the plain mean", weighting, node, value)
    return EffectEstimate(
        node=node,
        value=value,
        mean_logit=mean,
        std_logit=std,
        ci_low=mean - half,
        ci_high=mean + half,
        band_low=mean - ci_z * std,
        band_high=mean + ci_z * std,
        weighted_mean=wmean,
        weighting=weighting,
        n=m,
        degenerate_weights=degenerate,
    )


def effect_curve(model: DistributionalCausalGraph, clf, query: EffectQuery,
                 random_state=None, n_jobs=1) -> list[EffectEstimate]:
    """Classifier response to ``do(target=v)`` for every ``v`` on the query grid.

    Each grid value draws its counterfactuals from its own random stream,
    split deterministically from ``random_state``, so results do not depend
    on ``n_jobs``.
    """
    check_is_fitted(model)
    graph = model.graph_
    logit_fn = as_logit_function(clf)
    x = vector_to_array(graph, query.base) if isinstance(query.base, Mapping) else np.asarray(query.base, float)
    x = check_factors(graph, x[None, :])[0]
    target = query.target
    graph.index(target)
    grid = list(query.grid) if query.grid is not None else default_grid(
        graph, target, query.n_grid, x[graph.index(target)]
    )
    if not grid:
        raise ValueError("effect grid is empty")
    for v in grid:
        if not graph[target].domain.contains(v):
            raise DomainViolation(f"grid value {v!r} outside the domain of {target}")
    streams = spawn_generators(random_state, len(grid))

    def one(i):
        v = grid[i]
        cf = counterfactual_samples(model, x, {target: v}, query.samples, streams[i])
        logits = logit_fn(cf)
        lw = log_weights(model, x, cf, query.weighting, query.sigma_prox) if query.weighting != "none" else None
        value = int(v) if graph[target].domain.is_discrete else float(v)
        return summarize(target, value, logits, lw, query.weighting, query.ci_z)

    if n_jobs is not None and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(one, range(len(grid))))
    return [one(i) for i in range(len(grid))]


class CounterfactualExplainer:
    """Sweep single-node interventions around one observation.

    Wraps :func:`effect_curve` over several nodes. The random stream of each
    node depends only on ``random_state`` and the node's position in the
    graph, so explaining a subset of nodes reproduces the corresponding
    curves of a full run.
    """

    def __init__(self, model, classifier, samples=100, n_grid=20, weighting="none",
                 sigma_prox=0.25, ci_z=1.96, random_state=0, n_jobs=1):
        self.model = model
        self.classifier = classifier
        self.samples = samples
        self.n_grid = n_grid
        self.weighting = weighting
        self.sigma_prox = sigma_prox
        self.ci_z = ci_z
        self.random_state = random_state
        self.n_jobs = n_jobs

    def explain(self, x, nodes=None) -> dict[str, list[EffectEstimate]]:
        graph = self.model.graph_
        nodes = graph.names if nodes is None else list(nodes)
        out = {}
        for name in nodes:
            seq = np.random.SeedSequence(self.random_state, spawn_key=(graph.index(name),))
            query = EffectQuery(
                base=x, target=name, samples=self.samples, weighting=self.weighting,
                sigma_prox=self.sigma_prox, ci_z=self.ci_z, n_grid=self.n_grid,
            )
            out[name] = effect_curve(self.model, self.classifier, query, seq, self.n_jobs)
        return out

    def base_logit(self, x) -> float:
        graph = self.model.graph_
        row = vector_to_array(graph, x) if isinstance(x, Mapping) else np.asarray(x, float)
        return float(as_logit_function(self.classifier)(row[None, :])[0])
