"""Distributional causal graph estimator.

Every node owns a :class:`~dcg.nets.ParamNet` that maps its encoded parent
values to the parameters of the node's distribution. The joint
log-likelihood factorises over nodes, so training is plain maximum
likelihood on batch means, and sampling is ancestral in topological order.
"""

from __future__ import annotations

import csv
import json
import logging
from typing import Mapping

import numpy as np
from scipy import special
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import distributions as dist
from .exceptions import (
    CorruptCheckpoint,
    DomainViolation,
    EmptyDataset,
    GraphError,
    SpecMismatch,
    VersionMismatch,
)
from .graph import (
    BERNOULLI,
    CATEGORICAL,
    CATEGORICAL_FAMILY,
    CONTINUOUS,
    GraphSpec,
    NodeSpec,
    check_vector,
    validate_graph,
)
from .nets import AdamState, ParamNet, opt_step
from .validation import array_to_vector, check_factors, check_generator, vector_to_array

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


# -- parent encoding and link functions --------------------------------------

def encode_columns(graph: GraphSpec, names, X) -> np.ndarray:
    """Encode the given columns of ``X`` as network inputs.

    Binary values pass through as 0/1, categorical values become one-hot
    blocks and continuous values are min-max scaled by their domain.
    """
    X = np.asarray(X, dtype=float)
    blocks = []
    for name in names:
        col = X[:, graph.index(name)]
        d = graph[name].domain
        if d.kind == CATEGORICAL:
            blocks.append((col[:, None] == np.arange(d.k)).astype(float))
        elif d.kind == CONTINUOUS:
            blocks.append(((col - d.lo) / (d.hi - d.lo))[:, None])
        else:
            blocks.append(col[:, None])
    if not blocks:
        return np.zeros((X.shape[0], 0))
    return np.concatenate(blocks, axis=1)


def encoded_width(graph: GraphSpec, names) -> int:
    return sum(graph[n].domain.encoded_width for n in names)


def raw_width(node: NodeSpec) -> int:
    """Number of raw network outputs for the node's family."""
    if node.family == BERNOULLI:
        return 1
    if node.family == CATEGORICAL_FAMILY:
        return node.domain.k
    return 2


def params_from_raw(node: NodeSpec, raw) -> dist.DistParams:
    """Apply the family's link function to raw network outputs (batch on axis 0)."""
    raw = np.asarray(raw, dtype=float)
    eps = dist.PROB_FLOOR
    if node.family == BERNOULLI:
        return dist.Bernoulli(eps + (1 - 2 * eps) * special.expit(raw[..., 0]))
    if node.family == CATEGORICAL_FAMILY:
        k = node.domain.k
        return dist.Categorical(eps + (1 - k * eps) * special.softmax(raw, axis=-1))
    lo, hi = node.domain.lo, node.domain.hi
    return dist.TruncatedNormal(
        mu=lo + (hi - lo) * special.expit(raw[..., 0]),
        sigma=np.logaddexp(0.0, raw[..., 1]) + dist.SIGMA_FLOOR,
        lo=lo,
        hi=hi,
    )


def raw_log_prob_grad(node: NodeSpec, raw, values):
    """Log-probabilities and their gradient w.r.t. the raw network outputs."""
    raw = np.asarray(raw, dtype=float)
    params = params_from_raw(node, raw)
    logp = dist.log_prob(params, values)
    g = dist.grad_log_prob(params, values)
    eps = dist.PROB_FLOOR
    if node.family == BERNOULLI:
        s = special.expit(raw[..., 0])
        graw = (g["p"] * (1 - 2 * eps) * s * (1 - s))[..., None]
    elif node.family == CATEGORICAL_FAMILY:
        k = node.domain.k
        s = special.softmax(raw, axis=-1)
        gs = g["p"] * (1 - k * eps)
        graw = s * (gs - np.sum(gs * s, axis=-1, keepdims=True))
    else:
        lo, hi = node.domain.lo, node.domain.hi
        s_mu = special.expit(raw[..., 0])
        graw = np.stack(
            [g["mu"] * (hi - lo) * s_mu * (1 - s_mu), g["sigma"] * special.expit(raw[..., 1])],
            axis=-1,
        )
    return logp, graw


# -- the estimator -----------------------------------------------------------

class DistributionalCausalGraph(BaseEstimator):
    """Causal DAG whose nodes are neural-parameterised distributions.

    Parameters
    ----------
    graph : GraphSpec
        Declared causal graph; nodes may be listed in any order.
    epochs : int
        Passes over the training data in :meth:`fit`.
    batch_size : int
        Rows per optimisation step.
    learning_rate, beta1, beta2, eps : float
        Adam hyperparameters.
    random_state : int, SeedSequence, Generator or None
        Seeds network initialisation and batch shuffling.

    Attributes
    ----------
    graph_ : GraphSpec
        Validated, topologically sorted graph. Data columns follow its order.
    nets_ : dict[str, ParamNet]
    trace_ : list[float]
        Mean training log-likelihood after each epoch.
    """

    def __init__(
        self,
        graph: GraphSpec,
        epochs=30,
        batch_size=256,
        learning_rate=1e-2,
        beta1=0.9,
        beta2=0.999,
        eps=1e-8,
        random_state=0,
    ):
        self.graph = graph
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.random_state = random_state

    @classmethod
    def from_nets(cls, graph: GraphSpec, nets: Mapping[str, ParamNet], **params):
        """Build a ready-to-use model from explicit networks, skipping training."""
        model = cls(graph, **params)
        model._set_fitted(validate_graph(graph), dict(nets))
        return model

    def _set_fitted(self, graph, nets, trace=()):
        if set(nets) != set(graph.names):
            raise SpecMismatch("need exactly one network per node")
        for node in graph.nodes:
            net = nets[node.name]
            want_in, want_out = encoded_width(graph, node.parents), raw_width(node)
            if net.in_width != want_in or net.out_width != want_out:
                raise SpecMismatch(
                    f"{node.name}: network maps {net.in_width}->{net.out_width}, "
                    f"expected {want_in}->{want_out}"
                )
        self.graph_ = graph
        self.nets_ = {n: nets[n] for n in graph.names}
        self.trace_ = list(trace)
        self.n_features_in_ = len(graph)
        self.feature_names_in_ = np.array(graph.names, dtype=object)

    def init_nets(self, rng) -> dict:
        graph = validate_graph(self.graph)
        nets = {}
        for node in graph.nodes:
            hidden = node.hidden_layers if node.parents else ()
            nets[node.name] = ParamNet.initialize(
                encoded_width(graph, node.parents), hidden, raw_width(node), rng
            )
        return nets

    def fit(self, X, y=None):
        """Maximum-likelihood fit of every node's network on factor data ``X``."""
        graph = validate_graph(self.graph)
        X = check_factors(graph, X)
        if len(X) == 0:
            raise EmptyDataset("cannot fit on an empty dataset")
        rng = check_generator(self.random_state)
        self._set_fitted(graph, self.init_nets(rng))
        self._train(X, rng)
        return self

    def _train(self, X, rng):
        graph = self.graph_
        n = len(X)
        enc = {node.name: encode_columns(graph, node.parents, X) for node in graph.nodes}
        vals = {node.name: X[:, graph.index(node.name)] for node in graph.nodes}
        hyper = dict(lr=self.learning_rate, beta1=self.beta1, beta2=self.beta2, eps=self.eps)
        states = {name: AdamState.for_net(net, **hyper) for name, net in self.nets_.items()}
        batch = max(1, min(int(self.batch_size), n))
        for epoch in range(int(self.epochs)):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                for node in graph.nodes:
                    net = self.nets_[node.name]
                    inputs = enc[node.name][idx]
                    raw, cache = net.forward(inputs, return_cache=True)
                    _, graw = raw_log_prob_grad(node, raw, vals[node.name][idx])
                    # descend on the negative batch-mean log-likelihood
                    grads, _ = net.backward(inputs, -graw / len(idx), cache)
                    opt_step(net, grads, states[node.name])
            mll = float(np.mean(self._log_likelihood_rows(X)))
            self.trace_.append(mll)
            logger.info("epoch %d mean log-likelihood %.6f", epoch + 1, mll)
        return self

    # -- queries ---------------------------------------------------------

    def node_params(self, node: str, X) -> dist.DistParams:
        """Distribution parameters of ``node`` for each row of ``X`` (only parent columns are read)."""
        check_is_fitted(self)
        spec = self.graph_[node]
        X = np.atleast_2d(np.asarray(X, dtype=float))
        raw = self.nets_[node].forward(encode_columns(self.graph_, spec.parents, X))
        return params_from_raw(spec, raw)

    def _log_likelihood_rows(self, X):
        total = np.zeros(len(X))
        for node in self.graph_.nodes:
            params = self.node_params(node.name, X)
            total += dist.log_prob(params, X[:, self.graph_.index(node.name)])
        return total

    def score_samples(self, X) -> np.ndarray:
        """Joint log-likelihood of each row."""
        check_is_fitted(self)
        return self._log_likelihood_rows(check_factors(self.graph_, X))

    def score(self, X, y=None) -> float:
        """Mean joint log-likelihood over the rows of ``X``."""
        return float(np.mean(self.score_samples(X)))

    def resample(self, X, nodes, random_state=None) -> np.ndarray:
        """Redraw the given nodes, in topological order, for every row of ``X``.

        Each redrawn node is conditioned on the current (possibly redrawn)
        values of its parents; all other columns are left untouched.
        """
        check_is_fitted(self)
        rng = check_generator(random_state)
        X = np.array(X, dtype=float)
        wanted = set(nodes)
        for j, node in enumerate(self.graph_.nodes):
            if node.name not in wanted:
                continue
            params = self.node_params(node.name, X)
            noise = dist.draw_noise(node.family, node.domain, rng, size=len(X))
            X[:, j] = dist.sample_reparam(params, noise)
        return X

    def sample(self, n_samples=1, random_state=None) -> np.ndarray:
        """Ancestral samples, shape ``(n_samples, n_nodes)``."""
        check_is_fitted(self)
        blank = np.zeros((int(n_samples), len(self.graph_)))
        return self.resample(blank, self.graph_.names, random_state)


# -- functional interface ----------------------------------------------------

def node_params(model: DistributionalCausalGraph, node: str, parent_values: Mapping) -> dist.DistParams:
    """Parameters of one node given a mapping of its parents' values."""
    check_is_fitted(model)
    graph = model.graph_
    spec = graph[node]
    if set(parent_values) != set(spec.parents):
        raise SpecMismatch(f"{node}: expected values for parents {list(spec.parents)}")
    row = np.zeros((1, len(graph)))
    for p in spec.parents:
        if not graph[p].domain.contains(parent_values[p]):
            raise DomainViolation(f"{p}={parent_values[p]!r} outside its domain")
        row[0, graph.index(p)] = float(parent_values[p])
    params = model.node_params(node, row)
    if isinstance(params, dist.Categorical):
        return dist.Categorical(params.p[0])
    if isinstance(params, dist.Bernoulli):
        return dist.Bernoulli(float(params.p[0]))
    return dist.TruncatedNormal(float(params.mu[0]), float(params.sigma[0]), params.lo, params.hi)


def sample(model: DistributionalCausalGraph, rng=None) -> dict:
    """One ancestral sample as a node-name mapping."""
    return array_to_vector(model.graph_, model.sample(1, rng)[0])


def log_likelihood(model: DistributionalCausalGraph, x: Mapping) -> float:
    check_is_fitted(model)
    problem = check_vector(model.graph_, x)
    if problem is not None:
        raise DomainViolation(str(problem))
    return float(model.score_samples(vector_to_array(model.graph_, x)[None, :])[0])


def train_mle(model: DistributionalCausalGraph, X, epochs=None, batch_size=None,
              learning_rate=None, random_state=None):
    """Continue maximum-likelihood training of an already built model.

    Returns a new model (the input is left untouched) and the per-epoch
    mean log-likelihood trace of this run.
    """
    check_is_fitted(model)
    X = check_factors(model.graph_, X)
    if len(X) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    params = model.get_params()
    for key, value in (("epochs", epochs), ("batch_size", batch_size),
                       ("learning_rate", learning_rate), ("random_state", random_state)):
        if value is not None:
            params[key] = value
    trained = DistributionalCausalGraph(**params)
    trained._set_fitted(model.graph_, {k: v.copy() for k, v in model.nets_.items()})
    trained._train(X, check_generator(trained.random_state))
    return trained, list(trained.trace_)


# -- persistence -------------------------------------------------------------

def model_to_dict(model: DistributionalCausalGraph) -> dict:
    check_is_fitted(model)
    return {
        "version": CHECKPOINT_VERSION,
        "spec": model.graph_.to_dict(),
        "nets": {name: net.to_dict() for name, net in model.nets_.items()},
    }


def model_from_dict(d) -> DistributionalCausalGraph:
    if not isinstance(d, Mapping) or "version" not in d:
        raise CorruptCheckpoint("checkpoint has no version tag")
    if d["version"] != CHECKPOINT_VERSION:
        raise VersionMismatch(f"checkpoint version {d['version']!r}, expected {CHECKPOINT_VERSION}")
    try:
        graph = validate_graph(GraphSpec.from_dict(d["spec"]))
        nets = {name: ParamNet.from_dict(net) for name, net in d["nets"].items()}
        return DistributionalCausalGraph.from_nets(graph, nets)
    except (KeyError, TypeError, ValueError, GraphError) as exc:
        raise CorruptCheckpoint(f"malformed checkpoint: {exc}") from exc


def save_model(model: DistributionalCausalGraph, path) -> None:
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f)
        f.write("\n")


def load_model(path) -> DistributionalCausalGraph:
    with open(path) as f:
        text = f.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(d)


# -- dataset CSV -------------------------------------------------------------

def format_value(node: NodeSpec, v) -> str:
    return str(int(v)) if node.domain.is_discrete else repr(float(v))


def write_dataset(graph: GraphSpec, X, path_or_file, extra=None) -> None:
    """Write factor rows as CSV with a header of node names.

    ``extra`` is an optional list of ``(column_name, values)`` pairs
    prepended to the node columns.
    """
    extra = extra or []
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([name for name, _ in extra] + graph.names)
        for i, row in enumerate(np.asarray(X, dtype=float)):
            w.writerow([str(vals[i]) for _, vals in extra]
                       + [format_value(node, v) for node, v in zip(graph.nodes, row)])
    finally:
        if own:
            f.close()


def read_dataset(path, graph: GraphSpec) -> np.ndarray:
    """Read a dataset CSV into an array in ``graph`` column order."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        missing = [n for n in graph.names if n not in header]
        if missing:
            raise SpecMismatch(f"{path}: no column for nodes {missing}")
        cols = [header.index(n) for n in graph.names]
        try:
            rows = [[float(r[c]) for c in cols] for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise SpecMismatch(f"{path}: malformed row ({exc})") from exc
    X = np.array(rows, dtype=float).reshape(len(rows), len(graph))
    return check_factors(graph, X)
