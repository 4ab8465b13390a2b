"""Binary classifier over factor vectors, the model whose decisions get explained."""

from __future__ import annotations

import json
from typing import Mapping

import numpy as np
from scipy import special
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import CorruptCheckpoint, EmptyDataset, GraphError, SpecMismatch, VersionMismatch
from .graph import BINARY, GraphSpec, validate_graph
from .model import CHECKPOINT_VERSION, encode_columns, encoded_width
from .nets import AdamState, ParamNet, opt_step
from .validation import check_factors, check_generator


class FactorClassifier(ClassifierMixin, BaseEstimator):
    """Small tanh MLP trained with logistic loss to predict one binary node.

    ``X`` is always a full factor matrix in graph column order; the
    classifier reads only its input nodes (every node except the target by
    default). When ``y`` is omitted, the target column of ``X`` is used.
    """

    def __init__(self, graph: GraphSpec, target="Type", inputs=None, hidden_layers=(32,),
                 epochs=30, batch_size=256, learning_rate=1e-2, random_state=0):
        self.graph = graph
        self.target = target
        self.inputs = inputs
        self.hidden_layers = hidden_layers
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _setup(self):
        graph = validate_graph(self.graph)
        if graph[self.target].domain.kind != BINARY:
            raise SpecMismatch(f"target {self.target!r} must be a binary node")
        inputs = [n for n in graph.names if n != self.target] if self.inputs is None else list(self.inputs)
        for name in inputs:
            graph.index(name)
        return graph, inputs

    def fit(self, X, y=None):
        graph, inputs = self._setup()
        X = check_factors(graph, X)
        if len(X) == 0:
            raise EmptyDataset("cannot fit a classifier on an empty dataset")
        y = X[:, graph.index(self.target)] if y is None else np.asarray(y, dtype=float).reshape(-1)
        if len(y) != len(X) or not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0/1, one per row")
        rng = check_generator(self.random_state)
        self.graph_, self.inputs_ = graph, inputs
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = len(graph)
        self.net_ = ParamNet.initialize(encoded_width(graph, inputs), self.hidden_layers, 1, rng)
        state = AdamState.for_net(self.net_, lr=self.learning_rate)
        enc = encode_columns(graph, inputs, X)
        n = len(X)
        batch = max(1, min(int(self.batch_size), n))
        self.loss_curve_ = []
        for _ in range(int(self.epochs)):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                logits, cache = self.net_.forward(enc[idx], return_cache=True)
                upstream = (special.expit(logits[:, 0]) - y[idx])[:, None] / len(idx)
                grads, _ = self.net_.backward(enc[idx], upstream, cache)
                opt_step(self.net_, grads, state)
            z = self.net_.forward(enc)[:, 0]
            self.loss_curve_.append(float(np.mean(np.logaddexp(0.0, z) - y * z)))
        return self

    def decision_function(self, X) -> np.ndarray:
        """Pre-sigmoid score; positive means class 1."""
        check_is_fitted(self)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.graph_):
            raise SpecMismatch(f"expected {len(self.graph_)} factor columns, got {X.shape[1]}")
        return self.net_.forward(encode_columns(self.graph_, self.inputs_, X))[:, 0]

    def predict_proba(self, X) -> np.ndarray:
        p = special.expit(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)

    def to_dict(self) -> dict:
        check_is_fitted(self)
        return {
            "version": CHECKPOINT_VERSION,
            "classifier": True,
            "target": self.target,
            "inputs": list(self.inputs_),
            "spec": self.graph_.to_dict(),
            "nets": {self.target: self.net_.to_dict()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> FactorClassifier:
        if not isinstance(d, Mapping) or "version" not in d:
            raise CorruptCheckpoint("classifier checkpoint has no version tag")
        if d["version"] != CHECKPOINT_VERSION:
            raise VersionMismatch(f"checkpoint version {d['version']!r}, expected {CHECKPOINT_VERSION}")
        if not d.get("classifier"):
            raise CorruptCheckpoint("checkpoint is not tagged as a classifier")
        try:
            graph = validate_graph(GraphSpec.from_dict(d["spec"]))
            clf = cls(graph, target=d["target"], inputs=list(d["inputs"]))
            graph, inputs = clf._setup()
            net = ParamNet.from_dict(d["nets"][d["target"]])
        except (KeyError, TypeError, ValueError, GraphError) as exc:
            raise CorruptCheckpoint(f"malformed classifier checkpoint: {exc}") from exc
        if net.in_width != encoded_width(graph, inputs) or net.out_width != 1:
            raise CorruptCheckpoint("classifier network does not match its input nodes")
        clf.hidden_layers = tuple(w.shape[1] for w, _ in net.layers[:-1])
        clf.graph_, clf.inputs_, clf.net_ = graph, inputs, net
        clf.classes_ = np.array([0, 1])
        clf.n_features_in_ = len(graph)
        return clf


def save_classifier(clf: FactorClassifier, path) -> None:
    with open(path, "w") as f:
        json.dump(clf.to_dict(), f)
        f.write("\n")


def load_classifier(path) -> FactorClassifier:
    with open(path) as f:
        text = f.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"{path}: not valid JSON ({exc})") from exc
    return FactorClassifier.from_dict(d)
