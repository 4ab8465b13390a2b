"""Input validation and conversion helpers.

Factor data travels through the package as a float array of shape
``(n_samples, n_nodes)`` whose columns follow the graph's topological node
order. Discrete values are stored as whole numbers (class indices).
"""

from __future__ import annotations

import numbers
from typing import Mapping

import numpy as np

from .exceptions import DomainViolation, SpecMismatch
from .graph import GraphSpec


def check_generator(random_state=None) -> np.random.Generator:
    """Turn None, an int seed, a SeedSequence or a Generator into a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(random_state)
    raise ValueError(f"{random_state!r} cannot be used to seed a numpy Generator")


def spawn_generators(random_state, n) -> list[np.random.Generator]:
    """``n`` independent child streams derived deterministically from ``random_state``."""
    if isinstance(random_state, np.random.Generator):
        return random_state.spawn(n)
    if not isinstance(random_state, np.random.SeedSequence):
        random_state = np.random.SeedSequence(random_state)
    return [np.random.default_rng(s) for s in random_state.spawn(n)]


def domain_mask(graph: GraphSpec, X: np.ndarray) -> np.ndarray:
    """Boolean array, True where a value lies inside its column's domain."""
    ok = np.isfinite(X)
    for j, node in enumerate(graph.nodes):
        col = X[:, j]
        d = node.domain
        if d.is_discrete:
            ok[:, j] &= (col == np.round(col)) & (col >= 0) & (col < d.n_classes)
        else:
            ok[:, j] &= (col >= d.lo) & (col <= d.hi)
    return ok


def check_factors(graph: GraphSpec, X, copy=False) -> np.ndarray:
    """Validate factor data and return it as a float array in graph column order.

    Accepts a 2-D array-like already in graph order, a pandas DataFrame or a
    mapping of column name to values (reordered by name), or a list of
    per-row mappings.
    """
    if hasattr(X, "columns"):
        missing = [n for n in graph.names if n not in X.columns]
        if missing:
            raise SpecMismatch(f"data has no column for nodes {missing}")
        X = X[graph.names].to_numpy(dtype=float)
    elif isinstance(X, Mapping):
        missing = [n for n in graph.names if n not in X]
        if missing:
            raise SpecMismatch(f"data has no column for nodes {missing}")
        X = np.column_stack([np.asarray(X[n], dtype=float) for n in graph.names])
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], Mapping):
        X = np.array([vector_to_array(graph, row) for row in X])
    X = np.array(X, dtype=float, copy=copy or None)
    if X.ndim != 2:
        raise SpecMismatch(f"factor data must be 2-D, got shape {X.shape}")
    if X.shape[1] != len(graph):
        raise SpecMismatch(f"expected {len(graph)} columns, got {X.shape[1]}")
    ok = domain_mask(graph, X)
    if not ok.all():
        i, j = np.argwhere(~ok)[0]
        raise DomainViolation(
            f"row {i}: value {X[i, j]!r} outside the domain of {graph.nodes[j].name}"
        )
    return X


def vector_to_array(graph: GraphSpec, x: Mapping) -> np.ndarray:
    extra = [k for k in x if k not in graph]
    missing = [n for n in graph.names if n not in x]
    if missing or extra:
        raise SpecMismatch(f"factor vector mismatch: missing {missing}, unexpected {extra}")
    return np.array([float(x[n]) for n in graph.names])


def array_to_vector(graph: GraphSpec, row) -> dict:
    out = {}
    for node, v in zip(graph.nodes, row):
        out[node.name] = int(v) if node.domain.is_discrete else float(v)
    return out
