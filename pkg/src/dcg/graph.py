"""Declarative causal graphs: domains, node declarations and DAG queries.

A :class:`GraphSpec` is a plain, immutable description of a causal DAG.
Nothing in here knows about networks or distributions beyond the family
tag of each node. :func:`validate_graph` is the single place where the
structural invariants are enforced and where nodes are sorted so that
every parent precedes its children.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

from .exceptions import (
    CyclicGraph,
    DuplicateName,
    FamilyDomainMismatch,
    GraphError,
    UnknownNode,
    UnknownParent,
)

BINARY = "binary"
CATEGORICAL = "categorical"
CONTINUOUS = "continuous"

BERNOULLI = "Bernoulli"
CATEGORICAL_FAMILY = "Categorical"
TRUNCATED_NORMAL = "TruncatedNormal"

FAMILY_FOR_KIND = {
    BINARY: BERNOULLI,
    CATEGORICAL: CATEGORICAL_FAMILY,
    CONTINUOUS: TRUNCATED_NORMAL,
}

DEFAULT_HIDDEN_LAYERS = (32,)


@dataclass(frozen=True)
class ValueDomain:
    """Support of a single node.

    Use the :meth:`binary`, :meth:`categorical` and :meth:`continuous`
    constructors rather than filling the fields by hand.
    """

    kind: str
    k: int | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind == BINARY:
            if self.k is not None or self.lo is not None or self.hi is not None:
                raise GraphError("binary domain takes no parameters")
        elif self.kind == CATEGORICAL:
            if self.k is None or int(self.k) != self.k or self.k < 2:
                raise GraphError(f"categorical domain needs an integer k >= 2, got {self.k!r}")
            object.__setattr__(self, "k", int(self.k))
        elif self.kind == CONTINUOUS:
            if self.lo is None or self.hi is None:
                raise GraphError("continuous domain needs lo and hi")
            lo, hi = float(self.lo), float(self.hi)
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise GraphError(f"continuous domain needs finite lo < hi, got [{lo}, {hi}]")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        else:
            raise GraphError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def binary(cls) -> ValueDomain:
        return cls(BINARY)

    @classmethod
    def categorical(cls, k: int) -> ValueDomain:
        return cls(CATEGORICAL, k=k)

    @classmethod
    def continuous(cls, lo: float, hi: float) -> ValueDomain:
        return cls(CONTINUOUS, lo=lo, hi=hi)

    @property
    def is_discrete(self) -> bool:
        return self.kind != CONTINUOUS

    @property
    def n_classes(self) -> int:
        """Number of values of a discrete domain (2 for binary)."""
        if self.kind == BINARY:
            return 2
        if self.kind == CATEGORICAL:
            return self.k
        raise GraphError("continuous domains have no finite support")

    def support(self) -> list[int]:
        return list(range(self.n_classes))

    @property
    def encoded_width(self) -> int:
        """Width of this domain once encoded as a network input."""
        return self.k if self.kind == CATEGORICAL else 1

    def contains(self, value) -> bool:
        try:
            v = float(value)
        except (TypeError, ValueError):
            return False
        if not math.isfinite(v):
            return False
        if self.kind == CONTINUOUS:
            return self.lo <= v <= self.hi
        return v == int(v) and 0 <= int(v) < self.n_classes

    def to_dict(self) -> dict:
        if self.kind == CATEGORICAL:
            return {"kind": CATEGORICAL, "k": self.k}
        if self.kind == CONTINUOUS:
            return {"kind": CONTINUOUS, "lo": self.lo, "hi": self.hi}
        return {"kind": BINARY}

    @classmethod
    def from_dict(cls, d: Mapping) -> ValueDomain:
        kind = d.get("kind")
        if kind == CATEGORICAL:
            return cls.categorical(d.get("k"))
        if kind == CONTINUOUS:
            return cls.continuous(d.get("lo"), d.get("hi"))
        return cls(kind)


@dataclass(frozen=True)
class NodeSpec:
    name: str
    family: str
    domain: ValueDomain
    parents: tuple[str, ...] = ()
    hidden_layers: tuple[int, ...] = DEFAULT_HIDDEN_LAYERS

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "hidden_layers", tuple(int(w) for w in self.hidden_layers))
        if not isinstance(self.name, str) or not self.name:
            raise GraphError(f"node name must be a non-empty string, got {self.name!r}")
        if any(w < 1 for w in self.hidden_layers):
            raise GraphError(f"{self.name}: hidden layer widths must be positive")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "family": self.family,
            "domain": self.domain.to_dict(),
            "parents": list(self.parents),
            "hidden_layers": list(self.hidden_layers),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> NodeSpec:
        try:
            return cls(
                name=d["name"],
                family=d["family"],
                domain=ValueDomain.from_dict(d["domain"]),
                parents=tuple(d.get("parents", ())),
                hidden_layers=tuple(d.get("hidden_layers", DEFAULT_HIDDEN_LAYERS)),
            )
        except KeyError as exc:
            raise GraphError(f"node declaration is missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class GraphSpec:
    nodes: tuple[NodeSpec, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "_index", {n.name: i for i, n in enumerate(self.nodes)})

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __contains__(self, name):
        return name in self._index

    def __getitem__(self, name: str) -> NodeSpec:
        return self.nodes[self.index(name)]

    @property
    def names(self) -> list[str]:
        return [n.name for n in self.nodes]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownNode(f"unknown node {name!r}") from None

    def children(self, name: str) -> list[str]:
        self.index(name)
        return [n.name for n in self.nodes if name in n.parents]

    def to_dict(self) -> dict:
        return {"nodes": [n.to_dict() for n in self.nodes]}

    @classmethod
    def from_dict(cls, d: Mapping) -> GraphSpec:
        if not isinstance(d, Mapping) or "nodes" not in d:
            raise GraphError('graph declaration must be an object with a "nodes" list')
        return cls(tuple(NodeSpec.from_dict(n) for n in d["nodes"]))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def load_graph(path) -> GraphSpec:
    """Read and validate a graph declaration from a JSON file."""
    with open(path) as f:
        return validate_graph(GraphSpec.from_dict(json.load(f)))


def save_graph(spec: GraphSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(spec.to_dict(), f, indent=2)
        f.write("\n")


def validate_graph(spec: GraphSpec) -> GraphSpec:
    """Check every structural invariant and return a topologically sorted copy.

    Nodes without an ordering constraint keep their declaration order, so
    validating an already valid graph returns an identical graph.
    """
    names = [n.name for n in spec.nodes]
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateName(f"duplicate node name {name!r}")
        seen.add(name)

    for node in spec.nodes:
        expected = FAMILY_FOR_KIND[node.domain.kind]
        if node.family != expected:
            raise FamilyDomainMismatch(
                f"{node.name}: family {node.family!r} does not fit a "
                f"{node.domain.kind} domain (expected {expected!r})"
            )
        if len(set(node.parents)) != len(node.parents):
            raise GraphError(f"{node.name}: repeated parent")
        if node.name in node.parents:
            raise CyclicGraph(f"{node.name} is its own parent")
        for p in node.parents:
            if p not in seen:
                raise UnknownParent(f"{node.name}: unknown parent {p!r}")

    # Kahn's algorithm; the heap keyed on declaration index keeps the sort stable
    position = {name: i for i, name in enumerate(names)}
    pending = {n.name: len(n.parents) for n in spec.nodes}
    children = {name: [] for name in names}
    for node in spec.nodes:
        for p in node.parents:
            children[p].append(node.name)
    ready = [position[name] for name, k in pending.items() if k == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for child in children[names[i]]:
            pending[child] -= 1
            if pending[child] == 0:
                heapq.heappush(ready, position[child])
    if len(order) != len(names):
        stuck = sorted((n for n, k in pending.items() if k > 0), key=position.get)
        raise CyclicGraph(f"directed cycle among {stuck}")
    return GraphSpec(tuple(spec.nodes[i] for i in order))


def descendants(spec: GraphSpec, roots: Iterable[str]) -> frozenset[str]:
    """Nodes reachable from any of ``roots`` through at least one edge.

    Roots are excluded unless one is reachable from another root.
    """
    roots = list(roots)
    for r in roots:
        spec.index(r)
    children = {n.name: [] for n in spec.nodes}
    for node in spec.nodes:
        for p in node.parents:
            children[p].append(node.name)
    found = set()
    stack = [c for r in roots for c in children[r]]
    while stack:
        name = stack.pop()
        if name not in found:
            found.add(name)
            stack.extend(children[name])
    return frozenset(found)


class Violation(NamedTuple):
    node: str
    reason: str  # OutOfDomain | MissingNode | ExtraNode

    def __str__(self):
        return f"{self.reason}: {self.node}"


def check_vector(spec: GraphSpec, x: Mapping) -> Violation | None:
    """Return the first problem with a single factor vector, or None if it is valid."""
    for node in spec.nodes:
        if node.name not in x:
            return Violation(node.name, "MissingNode")
        if not node.domain.contains(x[node.name]):
            return Violation(node.name, "OutOfDomain")
    for name in x:
        if name not in spec:
            return Violation(name, "ExtraNode")
    return None
