"""Ground-truth generators: the shapes factor SCM and the wet-floor model.

The shapes SCM describes 3D-Shapes style scene factors: a hidden binary
Type drives most factors, Brightness is the mean of the floor and wall
hues plus noise, and rows are kept only when Brightness falls inside a
narrow window. That rejection step conditions on
a collider and couples FloorHue with WallHue in the data even though
neither causes the other.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from .classifier import FactorClassifier
from .exceptions import EmptyDataset, RejectionStall
from .graph import (
    BERNOULLI,
    CATEGORICAL_FAMILY,
    DEFAULT_HIDDEN_LAYERS,
    TRUNCATED_NORMAL,
    GraphSpec,
    NodeSpec,
    ValueDomain,
    validate_graph,
)
from .distributions import PROB_FLOOR
from .model import DistributionalCausalGraph
from .nets import ParamNet
from .validation import check_factors, check_generator

# Ground-truth conditional laws. TruncNormal entries are (mean for Type=0,
# mean shift for Type=1, sd); every hue lives on [0, 1]. The hue spreads keep
# the rejected mass small: a DCG has no FloorHue-WallHue path, so every
# rejected configuration is Brightness mass it will generate anyway.
SHAPES3D_CONSTANTS = {
    "type_p1": 0.4,
    "floor_hue": (0.4, 0.15, 0.04),
    "wall_hue": (0.55, 0.0, 0.09),
    "object_hue": (0.35, 0.3, 0.15),
    "scale": (0.95, 0.1, 0.08),
    "scale_range": (0.75, 1.25),
    "shape_p": {0: (0.4, 0.3, 0.2, 0.1), 1: (0.1, 0.2, 0.3, 0.4)},
    "brightness_window": (0.4, 0.6),
    "brightness_noise_sigma": 0.02,
}


def shapes3d_spec(hidden_layers=DEFAULT_HIDDEN_LAYERS) -> GraphSpec:
    unit = ValueDomain.continuous(0.0, 1.0)
    lo, hi = SHAPES3D_CONSTANTS["scale_range"]
    h = tuple(hidden_layers)
    return validate_graph(GraphSpec((
        NodeSpec("Type", BERNOULLI, ValueDomain.binary(), (), h),
        NodeSpec("FloorHue", TRUNCATED_NORMAL, unit, ("Type",), h),
        NodeSpec("WallHue", TRUNCATED_NORMAL, unit, (), h),
        NodeSpec("ObjectHue", TRUNCATED_NORMAL, unit, ("Type",), h),
        NodeSpec("Brightness", TRUNCATED_NORMAL, unit, ("FloorHue", "WallHue"), h),
        NodeSpec("Scale", TRUNCATED_NORMAL, ValueDomain.continuous(lo, hi), ("Type",), h),
        NodeSpec("Shape", CATEGORICAL_FAMILY, ValueDomain.categorical(4), ("Type",), h),
    )))


@dataclass(frozen=True)
class Shapes3dConfig:
    n_rows: int = 50_000
    seed: int = 0
    brightness_window: tuple = SHAPES3D_CONSTANTS["brightness_window"]
    brightness_noise_sigma: float = SHAPES3D_CONSTANTS["brightness_noise_sigma"]
    type_p1: float = SHAPES3D_CONSTANTS["type_p1"]

    def __post_init__(self):
        lo, hi = self.brightness_window
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(f"brightness window {self.brightness_window} must lie inside [0, 1]")
        if self.brightness_noise_sigma <= 0:
            raise ValueError("brightness noise sigma must be positive")
        if not 0.0 < self.type_p1 < 1.0:
            raise ValueError("type_p1 must lie strictly inside (0, 1)")
        if int(self.n_rows) < 1:
            raise ValueError("n_rows must be positive")

    def constants(self) -> dict:
        out = dict(SHAPES3D_CONSTANTS)
        out.update(asdict(self))
        out["shape_p"] = {str(k): list(v) for k, v in out["shape_p"].items()}
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


def _truncnorm(mean, sd, lo, hi, rng):
    a, b = (lo - mean) / sd, (hi - mean) / sd
    return stats.truncnorm.rvs(a, b, loc=mean, scale=sd, random_state=rng)


def sample_shapes3d_raw(n, rng, cfg: Shapes3dConfig | None = None) -> np.ndarray:
    """Draw ``n`` rows from the ground-truth SCM before any rejection."""
    cfg = cfg or Shapes3dConfig()
    c = SHAPES3D_CONSTANTS
    t = (rng.random(n) < cfg.type_p1).astype(float)

    def hue(key):
        base, shift, sd = c[key]
        return _truncnorm(base + shift * t, sd, 0.0, 1.0, rng)

    floor = hue("floor_hue")
    wall = hue("wall_hue")
    obj = hue("object_hue")
    brightness = np.clip(
        (floor + wall) / 2 + rng.normal(0.0, cfg.brightness_noise_sigma, n), 0.0, 1.0
    )
    base, shift, sd = c["scale"]
    lo, hi = c["scale_range"]
    scale = _truncnorm(base + shift * t, sd, lo, hi, rng)
    cum = np.cumsum(np.array([c["shape_p"][0], c["shape_p"][1]]), axis=1)[t.astype(int)]
    shape = np.minimum((rng.random(n)[:, None] >= cum).sum(axis=1), 3).astype(float)
    return np.column_stack([t, floor, wall, obj, brightness, scale, shape])


PROBE_ROWS = 10_000
MIN_ACCEPTANCE = 1e-3


def generate_shapes3d(cfg: Shapes3dConfig = Shapes3dConfig()):
    """Rejection-sample exactly ``cfg.n_rows`` rows with Brightness inside the window.

    Returns ``(X, diagnostics)``; ``X`` follows :func:`shapes3d_spec` column
    order and ``diagnostics`` reports how many raw rows were drawn.
    """
    rng = check_generator(cfg.seed)
    lo, hi = cfg.brightness_window
    b_col = shapes3d_spec().index("Brightness")
    kept, n_kept, n_drawn = [], 0, 0
    chunk = PROBE_ROWS
    while n_kept < cfg.n_rows:
        raw = sample_shapes3d_raw(chunk, rng, cfg)
        n_drawn += chunk
        ok = (raw[:, b_col] >= lo) & (raw[:, b_col] <= hi)
        if n_drawn == PROBE_ROWS and ok.mean() < MIN_ACCEPTANCE:
            raise RejectionStall(
                f"only {ok.sum()} of {PROBE_ROWS} probe rows fall in brightness window {cfg.brightness_window}"
            )
        kept.append(raw[ok])
        n_kept += int(ok.sum())
        rate = n_kept / n_drawn
        chunk = max(PROBE_ROWS, int(1.2 * (cfg.n_rows - n_kept) / rate))
    X = np.concatenate(kept)[: cfg.n_rows]
    return X, {"n_rows": int(cfg.n_rows), "n_drawn": n_drawn, "acceptance_rate": n_kept / n_drawn}


# -- wet floor ---------------------------------------------------------------

SEASONS = ("winter", "spring", "summer", "autumn")
WET_FLOOR_CPTS = {
    "rain": (0.7, 0.4, 0.1, 0.5),
    "sprinkler": (0.01, 0.2, 0.8, 0.2),
}
# logit magnitude used for the deterministic OR / copy mechanisms
_GATE = 40.0


def wetfloor_spec(hidden_layers=()) -> GraphSpec:
    h = tuple(hidden_layers)
    b = ValueDomain.binary()
    return validate_graph(GraphSpec((
        NodeSpec("Season", CATEGORICAL_FAMILY, ValueDomain.categorical(4), (), h),
        NodeSpec("Rain", BERNOULLI, b, ("Season",), h),
        NodeSpec("Sprinkler", BERNOULLI, b, ("Season",), h),
        NodeSpec("Wet", BERNOULLI, b, ("Rain", "Sprinkler"), h),
        NodeSpec("Slippery", BERNOULLI, b, ("Wet",), h),
    )))


def _raw_for_probability(p):
    # invert the Bernoulli link p = eps + (1 - 2 eps) * sigmoid(raw)
    p = np.asarray(p, dtype=float)
    return special.logit((p - PROB_FLOOR) / (1 - 2 * PROB_FLOOR))


def wet_floor_model() -> DistributionalCausalGraph:
    """Hand-set wet-floor model: uniform seasons, seasonal rain and sprinkler, deterministic gates."""
    graph = wetfloor_spec()
    nets = {
        "Season": ParamNet([(np.zeros((0, 4)), np.zeros(4))]),
        "Rain": ParamNet([(_raw_for_probability(WET_FLOOR_CPTS["rain"])[:, None], np.zeros(1))]),
        "Sprinkler": ParamNet([(_raw_for_probability(WET_FLOOR_CPTS["sprinkler"])[:, None], np.zeros(1))]),
        "Wet": ParamNet([(np.full((2, 1), 2 * _GATE), np.array([-_GATE]))]),
        "Slippery": ParamNet([(np.full((1, 1), 2 * _GATE), np.array([-_GATE]))]),
    }
    return DistributionalCausalGraph.from_nets(graph, nets)


# -- classifier --------------------------------------------------------------

def train_target_classifier(X, graph: GraphSpec | None = None, seed=0, target="Type",
                            holdout=0.2, **params) -> FactorClassifier:
    """Fit a :class:`FactorClassifier` for ``target`` on a random train split.

    The held-out accuracy is stored on the returned classifier as
    ``holdout_accuracy_`` and the held-out row indices as ``holdout_index_``.
    """
    graph = shapes3d_spec() if graph is None else validate_graph(graph)
    X = check_factors(graph, X)
    if len(X) == 0:
        raise EmptyDataset("cannot train a classifier on an empty dataset")
    rng = check_generator(seed)
    order = rng.permutation(len(X))
    n_test = int(round(holdout * len(X)))
    test, train = np.sort(order[:n_test]), np.sort(order[n_test:])
    clf = FactorClassifier(graph, target=target, random_state=seed, **params).fit(X[train])
    if n_test:
        clf.holdout_accuracy_ = float(clf.score(X[test], X[test, graph.index(target)]))
    else:
        clf.holdout_accuracy_ = float("nan")
    clf.holdout_index_ = test
    return clf
