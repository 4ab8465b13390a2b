"""Distribution families used by graph nodes.

Every function here is vectorised: parameters and values may be scalars or
arrays with a shared leading batch shape. Categorical probability vectors
carry the class axis last.

Sampling is split in two steps. :func:`draw_noise` produces
parameter-free noise (standard Gumbel for the discrete families, a uniform
for the truncated normal) and :func:`sample_reparam` maps that noise to a
value deterministically, so the same noise always gives the same value for
the same parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import OutOfSupport, QuantileOutOfRange, ShapeMismatch
from .graph import BERNOULLI, CATEGORICAL_FAMILY, TRUNCATED_NORMAL, ValueDomain

SIGMA_FLOOR = 1e-3
PROB_FLOOR = 1e-6

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Bernoulli:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if not np.all((p > 0) & (p < 1)):
            raise ValueError("Bernoulli p must lie strictly inside (0, 1)")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class Categorical:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim == 0 or p.shape[-1] < 2:
            raise ValueError("Categorical p needs a class axis of length >= 2")
        if not np.all(p > 0) or not np.allclose(p.sum(axis=-1), 1.0, rtol=0, atol=1e-9):
            raise ValueError("Categorical p must be positive and sum to 1")
        object.__setattr__(self, "p", p)

    @property
    def k(self) -> int:
        return self.p.shape[-1]


@dataclass(frozen=True)
class TruncatedNormal:
    mu: np.ndarray
    sigma: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if not np.all(sigma >= SIGMA_FLOOR):
            raise ValueError(f"TruncatedNormal sigma must be >= {SIGMA_FLOOR}")
        if not np.all(np.isfinite(mu)):
            raise ValueError("TruncatedNormal mu must be finite")
        if not float(self.lo) < float(self.hi):
            raise ValueError("TruncatedNormal needs lo < hi")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @property
    def alpha(self):
        return (self.lo - self.mu) / self.sigma

    @property
    def beta(self):
        return (self.hi - self.mu) / self.sigma


DistParams = Bernoulli | Categorical | TruncatedNormal


# -- standard normal ---------------------------------------------------------

def normal_pdf(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z * z - _LOG_SQRT_2PI)


def normal_cdf(z):
    """Standard normal CDF."""
    return special.ndtr(z)


def normal_quantile(q):
    """Inverse of :func:`normal_cdf`; ``q`` must lie strictly inside (0, 1)."""
    q = np.asarray(q, dtype=float)
    if not np.all((q > 0) & (q < 1)):
        raise QuantileOutOfRange("normal_quantile needs 0 < q < 1")
    out = special.ndtri(q)
    return out if out.ndim else float(out)


def _log_mass(a, b):
    """log(Phi(b) - Phi(a)) for a < b, accurate in both tails."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    # reflect so the interval is never entirely in the upper tail
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    log_hi = special.log_ndtr(hi)
    log_lo = special.log_ndtr(lo)
    return log_hi + np.log1p(-np.exp(log_lo - log_hi))


def _mass(a, b):
    return np.exp(_log_mass(a, b))


# -- log densities -----------------------------------------------------------

def log_prob(params: DistParams, value):
    """Log PMF (discrete families) or log PDF (truncated normal) of ``value``."""
    value = np.asarray(value)
    if isinstance(params, Bernoulli):
        if not np.all((value == 0) | (value == 1)):
            raise OutOfSupport("Bernoulli values must be 0 or 1")
        return np.where(value == 1, np.log(params.p), np.log1p(-params.p))
    if isinstance(params, Categorical):
        idx = _class_index(value, params.k)
        idx, p = _align_classes(idx, params.p)
        return np.log(np.take_along_axis(p, idx[..., None], axis=-1)[..., 0])
    if isinstance(params, TruncatedNormal):
        value = value.astype(float)
        if not np.all((value >= params.lo) & (value <= params.hi)):
            raise OutOfSupport(f"value outside [{params.lo}, {params.hi}]")
        z = (value - params.mu) / params.sigma
        return (
            -0.5 * z * z
            - _LOG_SQRT_2PI
            - np.log(params.sigma)
            - _log_mass(params.alpha, params.beta)
        )
    raise TypeError(f"unsupported parameters {type(params).__name__}")


def grad_log_prob(params: DistParams, value) -> dict:
    """Gradient of :func:`log_prob` with respect to each distribution parameter.

    Returns ``{"p": ...}`` for the discrete families (for Categorical the
    last axis holds the partial derivative for every class probability,
    treated as free coordinates) and ``{"mu": ..., "sigma": ...}`` for the
    truncated normal, whose bounds are fixed.
    """
    value = np.asarray(value)
    if isinstance(params, Bernoulli):
        if not np.all((value == 0) | (value == 1)):
            raise OutOfSupport("Bernoulli values must be 0 or 1")
        p = params.p
        return {"p": np.where(value == 1, 1.0 / p, -1.0 / (1.0 - p))}
    if isinstance(params, Categorical):
        idx = _class_index(value, params.k)
        idx, p = _align_classes(idx, params.p)
        onehot = np.arange(params.k) == idx[..., None]
        return {"p": np.where(onehot, 1.0 / p, 0.0)}
    if isinstance(params, TruncatedNormal):
        value = value.astype(float)
        if not np.all((value >= params.lo) & (value <= params.hi)):
            raise OutOfSupport(f"value outside [{params.lo}, {params.hi}]")
        sigma = params.sigma
        a, b = params.alpha, params.beta
        z = (value - params.mu) / sigma
        # phi(bound) / mass in log space; the mass underflows far in a tail
        log_mass = _log_mass(a, b)
        ra = np.exp(-0.5 * a * a - _LOG_SQRT_2PI - log_mass)
        rb = np.exp(-0.5 * b * b - _LOG_SQRT_2PI - log_mass)
        d_mu = z / sigma + (rb - ra) / sigma
        d_sigma = (z * z - 1.0) / sigma + (b * rb - a * ra) / sigma
        return {"mu": d_mu, "sigma": d_sigma}
    raise TypeError(f"unsupported parameters {type(params).__name__}")


def _class_index(value, k):
    if not np.all((value == np.round(value)) & (value >= 0) & (value < k)):
        raise OutOfSupport(f"categorical values must be integers in 0..{k - 1}")
    return value.astype(np.int64)


def _align_classes(idx, p):
    shape = np.broadcast_shapes(idx.shape, p.shape[:-1])
    return np.broadcast_to(idx, shape), np.broadcast_to(p, shape + p.shape[-1:])


# -- sampling ----------------------------------------------------------------

def _open_uniform(rng: np.random.Generator, size):
    u = rng.random(size)
    # rng.random is [0, 1); 0 has probability 2**-53 but would break the transforms
    return np.where(u == 0.0, np.finfo(float).tiny, u)


def draw_noise(family: str, domain: ValueDomain, rng: np.random.Generator, size=None):
    """Parameter-free noise for one node.

    Discrete families get standard Gumbel draws ``-log(-log(u))`` with a
    trailing class axis (2 for Bernoulli, K for Categorical); the truncated
    normal gets a single uniform in the open interval (0, 1).
    """
    shape = () if size is None else tuple(np.atleast_1d(size))
    if family == BERNOULLI:
        return -np.log(-np.log(_open_uniform(rng, shape + (2,))))
    if family == CATEGORICAL_FAMILY:
        return -np.log(-np.log(_open_uniform(rng, shape + (domain.k,))))
    if family == TRUNCATED_NORMAL:
        u = _open_uniform(rng, shape)
        return u if shape else float(u)
    raise ValueError(f"unknown family {family!r}")


def sample_reparam(params: DistParams, noise):
    """Deterministic map from noise to a value of the distribution."""
    noise = np.asarray(noise, dtype=float)
    if isinstance(params, Bernoulli):
        if noise.shape[-1:] != (2,):
            raise ShapeMismatch("Bernoulli noise needs a trailing axis of length 2")
        p = params.p[..., None]
        logits = np.concatenate(
            [np.broadcast_to(np.log1p(-p), noise.shape[:-1] + (1,)),
             np.broadcast_to(np.log(p), noise.shape[:-1] + (1,))],
            axis=-1,
        )
        return _as_index(np.argmax(logits + noise, axis=-1))
    if isinstance(params, Categorical):
        if noise.shape[-1:] != (params.k,):
            raise ShapeMismatch(f"Categorical noise needs a trailing axis of length {params.k}")
        return _as_index(np.argmax(np.log(params.p) + noise, axis=-1))
    if isinstance(params, TruncatedNormal):
        out = params.mu + params.sigma * _truncated_standard_quantile(
            params.alpha, params.beta, noise
        )
        out = np.clip(out, params.lo, params.hi)
        return out if out.ndim else float(out)
    raise TypeError(f"unsupported parameters {type(params).__name__}")


def _as_index(a):
    a = np.asarray(a, dtype=np.int64)
    return a if a.ndim else int(a)


def _truncated_standard_quantile(a, b, u):
    """Quantile ``u`` of a standard normal restricted to [a, b]."""
    a, b, u = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float), u)
    flip = a > 0
    # work in whichever tail keeps Phi away from 1, where it loses precision
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    q_lo = special.ndtr(lo)
    mass = _mass(lo, hi)
    q = np.where(flip, q_lo + (1.0 - u) * mass, q_lo + u * mass)
    q = np.clip(q, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    z = special.ndtri(q)
    return np.where(flip, -z, z)


def truncated_normal_cdf(params: TruncatedNormal, x):
    """CDF of the truncated normal; 0 below ``lo`` and 1 above ``hi``."""
    x = np.clip(np.asarray(x, dtype=float), params.lo, params.hi)
    z = (x - params.mu) / params.sigma
    a = params.alpha
    # at z == a the mass is 0 and its log -inf; those entries are overwritten below
    with np.errstate(divide="ignore"):
        out = np.exp(_log_mass(a, np.maximum(z, a)) - _log_mass(a, params.beta))
    out = np.where(z <= a, 0.0, np.minimum(out, 1.0))
    return out if out.ndim else float(out)


def grad_sample_reparam(params: TruncatedNormal, noise) -> dict:
    """Derivative of the truncated-normal sample w.r.t. ``mu`` and ``sigma`` at fixed noise.

    Obtained by implicit differentiation of ``F(x; mu, sigma) = u``. Only the
    continuous family is differentiable; discrete samples are argmax outputs.
    """
    if not isinstance(params, TruncatedNormal):
        raise TypeError("sample gradients exist only for TruncatedNormal")
    u = np.asarray(noise, dtype=float)
    x = sample_reparam(params, u)
    z = (x - params.mu) / params.sigma
    a, b = params.alpha, params.beta
    pz, pa, pb = normal_pdf(z), normal_pdf(a), normal_pdf(b)
    d_mu = (pz - pa + u * (pa - pb)) / pz
    d_sigma = (z * pz - a * pa + u * (a * pa - b * pb)) / pz
    return {"mu": d_mu, "sigma": d_sigma}


def categorical_threshold_sample(p, u):
    """Inverse-CDF categorical sampler: the class whose cumulative interval holds ``u``.

    Kept only to exhibit the ordering bias of reusing one uniform across
    different parameter vectors; the rest of the package samples with
    :func:`sample_reparam`.
    """
    p = np.asarray(p, dtype=float)
    cum = np.cumsum(p, axis=-1)
    u = np.asarray(u, dtype=float)
    idx = (np.asarray(u)[..., None] >= cum).sum(axis=-1)
    return _as_index(np.minimum(idx, p.shape[-1] - 1))
