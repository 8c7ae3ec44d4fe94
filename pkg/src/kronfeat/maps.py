"""Feature-map estimators whose inner products approximate the RBF kernel.

Five randomized transformers share one sklearn-style contract
(``fit(X)`` samples the map for the input dimension, ``transform(X)``
produces (n_samples, nu) features):

* :class:`KronPiMap`   -- sampled-degree product of traces, one random
  d x d weight matrix per factor,
* :class:`KronEMap`    -- same evaluation with the weight tensor constrained
  to a Kronecker product of per-factor draws (coincides with KronPiMap
  under the Gaussian default; kept as a distinct kind),
* :class:`FourierMap`  -- random cosine features on the vectorized input,
* :class:`TaylorMap`   -- sampled-degree products of Rademacher projections
  (dot-product kernel expansion),
* :class:`FastfoodMap` -- structured Hadamard cosine features.

The learned sixth kind lives in :mod:`kronfeat.mlp`.  ``rbf_kernel`` is the
exact similarity all of them target; ``exact_taylor_features`` is the
explicit multinomial expansion, usable only at tiny sizes and kept as a
test oracle.  All sampling is driven by per-component seed streams, so a
(kind, nu, input_dim, hyperparameters, seed) tuple pins the model bit for
bit; serialized documents therefore store only that tuple.
"""

import json
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ContractError
from .validation import (
    as_descriptor_batch,
    check_seed,
    check_unit_norm,
    spawn_rngs,
)

MODEL_FORMAT_VERSION = 1

#: Sampled degrees above this are rejected and redrawn.
DEGREE_CAP = 20


def rbf_kernel(x, y, sigma):
    """Exact RBF similarity exp(-||x - y||_F^2 / (2 sigma^2))."""
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ContractError(f"shape mismatch: {x.shape} vs {y.shape}")
    d2 = float(np.sum((x - y) ** 2))
    return math.exp(-d2 / (2.0 * sigma * sigma))


@dataclass(frozen=True)
class Geometric:
    """Degree law rho(n) = (1 - theta)^n * theta over n = 0, 1, 2, ..."""

    theta: float

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ContractError(f"theta must be in (0, 1], got {self.theta}")

    def pmf(self, n):
        n = np.asarray(n)
        return np.where(n >= 0, (1.0 - self.theta) ** n * self.theta, 0.0)

    def log_pmf(self, n):
        if n < 0:
            return -math.inf
        if self.theta == 1.0:
            return 0.0 if n == 0 else -math.inf
        return n * math.log1p(-self.theta) + math.log(self.theta)

    def sample(self, rng, size=None, cap=DEGREE_CAP):
        """Draw degrees, rejecting-and-resampling values above ``cap``."""
        n = rng.geometric(self.theta, size=size) - 1
        if size is None:
            while n > cap:
                n = rng.geometric(self.theta) - 1
            return int(n)
        high = n > cap
        while np.any(high):
            n[high] = rng.geometric(self.theta, size=int(high.sum())) - 1
            high = n > cap
        return n


def _log_weight_coeff(n, sigma, log_rho_n, nu):
    # log of sigma^(-2n) * sqrt(exp(-sigma^-2) / (nu * rho(n) * n!))
    return -2.0 * n * math.log(sigma) + 0.5 * (
        -1.0 / sigma**2 - math.log(nu) - log_rho_n - math.lgamma(n + 1)
    )


def _log_sign_coeff(n, sigma, log_rho_n, nu):
    # log of sqrt(exp(-sigma^-2) / (sigma^(2n) * n! * nu * rho(n)))
    return 0.5 * (
        -1.0 / sigma**2
        - 2.0 * n * math.log(sigma)
        - math.lgamma(n + 1)
        - math.log(nu)
        - log_rho_n
    )


class _MapBase(BaseEstimator, TransformerMixin):
    kind = None

    def _require_fitted(self):
        if getattr(self, "input_dim_", None) is None:
            raise ContractError(f"{type(self).__name__} is not fitted")

    def fit(self, X, y=None):
        x = as_descriptor_batch(X)
        self._sample(x.shape[1])
        return self

    # -- serialization ----------------------------------------------------

    def _hyperparams(self):
        return dict(self.get_params())

    def to_dict(self):
        self._require_fitted()
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "input_dim": int(self.input_dim_),
        }
        doc.update(self._hyperparams())
        return doc

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        version = doc.pop("format_version", None)
        if version != MODEL_FORMAT_VERSION:
            raise ContractError(f"unsupported model format version {version!r}")
        kind = doc.pop("kind", None)
        if kind != cls.kind:
            raise ContractError(f"document kind {kind!r} does not match {cls.kind!r}")
        if "input_dim" not in doc:
            raise ContractError("model document is missing 'input_dim'")
        input_dim = doc.pop("input_dim")
        try:
            model = cls(**doc)
        except TypeError as exc:
            raise ContractError(f"bad model document for kind {kind!r}: {exc}") from exc
        model._sample(int(input_dim))
        return model


class _ProductMapBase(_MapBase):
    """Shared machinery: degree-grouped products of linear projections.

    Component j has a sampled degree n_j, n_j direction vectors of length
    d*d, and a per-degree coefficient; its feature value is
    coeff(n_j) * prod_i (w_ji . vec(X)).
    """

    _log_coeff = None  # staticmethod set by subclasses

    def __init__(self, nu=1000, sigma=1.0, theta=0.9, degree_cap=DEGREE_CAP,
                 fixed_degree=None, seed=0):
        self.nu = nu
        self.sigma = sigma
        self.theta = theta
        self.degree_cap = degree_cap
        self.fixed_degree = fixed_degree
        self.seed = seed

    def _validate_params(self):
        if not isinstance(self.nu, (int, np.integer)) or self.nu < 1:
            raise ContractError(f"nu must be a positive integer, got {self.nu}")
        if self.sigma <= 0:
            raise ContractError(f"sigma must be positive, got {self.sigma}")
        if self.fixed_degree is not None and self.fixed_degree < 0:
            raise ContractError(f"fixed_degree must be >= 0, got {self.fixed_degree}")
        check_seed(self.seed)

    def _draw_directions(self, rng, n, dim):
        raise NotImplementedError

    def _sample(self, input_dim):
        self._validate_params()
        rho = Geometric(self.theta)
        dim = input_dim * input_dim
        degrees = np.empty(self.nu, dtype=np.int64)
        directions = []
        for j, rng in enumerate(spawn_rngs(self.seed, self.nu)):
            if self.fixed_degree is not None:
                n = int(self.fixed_degree)
            else:
                n = rho.sample(rng, cap=self.degree_cap)
            degrees[j] = n
            directions.append(self._draw_directions(rng, n, dim))

        log_rho = {n: (0.0 if self.fixed_degree is not None else rho.log_pmf(n))
                   for n in np.unique(degrees)}
        coeffs = np.array(
            [
                math.exp(self._log_coeff(int(n), self.sigma, log_rho[int(n)], self.nu))
                for n in degrees
            ]
        )

        groups = {}
        for n in np.unique(degrees):
            idx = np.flatnonzero(degrees == n)
            stack = (
                np.stack([directions[j] for j in idx]) if n > 0 else None
            )
            groups[int(n)] = (idx, stack)

        self.input_dim_ = int(input_dim)
        self.degrees_ = degrees
        self.coeffs_ = coeffs
        self.groups_ = groups
        return self

    def transform(self, X):
        self._require_fitted()
        x = as_descriptor_batch(X, self.input_dim_)
        check_unit_norm(x)
        return self._project(x)

    def _project(self, x):
        v = x.reshape(x.shape[0], -1)
        out = np.empty((v.shape[0], self.nu))
        for n, (idx, stack) in self.groups_.items():
            if n == 0:
                out[:, idx] = self.coeffs_[idx]
                continue
            # stack: (k, n, dim); v: (m, dim) -> per-factor projections (k, m, n)
            proj = np.einsum("knd,md->kmn", stack, v)
            out[:, idx] = (self.coeffs_[idx][:, None] * proj.prod(axis=2)).T
        return out


class KronPiMap(_ProductMapBase):
    """Random product-of-traces features with sampled degree.

    Component j draws a degree n from a geometric law and n independent
    d x d weight matrices with Normal(0, sigma^2) entries; its value on X is
    the scaled product of the traces tr(W_k^T X).  Averaged over the
    randomness, inner products of these features reproduce
    :func:`rbf_kernel` on unit-norm inputs.

    Parameters
    ----------
    nu : int
        Feature dimensionality.
    sigma : float
        Kernel bandwidth; also the weight standard deviation.
    theta : float
        Geometric-law parameter for the degree.
    degree_cap : int
        Degrees above the cap are redrawn.
    fixed_degree : int or None
        Replaces the sampled degree by a constant (point-mass law).
    seed : int
        Root seed for the per-component streams.
    """

    kind = "kron_pi"
    _log_coeff = staticmethod(_log_weight_coeff)

    def _draw_directions(self, rng, n, dim):
        return rng.normal(0.0, self.sigma, size=(n, dim))


class KronEMap(KronPiMap):
    """Kronecker-exponentiation variant of :class:`KronPiMap`.

    The weight tensor is the Kronecker product of the per-factor draws, so
    the trace factorizes into exactly the same product of traces; with the
    shared Gaussian sampling the two kinds produce identical features for
    identical seeds and are serialized under distinct kinds only.
    """

    kind = "kron_e"


class TaylorMap(_ProductMapBase):
    """Sampled-degree products of Rademacher projections of vec(X).

    The dot-product expansion of the RBF kernel on unit-norm inputs:
    component j draws degree n and n sign vectors s_i in {-1, +1}^(d*d),
    returning coeff(n) * prod_i (s_i . vec(X)).
    """

    kind = "taylor"
    _log_coeff = staticmethod(_log_sign_coeff)

    def _draw_directions(self, rng, n, dim):
        return rng.integers(0, 2, size=(n, dim)).astype(np.float64) * 2.0 - 1.0


class FourierMap(_MapBase):
    """Random cosine features sqrt(2/nu) * cos(w . vec(X) + b).

    Frequencies are Normal(0, sigma^-2 I) rows, phases uniform on [0, 2pi).
    Unlike the product maps this needs no unit-norm assumption.
    """

    kind = "fourier"

    def __init__(self, nu=1000, sigma=1.0, seed=0):
        self.nu = nu
        self.sigma = sigma
        self.seed = seed

    def _sample(self, input_dim):
        if not isinstance(self.nu, (int, np.integer)) or self.nu < 1:
            raise ContractError(f"nu must be a positive integer, got {self.nu}")
        if self.sigma <= 0:
            raise ContractError(f"sigma must be positive, got {self.sigma}")
        check_seed(self.seed)
        dim = input_dim * input_dim
        w = np.empty((self.nu, dim))
        b = np.empty(self.nu)
        for j, rng in enumerate(spawn_rngs(self.seed, self.nu)):
            w[j] = rng.normal(0.0, 1.0 / self.sigma, size=dim)
            b[j] = rng.uniform(0.0, 2.0 * math.pi)
        self.input_dim_ = int(input_dim)
        self.frequencies_ = w
        self.phases_ = b
        return self

    def transform(self, X):
        self._require_fitted()
        x = as_descriptor_batch(X, self.input_dim_)
        v = x.reshape(x.shape[0], -1)
        z = v @ self.frequencies_.T + self.phases_
        return math.sqrt(2.0 / self.nu) * np.cos(z)


def next_pow2(n):
    p = 1
    while p < n:
        p *= 2
    return p


def fwht(a):
    """Unnormalized fast Walsh-Hadamard transform along the last axis, in place.

    Applying it twice multiplies the input by the transform length.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    n = a.shape[-1]
    if n & (n - 1) or n == 0:
        raise ContractError(f"transform length must be a power of two, got {n}")
    h = 1
    while h < n:
        for i in range(0, n, 2 * h):
            left = a[..., i : i + h].copy()
            right = a[..., i + h : i + 2 * h]
            a[..., i : i + h] = left + right
            a[..., i + h : i + 2 * h] = left - right
        h *= 2
    return a


class FastfoodMap(_MapBase):
    """Structured cosine features via stacked S H G Pi H B blocks.

    Each block of size D' (the input dimension padded to a power of two)
    emulates a Gaussian frequency matrix: Rademacher diagonal B, Walsh-
    Hadamard transform H, random permutation Pi, Gaussian diagonal G, and a
    chi-distributed row rescaling S that restores the Gaussian row-norm law.
    ``nu`` must be a multiple of D'.
    """

    kind = "fastfood"

    def __init__(self, nu=1024, sigma=1.0, seed=0):
        self.nu = nu
        self.sigma = sigma
        self.seed = seed

    def _sample(self, input_dim):
        if self.sigma <= 0:
            raise ContractError(f"sigma must be positive, got {self.sigma}")
        check_seed(self.seed)
        dim = input_dim * input_dim
        padded = next_pow2(dim)
        if not isinstance(self.nu, (int, np.integer)) or self.nu < 1 or self.nu % padded:
            raise ContractError(
                f"nu must be a positive multiple of the padded input dimension "
                f"{padded} (minimum valid nu is {padded}), got {self.nu}"
            )
        blocks = self.nu // padded
        signs = np.empty((blocks, padded))
        perms = np.empty((blocks, padded), dtype=np.int64)
        gauss = np.empty((blocks, padded))
        scales = np.empty((blocks, padded))
        phases = np.empty((blocks, padded))
        for b, rng in enumerate(spawn_rngs(self.seed, blocks)):
            signs[b] = rng.integers(0, 2, size=padded) * 2.0 - 1.0
            perms[b] = rng.permutation(padded)
            gauss[b] = rng.normal(0.0, 1.0, size=padded)
            scales[b] = np.sqrt(rng.chisquare(padded, size=padded))
            phases[b] = rng.uniform(0.0, 2.0 * math.pi, size=padded)
        self.input_dim_ = int(input_dim)
        self.padded_dim_ = padded
        self.signs_ = signs
        self.perms_ = perms
        self.gauss_ = gauss
        self.scales_ = scales
        self.phases_ = phases
        return self

    def transform(self, X):
        self._require_fitted()
        x = as_descriptor_batch(X, self.input_dim_)
        v = x.reshape(x.shape[0], -1)
        padded = self.padded_dim_
        buf = np.zeros((v.shape[0], padded))
        buf[:, : v.shape[1]] = v
        out = np.empty((v.shape[0], self.nu))
        for b in range(self.signs_.shape[0]):
            t = fwht(buf * self.signs_[b])
            t = t[:, self.perms_[b]] * self.gauss_[b]
            t = fwht(t)
            norm_g = float(np.linalg.norm(self.gauss_[b]))
            t *= self.scales_[b] / (self.sigma * math.sqrt(padded) * norm_g)
            out[:, b * padded : (b + 1) * padded] = np.cos(t + self.phases_[b])
        return math.sqrt(2.0 / self.nu) * out


def exact_taylor_features(x, max_degree, sigma=1.0):
    """Explicit multinomial expansion of the RBF kernel's feature series.

    Only usable at tiny sizes (vectorized input length <= 6, degree <= 8);
    the inner product of two such vectors equals the degree-truncated series
    exp(-1/sigma^2) * sum_n <x, y>^n / (sigma^(2n) n!).
    """
    v = np.asarray(x, dtype=np.float64).ravel()
    if v.size > 6:
        raise ContractError(f"input length {v.size} exceeds the oracle guard (6)")
    if max_degree > 8 or max_degree < 0:
        raise ContractError(f"max_degree must be in [0, 8], got {max_degree}")
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    base = math.exp(-0.5 / sigma**2)
    feats = []
    for n in range(max_degree + 1):
        for combo in combinations_with_replacement(range(v.size), n):
            alpha = np.bincount(np.array(combo, dtype=np.int64), minlength=v.size)
            log_fact = sum(math.lgamma(a + 1) for a in alpha)
            coeff = base * math.exp(-0.5 * log_fact - n * math.log(sigma))
            feats.append(coeff * float(np.prod(v**alpha)))
    return np.array(feats)


# -- Monte-Carlo samplers ----------------------------------------------------
#
# A freshly sampled nu-component map's inner product on a fixed pair is the
# mean of nu i.i.d. single-component products, so resampling maps reduces to
# drawing those products in bulk.  These samplers feed the bias/variance
# harness in :mod:`kronfeat.stats`; unlike the estimators above they share one
# generator for the whole batch.


def _degree_coeff_table(kind, sigma, rho, cap):
    log_coeff = _log_weight_coeff if kind in ("kron_pi", "kron_e") else _log_sign_coeff
    # squared nu=1 coefficient: the per-draw scaling of the product estimate
    return np.array(
        [math.exp(2.0 * log_coeff(n, sigma, rho.log_pmf(n), 1)) for n in range(cap + 1)]
    )


def pair_product_samples(kind, x, y, count, rng, sigma=1.0, theta=0.9,
                         degree_cap=DEGREE_CAP):
    """I.i.d. single-component realizations of the approximated kernel value.

    Every draw resamples the component (degree and directions for the
    product kinds, frequency and phase for ``fourier``) and evaluates the
    induced nu=1 inner product on the pair (x, y).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ContractError(f"shape mismatch: {x.shape} vs {y.shape}")
    if kind == "fourier":
        w = rng.normal(0.0, 1.0 / sigma, size=(count, x.size))
        b = rng.uniform(0.0, 2.0 * math.pi, size=count)
        return 2.0 * np.cos(w @ x + b) * np.cos(w @ y + b)
    if kind not in ("kron_pi", "kron_e", "taylor"):
        raise ContractError(f"no single-component sampler for kind {kind!r}")

    rho = Geometric(theta)
    degrees = rho.sample(rng, size=count, cap=degree_cap)
    coeff = _degree_coeff_table(kind, sigma, rho, degree_cap)
    out = np.empty(count)
    for n in np.unique(degrees):
        idx = np.flatnonzero(degrees == n)
        if n == 0:
            out[idx] = coeff[0]
            continue
        if kind == "taylor":
            w = rng.integers(0, 2, size=(idx.size, n, x.size)).astype(np.float64)
            w = w * 2.0 - 1.0
        else:
            w = rng.normal(0.0, sigma, size=(idx.size, n, x.size))
        px = (w @ x).prod(axis=1)
        py = (w @ y).prod(axis=1)
        out[idx] = coeff[n] * px * py
    return out


def approx_kernel_samples(kind, x, y, nu, count, rng, sigma=1.0, theta=0.9):
    """Inner products of ``count`` independently resampled nu-component maps."""
    u = pair_product_samples(kind, x, y, count * nu, rng, sigma=sigma, theta=theta)
    return u.reshape(count, nu).mean(axis=1)


MAP_KINDS = {
    cls.kind: cls
    for cls in (KronPiMap, KronEMap, FourierMap, TaylorMap, FastfoodMap)
}


def load_map(doc):
    """Rebuild a feature map from its serialized document (dict or JSON str)."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    kind = doc.get("kind")
    if kind not in MAP_KINDS:
        raise ContractError(f"unknown feature-map kind {kind!r}")
    return MAP_KINDS[kind].from_dict(doc)


def dump_map(model):
    """Serialize a fitted feature map to a JSON string."""
    return json.dumps(model.to_dict(), sort_keys=True)
