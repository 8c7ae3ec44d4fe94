"""Series constants, closed-form variance bounds, and Monte-Carlo verdicts.

``c_rho`` sums the series C = sum_n 1 / (rho(n) n!) that scales the
variance bounds of the product maps; the closed form ((1-t)/t) exp((1-t)/t)
circulating for the geometric law disagrees with the summed series, so the
series value is treated as ground truth and both are always reported.

``mc_bias_variance`` is the executable form of the unbiasedness and
variance claims: it resamples a map many times, checks the mean against the
exact kernel at 3 standard errors, and checks the empirical variance
against twice the closed-form bound.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError
from .maps import Geometric, rbf_kernel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CRhoResult:
    """Truncated-series value and the closed form, which are not asserted equal."""

    series: float
    closed_form: float
    diverged: bool
    terms: int


def c_rho(rho, truncation_tol=1e-12, max_terms=100_000):
    """Sum C = sum_n 1 / (rho(n) n!) until the running term is negligible.

    Terms of the geometric law grow while n < 1/(1-theta) before the
    factorial takes over, so the stop rule only applies on the decaying
    tail.  A genuinely divergent series (terms growing for 10 consecutive n
    with non-decreasing growth ratios) is flagged instead of summed.
    """
    if not isinstance(rho, Geometric):
        raise ContractError(f"rho must be a Geometric law, got {type(rho).__name__}")
    if not 0.0 < rho.theta < 1.0:
        raise ContractError(f"the series needs theta in (0, 1), got {rho.theta}")
    closed = ((1.0 - rho.theta) / rho.theta) * math.exp((1.0 - rho.theta) / rho.theta)

    total = 0.0
    prev_term = math.inf
    prev_ratio = 0.0
    growth_run = 0
    diverged = False
    n = 0
    for n in range(max_terms):
        term = math.exp(-rho.log_pmf(n) - math.lgamma(n + 1))
        total += term
        if term > prev_term:
            # The geometric series grows with strictly shrinking ratios until
            # the factorial wins; non-decreasing growth ratios mean the tail
            # will never decay.
            ratio = term / prev_term
            growth_run = growth_run + 1 if ratio >= prev_ratio else 1
            prev_ratio = ratio
            if growth_run >= 10:
                diverged = True
                break
        else:
            growth_run = 0
            prev_ratio = 0.0
            if term < truncation_tol * total:
                break
        prev_term = term
    if not math.isfinite(total):
        diverged = True
    result = CRhoResult(
        series=math.inf if diverged else total,
        closed_form=closed,
        diverged=diverged,
        terms=n + 1,
    )
    logger.debug(
        "c_rho(theta=%g): series=%.12g closed_form=%.12g (%d terms)",
        rho.theta, result.series, result.closed_form, result.terms,
    )
    return result


def m4_gaussian(sigma):
    """Fourth moment of a centered Gaussian with standard deviation sigma."""
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    return 3.0 * sigma**4


def variance_bound(kind, nu, sigma, theta):
    """Closed-form variance bound for a nu-dimensional product map.

    ``kron_pi``: (C/nu^3) * exp((9 m4 - 2 sigma^4) / sigma^8) with the
    Gaussian fourth moment; ``kron_e``: (C/nu^3) * exp((3 - 2 sigma^2) /
    sigma^4).  C is the summed series.  Returns inf when the exponential
    factor overflows.
    """
    if nu < 1:
        raise ContractError(f"nu must be >= 1, got {nu}")
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    series = c_rho(Geometric(theta)).series
    if kind == "kron_pi":
        exponent = (9.0 * m4_gaussian(sigma) - 2.0 * sigma**4) / sigma**8
    elif kind == "kron_e":
        exponent = (3.0 - 2.0 * sigma**2) / sigma**4
    else:
        raise ContractError(f"no variance bound for kind {kind!r}")
    try:
        factor = math.exp(exponent)
    except OverflowError:
        return math.inf
    return series / float(nu) ** 3 * factor


def chebyshev_bound(kind, nu, sigma, theta, eps):
    """Deviation-probability bound min(1, variance_bound / eps^2)."""
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    vb = variance_bound(kind, nu, sigma, theta)
    if math.isinf(vb):
        return 1.0
    return min(1.0, vb / (eps * eps))


@dataclass(frozen=True)
class BoundReport:
    """Numbers a configuration implies: series constant, bounds, deviations."""

    sigma: float
    theta: float
    nu: int
    c_rho_series: float
    c_rho_closed_form: float
    variance_bound_pi: float
    variance_bound_e: float
    chebyshev_pi: dict
    chebyshev_e: dict

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "theta": self.theta,
            "nu": self.nu,
            "c_rho_series": self.c_rho_series,
            "c_rho_closed_form": self.c_rho_closed_form,
            "variance_bound_pi": self.variance_bound_pi,
            "variance_bound_e": self.variance_bound_e,
            "chebyshev_pi": {str(k): v for k, v in self.chebyshev_pi.items()},
            "chebyshev_e": {str(k): v for k, v in self.chebyshev_e.items()},
        }


def bound_report(sigma, theta, nu, eps_values=(0.01, 0.05, 0.1, 0.5)):
    res = c_rho(Geometric(theta))
    return BoundReport(
        sigma=sigma,
        theta=theta,
        nu=nu,
        c_rho_series=res.series,
        c_rho_closed_form=res.closed_form,
        variance_bound_pi=variance_bound("kron_pi", nu, sigma, theta),
        variance_bound_e=variance_bound("kron_e", nu, sigma, theta),
        chebyshev_pi={
            e: chebyshev_bound("kron_pi", nu, sigma, theta, e) for e in eps_values
        },
        chebyshev_e={
            e: chebyshev_bound("kron_e", nu, sigma, theta, e) for e in eps_values
        },
    )


@dataclass(frozen=True)
class EstimatorStats:
    """Summary of Monte-Carlo samples; stderr = sqrt(variance / samples)."""

    mean: float
    variance: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class McVerdict:
    """Bias/variance verdicts of one Monte-Carlo run."""

    label: str
    stats: EstimatorStats
    target: float
    z_score: float
    unbiased: bool
    variance_bound: float | None
    within_bound: bool | None

    def to_dict(self):
        return {
            "label": self.label,
            "mean": self.stats.mean,
            "variance": self.stats.variance,
            "stderr": self.stats.stderr,
            "samples": self.stats.samples,
            "target": self.target,
            "z_score": self.z_score,
            "unbiased": self.unbiased,
            "variance_bound": self.variance_bound,
            "within_bound": self.within_bound,
        }


def seeded_unit_pairs(count, dim, seed=0):
    """Deterministic unit-norm upper-triangular matrix pairs for MC checks."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    triu = np.triu_indices(dim)
    pairs = []
    for _ in range(count):
        mats = []
        for _ in range(2):
            m = np.zeros((dim, dim))
            m[triu] = rng.normal(size=len(triu[0]))
            mats.append(m / np.linalg.norm(m))
        pairs.append((mats[0], mats[1]))
    return pairs


def summarize(samples):
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    if n < 2:
        raise ContractError(f"need at least 2 samples, got {n}")
    if np.all(samples == samples[0]):
        # A deterministic sampler has zero variance by definition; the
        # mean-subtraction form would report roundoff noise instead.
        return EstimatorStats(mean=float(samples[0]), variance=0.0, stderr=0.0, samples=n)
    mean = float(samples.mean())  # numpy reduces pairwise: order-stable
    variance = float(samples.var(ddof=1))
    return EstimatorStats(
        mean=mean,
        variance=variance,
        stderr=math.sqrt(variance / n),
        samples=n,
    )


def mc_bias_variance(sampler, x, y, repetitions, sigma, *, nu=1,
                     bound=None, seed=0, label=""):
    """Resample a map ``repetitions`` times and judge bias and variance.

    ``sampler(x, y, count, rng)`` must return ``count`` i.i.d. single-
    component realizations of the approximated kernel value (see
    :func:`kronfeat.maps.pair_product_samples`); a nu-component map's inner
    product is the mean of nu of them, so ``nu > 1`` evaluates freshly
    resampled nu-dimensional maps.

    Verdicts: ``unbiased`` when |mean - exact| <= 3 stderr (exact equality
    when the sampler is deterministic), ``within_bound`` when the empirical
    variance is at most twice ``bound`` (None when no finite bound is
    given).
    """
    if repetitions < 2:
        raise ContractError(f"repetitions must be >= 2, got {repetitions}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    draws = sampler(x, y, repetitions * nu, rng)
    draws = np.asarray(draws, dtype=np.float64)
    if draws.shape != (repetitions * nu,):
        raise ContractError(
            f"sampler returned shape {draws.shape}, expected ({repetitions * nu},)"
        )
    values = draws.reshape(repetitions, nu).mean(axis=1) if nu > 1 else draws
    stats = summarize(values)
    target = rbf_kernel(x, y, sigma)
    if stats.stderr > 0.0:
        z = (stats.mean - target) / stats.stderr
        unbiased = abs(z) <= 3.0
    else:
        z = 0.0 if stats.mean == target else math.inf
        unbiased = stats.mean == target
    if bound is None or math.isinf(bound):
        within = None
    else:
        within = stats.variance <= 2.0 * bound
    return McVerdict(
        label=label,
        stats=stats,
        target=target,
        z_score=float(z),
        unbiased=bool(unbiased),
        variance_bound=bound,
        within_bound=within,
    )
