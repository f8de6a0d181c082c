"""Noise models and samplers.

All samplers take an explicit ``numpy.random.Generator`` so that draws are a
deterministic function of the parameters and the generator state.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_probability

# Finite stand-ins for -inf/+inf clip values.
NEG_INF_CLIP = -1e300
POS_INF_CLIP = 1e300


@dataclass(frozen=True)
class Gaussian:
    variance: float = 1.0

    def __post_init__(self):
        check_positive(self.variance, "variance")

    def sample(self, rng, size=None):
        return rng.normal(0.0, math.sqrt(self.variance), size)

    @property
    def proxy(self):
        """Sub-Gaussian variance proxy."""
        return self.variance


@dataclass(frozen=True)
class GaussianMixture:
    """Mean-zero finite mixture of Gaussians."""

    weights: tuple = (0.5, 0.5)
    means: tuple = (-1.0, 1.0)
    variances: tuple = (0.5, 0.5)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        v = np.asarray(self.variances, dtype=float)
        if not (w.shape == m.shape == v.shape) or w.ndim != 1 or w.size == 0:
            raise ValueError("weights, means and variances must be equal-length sequences")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(v <= 0):
            raise ValueError("mixture variances must be positive")
        if abs(float(w @ m)) > 1e-12:
            raise ValueError("mixture must have overall mean zero")

    def sample(self, rng, size=None):
        w = np.asarray(self.weights, dtype=float)
        comp = rng.choice(w.size, size=size, p=w)
        m = np.asarray(self.means, dtype=float)[comp]
        s = np.sqrt(np.asarray(self.variances, dtype=float))[comp]
        return m + s * rng.standard_normal(size)

    @property
    def proxy(self):
        # largest component variance plus the Hoeffding term for the component mean
        m = np.asarray(self.means, dtype=float)
        return float(max(self.variances) + (m.max() - m.min()) ** 2 / 4.0)


@dataclass(frozen=True)
class CenteredExponential:
    """``Exp(rate) - 1/rate``."""

    rate: float = 1.0

    def __post_init__(self):
        check_positive(self.rate, "rate")

    def sample(self, rng, size=None):
        return rng.exponential(1.0 / self.rate, size) - 1.0 / self.rate

    @property
    def proxy(self):
        """Squared sub-exponential parameter ``lambda^2 = 4 / rate^2``."""
        return 4.0 / self.rate**2


@dataclass(frozen=True)
class StudentT:
    df: float = 3.0

    def __post_init__(self):
        if not float(self.df) > 1.0:
            raise ValueError(f"df must exceed 1 for a finite mean, got {self.df}")

    def sample(self, rng, size=None):
        return rng.standard_t(self.df, size)

    def abs_moment(self, order):
        """``E|T|^order`` by numerical integration; finite only for ``order < df``."""
        from scipy import integrate, stats

        if order >= self.df:
            return math.inf
        dist = stats.t(self.df)
        val, _ = integrate.quad(lambda x: x**order * dist.pdf(x), 0.0, np.inf, limit=200)
        return 2.0 * val


NOISE_MODELS = {
    "gaussian": Gaussian,
    "mixture": GaussianMixture,
    "exponential": CenteredExponential,
    "student_t": StudentT,
}


@dataclass(frozen=True)
class ZiArm:
    """One arm: ``R = Y (mu + noise)`` with ``Y ~ Bernoulli(p)``."""

    p: float
    mu: float
    noise: object = field(default_factory=Gaussian)

    def __post_init__(self):
        check_probability(self.p, allow_zero=False)

    @property
    def mean(self):
        return self.mu * self.p


def sample_zi(arm, rng, size=None):
    """Draw ``(r, y)``; both scalars when ``size`` is None.

    The Bernoulli gate is drawn first, then the noise, so the stream layout
    does not depend on the gate outcome.
    """
    y = (rng.random(size) < arm.p).astype(np.int64) if size is not None else int(rng.random() < arm.p)
    x = arm.mu + arm.noise.sample(rng, size)
    if size is None:
        return (float(x) if y else 0.0), y
    return np.where(y == 1, x, 0.0), y


def sample_clipped_normal(mean, variance, clip, rng, size=None):
    """``max(N(mean, variance), clip)``; array arguments broadcast."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    draw = rng.normal(mean, np.sqrt(variance), size)
    return np.maximum(draw, clip)


def sample_clipped_beta(alpha, beta, clip, rng, size=None):
    """``max(Beta(alpha, beta), clip)``; array arguments broadcast."""
    if np.any(np.asarray(alpha) <= 0) or np.any(np.asarray(beta) <= 0):
        raise ValueError("alpha and beta must be positive")
    draw = rng.beta(alpha, beta, size)
    return np.maximum(draw, clip)


def sample_mvnormal(mean, covariance_factor, rng):
    """``mean + L z`` with ``z`` standard normal and ``L`` a covariance factor."""
    mean = np.asarray(mean, dtype=float)
    factor = np.asarray(covariance_factor, dtype=float)
    if mean.ndim != 1 or factor.shape != (mean.size, mean.size):
        raise ValueError(
            f"factor shape {factor.shape} does not match mean of length {mean.size}"
        )
    return mean + factor @ rng.standard_normal(mean.size)
