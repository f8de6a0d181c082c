"""Confidence widths and constants for zero-inflated rewards.

Every function here is pure. Widths are *additive*: the upper bound for a
quantity is its point estimate plus the returned width.

The reward model is ``R = X * Y`` with ``Y ~ Bernoulli(p)`` observable and
``X = mu + noise`` observed only when ``Y = 1``. Bounds for ``mu`` and ``p``
are built separately and multiplied (:func:`product_ucb`).
"""

import math
from dataclasses import dataclass

import numpy as np

from ._optimize import bracketed_golden_max
from ._validation import (
    ValidityError,
    check_count,
    check_delta,
    check_positive,
    check_probability,
)

__all__ = [
    "SubWeibull",
    "HeavyMoment",
    "subweibull_constants",
    "bernoulli_width",
    "nonzero_width_estimated",
    "nonzero_width_oracle",
    "nonzero_validity_threshold",
    "product_ucb",
    "heavy_g",
    "heavy_trunc_level",
    "heavy_trunc_level_analytic",
    "heavy_lower_width",
    "heavy_width",
    "naive_size_proxy",
    "grid_size_proxy",
]


@dataclass(frozen=True)
class SubWeibull:
    """Noise with ``E exp(|eps|^theta / C^theta) <= 2``.

    ``theta=2`` is sub-Gaussian, ``theta=1`` sub-exponential.
    """

    theta: float = 2.0
    size_c: float = 1.0

    def __post_init__(self):
        check_positive(self.theta, "theta")
        check_positive(self.size_c, "size_c")


@dataclass(frozen=True)
class HeavyMoment:
    """Noise with a finite centred moment ``E|eps|^(1+eps) <= moment_m``."""

    eps: float = 1.0
    moment_m: float = 1.0

    def __post_init__(self):
        if not 0.0 < float(self.eps) <= 1.0:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        check_positive(self.moment_m, "moment_m")


def subweibull_constants(theta, size_c):
    """Return ``(D, E)`` for the sharp sub-Weibull sample-mean inequality.

    Three regimes: ``theta < 1``, ``1 <= theta < 2`` and ``theta >= 2``. Only
    ``D`` depends on the size parameter, and only when ``theta >= 1``.
    """
    theta = check_positive(theta, "theta")
    c = check_positive(size_c, "size_c")
    e = math.e
    if theta < 1.0:
        d = (
            max(math.sqrt(2.0), 2.0 ** (1.0 / theta))
            * math.sqrt(8.0)
            * e**3
            * (2.0 * math.pi) ** 0.25
            * math.exp(1.0 / 24.0)
            * (math.exp(2.0 / e) / theta) ** (1.0 / theta)
        )
        return d, 2.0 ** (2.0 / theta - 0.5)
    if theta < 2.0:
        d = math.sqrt(3.0 / (2.0 * e * e)) * max(1.0 / c, c ** (theta - 1.0))
        return d, 1.0 / math.sqrt(6.0)
    d = math.sqrt(17.0 / (6.0 * e * e)) * max(1.0 / c, c ** (theta / 2.0 - 1.0))
    return d, 0.0


def bernoulli_width(n, delta):
    """Hoeffding width ``sqrt(log(2/delta) / (2n))`` for a Bernoulli mean."""
    n = check_count(n)
    delta = check_delta(delta)
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def _subweibull_width(effective_n, scale, e_const, log_term, log_power):
    # scale = 2 e D C; effective_n = n p / 2
    return scale * (math.sqrt(log_term / effective_n) + e_const * log_power / effective_n)


def _subweibull_terms(tail, delta):
    d_const, e_const = subweibull_constants(tail.theta, tail.size_c)
    log_term = math.log(4.0 / delta)
    log_power = log_term ** max(1.0 / tail.theta, 1.0)
    return 2.0 * math.e * d_const * tail.size_c, e_const, log_term, log_power


def nonzero_width_estimated(n, p_hat, tail, delta):
    """Width for the observed non-zero mean using the plug-in ``p_hat``.

    ``n`` is the total number of pulls (zeros included), so ``n * p_hat`` is
    the number of non-zero observations.
    """
    n = check_count(n)
    p_hat = check_probability(p_hat, "p_hat", allow_zero=False)
    delta = check_delta(delta)
    scale, e_const, log_term, log_power = _subweibull_terms(tail, delta)
    return _subweibull_width(n * p_hat / 2.0, scale, e_const, log_term, log_power)


def nonzero_validity_threshold(p, delta):
    """Smallest ``n`` with ``n >= 4 log(2/delta) / p**2``."""
    p = check_probability(p, allow_zero=False)
    delta = check_delta(delta)
    return math.ceil(4.0 * math.log(2.0 / delta) / (p * p))


def nonzero_width_oracle(n, p_true, tail, delta):
    """Two-sided width for the observed non-zero mean with the true ``p``.

    Holds with probability ``1 - delta`` once ``n`` reaches
    :func:`nonzero_validity_threshold`; below that a :class:`ValidityError`
    is raised.
    """
    n = check_count(n)
    threshold = nonzero_validity_threshold(p_true, delta)
    if n < threshold:
        raise ValidityError(
            f"n={n} is below the validity threshold {threshold} for p={p_true}, delta={delta}"
        )
    scale, e_const, log_term, log_power = _subweibull_terms(tail, delta)
    return _subweibull_width(n * p_true / 2.0, scale, e_const, log_term, log_power)


def product_ucb(x_bar, y_bar, u_x, u_y):
    """Upper bound ``(x_bar + u_x) * (y_bar + u_y)`` for the mean reward ``mu * p``."""
    return (x_bar + u_x) * (y_bar + u_y)


def heavy_g(p, eps):
    """Inflation factor of the trimmed observed mean; decreasing in ``p``."""
    p = check_probability(p, allow_zero=False)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    k = eps / (1.0 + eps)
    return p ** (-k) * (1.0 + eps) * 2.0**k + 4.0 / (3.0 * p) + 2.0 / math.sqrt(p)


def heavy_trunc_level(round_index, p_hat, count, tail):
    """Truncation threshold used by the heavy-tail UCB policy.

    ``g(p_hat, eps) * M^(1/(1+eps)) * (log(l^2) / count)^(eps/(1+eps))``,
    evaluated with the statistics current when the observation arrives.
    Round ``l = 1`` is floored to ``l = 2``.
    """
    count = check_count(count, "count")
    l = max(int(round_index), 2)
    k = tail.eps / (1.0 + tail.eps)
    return (
        heavy_g(p_hat, tail.eps)
        * tail.moment_m ** (1.0 / (1.0 + tail.eps))
        * (2.0 * math.log(l) / count) ** k
    )


def heavy_trunc_level_analytic(nonzero_index, tail, delta):
    """Fixed-confidence threshold ``(j M / log(2/delta))^(1/(1+eps))``.

    ``nonzero_index`` is the running count ``j`` of non-zero observations.
    """
    j = check_count(nonzero_index, "nonzero_index")
    delta = check_delta(delta)
    return (j * tail.moment_m / math.log(2.0 / delta)) ** (1.0 / (1.0 + tail.eps))


def heavy_lower_width(n, p, tail, delta):
    """Deviation ``g(p, eps) M^(1/(1+eps)) (log(2/delta)/n)^(eps/(1+eps))``.

    The trimmed observed mean falls this far below ``mu`` with probability at
    most ``delta`` once ``n >= 4 log(2/delta) / p^2``.
    """
    n = check_count(n)
    delta = check_delta(delta)
    k = tail.eps / (1.0 + tail.eps)
    return (
        heavy_g(p, tail.eps)
        * tail.moment_m ** (1.0 / (1.0 + tail.eps))
        * (math.log(2.0 / delta) / n) ** k
    )


def heavy_width(count, round_index, tail):
    """Width ``M^(1/(1+eps)) (32 log(t) / count)^(eps/(1+eps))`` of the heavy policy."""
    count = check_count(count, "count")
    t = check_count(round_index, "round_index", minimum=2)
    k = tail.eps / (1.0 + tail.eps)
    return tail.moment_m ** (1.0 / (1.0 + tail.eps)) * (32.0 * math.log(t) / count) ** k


# --- size proxy of the raw zero-inflated reward --------------------------------

_S_MIN, _S_MAX = 1e-6, 1e4
_LOG_GRID = [(-6.0 + 10.0 * i / 160.0) for i in range(161)]


def _proxy_objective(s, mu, p, var):
    # (2/s^2) [ -s mu p + log(1 - p + p exp(s mu + s^2 var / 2)) ]
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return var
    a = s * mu + 0.5 * s * s * var
    if a > 0.0 or (p >= 0.5 and a > -30.0):
        # log(1-p+p e^a) = a + log(1 - (1-p)(1 - e^-a)); keeps s^2 var / 2 out of the cancellation
        val = s * mu * (1.0 - p) + 0.5 * s * s * var + math.log1p((1.0 - p) * math.expm1(-a))
    else:
        val = math.log1p(p * math.expm1(a)) - s * mu * p
    return 2.0 * val / (s * s)


def _check_family(family):
    if family not in ("subgaussian", "subexponential"):
        raise ValueError(f"family must be 'subgaussian' or 'subexponential', got {family!r}")


def naive_size_proxy(mu_hat, p_hat, sigma2, family="subgaussian", return_argmax=False):
    """Sub-Gaussian variance proxy of the raw reward ``R = X Y``.

    Maximises ``(2/s^2)[-s mu p + log(1 - p + p exp(s mu + s^2 sigma2/2))]``
    over ``s`` with a bracketed golden-section search on each sign of ``s``
    (``1e-6 <= |s| <= 1e4``, log scale).

    For ``family="subexponential"``, ``sigma2`` is the squared sub-exponential
    parameter ``lambda^2`` of the non-zero part and the result is
    ``max(lambda^2, sup_s ...)``.
    """
    _check_family(family)
    p = check_probability(p_hat, "p_hat")
    var = check_positive(sigma2, "sigma2")
    mu = float(mu_hat)

    best_s, best_val = None, -math.inf
    for sign in (1.0, -1.0):
        def obj(u, sign=sign):
            return _proxy_objective(sign * 10.0**u, mu, p, var)

        u, val = bracketed_golden_max(obj, _LOG_GRID)
        if val > best_val:
            best_s, best_val = sign * 10.0**u, val
    if family == "subexponential":
        best_val = max(best_val, var)
    if return_argmax:
        return best_val, best_s
    return best_val


def grid_size_proxy(mu_hat, p_hat, sigma2, family="subgaussian", s_min=1e-4, s_max=1e3, num=100_000):
    """Brute-force maximum of the size-proxy objective over ``+-logspace``.

    Independent cross-check for :func:`naive_size_proxy`.
    """
    _check_family(family)
    p = check_probability(p_hat, "p_hat")
    var = check_positive(sigma2, "sigma2")
    mu = float(mu_hat)
    half = np.logspace(np.log10(s_min), np.log10(s_max), num)
    s = np.concatenate([-half[::-1], half])
    a = s * mu + 0.5 * s**2 * var
    with np.errstate(divide="ignore"):
        log_mgf = np.logaddexp(np.log1p(-p), np.log(p) + a) if p > 0 else np.zeros_like(s)
    values = 2.0 * (log_mgf - s * mu * p) / s**2
    best = float(values.max())
    if family == "subexponential":
        best = max(best, var)
    return best
