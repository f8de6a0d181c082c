"""Multi-armed bandit policies for zero-inflated rewards.

Every policy follows the same contract:

``reset(n_arms, horizon, arm_info=None)``
    clear the state for a fresh run;
``select(t, rng)``
    return a 0-based arm for round ``t`` (1-based). Rounds ``1..K`` pull arm
    ``t - 1`` so that every arm is observed once;
``update(arm, r, y, t)``
    feed back the raw reward ``r`` and the observed gate ``y``.

Hyper-parameters live in ``__init__`` and nowhere else, so ``get_params``,
``set_params`` and ``sklearn.base.clone`` work as usual. Fitted state uses
trailing-underscore attributes.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .concentration import (
    HeavyMoment,
    SubWeibull,
    heavy_g,
    naive_size_proxy,
    subweibull_constants,
)
from .distributions import sample_clipped_beta, sample_clipped_normal

VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class ArmState:
    """Read-only snapshot of one arm's sufficient statistics."""

    count: int
    nonzero_count: int
    p_hat: float
    mu_hat: float
    u_mu: float
    u_p: float


def argmax_tiebreak(values, rng):
    """Index of the maximum; exact ties are broken uniformly with ``rng``."""
    values = np.asarray(values)
    best = np.flatnonzero(values == values.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def _log_plus(x):
    return math.log(x) if x > 1.0 else 0.0


class Policy(BaseEstimator):
    """Base class holding the per-arm counters every policy needs."""

    def reset(self, n_arms, horizon, arm_info=None):
        if n_arms < 1:
            raise ValueError("n_arms must be >= 1")
        if horizon < n_arms:
            raise ValueError(f"horizon {horizon} is shorter than the {n_arms} forced rounds")
        self.n_arms_ = int(n_arms)
        self.horizon_ = int(horizon)
        self.arm_info_ = arm_info or {}
        k = self.n_arms_
        self.count_ = np.zeros(k, dtype=np.int64)
        self.nonzero_count_ = np.zeros(k, dtype=np.int64)
        self.p_hat_ = np.zeros(k)
        self.mu_hat_ = np.zeros(k)
        self.reward_sum_ = np.zeros(k)
        self.reward_sumsq_ = np.zeros(k)
        self.u_mu_ = np.ones(k)
        self.u_p_ = np.ones(k)
        self._reset_extra()
        return self

    def _reset_extra(self):
        pass

    def select(self, t, rng):
        if t <= self.n_arms_:
            return t - 1
        return self._select(t, rng)

    def _select(self, t, rng):
        raise NotImplementedError

    def _observe(self, arm, r, y):
        # shared bookkeeping; p_hat is the running mean with c incremented first
        c = self.count_[arm] + 1
        self.count_[arm] = c
        self.p_hat_[arm] += (y - self.p_hat_[arm]) / c
        self.reward_sum_[arm] += r
        self.reward_sumsq_[arm] += r * r
        if r != 0.0:
            nz = self.nonzero_count_[arm] + 1
            self.nonzero_count_[arm] = nz
            self.mu_hat_[arm] += (r - self.mu_hat_[arm]) / nz
        return c

    def update(self, arm, r, y, t):
        self._observe(arm, r, y)

    def arm_state(self, arm):
        return ArmState(
            int(self.count_[arm]),
            int(self.nonzero_count_[arm]),
            float(self.p_hat_[arm]),
            float(self.mu_hat_[arm]),
            float(self.u_mu_[arm]),
            float(self.u_p_[arm]),
        )

    def index_values(self):
        """Current per-arm index used by UCB-type policies."""
        return self.u_mu_ * self.u_p_


class ZiUCB(Policy):
    """Product UCB for zero-inflated rewards with sub-Weibull noise.

    Parameters
    ----------
    theta, size_c : float
        Tail and size parameters of the non-zero noise.
    delta : float or None
        Confidence level; ``None`` means ``4 / T**2``.
    """

    def __init__(self, theta=2.0, size_c=1.0, delta=None):
        self.theta = theta
        self.size_c = size_c
        self.delta = delta

    def _reset_extra(self):
        tail = SubWeibull(self.theta, self.size_c)
        delta = self.delta if self.delta is not None else 4.0 / self.horizon_**2
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        d_const, e_const = subweibull_constants(tail.theta, tail.size_c)
        log4 = math.log(4.0 / delta)
        self.delta_ = delta
        self._p_log = math.log(2.0 / delta) / 2.0
        self._scale = 2.0 * math.e * d_const * tail.size_c
        self._log4 = log4
        self._e_term = e_const * log4 ** max(1.0 / tail.theta, 1.0)

    def _select(self, t, rng):
        return argmax_tiebreak(self.u_mu_ * self.u_p_, rng)

    def update(self, arm, r, y, t):
        c = self._observe(arm, r, y)
        p_hat = self.p_hat_[arm]
        self.u_p_[arm] = p_hat + math.sqrt(self._p_log / c)
        if r != 0.0:
            eff = c * p_hat / 2.0
            width = self._scale * (math.sqrt(self._log4 / eff) + self._e_term / eff)
            self.u_mu_[arm] = self.mu_hat_[arm] + width


class ZiUCBHeavy(Policy):
    """Product UCB with a trimmed non-zero mean for heavy-tailed noise.

    Parameters
    ----------
    eps : float in (0, 1]
        Moment order minus one.
    moment_m : float
        Bound on the centred ``(1 + eps)``-th absolute moment.
    """

    def __init__(self, eps=1.0, moment_m=1.0):
        self.eps = eps
        self.moment_m = moment_m

    def _reset_extra(self):
        tail = HeavyMoment(self.eps, self.moment_m)
        self._k = tail.eps / (1.0 + tail.eps)
        self._m_root = tail.moment_m ** (1.0 / (1.0 + tail.eps))
        self.trimmed_sum_ = np.zeros(self.n_arms_)

    def _select(self, t, rng):
        return argmax_tiebreak(self.u_mu_ * self.u_p_, rng)

    def update(self, arm, r, y, t):
        c = self._observe(arm, r, y)
        p_hat = self.p_hat_[arm]
        log_t = math.log(max(t, 2))
        self.u_p_[arm] = p_hat + math.sqrt(4.0 * log_t / c)
        if r != 0.0:
            # inclusion is frozen now, with the current p_hat, c and round
            level = heavy_g(p_hat, self.eps) * self._m_root * (2.0 * log_t / c) ** self._k
            if abs(r) <= level:
                self.trimmed_sum_[arm] += r
            mu = self.trimmed_sum_[arm] / self.nonzero_count_[arm]
            self.u_mu_[arm] = mu + self._m_root * (32.0 * log_t / c) ** self._k

    def trimmed_mean(self, arm):
        nz = self.nonzero_count_[arm]
        return self.trimmed_sum_[arm] / nz if nz else 0.0


class ZiTS(Policy):
    """Thompson sampling with clipped Beta and clipped Gaussian posteriors.

    The gate probability and the non-zero mean get separate posteriors and
    the sampled means are multiplied.

    Parameters
    ----------
    sigma2 : float
        Sub-Gaussian proxy of the non-zero noise.
    gamma : float, >= 4
        Clip inflation.
    rho : float in (1/2, 1)
        Posterior variance deflation.
    prior_alpha, prior_beta, prior_v : float
        Beta prior and initial Gaussian centre.
    clip_side : {"floor", "cap"}
        ``"floor"`` takes ``max(draw, clip)``; ``"cap"`` takes
        ``min(draw, clip)``.
    """

    def __init__(self, sigma2=1.0, gamma=4.0, rho=0.75, prior_alpha=1.0, prior_beta=1.0,
                 prior_v=0.0, clip_side="floor"):
        self.sigma2 = sigma2
        self.gamma = gamma
        self.rho = rho
        self.prior_alpha = prior_alpha
        self.prior_beta = prior_beta
        self.prior_v = prior_v
        self.clip_side = clip_side

    def _reset_extra(self):
        if self.gamma < 4.0:
            raise ValueError(f"gamma must be >= 4, got {self.gamma}")
        if not 0.5 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (1/2, 1), got {self.rho}")
        if self.clip_side not in ("floor", "cap"):
            raise ValueError(f"clip_side must be 'floor' or 'cap', got {self.clip_side!r}")
        k = self.n_arms_
        self.alpha_ = np.full(k, float(self.prior_alpha))
        self.beta_ = np.full(k, float(self.prior_beta))
        self.v_ = np.full(k, float(self.prior_v))
        self.clip_p_ = np.ones(k)
        self.clip_mu_ = np.ones(k)
        self.last_draws_ = None

    def _draw(self, rng):
        c = self.count_.astype(float)
        p_eff = np.maximum(self.p_hat_, 1.0 / c)
        var = 2.0 * self.sigma2 / (self.rho * c * p_eff)
        if self.clip_side == "floor":
            p_tilde = sample_clipped_beta(self.alpha_, self.beta_, self.clip_p_, rng)
            mu_tilde = sample_clipped_normal(self.v_, var, self.clip_mu_, rng)
            return p_tilde, mu_tilde
        p_tilde = np.minimum(rng.beta(self.alpha_, self.beta_), self.clip_p_)
        mu_tilde = np.minimum(rng.normal(self.v_, np.sqrt(var)), self.clip_mu_)
        return p_tilde, mu_tilde

    def _select(self, t, rng):
        p_tilde, mu_tilde = self._draw(rng)
        self.last_draws_ = (p_tilde, mu_tilde)
        return argmax_tiebreak(p_tilde * mu_tilde, rng)

    def update(self, arm, r, y, t):
        self.alpha_[arm] += y
        self.beta_[arm] += 1 - y
        c = self._observe(arm, r, y)
        T, K = self.horizon_, self.n_arms_
        p_hat = self.p_hat_[arm]
        self.clip_p_[arm] = p_hat + math.sqrt(self.gamma / (4.0 * c) * _log_plus(T / (4.0 * c * K)))
        if r != 0.0:
            mu = self.mu_hat_[arm]
            self.v_[arm] = mu
            infl = 1.0 + 1.0 / math.log1p(1.0 / math.sqrt(c * T))
            a = infl * self.sigma2 / (p_hat * p_hat * c)
            self.clip_mu_[arm] = mu + math.sqrt(4.0 * self.gamma * a) * math.sqrt(_log_plus(4.0 * a * T / K))


class NaiveUCB(Policy):
    """UCB on the raw reward with a size proxy chosen by ``mode``.

    Parameters
    ----------
    mode : {"nonzero_param", "emp_var", "solved", "true"}
        ``nonzero_param`` uses ``sigma2`` directly, ``emp_var`` the sample
        variance of the raw rewards, ``solved`` the proxy solved from the
        current ``(mu_hat, p_hat)``, ``true`` the proxy disclosed by the
        environment through ``arm_info["size_proxy"]``.
    family : {"subgaussian", "subexponential"}
    sigma2 : float
        Variance proxy (sub-Gaussian) or ``lambda^2`` (sub-exponential) of the
        non-zero noise.
    delta : float or None
        ``None`` means ``4 / T**2``.
    """

    MODES = ("nonzero_param", "emp_var", "solved", "true")

    def __init__(self, mode="emp_var", family="subgaussian", sigma2=1.0, delta=None):
        self.mode = mode
        self.family = family
        self.sigma2 = sigma2
        self.delta = delta

    def _reset_extra(self):
        if self.mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}, got {self.mode!r}")
        if self.family not in ("subgaussian", "subexponential"):
            raise ValueError(f"unknown family {self.family!r}")
        delta = self.delta if self.delta is not None else 4.0 / self.horizon_**2
        self.delta_ = delta
        self._log = math.log(2.0 / delta)
        self.proxy_ = np.full(self.n_arms_, float(self.sigma2))
        if self.mode == "true":
            try:
                self.proxy_ = np.asarray(self.arm_info_["size_proxy"], dtype=float).copy()
            except KeyError:
                raise ValueError("mode 'true' needs the environment to disclose 'size_proxy'") from None
        self.index_ = np.full(self.n_arms_, np.inf)
        self._cache = {}

    def _proxy(self, arm):
        if self.mode == "nonzero_param" or self.mode == "true":
            return self.proxy_[arm]
        if self.mode == "emp_var":
            c = self.count_[arm]
            if c < 2:
                return VAR_FLOOR
            mean = self.reward_sum_[arm] / c
            var = (self.reward_sumsq_[arm] - c * mean * mean) / (c - 1)
            return max(var, VAR_FLOOR)
        key = (arm, self.mu_hat_[arm], self.p_hat_[arm])
        val = self._cache.get(key)
        if val is None:
            val = naive_size_proxy(self.mu_hat_[arm], self.p_hat_[arm], self.sigma2, self.family)
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = val
        return val

    def _index(self, arm):
        c = self.count_[arm]
        mean = self.reward_sum_[arm] / c
        tau2 = self._proxy(arm)
        if self.family == "subgaussian":
            return mean + math.sqrt(2.0 * tau2 * self._log / c)
        return mean + tau2 * math.sqrt(2.0 * self._log / c) + math.sqrt(tau2) * self._log / c

    def _select(self, t, rng):
        return argmax_tiebreak(self.index_, rng)

    def update(self, arm, r, y, t):
        self._observe(arm, r, y)
        self.index_[arm] = self._index(arm)

    def index_values(self):
        return self.index_.copy()


class DirectTS(Policy):
    """Clipped-Gaussian Thompson sampling on the raw reward.

    A simple stand-in baseline that ignores the zero-inflated structure.
    """

    def __init__(self, gamma=4.0):
        self.gamma = gamma

    def _reset_extra(self):
        self.clip_ = np.full(self.n_arms_, -np.inf)

    def _select(self, t, rng):
        c = self.count_.astype(float)
        mean = self.reward_sum_ / c
        var = np.where(c > 1, (self.reward_sumsq_ - c * mean**2) / np.maximum(c - 1, 1), 0.0)
        var = np.maximum(var, VAR_FLOOR)
        draws = sample_clipped_normal(mean, var / c, self.clip_, rng)
        return argmax_tiebreak(draws, rng)

    def update(self, arm, r, y, t):
        c = self._observe(arm, r, y)
        mean = self.reward_sum_[arm] / c
        T, K = self.horizon_, self.n_arms_
        self.clip_[arm] = mean + math.sqrt(self.gamma / (4.0 * c) * _log_plus(T / (4.0 * c * K)))


class OraclePolicy(Policy):
    """Always plays the arm with the largest true mean (``arm_info["means"]``)."""

    def _reset_extra(self):
        try:
            means = np.asarray(self.arm_info_["means"], dtype=float)
        except KeyError:
            raise ValueError("the oracle needs arm_info['means']") from None
        self.best_ = int(np.argmax(means))

    def select(self, t, rng):
        return self.best_


MAB_POLICIES = {
    "zi_ucb": ZiUCB,
    "zi_ucb_heavy": ZiUCBHeavy,
    "zi_ts": ZiTS,
    "naive_ucb": NaiveUCB,
    "direct_ts": DirectTS,
    "oracle": OraclePolicy,
}

__all__ = [
    "ArmState",
    "Policy",
    "argmax_tiebreak",
    "ZiUCB",
    "ZiUCBHeavy",
    "ZiTS",
    "NaiveUCB",
    "DirectTS",
    "OraclePolicy",
    "MAB_POLICIES",
]
