"""Synthetic zero-inflated environments with exact regret oracles."""

from dataclasses import dataclass, field

import numpy as np

from .concentration import naive_size_proxy
from .distributions import CenteredExponential, Gaussian, GaussianMixture, ZiArm
from .links import get_link


def true_size_proxy(mu, p, noise):
    """Size proxy of ``R = Y (mu + noise)`` solved from the true parameters.

    Returns ``nan`` when the noise has no sub-Gaussian or sub-exponential
    parameter (Student t).
    """
    if isinstance(noise, (Gaussian, GaussianMixture)):
        return naive_size_proxy(mu, p, noise.proxy, "subgaussian")
    if isinstance(noise, CenteredExponential):
        return naive_size_proxy(mu, p, noise.proxy, "subexponential")
    return float("nan")


@dataclass(frozen=True)
class MabEnvSpec:
    k: int = 10
    p_range: tuple = (0.30, 0.35)
    mu_range: tuple = (1.0, 3.0)
    noise: object = field(default_factory=Gaussian)
    horizon: int = 20000

    def __post_init__(self):
        lo, hi = self.p_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ValueError(f"p_range must satisfy 0 < lo <= hi <= 1, got {self.p_range}")
        if self.mu_range[0] > self.mu_range[1]:
            raise ValueError(f"mu_range must satisfy lo <= hi, got {self.mu_range}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.horizon < self.k:
            raise ValueError("horizon must be at least k")


class MabEnv:
    """One realisation of arm parameters drawn from a :class:`MabEnvSpec`."""

    def __init__(self, spec, rng):
        self.spec = spec
        self.p = rng.uniform(*spec.p_range, size=spec.k)
        self.mu = rng.uniform(*spec.mu_range, size=spec.k)
        self.arms = [ZiArm(float(p), float(m), spec.noise) for p, m in zip(self.p, self.mu)]
        self.means = self.mu * self.p
        self.best_mean = float(self.means.max())
        self.gaps = self.best_mean - self.means

    @property
    def n_arms(self):
        return self.spec.k

    def arm_info(self):
        """Facts disclosed to oracle-type policies."""
        proxies = [true_size_proxy(a.mu, a.p, a.noise) for a in self.arms]
        return {"means": self.means.copy(), "size_proxy": np.asarray(proxies)}

    def regret(self, arm):
        return float(self.gaps[arm])

    def reward_stream(self, rng, horizon=None):
        """Pre-drawn gate uniforms and noise for one run of one policy."""
        return MabRewardStream(self, rng, horizon or self.spec.horizon)


class MabRewardStream:
    """Round ``t`` uses the ``t``-th uniform and noise draw whatever the arm."""

    def __init__(self, env, rng, horizon):
        self._p = env.p
        self._mu = env.mu
        self._u = rng.random(horizon)
        self._eps = env.spec.noise.sample(rng, horizon)

    def draw(self, arm, t):
        i = t - 1
        if self._u[i] < self._p[arm]:
            return float(self._mu[arm] + self._eps[i]), 1
        return 0.0, 0


def _sparse_uniform(rng, d, s):
    v = np.zeros(d)
    v[rng.choice(d, size=s, replace=False)] = rng.uniform(0.0, 1.0, size=s)
    return v


@dataclass(frozen=True)
class CbEnvSpec:
    k: int = 100
    d: int = 10
    sparsity: int = 7
    link_h: str = "probit"
    noise: object = field(default_factory=Gaussian)
    horizon: int = 5000

    def __post_init__(self):
        if not 1 <= self.sparsity <= self.d:
            raise ValueError(f"sparsity must lie in [1, d], got {self.sparsity}")
        if self.k < 1 or self.d < 1:
            raise ValueError("k and d must be positive")
        link = get_link(self.link_h)
        if not link.bounded:
            raise ValueError(f"link_h must map into [0, 1], got {self.link_h!r}")


class CbEnv:
    """Contextual environment with a linear non-zero part and a GLM gate.

    ``beta`` has uniform entries scaled to unit norm; ``theta`` and the
    context centres ``nu_k`` are ``sparsity``-sparse with uniform non-zeros.
    ``theta`` is rescaled onto the unit ball when its norm exceeds one.
    Contexts are ``N(nu_k, I / (2K))``; the non-zero features are ``x`` and
    the gate features ``sin(x)``.
    """

    def __init__(self, spec, rng):
        self.spec = spec
        self.h = get_link(spec.link_h)
        beta = rng.uniform(0.0, 1.0, size=spec.d)
        self.beta = beta / np.linalg.norm(beta)
        theta = _sparse_uniform(rng, spec.d, spec.sparsity)
        norm = np.linalg.norm(theta)
        self.theta = theta / norm if norm > 1.0 else theta
        self.nu = np.stack([_sparse_uniform(rng, spec.d, spec.sparsity) for _ in range(spec.k)])
        self.context_sd = np.sqrt(1.0 / (2.0 * spec.k))

    @property
    def n_arms(self):
        return self.spec.k

    def arm_info(self):
        return {"beta": self.beta.copy(), "theta": self.theta.copy(), "link_h": self.spec.link_h}

    @staticmethod
    def features(x):
        """Return ``(psi_x, psi_y)`` for a ``(K, d)`` context block."""
        return x, np.sin(x)

    def contexts(self, rng):
        return self.nu + self.context_sd * rng.standard_normal(self.nu.shape)

    def gates(self, x):
        return self.h(np.sin(x) @ self.theta)

    def mean_rewards(self, x):
        return (x @ self.beta) * self.gates(x)

    def step(self, rng):
        """Fresh contexts and the index of the best arm for them."""
        x = self.contexts(rng)
        return x, int(np.argmax(self.mean_rewards(x)))

    def realize_reward(self, x, arm, rng):
        """Return ``(r, y, instantaneous_regret)`` for pulling ``arm``."""
        means = self.mean_rewards(x)
        gate = float(self.gates(x[arm : arm + 1])[0])
        y = int(rng.random() < gate)
        eps = float(self.spec.noise.sample(rng))
        r = float(x[arm] @ self.beta + eps) if y else 0.0
        return r, y, float(means.max() - means[arm])
