"""Zero-inflated generalized linear contextual bandits.

The non-zero part follows ``X = g(psi_x' beta) + noise`` and the gate
``Y ~ Bernoulli(h(psi_y' theta))``. Both parameter vectors live in the closed
unit ball. Estimates solve the estimating equations

    sum_{Y=1} [R - g(psi_x' beta)] psi_x = 0,   sum [Y - h(psi_y' theta)] psi_y = 0

restricted to the ball (see :class:`EstimatingEquationGLM`).

Contextual policies share the contract

``reset(n_arms, horizon, d, q, arm_info=None)``;
``select(t, psi_x, psi_y, rng)`` with ``(K, d)`` and ``(K, q)`` feature blocks;
``update(psi_x_a, psi_y_a, r, y, t)`` for the pulled arm.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.optimize import brentq
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .distributions import sample_mvnormal
from .links import get_link

# --- estimating-equation solver ---------------------------------------------


@dataclass(frozen=True)
class EEResult:
    coef: np.ndarray
    converged: bool
    residual_norm: float
    n_iter: int
    fitted: bool = True


def _project(v, radius):
    n = np.linalg.norm(v)
    return v if n <= radius else v * (radius / n)


def ball_least_squares(a, b, radius=1.0):
    """Exact ``argmin ||a x - b||`` over ``||x|| <= radius``.

    Uses the eigendecomposition of ``a'a`` and solves the secular equation
    for the Lagrange multiplier when the unconstrained solution is outside.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    hess = a.T @ a
    grad = a.T @ b
    lam, q = np.linalg.eigh(hess)
    coef = q.T @ grad
    floor = max(lam.max(), 1.0) * 1e-12
    if lam.min() > floor:
        x = q @ (coef / lam)
        if np.linalg.norm(x) <= radius:
            return x

    def excess(mu):
        return np.sqrt(np.sum((coef / (lam + mu)) ** 2)) - radius

    lo = max(0.0, -lam.min()) + floor
    if excess(lo) <= 0.0:
        # rank-deficient hessian with a small minimum-norm solution
        return q @ np.where(lam > floor, coef / np.where(lam > floor, lam, 1.0), 0.0)
    hi = lo + np.linalg.norm(grad) / radius + 1.0
    while excess(hi) > 0.0:
        hi *= 2.0
    mu = brentq(excess, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return q @ (coef / (lam + mu))


def solve_estimating_equation(w, y, link, radius=1.0, max_iter=200, tol=1e-8, x0=None):
    """Point of the ``radius`` ball minimising ``||w'(y - link(w x))||``.

    Identity links reduce to an exact ball-constrained least-squares problem
    on the normal equations. Other links take damped Gauss-Newton steps on
    ``0.5 ||G||^2`` whose linearised subproblem is solved exactly over the
    ball, with backtracking along the feasible segment. A fit counts as
    converged when ``||G|| <= tol`` or the constrained step vanishes.
    """
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    dim = w.shape[1]
    if w.shape[0] == 0:
        return EEResult(np.zeros(dim), False, 0.0, 0, fitted=False)
    if link.name == "identity":
        hess = w.T @ w
        rhs = w.T @ y
        x = ball_least_squares(hess, rhs, radius)
        res = float(np.linalg.norm(rhs - hess @ x))
        interior = np.linalg.norm(x) < radius * (1.0 - 1e-12)
        return EEResult(x, bool(res <= tol * (1.0 + np.linalg.norm(rhs)) or not interior), res, 1)

    x = np.zeros(dim) if x0 is None else _project(np.asarray(x0, dtype=float), radius)

    def residual(v):
        eta = w @ v
        return w.T @ (y - link.fn(eta)), eta

    g, eta = residual(x)
    f = 0.5 * g @ g
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        if math.sqrt(2.0 * f) <= tol:
            converged = True
            break
        jac = w.T @ (link.deriv(eta)[:, None] * w)  # -dG/dx, symmetric PSD
        # Gauss-Newton model G(x') ~ G(x) - jac (x' - x), minimised over the ball
        target = ball_least_squares(jac, g + jac @ x, radius)
        direction = target - x
        if np.linalg.norm(direction) <= tol * (1.0 + np.linalg.norm(x)):
            converged = True
            break
        s = 1.0
        moved = False
        for _ in range(40):
            cand = x + s * direction  # stays feasible: the ball is convex
            gc, ec = residual(cand)
            fc = 0.5 * gc @ gc
            if fc < f:
                x, g, eta, f = cand, gc, ec, fc
                moved = True
                break
            s *= 0.5
        if not moved:
            break
    return EEResult(x, converged, math.sqrt(2.0 * f), n_iter)


class EstimatingEquationGLM(RegressorMixin, BaseEstimator):
    """GLM fitted by solving its estimating equation inside a norm ball.

    Parameters
    ----------
    link : {"identity", "logit", "probit"}
    radius : float
        Radius of the parameter ball.
    max_iter : int
    tol : float
        Tolerance on the estimating-equation residual norm.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    converged_ : bool
    residual_norm_ : float
    n_iter_ : int
    """

    def __init__(self, link="identity", radius=1.0, max_iter=200, tol=1e-8):
        self.link = link
        self.radius = radius
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        res = solve_estimating_equation(
            X, y, get_link(self.link), self.radius, self.max_iter, self.tol
        )
        self.coef_ = res.coef
        self.converged_ = res.converged
        self.residual_norm_ = res.residual_norm
        self.n_iter_ = res.n_iter
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return get_link(self.link)(X @ self.coef_)


def fit_theta(w, y, link="probit", radius=1.0, x0=None):
    """Gate parameter from all observations."""
    return solve_estimating_equation(w, y, get_link(link), radius, x0=x0)


def fit_beta(z, r, link="identity", radius=1.0, x0=None):
    """Non-zero parameter from the observations with ``Y = 1``."""
    return solve_estimating_equation(z, r, get_link(link), radius, x0=x0)


# --- radii and scores -------------------------------------------------------


def ellipsoid_radius(t, dim, delta, lam, kappa=1.0, sigma=1.0):
    """``kappa^-1 sigma sqrt(4 log(1/delta) + dim log(1 + t / (lam dim)))``."""
    return sigma / kappa * math.sqrt(4.0 * math.log(1.0 / delta) + dim * math.log1p(t / (lam * dim)))


def ts_radius(dim, delta, horizon):
    """``sqrt(dim log(1/delta) log T)``."""
    return math.sqrt(dim * math.log(1.0 / delta) * math.log(horizon))


def inverse_norms(factor, z):
    """Row-wise ``||z_i||_{A^-1}`` given ``cho_factor(A, lower=True)``."""
    z = np.atleast_2d(z)
    v = solve_triangular(factor[0], z.T, lower=True, check_finite=False)
    return np.sqrt(np.sum(v * v, axis=0))


def ucb_score(psi_x, psi_y, beta_hat, theta_hat, v_factor, u_factor, rho_x, rho_y):
    """``[psi_x' beta + rho_x ||psi_x||_{V^-1}] [psi_y' theta + rho_y ||psi_y||_{U^-1}]``."""
    upper_x = np.atleast_2d(psi_x) @ beta_hat + rho_x * inverse_norms(v_factor, psi_x)
    upper_y = np.atleast_2d(psi_y) @ theta_hat + rho_y * inverse_norms(u_factor, psi_y)
    return upper_x * upper_y


def random_period_tau(d, q, delta, p_star, sigma_z2, sigma_w2, c1=1.0, c2=1.0, c3=1.0, c4=1.0):
    """Length of the initial uniform-exploration period."""
    for name, val in (("d", d), ("q", q), ("p_star", p_star), ("sigma_z2", sigma_z2), ("sigma_w2", sigma_w2)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    log_d = math.log(1.0 / delta)
    first = ((c1 * math.sqrt(d / p_star) + c2 * math.sqrt(log_d / p_star)) / sigma_z2) ** 2 + 2.0 / (
        p_star * sigma_z2
    )
    second = 4.0 * log_d / p_star**2
    third = ((c3 * math.sqrt(q) + c4 * math.sqrt(log_d)) / sigma_w2) ** 2 + 2.0 / sigma_w2
    return int(math.ceil(max(first, second, third)))


def lints_scale(sigma, d, n_arms, horizon, delta):
    """``phi^2 = 24 sigma^2 d / (K^2 eps) log(1/delta)`` with ``eps = 1/log T``."""
    eps = 1.0 / math.log(horizon)
    return 24.0 * sigma**2 * d / (n_arms**2 * eps) * math.log(1.0 / delta)


class _Design:
    """Ridged Gram matrix ``lam I + sum z z'`` with a lazily refreshed factor."""

    def __init__(self, dim, lam):
        self.mat = lam * np.eye(dim)
        self.lam = lam
        self._factor = None

    def add(self, z):
        self.mat += np.outer(z, z)
        self._factor = None

    @property
    def factor(self):
        if self._factor is None:
            self._factor = cho_factor(self.mat, lower=True, check_finite=False)
        return self._factor

    def inverse_factor(self):
        """``L^-T`` so that ``L^-T z`` has covariance ``A^-1``."""
        low = self.factor[0]
        inv = solve_triangular(low, np.eye(low.shape[0]), lower=True, check_finite=False)
        return inv.T

    def solve(self, b):
        return cho_solve(self.factor, b, check_finite=False)


class _History:
    """Growable observation log."""

    def __init__(self, dim, capacity=256):
        self.feat = np.empty((capacity, dim))
        self.target = np.empty(capacity)
        self.n = 0

    def append(self, z, v):
        if self.n == self.feat.shape[0]:
            self.feat = np.concatenate([self.feat, np.empty_like(self.feat)])
            self.target = np.concatenate([self.target, np.empty_like(self.target)])
        self.feat[self.n] = z
        self.target[self.n] = v
        self.n += 1

    @property
    def x(self):
        return self.feat[: self.n]

    @property
    def y(self):
        return self.target[: self.n]


# --- policies -----------------------------------------------------------------


class ContextualPolicy(BaseEstimator):
    def reset(self, n_arms, horizon, d, q, arm_info=None):
        self.n_arms_ = int(n_arms)
        self.horizon_ = int(horizon)
        self.d_ = int(d)
        self.q_ = int(q)
        self.arm_info_ = arm_info or {}
        self._reset_extra()
        return self

    def _reset_extra(self):
        pass

    def update(self, psi_x, psi_y, r, y, t):
        raise NotImplementedError


class ZiGlmUCB(ContextualPolicy):
    """UCB with separate GLM fits for the non-zero part and the gate.

    Parameters
    ----------
    link_g, link_h : str
        Links of the non-zero mean and the gate.
    sigma : float
        Sub-Gaussian scale of the noise.
    delta : float or None
        ``None`` means ``1 / T``.
    lambda_v, lambda_u : float
        Ridge levels of the two design matrices.
    tau : int or None
        Length of the uniform-exploration period; ``None`` evaluates
        :func:`random_period_tau` with ``p_star``, ``sigma_z2``, ``sigma_w2``
        and ``c1..c4``.
    kappa_g, kappa_h : float or None
        Link-derivative lower bounds; ``None`` takes the infimum over linear
        predictors in ``[-1, 1]``.
    score : {"linear", "link"}
        ``"linear"`` multiplies optimistic linear predictors; ``"link"``
        multiplies optimistic link values ``g(.) + width`` and ``h(.) + width``.
    """

    def __init__(self, link_g="identity", link_h="probit", sigma=1.0, delta=None, lambda_v=1.0,
                 lambda_u=1.0, tau=None, p_star=0.3, sigma_z2=0.4, sigma_w2=0.4, c1=1.0, c2=1.0,
                 c3=1.0, c4=1.0, kappa_g=None, kappa_h=None, score="linear"):
        self.link_g = link_g
        self.link_h = link_h
        self.sigma = sigma
        self.delta = delta
        self.lambda_v = lambda_v
        self.lambda_u = lambda_u
        self.tau = tau
        self.p_star = p_star
        self.sigma_z2 = sigma_z2
        self.sigma_w2 = sigma_w2
        self.c1 = c1
        self.c2 = c2
        self.c3 = c3
        self.c4 = c4
        self.kappa_g = kappa_g
        self.kappa_h = kappa_h
        self.score = score

    def _reset_extra(self):
        if self.score not in ("linear", "link"):
            raise ValueError(f"score must be 'linear' or 'link', got {self.score!r}")
        self.g_ = get_link(self.link_g)
        self.h_ = get_link(self.link_h)
        self.delta_ = self.delta if self.delta is not None else 1.0 / self.horizon_
        self.kappa_g_ = self.kappa_g if self.kappa_g is not None else self.g_.kappa(1.0)
        self.kappa_h_ = self.kappa_h if self.kappa_h is not None else self.h_.kappa(1.0)
        if self.tau is None:
            self.tau_ = random_period_tau(self.d_, self.q_, self.delta_, self.p_star, self.sigma_z2,
                                          self.sigma_w2, self.c1, self.c2, self.c3, self.c4)
        else:
            self.tau_ = int(self.tau)
        self.v_design_ = _Design(self.d_, self.lambda_v)
        self.u_design_ = _Design(self.q_, self.lambda_u)
        self.hist_all_ = _History(self.q_)
        self.hist_nonzero_ = _History(self.d_)
        self.beta_hat_ = np.zeros(self.d_)
        self.theta_hat_ = np.zeros(self.q_)
        self._stale = False

    def update(self, psi_x, psi_y, r, y, t):
        self.u_design_.add(psi_y)
        self.hist_all_.append(psi_y, y)
        if y:
            self.v_design_.add(psi_x)
            self.hist_nonzero_.append(psi_x, r)
        self._stale = True

    def refit(self):
        if not self._stale:
            return
        if self.hist_nonzero_.n:
            self.beta_hat_ = fit_beta(self.hist_nonzero_.x, self.hist_nonzero_.y, self.link_g,
                                      x0=self.beta_hat_).coef
        if self.hist_all_.n:
            self.theta_hat_ = fit_theta(self.hist_all_.x, self.hist_all_.y, self.link_h,
                                        x0=self.theta_hat_).coef
        self._stale = False

    def radii(self, t):
        rho_x = ellipsoid_radius(t, self.d_, self.delta_, self.lambda_v, self.kappa_g_, self.sigma)
        rho_y = ellipsoid_radius(t, self.q_, self.delta_, self.lambda_u, self.kappa_h_, 1.0)
        return rho_x, rho_y

    def scores(self, t, psi_x, psi_y):
        self.refit()
        rho_x, rho_y = self.radii(t)
        if self.score == "linear":
            return ucb_score(psi_x, psi_y, self.beta_hat_, self.theta_hat_,
                             self.v_design_.factor, self.u_design_.factor, rho_x, rho_y)
        upper_x = self.g_(psi_x @ self.beta_hat_) + rho_x * inverse_norms(self.v_design_.factor, psi_x)
        upper_y = self.h_(psi_y @ self.theta_hat_) + rho_y * inverse_norms(self.u_design_.factor, psi_y)
        return upper_x * upper_y

    def select(self, t, psi_x, psi_y, rng):
        if t <= self.tau_:
            return int(rng.integers(self.n_arms_))
        return int(np.argmax(self.scores(t, psi_x, psi_y)))


class ZiGlmTS(ZiGlmUCB):
    """Thompson sampling counterpart of :class:`ZiGlmUCB`.

    One ``(beta, theta)`` pair is drawn per round and shared by all arms;
    radii are ``sqrt(dim log(1/delta) log T)``.
    """

    def draw(self, rng):
        self.refit()
        vx = ts_radius(self.d_, self.delta_, self.horizon_)
        vy = ts_radius(self.q_, self.delta_, self.horizon_)
        beta = sample_mvnormal(self.beta_hat_, vx * self.v_design_.inverse_factor(), rng)
        theta = sample_mvnormal(self.theta_hat_, vy * self.u_design_.inverse_factor(), rng)
        return beta, theta

    def select(self, t, psi_x, psi_y, rng):
        if t <= self.tau_:
            return int(rng.integers(self.n_arms_))
        beta, theta = self.draw(rng)
        if self.score == "linear":
            return int(np.argmax((psi_x @ beta) * (psi_y @ theta)))
        return int(np.argmax(self.g_(psi_x @ beta) * self.h_(psi_y @ theta)))


class LinUCB(ContextualPolicy):
    """Ridge-regression UCB on the raw reward, ignoring the gate.

    Score ``psi_x' beta + sqrt(rho_x) ||psi_x||_{U^-1}`` with
    ``U = lambda I + sum psi_x psi_x'``.
    """

    def __init__(self, sigma=1.0, delta=None, lam=1.0):
        self.sigma = sigma
        self.delta = delta
        self.lam = lam

    def _reset_extra(self):
        self.delta_ = self.delta if self.delta is not None else 1.0 / self.horizon_
        self.design_ = _Design(self.d_, self.lam)
        self.xty_ = np.zeros(self.d_)

    def update(self, psi_x, psi_y, r, y, t):
        self.design_.add(psi_x)
        self.xty_ += r * psi_x

    @property
    def beta_hat_(self):
        return self.design_.solve(self.xty_)

    def select(self, t, psi_x, psi_y, rng):
        rho = ellipsoid_radius(t, self.d_, self.delta_, self.lam, 1.0, self.sigma)
        s = psi_x @ self.beta_hat_ + math.sqrt(rho) * inverse_norms(self.design_.factor, psi_x)
        return int(np.argmax(s))


class LinTS(LinUCB):
    """Gaussian Thompson sampling on the ridge estimate of the raw reward."""

    def select(self, t, psi_x, psi_y, rng):
        phi2 = lints_scale(self.sigma, self.d_, self.n_arms_, self.horizon_, self.delta_)
        beta = sample_mvnormal(self.beta_hat_, math.sqrt(phi2) * self.design_.inverse_factor(), rng)
        return int(np.argmax(psi_x @ beta))


def integrated_fit(z, w, r, link="probit", radius=1.0, max_outer=20, inner_steps=10, x0=None):
    """Alternating least squares for ``R ~ (z' beta) h(w' theta)``.

    The ``beta`` half-step is an exact ball-constrained weighted least-squares
    solve; the ``theta`` half-step runs projected gradient with backtracking.
    Returns ``(beta, theta, objective_trace, converged)`` where the trace
    holds the squared-residual objective after every half-step.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    d, q = z.shape[1], w.shape[1]
    if z.shape[0] == 0:
        return np.zeros(d), np.zeros(q), [], False
    h = get_link(link)
    if x0 is None:
        beta, theta = np.zeros(d), np.zeros(q)
    else:
        beta, theta = (np.asarray(v, dtype=float).copy() for v in x0)

    def objective(b, th):
        res = r - (z @ b) * h(w @ th)
        return float(res @ res)

    trace = [objective(beta, theta)]
    converged = False
    for _ in range(max_outer):
        gate = h(w @ theta)
        cand = ball_least_squares(z * gate[:, None], r, radius)
        if objective(cand, theta) <= trace[-1]:
            beta = cand
        trace.append(objective(beta, theta))
        lin = z @ beta
        f = trace[-1]
        for _ in range(inner_steps):
            eta = w @ theta
            res = r - lin * h(eta)
            grad = -2.0 * w.T @ (res * lin * h.deriv(eta))
            step = 1.0
            moved = False
            for _ in range(30):
                cand = _project(theta - step * grad, radius)
                fc = objective(beta, cand)
                if fc < f:
                    theta, f, moved = cand, fc, True
                    break
                step *= 0.5
            if not moved:
                break
        trace.append(f)
        if trace[-3] - trace[-1] <= 1e-10 * (1.0 + trace[-3]):
            converged = True
            break
    return beta, theta, trace, converged


class IntegratedUCB(ContextualPolicy):
    """Joint fit of ``(beta, theta)`` with a stacked-feature width.

    Score ``(psi_x' beta) h(psi_y' theta) + sqrt(max(rho_x, rho_y)) ||[psi_x; psi_y]||_{W^-1}``.
    The joint fit is warm-started and refreshed every ``refit_every`` updates
    because each refit touches the whole history.
    """

    def __init__(self, link_h="probit", sigma=1.0, delta=None, lam=1.0, max_outer=3, refit_every=25):
        self.link_h = link_h
        self.sigma = sigma
        self.delta = delta
        self.lam = lam
        self.max_outer = max_outer
        self.refit_every = refit_every

    def _reset_extra(self):
        self.h_ = get_link(self.link_h)
        self.delta_ = self.delta if self.delta is not None else 1.0 / self.horizon_
        self.design_ = _Design(self.d_ + self.q_, self.lam)
        self.hist_ = _History(self.d_ + self.q_)
        self.beta_hat_ = np.zeros(self.d_)
        self.theta_hat_ = np.zeros(self.q_)
        self._stale = False

    def update(self, psi_x, psi_y, r, y, t):
        stacked = np.concatenate([psi_x, psi_y])
        self.design_.add(stacked)
        self.hist_.append(stacked, r)
        n = self.hist_.n
        if n <= self.refit_every or n % self.refit_every == 0:
            self._stale = True

    def refit(self):
        if self._stale and self.hist_.n:
            feat = self.hist_.x
            self.beta_hat_, self.theta_hat_, _, _ = integrated_fit(
                feat[:, : self.d_], feat[:, self.d_ :], self.hist_.y, self.link_h,
                max_outer=self.max_outer, x0=(self.beta_hat_, self.theta_hat_))
        self._stale = False

    def select(self, t, psi_x, psi_y, rng):
        self.refit()
        rho_x = ellipsoid_radius(t, self.d_, self.delta_, self.lam, 1.0, self.sigma)
        rho_y = ellipsoid_radius(t, self.q_, self.delta_, self.lam, 1.0, 1.0)
        stacked = np.hstack([psi_x, psi_y])
        point = (psi_x @ self.beta_hat_) * self.h_(psi_y @ self.theta_hat_)
        width = math.sqrt(max(rho_x, rho_y)) * inverse_norms(self.design_.factor, stacked)
        return int(np.argmax(point + width))


class IntegratedTS(IntegratedUCB):
    """Thompson sampling around the joint fit, covariance ``phi^2 W^-1``."""

    def select(self, t, psi_x, psi_y, rng):
        self.refit()
        phi2 = lints_scale(self.sigma, max(self.d_, self.q_), self.n_arms_, self.horizon_, self.delta_)
        mean = np.concatenate([self.beta_hat_, self.theta_hat_])
        draw = sample_mvnormal(mean, math.sqrt(phi2) * self.design_.inverse_factor(), rng)
        beta, theta = draw[: self.d_], draw[self.d_ :]
        return int(np.argmax((psi_x @ beta) * self.h_(psi_y @ theta)))


class ContextualOracle(ContextualPolicy):
    """Plays the arm with the largest true mean; needs ``beta``, ``theta``, ``link_h``."""

    def _reset_extra(self):
        try:
            self.beta_ = np.asarray(self.arm_info_["beta"])
            self.theta_ = np.asarray(self.arm_info_["theta"])
            self.h_ = get_link(self.arm_info_["link_h"])
        except KeyError as exc:
            raise ValueError(f"the oracle needs arm_info[{exc.args[0]!r}]") from None

    def update(self, psi_x, psi_y, r, y, t):
        pass

    def select(self, t, psi_x, psi_y, rng):
        return int(np.argmax((psi_x @ self.beta_) * self.h_(psi_y @ self.theta_)))


CONTEXTUAL_POLICIES = {
    "zi_glm_ucb": ZiGlmUCB,
    "zi_glm_ts": ZiGlmTS,
    "lin_ucb": LinUCB,
    "lin_ts": LinTS,
    "integrated_ucb": IntegratedUCB,
    "integrated_ts": IntegratedTS,
    "oracle": ContextualOracle,
}
