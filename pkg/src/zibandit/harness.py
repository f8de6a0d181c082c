"""Seeded replication runner, bound comparison and coverage checks.

Seed derivation
---------------
Every random stream is a ``numpy`` PCG64 generator seeded with a 64-bit
value obtained by folding a key tuple through the splitmix64 finaliser::

    h = mix(master); for k in keys: h = mix(h ^ k)

Keys per replication ``i``:

* environment parameters: ``(i, ENV_TAG)``
* shared contexts (contextual runs): ``(i, CONTEXT_TAG)``
* rewards seen by a policy: ``(i, POLICY_TAG, crc32(label), 0)``
* the policy's own randomness: ``(i, POLICY_TAG, crc32(label), 1)``

Keying policies by label rather than list position keeps a policy's trace
unchanged when other policies are added or removed.
"""

import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from .concentration import (
    HeavyMoment,
    SubWeibull,
    bernoulli_width,
    heavy_lower_width,
    heavy_trunc_level_analytic,
    naive_size_proxy,
    nonzero_validity_threshold,
    nonzero_width_oracle,
    product_ucb,
)
from .distributions import StudentT
from .env import CbEnv, CbEnvSpec, MabEnv, MabEnvSpec

MASK64 = (1 << 64) - 1
ENV_TAG = 0x656E76
CONTEXT_TAG = 0x637478
POLICY_TAG = 0x706F6C


def splitmix64(z):
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master, *keys):
    h = splitmix64(int(master) & MASK64)
    for k in keys:
        h = splitmix64(h ^ (int(k) & MASK64))
    return h


def derive_rng(master, *keys):
    return np.random.default_rng(derive_seed(master, *keys))


def label_key(label):
    return zlib.crc32(label.encode("utf-8"))


def checkpoint_rounds(horizon, n_points=200):
    """Up to ``n_points`` log-spaced rounds in ``[1, horizon]``, always ending at ``horizon``."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pts = np.unique(np.round(np.logspace(0.0, math.log10(horizon), n_points)).astype(np.int64))
    pts = pts[(pts >= 1) & (pts <= horizon)]
    if pts[-1] != horizon:
        pts = np.append(pts[:-1] if pts.size >= n_points else pts, horizon)
    return pts


@dataclass
class RegretTrace:
    policy: str
    replication: int
    rounds: np.ndarray
    cumulative_regret: np.ndarray
    pulls: np.ndarray = None  # per-arm pull counts (MAB only)
    decomposition_gap: float = 0.0  # |sum_k gap_k c_k - final regret|


@dataclass
class ExperimentConfig:
    """Resolved experiment.

    ``policies`` is a list of ``(label, estimator)`` pairs; estimators are
    cloned per replication.
    """

    kind: str
    env: object
    policies: list
    n_reps: int = 1
    master_seed: int = 0
    n_checkpoints: int = 200
    full_trace: bool = False

    def __post_init__(self):
        if self.kind not in ("mab", "contextual"):
            raise ValueError(f"experiment kind must be 'mab' or 'contextual', got {self.kind!r}")
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")
        if not self.policies:
            raise ValueError("at least one policy is required")
        labels = [lab for lab, _ in self.policies]
        if len(set(labels)) != len(labels):
            raise ValueError(f"policy labels must be unique, got {labels}")
        expected = MabEnvSpec if self.kind == "mab" else CbEnvSpec
        if not isinstance(self.env, expected):
            raise ValueError(f"kind {self.kind!r} needs a {expected.__name__}")

    @property
    def horizon(self):
        return self.env.horizon


@dataclass
class ExperimentResult:
    traces: list
    aggregate: list = field(default_factory=list)

    def trace_for(self, policy, replication):
        for tr in self.traces:
            if tr.policy == policy and tr.replication == replication:
                return tr
        raise KeyError((policy, replication))

    def final_mean(self, policy):
        vals = [tr.cumulative_regret[-1] for tr in self.traces if tr.policy == policy]
        return float(np.mean(vals))

    def mean_curve(self, policy):
        rows = [tr.cumulative_regret for tr in self.traces if tr.policy == policy]
        return self.traces[0].rounds, np.mean(rows, axis=0)


def _run_mab(cfg, label, estimator, rep):
    spec = cfg.env
    T = spec.horizon
    env = MabEnv(spec, derive_rng(cfg.master_seed, rep, ENV_TAG))
    key = label_key(label)
    stream = env.reward_stream(derive_rng(cfg.master_seed, rep, POLICY_TAG, key, 0))
    rng = derive_rng(cfg.master_seed, rep, POLICY_TAG, key, 1)
    policy = clone(estimator).reset(spec.k, T, env.arm_info())
    gaps = env.gaps
    inst = np.empty(T)
    pulls = np.zeros(spec.k, dtype=np.int64)
    for t in range(1, T + 1):
        arm = policy.select(t, rng)
        r, y = stream.draw(arm, t)
        policy.update(arm, r, y, t)
        pulls[arm] += 1
        inst[t - 1] = gaps[arm]
    cum = np.cumsum(inst)
    gap = abs(float(gaps @ pulls) - float(cum[-1]))
    return cum, pulls, gap


def _run_contextual(cfg, label, estimator, rep):
    spec = cfg.env
    T = spec.horizon
    env = CbEnv(spec, derive_rng(cfg.master_seed, rep, ENV_TAG))
    ctx_rng = derive_rng(cfg.master_seed, rep, CONTEXT_TAG)
    key = label_key(label)
    reward_rng = derive_rng(cfg.master_seed, rep, POLICY_TAG, key, 0)
    rng = derive_rng(cfg.master_seed, rep, POLICY_TAG, key, 1)
    policy = clone(estimator).reset(spec.k, T, spec.d, spec.d, env.arm_info())
    inst = np.empty(T)
    for t in range(1, T + 1):
        x = env.contexts(ctx_rng)
        psi_x, psi_y = env.features(x)
        arm = policy.select(t, psi_x, psi_y, rng)
        r, y, reg = env.realize_reward(x, arm, reward_rng)
        policy.update(psi_x[arm], psi_y[arm], r, y, t)
        inst[t - 1] = reg
    return np.cumsum(inst), None, 0.0


def _run_task(args):
    cfg, label, estimator, rep = args
    runner = _run_mab if cfg.kind == "mab" else _run_contextual
    cum, pulls, gap = runner(cfg, label, estimator, rep)
    if cfg.full_trace:
        rounds = np.arange(1, cfg.horizon + 1)
    else:
        rounds = checkpoint_rounds(cfg.horizon, cfg.n_checkpoints)
    return RegretTrace(label, rep, rounds, cum[rounds - 1], pulls, gap)


def worker_count():
    """Worker processes from ``ZIB_THREADS`` (default 1)."""
    raw = os.environ.get("ZIB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ZIB_THREADS must be an integer, got {raw!r}") from None
    return max(n, 1)


def aggregate_traces(traces):
    """Rows ``(policy, round, mean, std, n)``; ``std`` uses ``ddof=1`` when ``n > 1``."""
    rows = []
    order = []
    for tr in traces:
        if tr.policy not in order:
            order.append(tr.policy)
    for label in order:
        group = [tr for tr in traces if tr.policy == label]
        mat = np.stack([tr.cumulative_regret for tr in group])
        n = mat.shape[0]
        mean = mat.mean(axis=0)
        std = mat.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
        for rnd, m, s in zip(group[0].rounds, mean, std):
            rows.append((label, int(rnd), float(m), float(s), n))
    return rows


def run_experiment(cfg, n_workers=None):
    """Run every ``(policy, replication)`` pair and aggregate.

    Output order is ``(policy order in the config, replication)`` whatever
    the number of workers.
    """
    tasks = [(cfg, label, est, rep) for label, est in cfg.policies for rep in range(cfg.n_reps)]
    n_workers = worker_count() if n_workers is None else n_workers
    if n_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(tasks))) as pool:
            traces = list(pool.map(_run_task, tasks))
    else:
        traces = [_run_task(t) for t in tasks]
    return ExperimentResult(traces, aggregate_traces(traces))


# --- bound comparison -------------------------------------------------------

BOUND_METHODS = (
    "product",
    "naive_nonzero_param",
    "naive_emp_var",
    "naive_solved",
    "naive_true",
    "monte_carlo_quantile",
)


def parse_grid(spec):
    """``lo:hi:log|lin:count`` into a sorted array of distinct integers."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise ValueError(f"grid spec must be lo:hi:log|lin:count, got {spec!r}")
    try:
        lo, hi, count = int(parts[0]), int(parts[1]), int(parts[3])
    except ValueError:
        raise ValueError(f"grid bounds and count must be integers, got {spec!r}") from None
    scale = parts[2]
    if lo < 1 or hi < lo or count < 1 or scale not in ("log", "lin"):
        raise ValueError(f"invalid grid spec {spec!r}")
    if scale == "log":
        grid = np.geomspace(lo, hi, count)
    else:
        grid = np.linspace(lo, hi, count)
    grid = np.round(grid).astype(np.int64)
    if np.unique(grid).size != grid.size:
        raise ValueError(f"grid {spec!r} has repeated points after rounding")
    return grid


def bound_comparison(mu, sigma2, p, delta, n_grid, n_mc=10_000, seed=0):
    """Upper bounds for ``mu p`` from one Gaussian data stream.

    Returns rows ``(n, method, value)``. The product bound splits ``delta``
    evenly between the non-zero mean and the gate; naive bounds apply a
    sub-Gaussian width to the raw reward. The Monte-Carlo reference is the
    tightest valid bound of the form ``R_bar + q``: ``q`` is the ``1 - delta``
    quantile of ``mu p - mean(R_1..R_n)``, added to the observed ``R_bar``.
    """
    n_grid = np.asarray(n_grid, dtype=np.int64)
    rng = np.random.default_rng(seed)
    n_max = int(n_grid.max())
    y = (rng.random(n_max) < p).astype(float)
    x = mu + math.sqrt(sigma2) * rng.standard_normal(n_max)
    r = x * y
    cy = np.cumsum(y)
    cxy = np.cumsum(r)
    cr2 = np.cumsum(r * r)
    tail = SubWeibull(2.0, math.sqrt(sigma2))
    true_proxy = naive_size_proxy(mu, p, sigma2)
    log_term = math.log(2.0 / delta)
    mean_r = mu * p
    mc_rng = np.random.default_rng(seed + 1)
    rows = []
    for n in n_grid:
        n = int(n)
        k = cy[n - 1]
        rbar = cxy[n - 1] / n
        ybar = k / n
        x_star = cxy[n - 1] / k if k else 0.0
        u_x = nonzero_width_oracle(n, p, tail, delta / 2.0)
        u_y = bernoulli_width(n, delta / 2.0)
        emp_var = max((cr2[n - 1] - n * rbar * rbar) / (n - 1), 1e-12) if n > 1 else 1e-12
        solved = naive_size_proxy(x_star, ybar, sigma2)
        # sample mean of n zero-inflated rewards, drawn exactly as a
        # binomial count of non-zeros plus a Gaussian sum
        counts = mc_rng.binomial(n, p, n_mc)
        sums = counts * mu + np.sqrt(counts * sigma2) * mc_rng.standard_normal(n_mc)
        quantile = float(np.quantile(mean_r - sums / n, 1.0 - delta))
        values = {
            "product": product_ucb(x_star, ybar, u_x, u_y),
            "naive_nonzero_param": rbar + math.sqrt(2.0 * sigma2 * log_term / n),
            "naive_emp_var": rbar + math.sqrt(2.0 * emp_var * log_term / n),
            "naive_solved": rbar + math.sqrt(2.0 * solved * log_term / n),
            "naive_true": rbar + math.sqrt(2.0 * true_proxy * log_term / n),
            "monte_carlo_quantile": rbar + quantile,
        }
        for method in BOUND_METHODS:
            rows.append((n, method, float(values[method])))
    return rows


# --- coverage ---------------------------------------------------------------


@dataclass(frozen=True)
class CoverageRow:
    bound: str
    n: int
    delta: float
    trials: int
    violations: int
    status: str  # "pass", "fail" or "validity unmet"

    @property
    def rate(self):
        return self.violations / self.trials if self.trials else float("nan")

    @property
    def tolerance(self):
        return self.delta + 3.0 * math.sqrt(self.delta * (1.0 - self.delta) / self.trials)


def _status(violations, trials, delta):
    tol = delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)
    return "pass" if violations / trials <= tol else "fail"


def light_coverage(mu=1.0, sigma2=1.0, p=0.5, delta=0.05, n=200, trials=10_000, seed=0,
                   chunk=2_000):
    """Violation count of the product bound ``mu p <= (X* + U_X)(Y + U_Y)``."""
    tail = SubWeibull(2.0, math.sqrt(sigma2))
    if n < nonzero_validity_threshold(p, delta / 2.0):
        return CoverageRow("light_product", n, delta, 0, 0, "validity unmet")
    u_x = nonzero_width_oracle(n, p, tail, delta / 2.0)
    u_y = bernoulli_width(n, delta / 2.0)
    rng = np.random.default_rng(seed)
    violations = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        y = rng.random((m, n)) < p
        x = mu + math.sqrt(sigma2) * rng.standard_normal((m, n))
        k = y.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            x_star = np.where(k > 0, (x * y).sum(axis=1) / k, 0.0)
        ucb = product_ucb(x_star, k / n, u_x, u_y)
        violations += int(np.sum(mu * p > ucb))
        done += m
    return CoverageRow("light_product", n, delta, trials, violations, _status(violations, trials, delta))


def heavy_coverage(p=0.5, delta=0.05, n=500, df=3.0, eps=0.5, mu=1.0, trials=10_000, seed=0,
                   chunk=2_000):
    """Violation count of the trimmed-mean lower deviation.

    The event is ``mu - X** >= g(p, eps) M^(1/(1+eps)) (log(2/delta)/n)^(eps/(1+eps))``
    with ``X**`` the mean over non-zero observations of ``X 1{|X| <= b_j}`` and
    ``b_j`` the analytic threshold at the ``j``-th non-zero observation.
    """
    if n < nonzero_validity_threshold(p, delta):
        return CoverageRow("heavy_trimmed", n, delta, 0, 0, "validity unmet")
    moment = StudentT(df).abs_moment(1.0 + eps)
    tail = HeavyMoment(eps, moment)
    width = heavy_lower_width(n, p, tail, delta)
    # thresholds for j = 1..n non-zero observations
    levels = np.array([heavy_trunc_level_analytic(j, tail, delta) for j in range(1, n + 1)])
    rng = np.random.default_rng(seed)
    violations = 0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        y = rng.random((m, n)) < p
        x = mu + rng.standard_t(df, (m, n))
        j = np.cumsum(y, axis=1)
        bound = levels[np.maximum(j, 1) - 1]
        keep = y & (np.abs(x) <= bound)
        k = y.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            x_ss = np.where(k > 0, (x * keep).sum(axis=1) / k, 0.0)
        violations += int(np.sum(mu - x_ss >= width))
        done += m
    return CoverageRow("heavy_trimmed", n, delta, trials, violations, _status(violations, trials, delta))


def coverage_suite(suite="all", trials=10_000, seed=0):
    """Rows for the ``light`` and/or ``heavy`` checks, plus a below-threshold gate row."""
    if suite not in ("light", "heavy", "all"):
        raise ValueError(f"suite must be light, heavy or all, got {suite!r}")
    rows = []
    if suite in ("light", "all"):
        rows.append(light_coverage(trials=trials, seed=seed))
        rows.append(light_coverage(n=30, trials=trials, seed=seed))
    if suite in ("heavy", "all"):
        rows.append(heavy_coverage(trials=trials, seed=seed))
    return rows
