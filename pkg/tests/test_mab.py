import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from zibandit.concentration import SubWeibull, bernoulli_width, nonzero_width_estimated
from zibandit.distributions import NEG_INF_CLIP
from zibandit.mab import (
    MAB_POLICIES,
    DirectTS,
    NaiveUCB,
    OraclePolicy,
    ZiTS,
    ZiUCB,
    ZiUCBHeavy,
    argmax_tiebreak,
)

ARM_INFO = {"means": np.array([0.1, 0.5, 0.3]), "size_proxy": np.array([1.0, 1.0, 1.0])}


def _fresh(name, k=3, horizon=1000, **params):
    return MAB_POLICIES[name](**params).reset(k, horizon, ARM_INFO if k == 3 else None)


@pytest.mark.parametrize("name", [n for n in MAB_POLICIES if n != "oracle"])
def test_forced_exploration(name):
    pol = _fresh(name, k=3)
    rng = np.random.default_rng(0)
    for t in range(1, 4):
        arm = pol.select(t, rng)
        assert arm == t - 1
        pol.update(arm, 1.0, 1, t)
    assert np.all(pol.count_ == 1)


@pytest.mark.parametrize("name", list(MAB_POLICIES))
def test_sklearn_contract(name):
    est = MAB_POLICIES[name]()
    twin = clone(est)
    assert twin.get_params() == est.get_params()


def test_oracle_plays_best():
    pol = OraclePolicy().reset(3, 10, ARM_INFO)
    assert {pol.select(t, None) for t in range(1, 11)} == {1}


@pytest.mark.parametrize("name", [n for n in MAB_POLICIES if n != "oracle"])
def test_selection_in_range(name):
    pol = _fresh(name, k=3, horizon=300)
    rng = np.random.default_rng(1)
    data = np.random.default_rng(2)
    for t in range(1, 301):
        arm = pol.select(t, rng)
        assert 0 <= arm < 3
        y = int(data.random() < 0.4)
        pol.update(arm, y * (1.0 + data.standard_normal()), y, t)


class TestTieBreak:
    def test_uniform_ties(self):
        rng = np.random.default_rng(3)
        k = 5
        counts = np.bincount([argmax_tiebreak(np.ones(k), rng) for _ in range(10**4)], minlength=k)
        assert np.all(np.abs(counts / 10**4 - 1 / k) <= 0.02)

    def test_strict(self):
        assert argmax_tiebreak(np.array([2.0, 1.0]), np.random.default_rng(0)) == 0

    def test_initial_ucb_ties(self):
        pol = ZiUCB().reset(4, 100)
        rng = np.random.default_rng(4)
        counts = np.bincount([pol._select(5, rng) for _ in range(10**4)], minlength=4)
        assert np.all(np.abs(counts / 10**4 - 0.25) <= 0.02)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=8), st.floats(0.01, 100),
           st.integers(0, 2**32 - 1))
    def test_scale_invariance(self, vals, scale, seed):
        vals = np.asarray(vals)
        a = argmax_tiebreak(vals, np.random.default_rng(seed))
        b = argmax_tiebreak(vals * scale, np.random.default_rng(seed))
        if np.flatnonzero(vals == vals.max()).size == np.flatnonzero(vals * scale == (vals * scale).max()).size:
            assert a == b


class TestZiUCB:
    def test_first_pull_nonzero(self):
        pol = ZiUCB().reset(2, 100)
        pol.update(0, 2.0, 1, 1)
        assert pol.p_hat_[0] == 1.0
        assert pol.u_mu_[0] > 2.0

    def test_first_pull_zero(self):
        pol = ZiUCB().reset(2, 100)
        pol.update(0, 0.0, 0, 1)
        assert pol.p_hat_[0] == 0.0
        assert pol.u_mu_[0] == 1.0

    def test_widths_match_concentration(self):
        T = 500
        pol = ZiUCB(theta=2.0, size_c=1.0).reset(1, T)
        rewards = [(1.5, 1), (0.0, 0), (2.5, 1), (0.0, 0), (0.0, 0)]
        for t, (r, y) in enumerate(rewards, start=1):
            pol.update(0, r, y, t)
        delta = 4.0 / T**2
        st_ = pol.arm_state(0)
        assert st_.p_hat == pytest.approx(0.4)
        assert st_.u_p == pytest.approx(0.4 + bernoulli_width(5, delta), rel=1e-12)
        # U^mu was last refreshed at the third pull (c=3, p_hat=2/3)
        expect = 2.0 + nonzero_width_estimated(3, 2.0 / 3.0, SubWeibull(2.0, 1.0), delta)
        assert st_.u_mu == pytest.approx(expect, rel=1e-12)

    def test_rejects_bad_delta(self):
        with pytest.raises(ValueError):
            ZiUCB(delta=1.5).reset(2, 10)

    def test_horizon_shorter_than_arms(self):
        with pytest.raises(ValueError):
            ZiUCB().reset(5, 3)


@given(st.lists(st.tuples(st.integers(0, 3), st.booleans(), st.floats(-10, 10).filter(lambda v: v != 0)),
                min_size=1, max_size=200))
@settings(max_examples=60)
def test_p_hat_recurrence_exact(pulls):
    for cls in (ZiUCB, ZiTS, NaiveUCB):
        pol = cls().reset(4, 1000)
        nonzero = {k: [] for k in range(4)}
        for t, (arm, y, x) in enumerate(pulls, start=1):
            r = x if y else 0.0
            pol.update(arm, r, int(y), t)
            if y:
                nonzero[arm].append(x)
        for k in range(4):
            c = pol.count_[k]
            assert pol.nonzero_count_[k] <= c
            if c:
                assert abs(pol.p_hat_[k] - pol.nonzero_count_[k] / c) <= 1e-12
            if nonzero[k]:
                assert pol.mu_hat_[k] == pytest.approx(np.mean(nonzero[k]), rel=1e-9, abs=1e-9)


class TestHeavy:
    def test_plain_mean_when_small(self):
        pol = ZiUCBHeavy(eps=1.0, moment_m=1.0).reset(1, 1000)
        vals = [0.5, 0.7, 0.3, 0.6]
        for t, v in enumerate(vals, start=2):
            pol.update(0, v, 1, t)
        assert pol.trimmed_mean(0) == pytest.approx(np.mean(vals))

    def test_outlier_counted_but_dropped(self):
        pol = ZiUCBHeavy().reset(1, 1000)
        pol.update(0, 1.0, 1, 2)
        pol.update(0, 1e9, 1, 3)
        assert pol.nonzero_count_[0] == 2
        assert pol.trimmed_mean(0) == pytest.approx(0.5)

    def test_gate_width(self):
        pol = ZiUCBHeavy().reset(1, 100)
        pol.update(0, 0.0, 0, 2)
        pol.update(0, 1.0, 1, 3)
        assert pol.u_p_[0] == pytest.approx(0.5 + math.sqrt(2 * math.log(9) / 2), rel=1e-12)

    def test_mu_width(self):
        pol = ZiUCBHeavy(eps=1.0, moment_m=4.0).reset(1, 100)
        pol.update(0, 0.2, 1, 5)
        assert pol.u_mu_[0] == pytest.approx(0.2 + 2.0 * math.sqrt(32 * math.log(5)), rel=1e-12)


class TestZiTS:
    def test_single_arm(self):
        pol = ZiTS().reset(1, 50)
        rng = np.random.default_rng(0)
        for t in range(1, 51):
            assert pol.select(t, rng) == 0
            pol.update(0, 1.0, 1, t)

    def test_clip_dominates(self):
        pol = ZiTS().reset(2, 100)
        for arm in range(2):
            pol.update(arm, 1.0, 1, arm + 1)
        pol.clip_p_[:] = [2.0, 3.0]
        pol.clip_mu_[:] = [50.0, 10.0]
        rng = np.random.default_rng(1)
        assert {pol.select(t, rng) for t in range(3, 200)} == {0}

    def test_symmetric_arms(self):
        pol = ZiTS().reset(2, 100)
        pol.count_[:] = 1
        pol.p_hat_[:] = 0.5
        pol.v_[:] = 1.0
        pol.clip_p_[:] = 0.0
        pol.clip_mu_[:] = NEG_INF_CLIP
        rng = np.random.default_rng(2)
        picks = np.array([pol._select(3, rng) for _ in range(10**4)])
        assert abs(picks.mean() - 0.5) <= 0.02

    def test_gate_clip_without_log_term(self):
        K, T = 2, 80
        pol = ZiTS().reset(K, T)
        c = T // (4 * K)
        for t in range(1, c + 1):
            pol.update(0, 1.0 if t % 2 else 0.0, t % 2, t)
        assert pol.clip_p_[0] == pytest.approx(pol.p_hat_[0])

    def test_beta_posterior_update(self):
        pol = ZiTS().reset(2, 100)
        pol.update(0, 1.3, 1, 1)
        assert (pol.alpha_[0], pol.beta_[0]) == (2.0, 1.0)
        pol.update(0, 0.0, 0, 3)
        assert (pol.alpha_[0], pol.beta_[0]) == (2.0, 2.0)

    def test_posterior_factorisation(self):
        a, b = ZiTS().reset(2, 100), ZiTS().reset(2, 100)
        ys = [1, 0, 1, 1, 0, 1]
        for t, y in enumerate(ys, start=1):
            a.update(0, y * 1.0, y, t)
            b.update(0, y * -7.5, y, t)
        assert np.array_equal(a.alpha_, b.alpha_) and np.array_equal(a.beta_, b.beta_)
        assert a.v_[0] != b.v_[0]

    @given(st.integers(1, 10**6), st.integers(1, 10**7))
    def test_inflation_factor_above_one(self, c, T):
        assert 1.0 + 1.0 / math.log1p(1.0 / math.sqrt(c * T)) > 1.0

    def test_draws_respect_clips(self):
        pol = ZiTS(clip_side="floor").reset(4, 2000)
        rng = np.random.default_rng(3)
        data = np.random.default_rng(4)
        for t in range(1, 2001):
            arm = pol.select(t, rng)
            if pol.last_draws_ is not None:
                p_t, mu_t = pol.last_draws_
                assert np.all(p_t >= pol.clip_p_) and np.all(mu_t >= pol.clip_mu_)
            y = int(data.random() < 0.3)
            pol.update(arm, y * (2.0 + data.standard_normal()), y, t)

    def test_cap_mode_respects_caps(self):
        pol = ZiTS(clip_side="cap").reset(3, 500)
        rng = np.random.default_rng(5)
        for t in range(1, 501):
            arm = pol.select(t, rng)
            if pol.last_draws_ is not None:
                p_t, mu_t = pol.last_draws_
                assert np.all(p_t <= pol.clip_p_) and np.all(mu_t <= pol.clip_mu_)
            pol.update(arm, 1.0, 1, t)

    @pytest.mark.parametrize("params", [{"gamma": 3.0}, {"rho": 0.5}, {"rho": 1.0}, {"clip_side": "mid"}])
    def test_rejects_bad_params(self, params):
        with pytest.raises(ValueError):
            ZiTS(**params).reset(2, 10)


class TestNaive:
    def test_nonzero_param_index(self):
        T = 100
        pol = NaiveUCB(mode="nonzero_param", sigma2=1.0).reset(1, T)
        for t, r in enumerate([1.0, 0.0, 2.0], start=1):
            pol.update(0, r, int(r != 0), t)
        delta = 4.0 / T**2
        assert pol.index_[0] == pytest.approx(1.0 + math.sqrt(2 * math.log(2 / delta) / 3), rel=1e-12)

    def test_true_proxy_at_unit_gate(self):
        info = {"means": np.array([1.0]), "size_proxy": np.array([1.0])}
        a = NaiveUCB(mode="true").reset(1, 100, info)
        b = NaiveUCB(mode="nonzero_param").reset(1, 100)
        for t, r in enumerate([0.3, 1.2, 0.8], start=1):
            a.update(0, r, 1, t)
            b.update(0, r, 1, t)
        assert a.index_[0] == b.index_[0]

    def test_solved_at_unit_gate(self):
        pol = NaiveUCB(mode="solved", sigma2=2.0).reset(1, 100)
        pol.update(0, 5.0, 1, 1)
        assert pol._proxy(0) == pytest.approx(2.0, rel=1e-8)

    def test_emp_var_floor(self):
        pol = NaiveUCB(mode="emp_var").reset(1, 100)
        pol.update(0, 3.0, 1, 1)
        assert pol._proxy(0) == 1e-12

    def test_true_needs_disclosure(self):
        with pytest.raises(ValueError):
            NaiveUCB(mode="true").reset(2, 10, {})

    def test_subexponential_index(self):
        pol = NaiveUCB(mode="nonzero_param", family="subexponential", sigma2=4.0, delta=0.1).reset(1, 10)
        pol.update(0, 1.0, 1, 1)
        log = math.log(20.0)
        assert pol.index_[0] == pytest.approx(1.0 + 4.0 * math.sqrt(2 * log) + 2.0 * log, rel=1e-12)

    def test_rejects_bad_mode(self):
        with pytest.raises(ValueError):
            NaiveUCB(mode="guess").reset(2, 10)


class TestDirectTS:
    def test_single_arm(self):
        pol = DirectTS().reset(1, 20)
        rng = np.random.default_rng(0)
        for t in range(1, 21):
            assert pol.select(t, rng) == 0
            pol.update(0, 0.5, 1, t)

    def test_symmetric_arms(self):
        pol = DirectTS().reset(2, 100)
        for arm in range(2):
            for r in (0.0, 1.0, 2.0):
                pol.update(arm, r, int(r != 0), 1)
        pol.clip_[:] = NEG_INF_CLIP
        rng = np.random.default_rng(6)
        picks = np.array([pol._select(7, rng) for _ in range(10**4)])
        assert abs(picks.mean() - 0.5) <= 0.02

    def test_clip_equals_mean(self):
        K, T = 2, 80
        pol = DirectTS(gamma=4.0).reset(K, T)
        rewards = [1.0, 0.0, 3.0] * 4
        for t, r in enumerate(rewards[: T // (4 * K)], start=1):
            pol.update(0, r, int(r != 0), t)
        c = T // (4 * K)
        assert pol.clip_[0] == pytest.approx(np.mean(rewards[:c]))
