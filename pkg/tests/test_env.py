import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zibandit.concentration import naive_size_proxy
from zibandit.distributions import CenteredExponential, Gaussian, StudentT
from zibandit.env import CbEnv, CbEnvSpec, MabEnv, MabEnvSpec, true_size_proxy
from zibandit.links import Link


class TestMabEnv:
    def test_unit_gates(self):
        env = MabEnv(MabEnvSpec(k=4, p_range=(1.0, 1.0)), np.random.default_rng(0))
        assert np.all(env.p == 1.0)

    def test_optimal_regret_zero(self):
        env = MabEnv(MabEnvSpec(), np.random.default_rng(1))
        assert env.regret(int(np.argmax(env.means))) == 0.0
        assert np.all(env.gaps >= 0)

    def test_means(self):
        env = MabEnv(MabEnvSpec(), np.random.default_rng(2))
        assert np.allclose(env.means, env.mu * env.p)
        assert env.best_mean == env.means.max()

    def test_deterministic(self):
        a = MabEnv(MabEnvSpec(), np.random.default_rng(3))
        b = MabEnv(MabEnvSpec(), np.random.default_rng(3))
        assert np.array_equal(a.p, b.p) and np.array_equal(a.mu, b.mu)

    @pytest.mark.parametrize("kwargs", [{"p_range": (0.0, 0.5)}, {"p_range": (0.5, 0.4)},
                                        {"mu_range": (3, 1)}, {"k": 0}, {"k": 5, "horizon": 4}])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            MabEnvSpec(**kwargs)

    def test_stream_layout(self):
        env = MabEnv(MabEnvSpec(k=3), np.random.default_rng(4))
        s1 = env.reward_stream(np.random.default_rng(5))
        s2 = env.reward_stream(np.random.default_rng(5))
        assert [s1.draw(a % 3, t) for a, t in zip(range(50), range(1, 51))] == [
            s2.draw(a % 3, t) for a, t in zip(range(50), range(1, 51))
        ]

    def test_stream_zero_iff_gate_closed(self):
        env = MabEnv(MabEnvSpec(k=2), np.random.default_rng(6))
        s = env.reward_stream(np.random.default_rng(7))
        for t in range(1, 500):
            r, y = s.draw(t % 2, t)
            assert (r == 0.0) == (y == 0)

    def test_arm_info_proxies(self):
        env = MabEnv(MabEnvSpec(k=3), np.random.default_rng(8))
        info = env.arm_info()
        expect = [naive_size_proxy(m, p, 1.0) for m, p in zip(env.mu, env.p)]
        assert np.allclose(info["size_proxy"], expect)


def test_true_size_proxy_families():
    assert true_size_proxy(2.0, 1.0, Gaussian(3.0)) == pytest.approx(3.0, rel=1e-8)
    assert true_size_proxy(2.0, 0.4, CenteredExponential(1.0)) >= 4.0
    assert math.isnan(true_size_proxy(2.0, 0.4, StudentT(3.0)))


class TestCbEnv:
    def test_parameters(self):
        spec = CbEnvSpec(k=10, d=6, sparsity=3)
        env = CbEnv(spec, np.random.default_rng(0))
        assert np.linalg.norm(env.beta) == pytest.approx(1.0)
        assert np.count_nonzero(env.theta) == 3
        assert np.linalg.norm(env.theta) <= 1.0 + 1e-12
        assert np.all(np.count_nonzero(env.nu, axis=1) == 3)

    def test_single_arm(self):
        env = CbEnv(CbEnvSpec(k=1, d=3, sparsity=2), np.random.default_rng(1))
        assert env.step(np.random.default_rng(2))[1] == 0

    def test_zero_theta(self):
        env = CbEnv(CbEnvSpec(k=8, d=4, sparsity=2), np.random.default_rng(3))
        env.theta = np.zeros(4)
        x = env.contexts(np.random.default_rng(4))
        assert np.allclose(env.gates(x), 0.5)
        assert int(np.argmax(env.mean_rewards(x))) == int(np.argmax(x @ env.beta))

    def test_context_mean(self):
        env = CbEnv(CbEnvSpec(k=3, d=4, sparsity=2), np.random.default_rng(5))
        rng = np.random.default_rng(6)
        xs = np.stack([env.contexts(rng) for _ in range(10**4)])
        se = env.context_sd / math.sqrt(xs.shape[0])
        assert np.all(np.abs(xs.mean(axis=0) - env.nu) <= 4 * se)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20)
    def test_gates_in_unit_interval(self, seed):
        env = CbEnv(CbEnvSpec(k=20, d=5, sparsity=3), np.random.default_rng(seed))
        g = env.gates(env.contexts(np.random.default_rng(seed + 1)))
        assert np.all((g >= 0) & (g <= 1))

    def test_gate_one(self):
        env = CbEnv(CbEnvSpec(k=3, d=3, sparsity=2), np.random.default_rng(7))
        env.h = Link("one", np.ones_like, np.zeros_like, True)
        rng = np.random.default_rng(8)
        x = env.contexts(rng)
        assert all(env.realize_reward(x, a % 3, rng)[1] == 1 for a in range(200))

    def test_oracle_dominates(self):
        env = CbEnv(CbEnvSpec(k=6, d=4, sparsity=2), np.random.default_rng(9))
        rng = np.random.default_rng(10)
        total = 0.0
        for _ in range(200):
            x, best = env.step(rng)
            means = env.mean_rewards(x)
            assert np.all(means[best] >= means)
            total += env.realize_reward(x, best, rng)[2]
        assert total == 0.0

    @pytest.mark.parametrize("kwargs", [{"sparsity": 0}, {"d": 3, "sparsity": 4}, {"link_h": "identity"}])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            CbEnvSpec(**kwargs)
