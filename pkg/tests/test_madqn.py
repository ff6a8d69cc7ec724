import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bandit import bandit_trial
from rlde import madqn
from rlde.de import HEAD_WIDTHS
from rlde.errors import ConfigurationError
from rlde.madqn import Batch, QNetwork


def random_batch(rng, T=8, n_in=62):
    actions = np.column_stack([rng.integers(w, size=T) for w in HEAD_WIDTHS])
    return Batch(rng.normal(size=(T, n_in)), actions, rng.random(T), rng.normal(size=(T, n_in)))


def relative_gradient_error(net, batch, y, squared=True, h=1e-5):
    _, g = madqn.loss_and_grad(net, batch, y, squared)
    fd = np.zeros_like(g)
    for i in range(net.n_params):
        old = net.params[i]
        net.params[i] = old + h
        lp, _ = madqn.loss_and_grad(net, batch, y, squared)
        net.params[i] = old - h
        lm, _ = madqn.loss_and_grad(net, batch, y, squared)
        net.params[i] = old
        fd[i] = (lp - lm) / (2 * h)
    scale = np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-7)
    return float(np.max(np.abs(g - fd) / scale))


def test_head_layout():
    assert madqn.N_OUTPUTS == 84
    assert madqn.HEAD_OFFSETS == (0, 5, 15, 17, 22, 63)


def test_default_architecture():
    net = QNetwork.for_agent(madqn.AgentConfig(), np.random.default_rng(0))
    assert net.layers == (62, 128, 128, 128, 84)
    heads = net.forward(np.zeros(62))
    assert [len(h) for h in heads] == list(HEAD_WIDTHS)
    assert net.params.dtype == np.float64


def test_zero_weights_give_biases():
    net = QNetwork((62, 8, 84))
    net.weights()[1][1][...] = np.arange(84.0)
    q = np.concatenate(net.forward(np.random.default_rng(0).normal(size=62)))
    assert np.array_equal(q, np.arange(84.0))


def test_hand_built_single_unit():
    net = QNetwork((2, 1, 84))
    (W1, b1), (W2, b2) = net.weights()
    W1[:, 0] = [0.5, -1.5]
    b1[0] = 0.25
    W2[0, :] = np.linspace(-1, 1, 84)
    b2[:] = 0.1
    x = np.array([2.0, 0.3])
    h = max(0.0, 0.5 * 2.0 - 1.5 * 0.3 + 0.25)
    expected = [h * w + 0.1 for w in np.linspace(-1, 1, 84)]
    got = np.concatenate(net.forward(x))
    assert np.max(np.abs(got - expected)) <= 1e-12


def test_forward_rejects_bad_states():
    net = QNetwork((62, 4, 84))
    with pytest.raises(ValueError):
        net.forward(np.full(62, np.nan))
    with pytest.raises(ValueError):
        net.forward(np.zeros(61))


def test_glorot_bounds():
    net = QNetwork.glorot((62, 128, 84), np.random.default_rng(0))
    (W1, b1), (W2, b2) = net.weights()
    assert np.abs(W1).max() <= np.sqrt(6 / 190)
    assert np.abs(W2).max() <= np.sqrt(6 / 212)
    assert not b1.any() and not b2.any()


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = QNetwork.glorot((62, 4, 84), rng)
    net.params += rng.normal(scale=0.1, size=net.n_params)
    batch = random_batch(rng)
    y = rng.normal(size=(8, 6))
    assert relative_gradient_error(net, batch, y) < 1e-4


def test_signed_loss_gradient():
    rng = np.random.default_rng(99)
    net = QNetwork.glorot((62, 3, 3, 84), rng)
    # nonzero biases keep pre-activations off the ReLU kink at exactly 0
    net.params += rng.normal(scale=0.1, size=net.n_params)
    batch = random_batch(rng)
    assert relative_gradient_error(net, batch, rng.normal(size=(8, 6)), squared=False) < 1e-4


def test_double_q_decoupling():
    # online net prefers index 1 in every head, target net values index 0 at 5 and index 1 at -3
    online = QNetwork((62, 84))
    target = QNetwork((62, 84))
    ob, tb = online.weights()[0][1], target.weights()[0][1]
    for o in madqn.HEAD_OFFSETS:
        ob[o + 1] = 1.0
        tb[o] = 5.0
        tb[o + 1] = -3.0
    batch = random_batch(np.random.default_rng(0), T=2)
    y = madqn.td_targets(online, target, batch, gamma=0.5)
    assert np.allclose(y, batch.rewards[:, None] - 1.5)


def test_zero_loss_leaves_parameters():
    rng = np.random.default_rng(0)
    net = QNetwork((62, 84))
    net.weights()[0][1][...] = 0.7
    target = net.copy()
    batch = Batch(rng.normal(size=(4, 62)) * 0, np.zeros((4, 6), int), np.full(4, 0.7), np.zeros((4, 62)))
    before = net.params.copy()
    opt = madqn.Adam(net.n_params)
    loss = madqn.update(net, target, opt, batch, gamma=0.0)
    assert loss == 0.0
    assert np.array_equal(net.params, before)


def test_fixed_record_converges():
    rng = np.random.default_rng(3)
    net = QNetwork.glorot((62, 16, 84), rng)
    target = net.copy()
    opt = madqn.Adam(net.n_params)
    s = rng.normal(size=(1, 62))
    a = np.array([[1, 2, 1, 3, 40, 20]])
    batch = Batch(s, a, np.array([0.8]), s)
    for step in range(5000):
        madqn.update(net, target, opt, batch, gamma=0.0)
        q = net.q_values(s)[0, a[0] + np.array(madqn.HEAD_OFFSETS)]
        if np.max(np.abs(q - 0.8)) < 1e-3:
            break
    assert np.max(np.abs(q - 0.8)) < 1e-3


def test_adam_first_step():
    opt = madqn.Adam(3, lr=0.1)
    p = np.zeros(3)
    opt.step(p, np.array([2.0, -0.5, 0.0]))
    # bias-corrected first step moves by lr * sign(g)
    assert np.allclose(p, [-0.1, 0.1, 0.0], atol=1e-8)


def test_sync_target():
    rng = np.random.default_rng(0)
    net = QNetwork.glorot((62, 8, 84), rng)
    target = QNetwork((62, 8, 84))
    madqn.sync_target(net, target)
    s = rng.normal(size=62)
    assert all(np.array_equal(a, b) for a, b in zip(net.forward(s), target.forward(s)))
    frozen = target.params.copy()
    madqn.update(net, target, madqn.Adam(net.n_params), random_batch(rng), 0.9)
    assert np.array_equal(target.params, frozen)
    assert not np.array_equal(net.params, frozen)


def test_sync_periodicity():
    cfg = madqn.AgentConfig(batch_size=2, target_sync=100, buffer_capacity=10, hidden=(4,))
    rng = np.random.default_rng(0)
    agent = madqn.Agent.create(cfg, rng)
    for _ in range(3):
        agent.buffer.store(np.zeros(62), (0,) * 6, 0.0, np.zeros(62))
    for _ in range(350):
        agent.learn(rng)
    assert agent.syncs == [100, 200, 300]


def test_act_greedy_and_ties():
    net = QNetwork((62, 84))
    assert madqn.act(net, np.zeros(62), 0.0, np.random.default_rng(0)) == (0,) * 6
    b = net.weights()[0][1]
    b[madqn.HEAD_OFFSETS[1] + 7] = 2.0
    b[madqn.HEAD_OFFSETS[1] + 3] = 2.0
    assert madqn.act(net, np.zeros(62), 0.0, np.random.default_rng(0))[1] == 3


def test_act_uniform_when_eps_one():
    net = QNetwork((62, 84))
    rng = np.random.default_rng(0)
    draws = np.array([madqn.act(net, np.zeros(62), 1.0, rng) for _ in range(100_000)])
    for h, w in enumerate(HEAD_WIDTHS):
        counts = np.bincount(draws[:, h], minlength=w)
        assert stats.chisquare(counts).pvalue > 1e-3


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2**32))
def test_act_in_range(eps, seed):
    net = QNetwork.glorot((62, 4, 84), np.random.default_rng(seed))
    a = madqn.act(net, np.random.default_rng(seed).normal(size=62), eps, np.random.default_rng(seed + 1))
    assert all(0 <= i < w for i, w in zip(a, HEAD_WIDTHS))


def test_buffer_fifo_and_sampling():
    buf = madqn.ReplayBuffer(2, state_dim=1)
    for k in range(3):
        buf.store([k], (k,) * 6, float(k), [k])
    assert len(buf) == 2
    assert buf.records().rewards.tolist() == [1.0, 2.0]
    perm = buf.sample(2, np.random.default_rng(0))
    assert sorted(perm.rewards.tolist()) == [1.0, 2.0]
    with pytest.raises(madqn.BufferNotReady):
        buf.sample(3, np.random.default_rng(0))


def test_buffer_uniform():
    buf = madqn.ReplayBuffer(10, state_dim=1)
    for k in range(10):
        buf.store([k], (0,) * 6, float(k), [k])
    rng = np.random.default_rng(0)
    picks = np.array([buf.sample(1, rng).rewards[0] for _ in range(100_000)], dtype=int)
    freq = np.bincount(picks, minlength=10) / 100_000
    assert np.all(np.abs(freq - 0.1) <= 0.01)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 50), st.integers(0, 1000))
def test_buffer_size_and_distinct_samples(cap, n, seed):
    buf = madqn.ReplayBuffer(cap, state_dim=1)
    for k in range(n):
        buf.store([k], (0,) * 6, float(k), [k])
    assert len(buf) == min(cap, n)
    assert buf.records().rewards.tolist() == [float(k) for k in range(max(0, n - cap), n)]
    got = buf.sample(len(buf), np.random.default_rng(seed)).rewards
    assert len(set(got.tolist())) == len(buf)


def test_agent_waits_for_more_than_T():
    cfg = madqn.AgentConfig(batch_size=4, buffer_capacity=10, hidden=(4,))
    rng = np.random.default_rng(0)
    agent = madqn.Agent.create(cfg, rng)
    for k in range(4):
        agent.buffer.store(np.zeros(62), (0,) * 6, 0.0, np.zeros(62))
        assert agent.learn(rng) is None
    agent.buffer.store(np.zeros(62), (0,) * 6, 0.0, np.zeros(62))
    assert agent.learn(rng) is not None


def test_epsilon_schedule():
    cfg = madqn.AgentConfig()
    assert cfg.epsilon(0, 100) == 1.0
    assert cfg.epsilon(25, 100) == pytest.approx(0.525)
    assert cfg.epsilon(50, 100) == pytest.approx(0.05)
    assert cfg.epsilon(99, 100) == pytest.approx(0.05)
    values = [cfg.epsilon(t, 37) for t in range(37)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        madqn.AgentConfig(gamma=1.5)
    with pytest.raises(ConfigurationError):
        madqn.AgentConfig(batch_size=0)
    with pytest.raises(ConfigurationError):
        madqn.AgentConfig.from_dict({"gama": 0.3})
    cfg = madqn.AgentConfig(gamma=0.0, hidden=(16, 16))
    assert madqn.AgentConfig.from_dict(cfg.to_dict()) == cfg


def test_bandit_few_trials():
    # the acceptance suite runs the full 100-trial version
    assert sum(bandit_trial(seed) for seed in range(3)) == 3
