import math
from functools import lru_cache

import numpy as np
import pytest

from rlde import bbob, ela
from rlde.de import DEConfig, HEAD_WIDTHS, RunResult, run_de
from rlde.errors import CheckpointError, ConfigurationError
from rlde.madqn import AgentConfig, QNetwork
from rlde.meta_train import (
    MAGIC,
    TrainedAgent,
    TrainingLog,
    checkpoint_bytes,
    design_for,
    load_checkpoint,
    parse_checkpoint,
    reward_of,
    save_checkpoint,
    train,
)

SPLIT = bbob.suite_split()


def result_with(instance, gap_value):
    return RunResult(instance.f_opt + gap_value, np.zeros(instance.dimension), [], 0, 0.0)


@lru_cache(maxsize=None)
def desk_run(seed):
    return train(AgentConfig(), SPLIT, 5, 500, 5000, seed=seed)


def small_split():
    return bbob.SuiteSplit(frozenset({2, 3, 4}), frozenset({1}))


def test_reward_values():
    inst = bbob.make_instance(1, 2)
    assert reward_of(result_with(inst, 0.0), inst) == 1.0
    assert reward_of(result_with(inst, math.log(2.0)), inst) == pytest.approx(0.5, rel=1e-12)
    r = reward_of(result_with(inst, 1000.0), inst)
    assert math.isfinite(r) and r >= 0.0
    # slightly negative gaps from rounding are clipped
    assert reward_of(result_with(inst, -1e-12), inst) == 1.0


def test_reward_monotone():
    inst = bbob.make_instance(1, 2)
    gaps = np.linspace(0, 20, 50)
    r = [reward_of(result_with(inst, g), inst) for g in gaps]
    assert all(a > b for a, b in zip(r, r[1:]))
    assert all(0.0 < x <= 1.0 for x in r)


def test_zero_steps_returns_initial_network():
    cfg = AgentConfig(hidden=(8,))
    a, log = train(cfg, small_split(), 2, 0, 100, seed=4)
    b, _ = train(cfg, small_split(), 2, 0, 100, seed=4)
    np.testing.assert_array_equal(a.net.params, b.net.params)
    assert log.records == [] and log.de_runs == 0
    c, _ = train(cfg, small_split(), 2, 3, 100, seed=4)
    # three steps stay below the batch size, so no update moves the weights
    np.testing.assert_array_equal(a.net.params, c.net.params)


def test_training_is_deterministic():
    cfg = AgentConfig(hidden=(16,), batch_size=4, target_sync=3)
    a, la = train(cfg, small_split(), 2, 20, 200, seed=9)
    b, lb = train(cfg, small_split(), 2, 20, 200, seed=9)
    assert la.to_csv() == lb.to_csv()
    np.testing.assert_array_equal(a.net.params, b.net.params)
    _, lc = train(cfg, small_split(), 2, 20, 200, seed=10)
    assert lc.to_csv() != la.to_csv()


def test_log_invariants_and_update_guard():
    cfg = AgentConfig(hidden=(16,), batch_size=5, target_sync=3)
    _, log = train(cfg, small_split(), 2, 15, 200, seed=1)
    steps = [r.step for r in log.records]
    eps = [r.epsilon for r in log.records]
    assert steps == list(range(15))
    assert all(a >= b for a, b in zip(eps, eps[1:]))
    first = next(i for i, r in enumerate(log.records) if r.loss is not None)
    # buffer size must exceed T, so the first loss shows up at step T (T + 1 records)
    assert first + 1 >= cfg.batch_size + 1
    assert all(r.loss is None for r in log.records[:first])
    assert log.de_runs == 15 and log.ela_samples == 3
    assert {r.function_id for r in log.records} <= {2, 3, 4}


def test_log_csv_round_trip():
    cfg = AgentConfig(hidden=(8,), batch_size=2)
    _, log = train(cfg, small_split(), 2, 6, 100, seed=2)
    back = TrainingLog.from_csv(log.to_csv())
    assert back.records == log.records


def test_empty_training_set():
    with pytest.raises(ConfigurationError):
        train(AgentConfig(), bbob.SuiteSplit(frozenset(), frozenset(range(1, 25))), 2, 1, 100)


# ---------------------------------------------------------------------------
# design
# ---------------------------------------------------------------------------


def zero_agent(dimension=2):
    net = QNetwork.for_agent(AgentConfig(hidden=(8,)), np.random.default_rng(0), ela.N_FEATURES)
    net.params[:] = 0.0
    return TrainedAgent(net, ela.FeatureNormalizer.identity(), AgentConfig(hidden=(8,)), 0, dimension)


def test_zero_network_designs_lowest_indices():
    cfg = design_for(zero_agent(), bbob.make_instance(1, 2), np.random.default_rng(0))
    assert cfg.to_action() == (0,) * len(HEAD_WIDTHS)


def test_design_deterministic():
    agent, _ = train(AgentConfig(hidden=(16,), batch_size=4), small_split(), 2, 12, 200, seed=3)
    inst = bbob.make_instance(1, 2)
    a = design_for(agent, inst, np.random.default_rng(7))
    b = design_for(agent, inst, np.random.default_rng(7))
    assert a == b


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def trained_small():
    agent, _ = train(AgentConfig(hidden=(32, 16), batch_size=4), small_split(), 2, 10, 200, seed=5)
    return agent


def test_checkpoint_round_trip(trained_small, tmp_path):
    path = tmp_path / "agent.ckpt"
    digest = save_checkpoint(trained_small, path)
    assert len(digest) == 64
    back = load_checkpoint(path)
    S = np.random.default_rng(0).normal(size=(100, ela.N_FEATURES))
    np.testing.assert_array_equal(back.net.q_values(S), trained_small.net.q_values(S))
    assert back.config == trained_small.config
    np.testing.assert_array_equal(back.normalizer.mean, trained_small.normalizer.mean)
    assert (back.seed, back.dimension) == (trained_small.seed, trained_small.dimension)


def test_checkpoint_bad_magic(trained_small):
    with pytest.raises(CheckpointError) as exc:
        parse_checkpoint(b"NOTMAGIC" + checkpoint_bytes(trained_small)[8:])
    assert exc.value.section == "magic"


@pytest.mark.parametrize("cut", [10, 40, -7, -800])
def test_checkpoint_truncated(trained_small, cut):
    data = checkpoint_bytes(trained_small)
    with pytest.raises(CheckpointError) as exc:
        parse_checkpoint(data[:cut])
    assert exc.value.section in {"header", "weights"}


def test_checkpoint_size_mismatch(trained_small):
    data = checkpoint_bytes(trained_small) + b"\x00" * 8
    with pytest.raises(CheckpointError, match="size mismatch") as exc:
        parse_checkpoint(data)
    assert exc.value.section == "weights"
    assert MAGIC == data[:8]


# ---------------------------------------------------------------------------
# desk-scale behaviour
# ---------------------------------------------------------------------------


def test_desk_scale_learning_progress():
    passed = 0
    for seed in range(5):
        _, log = desk_run(seed)
        r = log.rewards()
        assert len(r) == 500
        passed += r[-100:].mean() >= r[:100].mean()
    assert passed >= 3


def test_trained_agent_beats_random_configs_on_f1():
    agent, _ = desk_run(0)
    inst = bbob.make_instance(1, 5)
    cfg = design_for(agent, inst, np.random.default_rng(1))
    designed = [bbob.gap(inst, run_de(cfg, inst, 5000, rng=np.random.default_rng(100 + s)).best_f) for s in range(11)]
    rng = np.random.default_rng(2)
    random_gaps = []
    for s in range(20):
        action = tuple(int(rng.integers(w)) for w in HEAD_WIDTHS)
        random_cfg = DEConfig.from_action(action)
        random_gaps.append(bbob.gap(inst, run_de(random_cfg, inst, 5000, rng=np.random.default_rng(200 + s)).best_f))
    assert np.median(designed) <= np.median(random_gaps)
