"""Synthetic three-state contextual bandit shared by the unit and acceptance suites."""

import numpy as np

from rlde import madqn


def bandit_trial(seed: int, updates: int = 2000, gamma: float = 0.9) -> bool:
    """Train on rewards that depend only on (state, mutation index); report greedy success."""
    rng = np.random.default_rng(seed)
    cfg = madqn.AgentConfig(gamma=gamma)
    states = rng.normal(size=(3, 62))
    best = rng.choice(10, size=3, replace=False)
    agent = madqn.Agent.create(cfg, rng)
    # learning starts once the buffer exceeds T records
    steps = updates + cfg.batch_size
    s = int(rng.integers(3))
    for t in range(steps):
        a = agent.act(states[s], cfg.epsilon(t, steps), rng)
        r = 1.0 if a[1] == best[s] else 0.0
        s_next = int(rng.integers(3))
        agent.buffer.store(states[s], a, r, states[s_next])
        agent.learn(rng)
        s = s_next
    assert agent.updates == updates
    return all(madqn.greedy_action(agent.net, states[k])[1] == best[k] for k in range(3))
