"""Multi-head double DQN in plain numpy.

One fully connected ReLU trunk feeds a single linear output layer whose
columns are split into six heads, one per design object.  Gradients are
derived by hand and the optimizer is Adam.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from rlde.de import HEAD_WIDTHS
from rlde.ela import N_FEATURES
from rlde.errors import ConfigurationError

HEAD_OFFSETS = tuple(int(x) for x in np.cumsum((0,) + HEAD_WIDTHS)[:-1])
N_OUTPUTS = sum(HEAD_WIDTHS)


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5
    batch_size: int = 64
    target_sync: int = 100
    learning_rate: float = 1e-3
    buffer_capacity: int = 10_000
    hidden: tuple = (128, 128, 128)
    squared_loss: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")
        for name in ("eps_start", "eps_end", "eps_decay_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")
        if self.eps_end > self.eps_start:
            raise ConfigurationError("eps_end must not exceed eps_start")
        if self.batch_size < 1 or self.target_sync < 1:
            raise ConfigurationError("batch_size and target_sync must be >= 1")
        if self.buffer_capacity < self.batch_size:
            raise ConfigurationError("buffer_capacity must be at least batch_size")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigurationError("hidden widths must be positive")

    def epsilon(self, step: int, total_steps: int) -> float:
        """Linear decay from eps_start to eps_end over the first fraction of steps."""
        horizon = self.eps_decay_fraction * total_steps
        if horizon <= 0:
            return self.eps_end
        frac = min(step / horizon, 1.0)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown agent settings {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------


class QNetwork:
    """ReLU MLP with a flat parameter vector; ``layers`` lists every width."""

    def __init__(self, layers: Sequence[int], params: np.ndarray | None = None):
        self.layers = tuple(int(n) for n in layers)
        if len(self.layers) < 2:
            raise ConfigurationError("a network needs at least input and output widths")
        self.shapes = [(a, b) for a, b in zip(self.layers[:-1], self.layers[1:])]
        self.n_params = sum(a * b + b for a, b in self.shapes)
        if params is None:
            params = np.zeros(self.n_params)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ConfigurationError(f"expected {self.n_params} parameters, got {params.shape}")
        self.params = params.copy()

    @classmethod
    def glorot(cls, layers: Sequence[int], rng: np.random.Generator) -> "QNetwork":
        net = cls(layers)
        for W, b in net.weights():
            fan_in, fan_out = W.shape
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            W[...] = rng.uniform(-lim, lim, size=W.shape)
            b[...] = 0.0
        return net

    @classmethod
    def for_agent(cls, config: AgentConfig, rng, n_inputs: int = N_FEATURES) -> "QNetwork":
        return cls.glorot((n_inputs, *config.hidden, N_OUTPUTS), rng)

    def weights(self, params: np.ndarray | None = None):
        """(W, b) views into ``params`` (defaults to this network's own vector)."""
        flat = self.params if params is None else params
        out, pos = [], 0
        for a, b in self.shapes:
            W = flat[pos : pos + a * b].reshape(a, b)
            pos += a * b
            out.append((W, flat[pos : pos + b]))
            pos += b
        return out

    def copy(self) -> "QNetwork":
        return QNetwork(self.layers, self.params)

    def _forward(self, S: np.ndarray):
        acts = [S]
        h = S
        ws = self.weights()
        for k, (W, b) in enumerate(ws):
            z = h @ W + b
            h = np.maximum(z, 0.0) if k < len(ws) - 1 else z
            acts.append(h)
        return acts

    def q_values(self, S) -> np.ndarray:
        """Raw outputs for a batch of states, shape ``(B, n_outputs)``."""
        S = np.atleast_2d(np.asarray(S, dtype=np.float64))
        if S.shape[1] != self.layers[0]:
            raise ValueError(f"expected states of width {self.layers[0]}, got {S.shape[1]}")
        if not np.all(np.isfinite(S)):
            raise ValueError("non-finite state")
        return self._forward(S)[-1]

    def forward(self, state) -> list[np.ndarray]:
        """Six Q-value vectors for one state."""
        state = np.asarray(state, dtype=np.float64)
        if state.ndim != 1:
            raise ValueError("forward expects a single state vector")
        return split_heads(self.q_values(state)[0])

    def backward(self, S: np.ndarray, dout: np.ndarray, acts=None) -> np.ndarray:
        """Gradient of ``sum(dout * outputs(S))`` with respect to the flat parameters.

        ``acts`` may carry the activations of an earlier forward pass on ``S``.
        """
        if acts is None:
            acts = self._forward(S)
        grad = np.zeros_like(self.params)
        gviews = self.weights(grad)
        ws = self.weights()
        delta = dout
        for k in range(len(ws) - 1, -1, -1):
            gW, gb = gviews[k]
            gW[...] = acts[k].T @ delta
            gb[...] = delta.sum(axis=0)
            if k:
                delta = (delta @ ws[k][0].T) * (acts[k] > 0)
        return grad


def split_heads(q: np.ndarray) -> list[np.ndarray]:
    return [q[..., o : o + w] for o, w in zip(HEAD_OFFSETS, HEAD_WIDTHS)]


class Adam:
    def __init__(self, n: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0
        self._buf = np.empty(n)

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        """In-place update of ``params``; arithmetic matches the textbook form."""
        self.t += 1
        b1, b2, buf = self.beta1, self.beta2, self._buf
        self.m *= b1
        self.m += (1 - b1) * grad
        self.v *= b2
        np.multiply(grad, grad, out=buf)
        buf *= 1 - b2
        self.v += buf
        # lr * mhat / (sqrt(vhat) + eps) with the bias corrections folded in place
        np.divide(self.v, 1 - b2**self.t, out=buf)
        np.sqrt(buf, out=buf)
        buf += self.eps
        np.divide(self.m, buf, out=buf)
        buf *= self.lr / (1 - b1**self.t)
        params -= buf


# ---------------------------------------------------------------------------
# acting and learning
# ---------------------------------------------------------------------------


def greedy_action(net: QNetwork, state) -> tuple[int, ...]:
    # np.argmax keeps the first maximum, which is the lowest-index tie rule
    return tuple(int(np.argmax(h)) for h in net.forward(state))


def act(net: QNetwork, state, eps: float, rng: np.random.Generator) -> tuple[int, ...]:
    """Epsilon-greedy over the whole action tuple (one coin per decision)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
    if rng.random() < eps:
        return tuple(int(rng.integers(w)) for w in HEAD_WIDTHS)
    return greedy_action(net, state)


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray


def td_targets(net: QNetwork, target: QNetwork, batch: Batch, gamma: float) -> np.ndarray:
    """Double-Q targets, shape ``(T, 6)``: argmax under ``net``, value under ``target``."""
    online = split_heads(net.q_values(batch.next_states))
    frozen = split_heads(target.q_values(batch.next_states))
    cols = []
    for qo, qt in zip(online, frozen):
        a_star = np.argmax(qo, axis=1)
        cols.append(qt[np.arange(len(a_star)), a_star])
    return batch.rewards[:, None] + gamma * np.column_stack(cols)


def loss_and_grad(net: QNetwork, batch: Batch, y: np.ndarray, squared: bool = True):
    """Loss over the batch and all heads, and its gradient in the flat parameters."""
    T = len(batch.rewards)
    H = len(HEAD_WIDTHS)
    acts = net._forward(np.asarray(batch.states, dtype=np.float64))
    Q = acts[-1]
    cols = batch.actions + np.asarray(HEAD_OFFSETS)[None, :]
    rows = np.arange(T)[:, None]
    q = Q[rows, cols]
    delta = y - q
    dout = np.zeros_like(Q)
    if squared:
        loss = float(np.mean(delta**2))
        np.add.at(dout, (np.broadcast_to(rows, cols.shape), cols), -2.0 * delta / (T * H))
    else:
        loss = float(np.mean(delta))
        np.add.at(dout, (np.broadcast_to(rows, cols.shape), cols), -1.0 / (T * H))
    return loss, net.backward(batch.states, dout, acts)


def update(net: QNetwork, target: QNetwork, optimizer: Adam, batch: Batch, gamma: float, squared: bool = True) -> float:
    y = td_targets(net, target, batch, gamma)
    loss, grad = loss_and_grad(net, batch, y, squared)
    optimizer.step(net.params, grad)
    return loss


def sync_target(net: QNetwork, target: QNetwork) -> None:
    target.params[...] = net.params


# ---------------------------------------------------------------------------
# replay buffer
# ---------------------------------------------------------------------------


class BufferNotReady(RuntimeError):
    """Sampling was requested from a buffer holding fewer than T records."""


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int = N_FEATURES):
        if capacity < 1:
            raise ConfigurationError("buffer capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, len(HEAD_WIDTHS)), dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self._start = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def store(self, state, action, reward: float, next_state) -> None:
        if self._size < self.capacity:
            i = (self._start + self._size) % self.capacity
            self._size += 1
        else:
            i = self._start
            self._start = (self._start + 1) % self.capacity
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state

    def _physical(self, logical: np.ndarray) -> np.ndarray:
        return (self._start + logical) % self.capacity

    def records(self) -> Batch:
        """All records, oldest first."""
        idx = self._physical(np.arange(self._size))
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])

    def ready(self, T: int) -> bool:
        return self._size >= T

    def sample(self, T: int, rng: np.random.Generator) -> Batch:
        if not self.ready(T):
            raise BufferNotReady(f"buffer holds {self._size} records, {T} requested")
        idx = self._physical(rng.choice(self._size, size=T, replace=False))
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])


# ---------------------------------------------------------------------------
# agent bundle
# ---------------------------------------------------------------------------


@dataclass
class Agent:
    """Network, target copy, optimizer and buffer driven by one AgentConfig."""

    config: AgentConfig
    net: QNetwork
    target: QNetwork = field(init=False)
    optimizer: Adam = field(init=False)
    buffer: ReplayBuffer = field(init=False)
    updates: int = 0
    syncs: list = field(default_factory=list)

    def __post_init__(self):
        self.target = self.net.copy()
        self.optimizer = Adam(self.net.n_params, lr=self.config.learning_rate)
        self.buffer = ReplayBuffer(self.config.buffer_capacity, self.net.layers[0])

    @classmethod
    def create(cls, config: AgentConfig, rng, n_inputs: int = N_FEATURES) -> "Agent":
        return cls(config, QNetwork.for_agent(config, rng, n_inputs))

    def act(self, state, eps: float, rng) -> tuple[int, ...]:
        return act(self.net, state, eps, rng)

    def learn(self, rng) -> float | None:
        """One update if the buffer holds more than T records, else None."""
        T = self.config.batch_size
        if len(self.buffer) <= T:
            return None
        batch = self.buffer.sample(T, rng)
        loss = update(self.net, self.target, self.optimizer, batch, self.config.gamma, self.config.squared_loss)
        self.updates += 1
        if self.updates % self.config.target_sync == 0:
            sync_target(self.net, self.target)
            self.syncs.append(self.updates)
        return loss
