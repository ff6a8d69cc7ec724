"""Offline training over the training functions and per-problem design.

A meta step samples a training problem, acts epsilon-greedily on its cached
landscape state, runs the decoded DE once, and stores the transition whose
next state is the state of the problem sampled for the following step.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from rlde import bbob, ela
from rlde.de import DEConfig, RunResult, run_de
from rlde.errors import CheckpointError, ConfigurationError
from rlde.madqn import Agent, AgentConfig, QNetwork, greedy_action

MAGIC = b"RLDECKPT"
FORMAT_VERSION = 1

# spawn-key tags for the independent random streams of one campaign
_NET, _POLICY, _PROBLEMS, _RUNS, _ELA = range(5)


def campaign_seed(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))


def ela_rng(seed: int, function_id: int, instance_seed: int) -> np.random.Generator:
    """Fixed sample stream per (campaign seed, problem) so features are computed once."""
    return np.random.default_rng(campaign_seed(seed, _ELA, function_id, instance_seed))


def reward_of(result: RunResult, instance: bbob.ProblemInstance) -> float:
    """``exp(-gap)`` with the gap clipped at 0; lies in (0, 1] until it underflows to 0."""
    g = max(0.0, bbob.gap(instance, result.best_f))
    return math.exp(-g)


@dataclass
class TrainedAgent:
    net: QNetwork
    normalizer: ela.FeatureNormalizer
    config: AgentConfig
    seed: int
    dimension: int

    def state_of(self, instance: bbob.ProblemInstance, rng) -> np.ndarray:
        return ela.assemble_state(instance, rng, self.normalizer)


def design_for(agent: TrainedAgent, instance: bbob.ProblemInstance, rng) -> DEConfig:
    """Greedy design for one problem from a fresh landscape sample."""
    state = agent.state_of(instance, rng)
    return DEConfig.from_action(greedy_action(agent.net, state))


# ---------------------------------------------------------------------------
# training log
# ---------------------------------------------------------------------------

LOG_COLUMNS = (
    "step",
    "function_id",
    "instance_seed",
    "a_init",
    "a_mutation",
    "a_crossover",
    "a_np",
    "a_f",
    "a_cr",
    "reward",
    "gap",
    "loss",
    "epsilon",
)


@dataclass(frozen=True)
class StepRecord:
    step: int
    function_id: int
    instance_seed: int
    action: tuple
    reward: float
    gap: float
    loss: float | None
    epsilon: float


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)
    # wall-clock totals; kept out of the CSV so that it stays byte-reproducible
    timings: dict = field(default_factory=dict)
    ela_samples: int = 0
    de_runs: int = 0

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.records:
            w.writerow(
                [r.step, r.function_id, r.instance_seed, *r.action, repr(r.reward), repr(r.gap),
                 "" if r.loss is None else repr(r.loss), repr(r.epsilon)]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainingLog":
        rows = list(csv.DictReader(io.StringIO(text)))
        log = cls()
        for row in rows:
            log.records.append(
                StepRecord(
                    step=int(row["step"]),
                    function_id=int(row["function_id"]),
                    instance_seed=int(row["instance_seed"]),
                    action=tuple(int(row[c]) for c in LOG_COLUMNS[3:9]),
                    reward=float(row["reward"]),
                    gap=float(row["gap"]),
                    loss=None if row["loss"] == "" else float(row["loss"]),
                    epsilon=float(row["epsilon"]),
                )
            )
        return log


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def training_states(
    train_ids: Sequence[int],
    dimension: int,
    seed: int,
    instance_seed_of: Callable[[int], int] = lambda fid: fid,
):
    """Instances, raw (imputed) states, and ELA sample count for the training set."""
    instances, raw = {}, {}
    for fid in sorted(train_ids):
        inst = bbob.make_instance(fid, dimension, instance_seed_of(fid))
        instances[fid] = inst
        raw[fid] = ela.raw_state(inst, ela_rng(seed, fid, inst.instance_seed))
    return instances, raw


def train(
    agent_config: AgentConfig,
    suite: bbob.SuiteSplit,
    dimension: int,
    meta_steps: int,
    base_max_fes: int,
    seed: int = 0,
    instance_seed_of: Callable[[int], int] = lambda fid: fid,
    progress: Callable[[StepRecord], None] | None = None,
) -> tuple[TrainedAgent, TrainingLog]:
    """Run the offline learning episode; deterministic for a fixed ``seed``."""
    train_ids = sorted(suite.train_ids)
    if not train_ids:
        raise ConfigurationError("the training set is empty")
    if meta_steps < 0:
        raise ConfigurationError("meta_steps must be non-negative")

    t0 = time.perf_counter()
    agent = Agent.create(agent_config, np.random.default_rng(campaign_seed(seed, _NET)))
    policy_rng = np.random.default_rng(campaign_seed(seed, _POLICY))
    problem_rng = np.random.default_rng(campaign_seed(seed, _PROBLEMS))

    log = TrainingLog()
    instances, raw = training_states(train_ids, dimension, seed, instance_seed_of)
    log.ela_samples = len(raw)
    normalizer = ela.FeatureNormalizer.fit([raw[f] for f in train_ids])
    states = {f: normalizer(v) for f, v in raw.items()}
    t_ela = time.perf_counter() - t0

    de_time = 0.0
    fid = train_ids[int(problem_rng.integers(len(train_ids)))] if meta_steps else None
    for t in range(meta_steps):
        inst = instances[fid]
        eps = agent_config.epsilon(t, meta_steps)
        action = agent.act(states[fid], eps, policy_rng)
        config = DEConfig.from_action(action)
        t1 = time.perf_counter()
        result = run_de(config, inst, base_max_fes, rng=np.random.default_rng(campaign_seed(seed, _RUNS, t)))
        de_time += time.perf_counter() - t1
        log.de_runs += 1
        reward = reward_of(result, inst)
        next_fid = train_ids[int(problem_rng.integers(len(train_ids)))]
        agent.buffer.store(states[fid], action, reward, states[next_fid])
        loss = agent.learn(policy_rng)
        rec = StepRecord(t, fid, inst.instance_seed, action, reward, bbob.gap(inst, result.best_f), loss, eps)
        log.records.append(rec)
        if progress is not None:
            progress(rec)
        fid = next_fid

    log.timings = {
        "ela_seconds": t_ela,
        "de_seconds": de_time,
        "total_seconds": time.perf_counter() - t0,
    }
    trained = TrainedAgent(agent.net, normalizer, agent_config, seed, dimension)
    return trained, log


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def checkpoint_bytes(agent: TrainedAgent) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "layers": list(agent.net.layers),
        "normalizer": agent.normalizer.to_dict(),
        "agent_config": agent.config.to_dict(),
        "seed": agent.seed,
        "dimension": agent.dimension,
        "n_weights": agent.net.n_params,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    weights = agent.net.params.astype("<f8").tobytes()
    return MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + weights


def save_checkpoint(agent: TrainedAgent, path) -> str:
    """Write the checkpoint; returns its sha256 hex digest."""
    data = checkpoint_bytes(agent)
    path = Path(path)
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def parse_checkpoint(data: bytes) -> TrainedAgent:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("magic", "not an rlde checkpoint")
    pos = len(MAGIC)
    if len(data) < pos + 8:
        raise CheckpointError("header", "file ends before the header length")
    (hlen,) = struct.unpack("<Q", data[pos : pos + 8])
    pos += 8
    if len(data) < pos + hlen:
        raise CheckpointError("header", f"header declares {hlen} bytes, only {len(data) - pos} present")
    try:
        header = json.loads(data[pos : pos + hlen].decode("utf-8"))
        layers = [int(n) for n in header["layers"]]
        n_weights = int(header["n_weights"])
        normalizer = ela.FeatureNormalizer.from_dict(header["normalizer"])
        config = AgentConfig.from_dict(header["agent_config"])
        seed = int(header["seed"])
        dimension = int(header["dimension"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError("header", f"malformed header: {exc}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError("header", f"unsupported format version {header.get('format_version')!r}")
    pos += hlen
    block = data[pos:]
    if len(block) != 8 * n_weights:
        raise CheckpointError(
            "weights", f"size mismatch: header declares {n_weights} weights, block holds {len(block) / 8:g}"
        )
    params = np.frombuffer(block, dtype="<f8").astype(np.float64)
    try:
        net = QNetwork(layers, params)
    except ConfigurationError as exc:
        raise CheckpointError("weights", str(exc)) from None
    return TrainedAgent(net, normalizer, config, seed, dimension)


def load_checkpoint(path) -> TrainedAgent:
    return parse_checkpoint(Path(path).read_bytes())


def checkpoint_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
