"""Configurable differential evolution with (mu + lambda) survival.

A run is fully described by a :class:`DEConfig` (one point of the design
space) plus a problem instance, an evaluation budget and a generator.  With
``mu = lambda = NP`` every generation produces one trial per target and the
next population is the best ``NP`` rows of the ``2 NP`` union.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from rlde import bbob
from rlde.errors import ConfigurationError
from rlde.sampling import InitStrategy, initialize


class Mutation(enum.IntEnum):
    RAND_1 = 0
    RAND_2 = 1
    BEST_1 = 2
    BEST_2 = 3
    CURRENT_TO_RAND_1 = 4
    CURRENT_TO_BEST_1 = 5
    RAND_TO_BEST_1 = 6
    CURRENT_TO_RAND_2 = 7
    CURRENT_TO_BEST_2 = 8
    RAND_TO_BEST_2 = 9

    @property
    def label(self) -> str:
        return MUTATION_LABELS[self.value]

    @classmethod
    def from_label(cls, label: str) -> "Mutation":
        try:
            return cls(MUTATION_LABELS.index(label))
        except ValueError:
            raise ConfigurationError(
                f"unknown mutation {label!r}; expected one of {MUTATION_LABELS}"
            ) from None


MUTATION_LABELS = (
    "rand/1",
    "rand/2",
    "best/1",
    "best/2",
    "current-to-rand/1",
    "current-to-best/1",
    "rand-to-best/1",
    "current-to-rand/2",
    "current-to-best/2",
    "rand-to-best/2",
)


class Crossover(enum.IntEnum):
    Binomial = 0
    Exponential = 1


NP_MULTIPLIERS = (5, 7, 9, 11, 13)
F_GRID = tuple(round(k * 0.05, 2) for k in range(41))
CR_GRID = tuple(round(k * 0.1, 1) for k in range(21))

# Widths of the six design objects, in action-tuple order.
HEAD_WIDTHS = (
    len(InitStrategy),
    len(Mutation),
    len(Crossover),
    len(NP_MULTIPLIERS),
    len(F_GRID),
    len(CR_GRID),
)

MIN_NP = 6  # the */2 strategies need five distinct partners besides i


def _grid_index(value: float, grid: Sequence[float], name: str) -> int:
    for k, g in enumerate(grid):
        if abs(value - g) <= 1e-9:
            return k
    raise ConfigurationError(f"{name}={value!r} is not on its grid {grid[0]}..{grid[-1]}")


def _enum_member(enum_cls, value, name):
    if isinstance(value, enum_cls):
        return value
    if isinstance(value, str):
        try:
            return enum_cls[value]
        except KeyError:
            names = [m.name for m in enum_cls]
            raise ConfigurationError(f"unknown {name} {value!r}; expected one of {names}") from None
    return enum_cls(value)


@dataclass(frozen=True)
class DEConfig:
    """One point of the design space."""

    init: InitStrategy
    mutation: Mutation
    crossover: Crossover
    np_mult: int
    F: float
    Cr: float

    def __post_init__(self):
        object.__setattr__(self, "init", _enum_member(InitStrategy, self.init, "init"))
        mutation = self.mutation
        if isinstance(mutation, str) and mutation in MUTATION_LABELS:
            mutation = Mutation.from_label(mutation)
        object.__setattr__(self, "mutation", _enum_member(Mutation, mutation, "mutation"))
        object.__setattr__(self, "crossover", _enum_member(Crossover, self.crossover, "crossover"))
        if self.np_mult not in NP_MULTIPLIERS:
            raise ConfigurationError(f"np_mult={self.np_mult!r} not in {NP_MULTIPLIERS}")
        object.__setattr__(self, "F", F_GRID[_grid_index(self.F, F_GRID, "F")])
        object.__setattr__(self, "Cr", CR_GRID[_grid_index(self.Cr, CR_GRID, "Cr")])

    def population_size(self, dimension: int) -> int:
        return self.np_mult * dimension

    def to_dict(self) -> dict:
        return {
            "init": self.init.name,
            "mutation": self.mutation.label,
            "crossover": self.crossover.name,
            "np_mult": self.np_mult,
            "F": self.F,
            "Cr": self.Cr,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DEConfig":
        missing = {"init", "mutation", "crossover", "np_mult", "F", "Cr"} - set(d)
        if missing:
            raise ConfigurationError(f"DEConfig is missing fields {sorted(missing)}")
        return cls(
            init=d["init"],
            mutation=d["mutation"],
            crossover=d["crossover"],
            np_mult=int(d["np_mult"]),
            F=float(d["F"]),
            Cr=float(d["Cr"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "DEConfig":
        return cls.from_dict(json.loads(text))

    def to_action(self) -> tuple[int, ...]:
        return (
            int(self.init),
            int(self.mutation),
            int(self.crossover),
            NP_MULTIPLIERS.index(self.np_mult),
            F_GRID.index(self.F),
            CR_GRID.index(self.Cr),
        )

    @classmethod
    def from_action(cls, action: Sequence[int]) -> "DEConfig":
        if len(action) != len(HEAD_WIDTHS):
            raise ConfigurationError(f"action needs {len(HEAD_WIDTHS)} indices, got {len(action)}")
        for a, width in zip(action, HEAD_WIDTHS):
            if not 0 <= a < width:
                raise ConfigurationError(f"action index {a} outside [0, {width})")
        i, m, c, n, f, r = (int(a) for a in action)
        return cls(InitStrategy(i), Mutation(m), Crossover(c), NP_MULTIPLIERS[n], F_GRID[f], CR_GRID[r])


CANONICAL_DE = DEConfig(InitStrategy.Random, Mutation.RAND_1, Crossover.Binomial, 5, 0.5, 0.9)


@dataclass
class Population:
    X: np.ndarray
    fitness: np.ndarray
    fes_used: int = 0

    @property
    def best_index(self) -> int:
        # np.argmin returns the first minimum, i.e. ties go to the lowest index
        return int(np.argmin(self.fitness))

    @property
    def size(self) -> int:
        return self.X.shape[0]


@dataclass
class RunResult:
    best_f: float
    best_x: np.ndarray
    trajectory: list[tuple[int, float]]
    fes_used: int
    wall_time: float
    generations: int = 0
    config: DEConfig | None = field(default=None, repr=False)
    # first evaluation count at which ``hit_test`` held, if one was given
    hit_fes: int | None = None


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def partner_indices(NP: int, rng: np.random.Generator, k: int = 5) -> np.ndarray:
    """``NP x k`` indices; row ``i`` holds ``k`` distinct values from ``{0..NP-1} \\ {i}``.

    Rows are uniformly random ordered ``k``-subsets: the ``k`` smallest of
    NP i.i.d. keys, with the own-index key masked out.
    """
    if NP < k + 1:
        raise ConfigurationError(f"population of {NP} cannot supply {k} distinct partners")
    keys = rng.random((NP, NP))
    np.fill_diagonal(keys, np.inf)
    part = np.argpartition(keys, k - 1, axis=1)[:, :k]
    order = np.argsort(np.take_along_axis(keys, part, axis=1), axis=1)
    return np.take_along_axis(part, order, axis=1)


def mutate_with_indices(
    X: np.ndarray, best: int, r: np.ndarray, strategy: Mutation, F: float
) -> np.ndarray:
    """Donor matrix for given partner indices ``r`` (``NP x 5``, 0-based)."""
    strategy = Mutation(strategy)
    x1, x2, x3, x4, x5 = (X[r[:, j]] for j in range(5))
    xb = X[best][None, :]
    xi = X
    if strategy is Mutation.RAND_1:
        return x1 + F * (x2 - x3)
    if strategy is Mutation.RAND_2:
        return x1 + F * (x2 - x3) + F * (x4 - x5)
    if strategy is Mutation.BEST_1:
        return xb + F * (x1 - x2)
    if strategy is Mutation.BEST_2:
        return xb + F * (x1 - x2) + F * (x3 - x4)
    if strategy is Mutation.CURRENT_TO_RAND_1:
        return xi + F * (x1 - xi) + F * (x2 - x3)
    if strategy is Mutation.CURRENT_TO_BEST_1:
        return xi + F * (xb - xi) + F * (x1 - x2)
    if strategy is Mutation.RAND_TO_BEST_1:
        return x1 + F * (xb - x2) + F * (x3 - x4)
    if strategy is Mutation.CURRENT_TO_RAND_2:
        return xi + F * (x1 - xi) + F * (x2 - x3) + F * (x4 - x5)
    if strategy is Mutation.CURRENT_TO_BEST_2:
        return xi + F * (xb - xi) + F * (x1 - x2) + F * (x3 - x4)
    return x1 + F * (xb - x1) + F * (x2 - x3) + F * (x4 - x5)


def mutate(pop: Population, strategy: Mutation, F: float, rng: np.random.Generator) -> np.ndarray:
    if pop.size < MIN_NP:
        raise ConfigurationError(f"mutation needs NP >= {MIN_NP}, got {pop.size}")
    if F < 0:
        raise ConfigurationError(f"F must be non-negative, got {F}")
    r = partner_indices(pop.size, rng)
    return mutate_with_indices(pop.X, pop.best_index, r, strategy, F)


def crossover_masks(
    n: int, D: int, strategy: Crossover, Cr: float, rng: np.random.Generator
) -> np.ndarray:
    """Boolean ``n x D`` mask, True where the trial takes the donor component.

    Draw order (part of the reproducibility contract):
    binomial -- ``rand(n, D)`` then ``j_rand``;
    exponential -- start ``k`` then ``rand(n, D-1)`` for the run-length loop.
    """
    if Crossover(strategy) is Crossover.Binomial:
        u = rng.random((n, D))
        j_rand = rng.integers(D, size=n)
        mask = u <= Cr
        mask[np.arange(n), j_rand] = True
        return mask
    k = rng.integers(D, size=n)
    u = rng.random((n, D - 1))
    # L starts at 1 and grows while the draw is below Cr, up to D
    L = 1 + np.sum(np.cumprod(u < Cr, axis=1), axis=1)
    offset = (np.arange(D)[None, :] - k[:, None]) % D
    return offset < L[:, None]


def crossover_batch(targets, donors, strategy: Crossover, Cr: float, rng) -> np.ndarray:
    mask = crossover_masks(targets.shape[0], targets.shape[1], strategy, Cr, rng)
    return np.where(mask, donors, targets)


def crossover(target, donor, strategy: Crossover, Cr: float, rng) -> np.ndarray:
    target = np.asarray(target, dtype=float)
    donor = np.asarray(donor, dtype=float)
    if target.shape != donor.shape or target.ndim != 1:
        raise ValueError("target and donor must be vectors of equal length")
    return crossover_batch(target[None, :], donor[None, :], strategy, Cr, rng)[0]


def repair_bounds(x, lb: float, ub: float) -> np.ndarray:
    return np.clip(x, lb, ub)


def select_mu_lambda(targets: Population, trial_X: np.ndarray, trial_f: np.ndarray) -> Population:
    """Best ``NP`` of targets + trials.

    Ties resolve by fitness, then targets before trials, then lower index; a
    stable sort over the concatenation gives exactly this order.
    """
    NP = targets.size
    X = np.concatenate([targets.X, trial_X])
    f = np.concatenate([targets.fitness, trial_f])
    keep = np.argsort(f, kind="stable")[:NP]
    return Population(X=X[keep], fitness=f[keep], fes_used=targets.fes_used + len(trial_f))


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


class TrajectoryRecorder:
    """Best-so-far value at requested FE counts, exact to the single evaluation."""

    def __init__(self, checkpoint_fes: Sequence[int], max_fes: int, hit_test=None):
        self.checkpoints = sorted({int(c) for c in checkpoint_fes if 0 < c <= max_fes})
        self.hit_test = hit_test
        self.hit_fes: int | None = None
        self._next = 0
        self.fes = 0
        self.best_f = np.inf
        self.best_x: np.ndarray | None = None
        self.trajectory: list[tuple[int, float]] = []

    def observe(self, X: np.ndarray, f: np.ndarray) -> None:
        start = self.fes
        end = start + len(f)
        while self._next < len(self.checkpoints) and self.checkpoints[self._next] <= end:
            c = self.checkpoints[self._next]
            prefix = f[: c - start]
            value = min(self.best_f, float(prefix.min())) if len(prefix) else self.best_f
            self.trajectory.append((c, value))
            self._next += 1
        if self.hit_test is not None and self.hit_fes is None:
            hits = np.flatnonzero(self.hit_test(f))
            if len(hits):
                self.hit_fes = start + int(hits[0]) + 1
        i = int(np.argmin(f))
        if f[i] < self.best_f:
            self.best_f = float(f[i])
            self.best_x = np.array(X[i], copy=True)
        self.fes = end

    def finish(self) -> list[tuple[int, float]]:
        if not self.trajectory or self.trajectory[-1][0] != self.fes:
            self.trajectory.append((self.fes, self.best_f))
        return self.trajectory


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def de_generation(pop: Population, config: DEConfig, instance, rng) -> tuple[Population, np.ndarray, np.ndarray]:
    """One generation; returns the new population and the evaluated trials."""
    donors = mutate(pop, config.mutation, config.F, rng)
    trials = crossover_batch(pop.X, donors, config.crossover, config.Cr, rng)
    trials = repair_bounds(trials, instance.lower, instance.upper)
    trial_f = bbob.evaluate_batch(instance, trials)
    return select_mu_lambda(pop, trials, trial_f), trials, trial_f


def run_de(
    config: DEConfig,
    instance: bbob.ProblemInstance,
    max_fes: int,
    checkpoint_fes: Sequence[int] = (),
    rng=None,
    hit_test=None,
) -> RunResult:
    """Run DE until the next generation would exceed ``max_fes`` evaluations.

    ``hit_test`` maps a vector of objective values to a boolean mask; the first
    evaluation where it holds is reported as ``hit_fes``.
    """
    rng = as_generator(rng)
    D = instance.dimension
    NP = config.population_size(D)
    if NP < MIN_NP:
        raise ConfigurationError(f"NP={NP} is below the minimum of {MIN_NP}")
    if max_fes < NP:
        raise ConfigurationError(f"max_fes={max_fes} cannot cover the initial population of {NP}")

    t0 = time.perf_counter()
    recorder = TrajectoryRecorder(checkpoint_fes, max_fes, hit_test)
    X = initialize(config.init, NP, D, instance.lower, instance.upper, rng)
    f = bbob.evaluate_batch(instance, X)
    recorder.observe(X, f)
    pop = Population(X=X, fitness=f, fes_used=NP)
    generations = 0
    while pop.fes_used + NP <= max_fes:
        pop, trials, trial_f = de_generation(pop, config, instance, rng)
        recorder.observe(trials, trial_f)
        generations += 1
    wall = time.perf_counter() - t0

    return RunResult(
        best_f=recorder.best_f,
        best_x=recorder.best_x,
        trajectory=recorder.finish(),
        fes_used=pop.fes_used,
        wall_time=wall,
        generations=generations,
        config=config,
        hit_fes=recorder.hit_fes,
    )
