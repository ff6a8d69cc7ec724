"""Population initialization strategies.

The member order of :class:`InitStrategy` is the agent's action encoding for
the initialization head and must not change.
"""

from __future__ import annotations

import enum

import numpy as np

TENT_ALPHA = 0.7


class InitStrategy(enum.IntEnum):
    Random = 0
    LatinHypercube = 1
    Uniform = 2
    Normal = 3
    TentMapping = 4


def tent_map(u, alpha: float = TENT_ALPHA) -> np.ndarray:
    """Map unit draws ``u`` through the tent map with breakpoint ``alpha``."""
    u = np.asarray(u, dtype=float)
    return np.where(u < alpha, u / alpha, (1.0 - u) / (1.0 - alpha))


def latin_hypercube(n: int, d: int, lb: float, ub: float, rng: np.random.Generator) -> np.ndarray:
    """One uniform point per stratum in every column; strata order shuffled per column."""
    offsets = rng.random((n, d))
    strata = np.argsort(rng.random((n, d)), axis=0)
    u = (strata + offsets) / n
    return lb + u * (ub - lb)


def initialize(
    strategy: InitStrategy,
    NP: int,
    D: int,
    lb: float,
    ub: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Return an ``NP x D`` initial population inside ``[lb, ub]``.

    ``Normal`` follows the design-space table literally: a *uniform* draw
    scaled by ``(ub - lb) / 6`` and shifted by the centre, so every point
    lies in ``[(ub+lb)/2, (ub+lb)/2 + (ub-lb)/6]``.
    """
    strategy = InitStrategy(strategy)
    if NP <= 0 or D <= 0:
        raise ValueError(f"NP and D must be positive, got NP={NP}, D={D}")
    if not lb < ub:
        raise ValueError(f"need lb < ub, got lb={lb}, ub={ub}")

    if strategy is InitStrategy.Random:
        P = rng.random((NP, D)) * (ub - lb) + lb
    elif strategy is InitStrategy.LatinHypercube:
        P = latin_hypercube(NP, D, lb, ub, rng)
    elif strategy is InitStrategy.Uniform:
        P = rng.uniform(lb, ub, size=(NP, D))
    elif strategy is InitStrategy.Normal:
        P = rng.random((NP, D)) * ((ub - lb) / 6.0) + (ub + lb) / 2.0
    else:
        P = lb + tent_map(rng.random((NP, D))) * (ub - lb)
    # guard against the last ulp of ``lb + u * (ub - lb)``
    return np.clip(P, lb, ub)
