"""Noiseless BBOB-2009 benchmark suite.

All 24 noiseless functions, with deterministic instance generation.  Every
random field of an instance (optimum location, optimal value, rotations and
the Gallagher peak layout) is drawn from its own Philox stream keyed on
``(function_id, dimension, instance_seed, role)``, so each field can be
re-derived independently of the others.

Vectors are row vectors throughout: ``X`` has shape ``(n, D)`` and a rotation
``R`` acts as ``X @ R.T``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

LOWER = -5.0
UPPER = 5.0
N_FUNCTIONS = 24
TEST_IDS = frozenset({1, 5, 6, 10, 15, 20})

# Stream identifiers for the counter-based generator; never renumber.
_ROLES = {
    "xopt": 1,
    "fopt": 2,
    "R": 3,
    "Q": 4,
    "peak_locations": 5,
    "peak_conditions": 6,
    "peak_permutations": 7,
}

_SCHWEFEL_OPT = 4.2096874633
_LUNACEK_MU0 = 2.5

FUNCTION_NAMES = {
    1: "Sphere",
    2: "Ellipsoidal",
    3: "Rastrigin",
    4: "Bueche-Rastrigin",
    5: "Linear Slope",
    6: "Attractive Sector",
    7: "Step Ellipsoidal",
    8: "Rosenbrock",
    9: "Rosenbrock rotated",
    10: "Ellipsoidal rotated",
    11: "Discus",
    12: "Bent Cigar",
    13: "Sharp Ridge",
    14: "Different Powers",
    15: "Rastrigin rotated",
    16: "Weierstrass",
    17: "Schaffers F7",
    18: "Schaffers F7 ill-conditioned",
    19: "Griewank-Rosenbrock F8F2",
    20: "Schwefel",
    21: "Gallagher 101 peaks",
    22: "Gallagher 21 peaks",
    23: "Katsuura",
    24: "Lunacek bi-Rastrigin",
}


def instance_rng(function_id: int, dimension: int, seed: int, role: str) -> np.random.Generator:
    """Philox generator for one instance field.

    The key is a ``SeedSequence`` over the four integers, so the stream is
    identical on every platform numpy supports.
    """
    entropy = [int(function_id), int(dimension), int(seed), _ROLES[role]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def gram_schmidt(A: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of ``A`` (modified Gram-Schmidt, two passes)."""
    Q = np.array(A, dtype=float, copy=True)
    n = Q.shape[1]
    for _ in range(2):
        for j in range(n):
            v = Q[:, j]
            for k in range(j):
                v = v - np.dot(Q[:, k], v) * Q[:, k]
            Q[:, j] = v / np.linalg.norm(v)
    return Q


def random_rotation(rng: np.random.Generator, dimension: int) -> np.ndarray:
    return gram_schmidt(rng.standard_normal((dimension, dimension)))


# ---------------------------------------------------------------------------
# transformations shared by the function definitions
# ---------------------------------------------------------------------------


def _ramp(dimension: int) -> np.ndarray:
    # (i - 1) / (D - 1) for i = 1..D
    return np.linspace(0.0, 1.0, dimension)


def transform_osz(x) -> np.ndarray:
    """Oscillation transformation, applied component-wise."""
    x = np.asarray(x, dtype=float)
    nonzero = x != 0
    xhat = np.log(np.abs(np.where(nonzero, x, 1.0)))
    c1 = np.where(x > 0, 10.0, 5.5)
    c2 = np.where(x > 0, 7.9, 3.1)
    out = np.sign(x) * np.exp(xhat + 0.049 * (np.sin(c1 * xhat) + np.sin(c2 * xhat)))
    return np.where(nonzero, out, 0.0)


def transform_asy(x, beta: float) -> np.ndarray:
    """Asymmetric transformation; only positive components are changed."""
    x = np.asarray(x, dtype=float)
    t = _ramp(x.shape[-1])
    positive = x > 0
    xp = np.where(positive, x, 0.0)
    return np.where(positive, xp ** (1.0 + beta * t * np.sqrt(xp)), x)


def scale_lambda(x, alpha: float) -> np.ndarray:
    """Multiply by the diagonal matrix with entries ``alpha**(0.5 (i-1)/(D-1))``."""
    x = np.asarray(x, dtype=float)
    return x * alpha ** (0.5 * _ramp(x.shape[-1]))


def penalty_fpen(x) -> np.ndarray | float:
    """Boundary penalty: squared excess over ``[-5, 5]`` summed over the last axis."""
    x = np.asarray(x, dtype=float)
    return np.sum(np.maximum(0.0, np.abs(x) - 5.0) ** 2, axis=-1)


def _rastrigin(z: np.ndarray) -> np.ndarray:
    D = z.shape[-1]
    return 10.0 * (D - np.sum(np.cos(2 * np.pi * z), axis=-1)) + np.sum(z**2, axis=-1)


def _rosenbrock(z: np.ndarray) -> np.ndarray:
    a, b = z[:, :-1], z[:, 1:]
    return np.sum(100.0 * (a**2 - b) ** 2 + (a - 1.0) ** 2, axis=-1)


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """One instantiated benchmark function. Immutable once built."""

    function_id: int
    dimension: int
    instance_seed: int
    x_opt: np.ndarray
    f_opt: float
    R: np.ndarray
    Q: np.ndarray
    lower: float = LOWER
    upper: float = UPPER
    params: Mapping[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def name(self) -> str:
        return FUNCTION_NAMES[self.function_id]

    def descriptor(self) -> dict:
        return {
            "function_id": self.function_id,
            "dimension": self.dimension,
            "instance_seed": self.instance_seed,
        }

    def __repr__(self) -> str:
        return (
            f"ProblemInstance(f{self.function_id} {self.name!r}, D={self.dimension}, "
            f"seed={self.instance_seed}, f_opt={self.f_opt})"
        )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _validate_ids(function_id, dimension, seed):
    if isinstance(function_id, bool) or not isinstance(function_id, (int, np.integer)):
        raise ValueError(f"function_id must be an integer, got {function_id!r}")
    if not 1 <= function_id <= N_FUNCTIONS:
        raise ValueError(f"function_id must be in 1..{N_FUNCTIONS}, got {function_id}")
    if not isinstance(dimension, (int, np.integer)) or dimension < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {dimension!r}")
    if not isinstance(seed, (int, np.integer)) or not 0 <= seed < 2**64:
        raise ValueError(f"instance seed must be a 64-bit non-negative integer, got {seed!r}")


def make_instance(function_id: int, dimension: int, seed: int | None = None) -> ProblemInstance:
    """Build instance ``seed`` of function ``function_id`` in ``dimension`` dimensions.

    ``seed`` defaults to ``function_id``.
    """
    if seed is None:
        seed = function_id
    _validate_ids(function_id, dimension, seed)
    fid, D, seed = int(function_id), int(dimension), int(seed)

    def rng(role):
        return instance_rng(fid, D, seed, role)

    x_opt = rng("xopt").uniform(-4.0, 4.0, D)
    f_opt = round(float(rng("fopt").uniform(-1000.0, 1000.0)), 2)
    R = random_rotation(rng("R"), D)
    Q = random_rotation(rng("Q"), D)
    params: dict[str, np.ndarray] = {}

    if fid == 4:
        # odd coordinates (1-based) of the optimum are positive
        x_opt[0::2] = np.abs(x_opt[0::2])
    elif fid == 5:
        x_opt = 5.0 * np.where(x_opt >= 0, 1.0, -1.0)
    elif fid == 8:
        x_opt = 0.75 * x_opt
    elif fid in (9, 19):
        c = max(1.0, math.sqrt(D) / 8.0)
        x_opt = R.T @ np.full(D, 0.5 / c)
    elif fid == 20:
        x_opt = 0.5 * _SCHWEFEL_OPT * np.where(x_opt >= 0, 1.0, -1.0)
    elif fid in (21, 22):
        n_peaks, y1_bound, y_bound, top_alpha = (
            (101, 4.0, 5.0, 1000.0) if fid == 21 else (21, 3.92, 4.9, 1000.0**2)
        )
        loc = rng("peak_locations")
        locations = loc.uniform(-y_bound, y_bound, (n_peaks, D))
        locations[0] = loc.uniform(-y1_bound, y1_bound, D)
        x_opt = locations[0].copy()
        alphas = 1000.0 ** (2.0 * np.arange(n_peaks - 1) / (n_peaks - 2))
        alphas = np.concatenate([[top_alpha], rng("peak_conditions").permutation(alphas)])
        perm_rng = rng("peak_permutations")
        t = _ramp(D)
        conditioning = np.empty((n_peaks, D))
        for k, a in enumerate(alphas):
            conditioning[k] = perm_rng.permutation(a ** (0.5 * t) / a**0.25)
        weights = np.concatenate(
            [[10.0], 1.1 + 8.0 * np.arange(n_peaks - 1) / (n_peaks - 2)]
        )
        params = {
            "locations": _frozen(locations),
            "conditioning": _frozen(conditioning),
            "weights": _frozen(weights),
            "rotated_locations": _frozen(locations @ R.T),
        }
    elif fid == 24:
        x_opt = 0.5 * _LUNACEK_MU0 * np.where(x_opt >= 0, 1.0, -1.0)

    return ProblemInstance(
        function_id=fid,
        dimension=D,
        instance_seed=seed,
        x_opt=_frozen(x_opt),
        f_opt=f_opt,
        R=_frozen(R),
        Q=_frozen(Q),
        params=MappingProxyType(params),
    )


def instance_from_descriptor(desc: Mapping | str) -> ProblemInstance:
    """Rebuild an instance from ``{function_id, dimension, instance_seed}`` (dict or JSON)."""
    if isinstance(desc, str):
        desc = json.loads(desc)
    return make_instance(int(desc["function_id"]), int(desc["dimension"]), int(desc["instance_seed"]))


# ---------------------------------------------------------------------------
# the 24 functions; each returns f - f_opt (penalties included)
# ---------------------------------------------------------------------------


def _f1(p, X):
    return np.sum((X - p.x_opt) ** 2, axis=-1)


def _f2(p, X):
    z = transform_osz(X - p.x_opt)
    return np.sum(10.0 ** (6.0 * _ramp(p.dimension)) * z**2, axis=-1)


def _f3(p, X):
    z = scale_lambda(transform_asy(transform_osz(X - p.x_opt), 0.2), 10.0)
    return _rastrigin(z)


def _f4(p, X):
    D = p.dimension
    z = transform_osz(X - p.x_opt)
    s = 10.0 ** (0.5 * _ramp(D))
    odd = (np.arange(D) % 2) == 0
    s = np.where((z > 0) & odd, 10.0 * s, s)
    return _rastrigin(s * z) + 100.0 * penalty_fpen(X)


def _f5(p, X):
    s = np.sign(p.x_opt) * 10.0 ** _ramp(p.dimension)
    z = np.where(p.x_opt * X < 25.0, X, p.x_opt)
    return np.sum(5.0 * np.abs(s) - s * z, axis=-1)


def _f6(p, X):
    z = scale_lambda((X - p.x_opt) @ p.R.T, 10.0) @ p.Q.T
    s = np.where(z * p.x_opt > 0, 100.0, 1.0)
    return transform_osz(np.sum((s * z) ** 2, axis=-1)) ** 0.9


def _f7(p, X):
    zhat = scale_lambda((X - p.x_opt) @ p.R.T, 10.0)
    ztilde = np.where(
        np.abs(zhat) > 0.5, np.floor(0.5 + zhat), np.floor(0.5 + 10.0 * zhat) / 10.0
    )
    z = ztilde @ p.Q.T
    core = np.sum(10.0 ** (2.0 * _ramp(p.dimension)) * z**2, axis=-1)
    return 0.1 * np.maximum(np.abs(zhat[:, 0]) / 1e4, core) + penalty_fpen(X)


def _f8(p, X):
    c = max(1.0, math.sqrt(p.dimension) / 8.0)
    return _rosenbrock(c * (X - p.x_opt) + 1.0)


def _f9(p, X):
    c = max(1.0, math.sqrt(p.dimension) / 8.0)
    return _rosenbrock(c * (X @ p.R.T) + 0.5)


def _f10(p, X):
    z = transform_osz((X - p.x_opt) @ p.R.T)
    return np.sum(10.0 ** (6.0 * _ramp(p.dimension)) * z**2, axis=-1)


def _f11(p, X):
    z = transform_osz((X - p.x_opt) @ p.R.T)
    return 1e6 * z[:, 0] ** 2 + np.sum(z[:, 1:] ** 2, axis=-1)


def _f12(p, X):
    z = transform_asy((X - p.x_opt) @ p.R.T, 0.5) @ p.R.T
    return z[:, 0] ** 2 + 1e6 * np.sum(z[:, 1:] ** 2, axis=-1)


def _f13(p, X):
    z = scale_lambda((X - p.x_opt) @ p.R.T, 10.0) @ p.Q.T
    return z[:, 0] ** 2 + 100.0 * np.sqrt(np.sum(z[:, 1:] ** 2, axis=-1))


def _f14(p, X):
    z = (X - p.x_opt) @ p.R.T
    return np.sqrt(np.sum(np.abs(z) ** (2.0 + 4.0 * _ramp(p.dimension)), axis=-1))


def _f15(p, X):
    z = transform_asy(transform_osz((X - p.x_opt) @ p.R.T), 0.2)
    z = scale_lambda(z @ p.Q.T, 10.0) @ p.R.T
    return _rastrigin(z)


_WEIERSTRASS_K = np.arange(12)
_WEIERSTRASS_A = 0.5**_WEIERSTRASS_K
_WEIERSTRASS_B = 3.0**_WEIERSTRASS_K
_WEIERSTRASS_F0 = float(np.sum(_WEIERSTRASS_A * np.cos(np.pi * _WEIERSTRASS_B)))


def _f16(p, X):
    D = p.dimension
    z = transform_osz((X - p.x_opt) @ p.R.T)
    z = scale_lambda(z @ p.Q.T, 0.01) @ p.R.T
    terms = _WEIERSTRASS_A * np.cos(2 * np.pi * _WEIERSTRASS_B * (z[..., None] + 0.5))
    mean = np.sum(terms, axis=(-1, -2)) / D
    return 10.0 * (mean - _WEIERSTRASS_F0) ** 3 + 10.0 / D * penalty_fpen(X)


def _schaffers(p, X, condition):
    z = transform_asy((X - p.x_opt) @ p.R.T, 0.5)
    z = scale_lambda(z @ p.Q.T, condition)
    s = np.sqrt(z[:, :-1] ** 2 + z[:, 1:] ** 2)
    inner = np.mean(np.sqrt(s) + np.sqrt(s) * np.sin(50.0 * s**0.2) ** 2, axis=-1)
    return inner**2 + 10.0 * penalty_fpen(X)


def _f17(p, X):
    return _schaffers(p, X, 10.0)


def _f18(p, X):
    return _schaffers(p, X, 1000.0)


def _f19(p, X):
    D = p.dimension
    c = max(1.0, math.sqrt(D) / 8.0)
    z = c * (X @ p.R.T) + 0.5
    s = 100.0 * (z[:, :-1] ** 2 - z[:, 1:]) ** 2 + (z[:, :-1] - 1.0) ** 2
    return 10.0 / (D - 1) * np.sum(s / 4000.0 - np.cos(s), axis=-1) + 10.0


def _f20(p, X):
    D = p.dimension
    sign = np.sign(p.x_opt)
    two_abs_opt = 2.0 * np.abs(p.x_opt)
    xhat = 2.0 * sign * X
    zhat = xhat.copy()
    zhat[:, 1:] += 0.25 * (xhat[:, :-1] - two_abs_opt[:-1])
    z = 100.0 * (scale_lambda(zhat - two_abs_opt, 10.0) + two_abs_opt)
    core = -np.sum(z * np.sin(np.sqrt(np.abs(z))), axis=-1) / (100.0 * D) + 4.189828872724339
    return core + 100.0 * penalty_fpen(z / 100.0)


def _gallagher(p, X):
    D = p.dimension
    Xr = X @ p.R.T
    diff = Xr[:, None, :] - p.params["rotated_locations"][None, :, :]
    quad = np.sum(p.params["conditioning"][None, :, :] * diff**2, axis=-1)
    peaks = p.params["weights"][None, :] * np.exp(-quad / (2.0 * D))
    return transform_osz(10.0 - np.max(peaks, axis=-1)) ** 2 + penalty_fpen(X)


_KATSUURA_POW = 2.0 ** np.arange(1, 33)


def _f23(p, X):
    D = p.dimension
    z = scale_lambda((X - p.x_opt) @ p.R.T, 100.0) @ p.Q.T
    t = z[..., None] * _KATSUURA_POW
    inner = np.sum(np.abs(t - np.floor(t + 0.5)) / _KATSUURA_POW, axis=-1)
    prod = np.prod((1.0 + np.arange(1, D + 1) * inner) ** (10.0 / D**1.2), axis=-1)
    return 10.0 / D**2 * prod - 10.0 / D**2 + penalty_fpen(X)


def _f24(p, X):
    D = p.dimension
    mu0 = _LUNACEK_MU0
    d = 1.0
    s = 1.0 - 1.0 / (2.0 * math.sqrt(D + 20.0) - 8.2)
    mu1 = -math.sqrt((mu0**2 - d) / s)
    xhat = 2.0 * np.sign(p.x_opt) * X
    z = scale_lambda((xhat - mu0) @ p.R.T, 100.0) @ p.Q.T
    first = np.sum((xhat - mu0) ** 2, axis=-1)
    second = d * D + s * np.sum((xhat - mu1) ** 2, axis=-1)
    return (
        np.minimum(first, second)
        + 10.0 * (D - np.sum(np.cos(2 * np.pi * z), axis=-1))
        + 1e4 * penalty_fpen(X)
    )


_FUNCTIONS = {
    1: _f1, 2: _f2, 3: _f3, 4: _f4, 5: _f5, 6: _f6, 7: _f7, 8: _f8,
    9: _f9, 10: _f10, 11: _f11, 12: _f12, 13: _f13, 14: _f14, 15: _f15, 16: _f16,
    17: _f17, 18: _f18, 19: _f19, 20: _f20, 21: _gallagher, 22: _gallagher,
    23: _f23, 24: _f24,
}  # fmt: skip


def evaluate_batch(instance: ProblemInstance, X) -> np.ndarray:
    """Objective values for each row of ``X`` (shape ``(n, D)``)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != instance.dimension:
        raise ValueError(
            f"expected points of shape (n, {instance.dimension}), got {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite component in evaluation point")
    return _FUNCTIONS[instance.function_id](instance, X) + instance.f_opt


def evaluate(instance: ProblemInstance, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != instance.dimension:
        raise ValueError(f"expected a vector of length {instance.dimension}, got shape {x.shape}")
    return float(evaluate_batch(instance, x[None, :])[0])


def gap(instance: ProblemInstance, f_value: float) -> float:
    return f_value - instance.f_opt


@dataclass(frozen=True)
class SuiteSplit:
    train_ids: frozenset
    test_ids: frozenset


def suite_split() -> SuiteSplit:
    """Function-level split: six held-out test functions, the other 18 for training."""
    all_ids = frozenset(range(1, N_FUNCTIONS + 1))
    return SuiteSplit(train_ids=all_ids - TEST_IDS, test_ids=TEST_IDS)
