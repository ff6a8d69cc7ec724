import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlde import bbob

ALL_IDS = range(1, 25)


def _osz_scalar(x):
    # scalar restatement of the oscillation transform
    if x == 0:
        return 0.0
    xh = math.log(abs(x))
    c1, c2 = (10.0, 7.9) if x > 0 else (5.5, 3.1)
    return math.copysign(math.exp(xh + 0.049 * (math.sin(c1 * xh) + math.sin(c2 * xh))), x)


def _ellipsoid_scalar(inst, x, rotate):
    D = inst.dimension
    d = [x[i] - inst.x_opt[i] for i in range(D)]
    if rotate:
        d = [sum(inst.R[i][j] * d[j] for j in range(D)) for i in range(D)]
    total = 0.0
    for i in range(D):
        total += 10.0 ** (6.0 * i / (D - 1)) * _osz_scalar(d[i]) ** 2
    return total + inst.f_opt


def _rastrigin_f15_scalar(inst, x):
    D = inst.dimension
    d = [x[i] - inst.x_opt[i] for i in range(D)]
    u = [sum(inst.R[i][j] * d[j] for j in range(D)) for i in range(D)]
    u = [_osz_scalar(v) for v in u]
    for i in range(D):
        if u[i] > 0:
            u[i] = u[i] ** (1 + 0.2 * i / (D - 1) * math.sqrt(u[i]))
    z = [sum(inst.Q[i][j] * u[j] for j in range(D)) for i in range(D)]
    z = [z[i] * 10.0 ** (0.5 * i / (D - 1)) for i in range(D)]
    z = [sum(inst.R[i][j] * z[j] for j in range(D)) for i in range(D)]
    s = sum(math.cos(2 * math.pi * v) for v in z)
    return 10 * (D - s) + sum(v * v for v in z) + inst.f_opt


@pytest.mark.parametrize("fid", ALL_IDS)
@pytest.mark.parametrize("dim", [2, 5, 10])
def test_optimum_value(fid, dim):
    for seed in range(5):
        inst = bbob.make_instance(fid, dim, seed)
        assert abs(bbob.evaluate(inst, inst.x_opt) - inst.f_opt) <= 1e-9


@pytest.mark.parametrize("fid", [f for f in ALL_IDS if f != 5])
def test_local_optimality(fid):
    inst = bbob.make_instance(fid, 5, 3)
    rng = np.random.default_rng(fid)
    delta = rng.normal(size=(100, 5))
    delta *= (rng.random((100, 1)) * 1e-3) / np.linalg.norm(delta, axis=1, keepdims=True)
    f = bbob.evaluate_batch(inst, inst.x_opt + delta)
    assert np.all(f >= inst.f_opt - 1e-9)


@pytest.mark.parametrize("fid", ALL_IDS)
def test_rotations_orthonormal(fid):
    inst = bbob.make_instance(fid, 10, 7)
    eye = np.eye(10)
    assert np.max(np.abs(inst.R @ inst.R.T - eye)) <= 1e-10
    assert np.max(np.abs(inst.Q @ inst.Q.T - eye)) <= 1e-10


def test_instances_deterministic():
    a = bbob.make_instance(1, 10, 123)
    b = bbob.make_instance(1, 10, 123)
    for name in ("x_opt", "R", "Q"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.f_opt == b.f_opt
    c = bbob.make_instance(1, 10, 124)
    assert not np.array_equal(a.x_opt, c.x_opt)


def test_default_seed_is_function_id():
    assert bbob.make_instance(7, 3).instance_seed == 7


def test_field_ranges():
    inst = bbob.make_instance(3, 10, 11)
    assert np.all(np.abs(inst.x_opt) <= 4.0)
    assert -1000 <= inst.f_opt <= 1000
    assert round(inst.f_opt, 2) == inst.f_opt


def test_f5_optimum_on_boundary():
    for seed in range(5):
        inst = bbob.make_instance(5, 10, seed)
        assert np.all(np.abs(inst.x_opt) == 5.0)


def test_sphere_unit_step():
    inst = bbob.make_instance(1, 10, 4)
    x = np.array(inst.x_opt)
    x[0] += 1.0
    assert bbob.evaluate(inst, x) == pytest.approx(inst.f_opt + 1.0, abs=1e-9)


@pytest.mark.parametrize("fid,rotate", [(2, False), (10, True)])
def test_ellipsoids_against_scalar_oracle(fid, rotate):
    inst = bbob.make_instance(fid, 4, 9)
    rng = np.random.default_rng(0)
    for x in rng.uniform(-5, 5, size=(20, 4)):
        ref = _ellipsoid_scalar(inst, list(x), rotate)
        assert bbob.evaluate(inst, x) == pytest.approx(ref, rel=1e-12, abs=1e-9)


def test_f15_against_scalar_oracle():
    inst = bbob.make_instance(15, 3, 2)
    rng = np.random.default_rng(1)
    for x in rng.uniform(-5, 5, size=(20, 3)):
        assert bbob.evaluate(inst, x) == pytest.approx(_rastrigin_f15_scalar(inst, list(x)), rel=1e-12)


def test_helpers_fixed_points():
    assert bbob.transform_osz(np.zeros(3)).tolist() == [0.0, 0.0, 0.0]
    x = np.array([-1.0, -0.5, 0.0, -3.0])
    assert np.array_equal(bbob.transform_asy(x, 0.5), x)
    assert bbob.penalty_fpen(np.array([5.0, -5.0, 0.3])) == 0.0
    assert bbob.penalty_fpen(np.array([6.0, -7.0])) == pytest.approx(5.0)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8))
def test_osz_matches_scalar(xs):
    out = bbob.transform_osz(np.array(xs))
    for o, x in zip(out, xs):
        assert o == pytest.approx(_osz_scalar(x), rel=1e-12, abs=1e-300)


def test_scale_lambda_endpoints():
    out = bbob.scale_lambda(np.ones(5), 100.0)
    assert out[0] == 1.0
    assert out[-1] == pytest.approx(10.0)


def test_evaluate_errors():
    inst = bbob.make_instance(1, 3, 1)
    with pytest.raises(ValueError):
        bbob.evaluate(inst, np.zeros(4))
    with pytest.raises(ValueError):
        bbob.evaluate(inst, np.array([0.0, np.nan, 0.0]))
    with pytest.raises(ValueError):
        bbob.make_instance(25, 3)
    with pytest.raises(ValueError):
        bbob.make_instance(0, 3)
    with pytest.raises(ValueError):
        bbob.make_instance(1, 1)


def test_gap():
    inst = bbob.make_instance(6, 5, 2)
    assert bbob.gap(inst, inst.f_opt) == 0
    assert abs(bbob.gap(inst, bbob.evaluate(inst, inst.x_opt))) <= 1e-9
    f1 = bbob.make_instance(1, 5, 2)
    assert bbob.gap(f1, f1.f_opt + 1e-8) == pytest.approx(1e-8, rel=1e-5)


def test_suite_split():
    split = bbob.suite_split()
    assert split.test_ids == {1, 5, 6, 10, 15, 20}
    assert len(split.train_ids) == 18
    assert 1 not in split.train_ids
    assert split.train_ids | split.test_ids == set(ALL_IDS)
    assert not split.train_ids & split.test_ids


def test_descriptor_roundtrip():
    inst = bbob.make_instance(21, 5, 17)
    desc = inst.descriptor()
    assert set(desc) == {"function_id", "dimension", "instance_seed"}
    again = bbob.instance_from_descriptor(json.dumps(desc))
    x = np.linspace(-4, 4, 5)
    assert bbob.evaluate(again, x) == bbob.evaluate(inst, x)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 24), st.integers(2, 6), st.integers(0, 2**32))
def test_evaluation_is_pure_and_finite(fid, dim, seed):
    inst = bbob.make_instance(fid, dim, seed)
    X = np.random.default_rng(seed).uniform(-6, 6, size=(8, dim))
    a = bbob.evaluate_batch(inst, X)
    b = bbob.evaluate_batch(inst, X)
    assert np.array_equal(a, b)
    assert np.all(np.isfinite(a))
    assert np.all(a >= inst.f_opt - 1e-9)
