import math

import numpy as np
import pytest

from cbolab.errors import ConfigurationError, InputError
from cbolab.objectives import (
    Objective,
    certify_objective,
    eval_batch,
    make_builtin,
)


def test_saturating_norm_values():
    obj = make_builtin("saturating-norm", 1)
    assert eval_batch(obj, [[0.0]]) == pytest.approx([0.0])
    # r/(1+r) at r=1 is 1/2
    assert eval_batch(obj, [[1.0]]) == pytest.approx([0.5])


def test_gauss_well_at_minimizer():
    obj = make_builtin("gauss-well", 2)
    assert obj(np.zeros(2)) == 0.0


def test_certified_constants():
    sat = make_builtin("saturating-norm", 3)
    # sup of 1/(1+r)^2 over r >= 0 is 1
    assert sat.lipschitz == 1.0
    gw = make_builtin("gauss-well", 3)
    # max of r e^{-r^2/2} is attained at r=1
    assert gw.lipschitz == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert gw.upper_bound == 1.0 and gw.lower_bound == 0.0


def test_unknown_builtin_name():
    with pytest.raises(ConfigurationError):
        make_builtin("rosenbrock", 2)


def test_eval_batch_dimension_mismatch():
    obj = make_builtin("gauss-well", 2)
    with pytest.raises(InputError):
        eval_batch(obj, np.zeros((5, 3)))


def test_eval_batch_is_pure_and_deterministic():
    obj = make_builtin("soft-rastrigin", 2)
    pts = np.random.default_rng(0).uniform(-5, 5, (100, 2))
    first = eval_batch(obj, pts)
    second = eval_batch(obj, pts)
    assert np.array_equal(first, second)


def test_shifted_minimizer():
    center = np.array([1.0, -2.0])
    obj = make_builtin("gauss-well", 2, minimizer=center)
    assert obj(center) == 0.0
    assert obj(np.zeros(2)) > 0.0


@pytest.mark.parametrize("name", ["saturating-norm", "gauss-well", "soft-rastrigin"])
def test_certification_passes_for_builtins(name):
    obj = make_builtin(name, 2)
    report = certify_objective(obj, 10_000, seed=20260810)
    assert report.passed, (report.max_range_violation, report.max_difference_quotient)
    assert report.witness is None


def test_certification_fails_with_understated_lipschitz():
    sat = make_builtin("saturating-norm", 1)
    fake = Objective(
        name="understated",
        dimension=1,
        lower_bound=0.0,
        upper_bound=1.0,
        lipschitz=0.1,
        batch=sat.batch,
    )
    report = certify_objective(fake, 10_000, seed=3)
    assert not report.passed
    assert report.max_difference_quotient > 0.1
    x, y = report.witness
    quotient = abs(fake(x) - fake(y)) / np.linalg.norm(x - y)
    assert quotient == pytest.approx(report.max_difference_quotient)


@pytest.mark.parametrize("name", ["saturating-norm", "gauss-well", "soft-rastrigin"])
@pytest.mark.parametrize("d", [1, 2, 5])
def test_bounds_and_quotients_on_random_pairs(name, d):
    obj = make_builtin(name, d)
    gen = np.random.default_rng(11)
    x = gen.uniform(-10, 10, (10_000, d))
    y = gen.uniform(-10, 10, (10_000, d))
    fx, fy = eval_batch(obj, x), eval_batch(obj, y)
    assert np.all(fx >= obj.lower_bound) and np.all(fx <= obj.upper_bound)
    dist = np.linalg.norm(x - y, axis=1)
    quotients = np.abs(fx - fy)[dist > 0] / dist[dist > 0]
    # exact constants for the closed-form builtins, certified slack otherwise
    assert quotients.max() <= obj.lipschitz * (1 + 1e-12)


def test_soft_rastrigin_certificate_is_conservative():
    obj = make_builtin("soft-rastrigin", 2)
    assert obj.lipschitz_certification == "numeric"
    # dense gradient-norm sampling stays below the certified constant
    gen = np.random.default_rng(5)
    z = gen.uniform(-3, 3, (200_000, 2))
    r = np.sum(z * z - 10.0 * np.cos(2 * np.pi * z) + 10.0, axis=1)
    g = 2 * z + 2 * np.pi * 10.0 * np.sin(2 * np.pi * z)
    grad_norm = np.exp(-r / 10.0) / 10.0 * np.linalg.norm(g, axis=1)
    assert grad_norm.max() < obj.lipschitz


def test_objective_invariant_validation():
    with pytest.raises(InputError):
        Objective("bad", 1, lower_bound=1.0, upper_bound=0.0, lipschitz=1.0, batch=lambda p: p[:, 0])
    with pytest.raises(InputError):
        Objective("bad", 1, lower_bound=0.0, upper_bound=1.0, lipschitz=-1.0, batch=lambda p: p[:, 0])
