from fractions import Fraction as F
import json
import math

import numpy as np
import pytest

from decoupling_lab.errors import DomainError
from decoupling_lab.fields import (GridEvaluator, GridFunction, evaluate_extension, make_test_function,
                                   rescaling_covariance_check)
from decoupling_lab.geometry import FrequencyCube, SpatialCube, dyadic_partition
from decoupling_lab.grid import SpatialGrid


def test_constant_function_cells():
    g = make_test_function("constant", FrequencyCube.unit(2), 4)
    assert g.values.shape == (4, 4) and np.all(g.values == 1)


def test_cap_indicator_cells():
    cap = FrequencyCube((F(1, 2),), F(1, 4))
    g = make_test_function("cap-indicator", FrequencyCube.unit(1), 8, cap=cap)
    np.testing.assert_array_equal(g.values.real, [0, 0, 0, 0, 1, 1, 0, 0])


def test_gaussian_is_reproducible():
    a = make_test_function("random-gaussian", FrequencyCube.unit(2), 8, seed=7)
    b = make_test_function("random-gaussian", FrequencyCube.unit(2), 8, seed=7)
    assert a.values.tobytes() == b.values.tobytes()


def test_unknown_kind_and_missing_seed():
    with pytest.raises(DomainError):
        make_test_function("sawtooth", FrequencyCube.unit(1), 4)
    with pytest.raises(DomainError):
        make_test_function("random-gaussian", FrequencyCube.unit(1), 4)


def test_constant_at_origin_is_cube_measure():
    Q = FrequencyCube((F(1, 4),), F(1, 4))
    g = make_test_function("constant", Q, 16)
    assert complex(evaluate_extension(g, np.zeros((1, 2)))[0]) == pytest.approx(0.25, abs=1e-15)


def test_point_mass_modulus():
    g = make_test_function("point-mass-lattice", FrequencyCube.unit(2), 8, seed=2)
    pts = np.random.default_rng(1).normal(scale=100.0, size=(50, 3))
    np.testing.assert_allclose(np.abs(evaluate_extension(g, pts)), 1.0, rtol=1e-12)


def test_empty_point_set():
    g = make_test_function("constant", FrequencyCube.unit(1), 4)
    assert evaluate_extension(g, np.zeros((0, 2))).shape == (0,)


def test_separable_matches_direct():
    g = make_test_function("random-gaussian", FrequencyCube.unit(1), 64, seed=1)
    pts = np.random.default_rng(0).uniform(-50, 50, size=(10, 2))
    fast = evaluate_extension(g, pts)
    slow = evaluate_extension(g, pts, method="direct")
    assert np.max(np.abs(fast - slow)) / np.max(np.abs(slow)) < 1e-10


def test_explicit_sum_oracle():
    # a two-cell function summed by hand
    g = GridFunction(FrequencyCube.unit(1), 2, np.array([1.0, 2.0j]), "continuum")
    x = np.array([[0.7, 1.3]])
    want = 0.5 * (np.exp(2j * math.pi * (0.25 * 0.7 + 0.0625 * 1.3))
                  + 2j * np.exp(2j * math.pi * (0.75 * 0.7 + 0.5625 * 1.3)))
    assert complex(evaluate_extension(g, x)[0]) == pytest.approx(want, abs=1e-14)


def test_linearity_and_cap_additivity():
    Q = FrequencyCube.unit(2)
    g1 = make_test_function("random-gaussian", Q, 8, seed=3)
    g2 = make_test_function("random-gaussian", Q, 8, seed=4)
    pts = np.random.default_rng(2).normal(scale=10.0, size=(20, 3))
    a, b = 2 - 1j, 0.5j
    lhs = evaluate_extension(g1.with_values(a * g1.values + b * g2.values), pts)
    rhs = a * evaluate_extension(g1, pts) + b * evaluate_extension(g2, pts)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)
    total = sum(evaluate_extension(g1.restrict(q), pts) for q in dyadic_partition(Q, F(1, 4)))
    np.testing.assert_allclose(total, evaluate_extension(g1, pts), rtol=0, atol=1e-12)


def test_translation_covariance():
    Q = FrequencyCube.unit(1)
    v = np.array([0.37, 0.0])
    pts = np.random.default_rng(3).normal(scale=5.0, size=(10, 2))
    mass = make_test_function("point-mass-lattice", Q, 8, seed=5)
    np.testing.assert_allclose(np.abs(evaluate_extension(mass, pts + v)), np.abs(evaluate_extension(mass, pts)),
                               rtol=1e-12)
    spread = make_test_function("random-gaussian", Q, 8, seed=5, model="lattice")
    assert not np.allclose(np.abs(evaluate_extension(spread, pts + v)), np.abs(evaluate_extension(spread, pts)))


def test_grid_evaluator_matches_direct():
    g = make_test_function("random-gaussian", FrequencyCube.unit(1), 16, seed=6)
    grid = SpatialGrid(SpatialCube.centered(2, 4.0), 2.0, 0.5)
    field = GridEvaluator(g.frequencies(), grid).total_field(g.coefficients())
    direct = evaluate_extension(g, grid.points(), method="direct").reshape(grid.shape)
    np.testing.assert_allclose(field, direct, rtol=0, atol=1e-12)


def test_covariance_example():
    Q = FrequencyCube((F(1, 2),), F(1, 4))
    g = make_test_function("random-gaussian", Q, 16, seed=3)
    lhs, rhs, rel = rescaling_covariance_check(g, Q, [5.0, -2.0])
    assert rel < 1e-9 and lhs > 0


def test_covariance_unit_cube_exact_and_phase_invariant():
    g = make_test_function("random-gaussian", FrequencyCube.unit(2), 4, seed=8)
    lhs, rhs, rel = rescaling_covariance_check(g, FrequencyCube.unit(2), [1.0, 2.0, 3.0])
    assert lhs == rhs and rel == 0
    Q = FrequencyCube((F(1, 4), F(1, 2)), F(1, 4))
    h = make_test_function("random-gaussian", Q, 4, seed=9)
    a = rescaling_covariance_check(h, Q, [4.0, 1.0, -3.0])
    b = rescaling_covariance_check(h.with_values(h.values * np.exp(1j * math.pi / 3)), Q, [4.0, 1.0, -3.0])
    assert a[0] == pytest.approx(b[0], rel=1e-13) and a[1] == pytest.approx(b[1], rel=1e-13)


def test_covariance_subcube():
    Q = FrequencyCube((F(1, 4),), F(1, 4))
    sub = FrequencyCube((F(3, 8),), F(1, 8))
    g = make_test_function("random-gaussian", sub, 8, seed=10)
    assert rescaling_covariance_check(g, Q, [11.0, 3.0])[2] < 1e-9
    with pytest.raises(DomainError):
        rescaling_covariance_check(g, FrequencyCube((F(0),), F(1, 4)), [0.0, 0.0])


def test_json_round_trip():
    g = make_test_function("random-gaussian", FrequencyCube((F(1, 2), 0), F(1, 2)), 4, seed=1)
    h = GridFunction.from_json(json.loads(json.dumps(g.to_json())))
    assert h.cube == g.cube and h.M == g.M and h.model == g.model
    assert h.values.tobytes() == g.values.tobytes()
