from fractions import Fraction as F
import itertools
import math

import numpy as np
import pytest

from decoupling_lab.errors import DomainError, InvalidScaleError
from decoupling_lab.geometry import (FrequencyCube, SpatialCube, dyadic_partition, paraboloid_normal,
                                     parabolic_rescale_maps, transversality)


def test_partition_quarters_in_lexicographic_order():
    cubes = dyadic_partition(FrequencyCube.unit(2), F(1, 2))
    assert [c.corner for c in cubes] == [(0, 0), (0, F(1, 2)), (F(1, 2), 0), (F(1, 2), F(1, 2))]
    assert all(c.side == F(1, 2) for c in cubes)


def test_partition_at_own_side_is_identity():
    Q = FrequencyCube((F(0),), F(1, 4))
    assert dyadic_partition(Q, F(1, 4)) == [Q]


def test_partition_eighths_cover_exactly_once():
    cubes = dyadic_partition(FrequencyCube.unit(2), F(1, 8))
    assert len(cubes) == 64
    assert sum(c.measure() for c in cubes) == 1
    # membership on a 128^2 lattice of cell centers, which avoids the cube boundaries
    t = (np.arange(128) + 0.5) / 128
    pts = np.stack(np.meshgrid(t, t, indexing="ij"), -1).reshape(-1, 2)
    hits = np.zeros(len(pts), dtype=int)
    for c in cubes:
        lo = np.array([float(x) for x in c.corner])
        hits += np.all((pts > lo) & (pts < lo + float(c.side)), axis=1)
    assert np.all(hits == 1)


@pytest.mark.parametrize("alpha", [F(1, 3), F(2), F(3, 8)])
def test_partition_rejects_bad_scales(alpha):
    with pytest.raises(InvalidScaleError):
        dyadic_partition(FrequencyCube.unit(1), alpha)


def test_cube_validation():
    with pytest.raises(InvalidScaleError):
        FrequencyCube((F(1, 8),), F(1, 4))
    with pytest.raises(DomainError):
        FrequencyCube((F(1),), F(1, 2))
    with pytest.raises(DomainError):
        SpatialCube((0.0,), 0.0)


def test_normals():
    np.testing.assert_allclose(paraboloid_normal([0.0]), [0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(paraboloid_normal([0.5]), np.array([1.0, -1.0]) / math.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(paraboloid_normal([0.5, 0.5]), np.array([1.0, 1.0, -1.0]) / math.sqrt(3),
                               atol=1e-15)


def test_identical_cubes_have_zero_transversality():
    Q = FrequencyCube((F(1, 4), F(0)), F(1, 4))
    assert transversality([Q, Q, Q]).nu_lower == 0


def test_two_end_caps_closed_form():
    cert = transversality([FrequencyCube((F(0),), F(1, 4)), FrequencyCube((F(3, 4),), F(1, 4))])
    # minimum at xi1=1/4, xi2=3/4: 1 / sqrt(5/4 * 13/4) = 4/sqrt(65)
    assert cert.nu_lower == pytest.approx(0.49613893835683387, abs=1e-15)


def test_two_end_caps_refinement_agrees_with_brute_force():
    cubes = [FrequencyCube((F(0),), F(1, 4)), FrequencyCube((F(3, 4),), F(1, 4))]
    a = np.linspace(0.0, 0.25, 64)
    b = np.linspace(0.75, 1.0, 64)
    x, y = np.meshgrid(a, b)
    brute = np.min(np.abs(2 * y - 2 * x) / np.sqrt((1 + 4 * x * x) * (1 + 4 * y * y)))
    assert transversality(cubes, 4).nu_lower == pytest.approx(brute, rel=1e-12)


def test_three_corner_cubes_are_transverse():
    q = F(1, 4)
    cubes = [FrequencyCube((0, 0), q), FrequencyCube((F(3, 4), 0), q), FrequencyCube((0, F(3, 4)), q)]
    assert transversality(cubes, 8).nu_lower > 0


def test_refinement_never_increases_nu():
    cubes = [FrequencyCube((F(0),), F(1, 2)), FrequencyCube((F(1, 2),), F(1, 2))]
    nus = [transversality(cubes, d).nu_lower for d in (2, 3, 5, 9, 17)]
    assert all(b <= a + 1e-15 for a, b in zip(nus, nus[1:]))


def test_rescale_unit_cube_is_identity():
    maps = parabolic_rescale_maps(FrequencyCube.unit(2))
    assert maps.sigma == 1
    x = np.array([0.3, -4.0, 2.5])
    assert np.array_equal(maps.space_map(x), x)


def test_rescale_example_maps():
    maps = parabolic_rescale_maps(FrequencyCube((F(1, 2),), F(1, 4)))
    assert maps.sigma == F(1, 16) and maps.scale == F(1, 4)
    assert maps.freq_map((F(5, 8),)) == (F(1, 2),)
    assert maps.freq_map((F(1, 2),)) == (0,) and maps.freq_map((F(3, 4),)) == (1,)
    x1, x2 = 3.0, -7.0
    np.testing.assert_allclose(maps.space_map([x1, x2]), [(x1 + x2) / 4, x2 / 16], rtol=1e-15)


def test_rescale_round_trip_and_determinant():
    Q = FrequencyCube((F(1, 4), F(1, 2)), F(1, 4))
    maps = parabolic_rescale_maps(Q)
    pts = np.random.default_rng(0).normal(scale=20.0, size=(100, 3))
    for x in pts:
        np.testing.assert_allclose(maps.space_map_inverse(maps.space_map(x)), x, rtol=0, atol=1e-12 * 20)
    assert maps.space_determinant() == maps.sigma ** 2  # sigma^((n+1)/2) with n = 3
    assert float(np.linalg.det(maps.space_matrix())) == pytest.approx(float(maps.sigma ** 2), rel=1e-12)


def test_rescale_corners_exact():
    Q = FrequencyCube((F(3, 8), F(1, 8)), F(1, 8))
    maps = parabolic_rescale_maps(Q)
    images = {maps.freq_map(c) for c in Q.corners()}
    assert images == set(itertools.product((F(0), F(1)), repeat=2))
