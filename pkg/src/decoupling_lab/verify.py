"""Invariant suite behind ``decoupling-lab verify``: cheap identities that must hold exactly."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .decoupling import (DecouplingInstance, decoupling_ratio, estimate_constant, fit_eta,
                         l2_decoupling_check, neighborhood_ratio)
from .fields import (GridFunction, evaluate_extension, make_test_function,
                     rescaling_covariance_check)
from .geometry import (FrequencyCube, SpatialCube, dyadic_partition, paraboloid_normal,
                       parabolic_rescale_maps, transversality)
from .kakeya import Tile, kakeya_check, perpendicular_tiles
from .multilinear import (TransverseConfig, ball_inflation_check, bootstrap_bound, kappa,
                          multilinear_A, multilinear_D, broad_narrow_classify)
from .weights import (SpatialGrid, WeightSpec, reverse_holder_check, weight_cover_bounds,
                      weight_value, weighted_norm)

F = Fraction


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = []


def check(name):
    def deco(fn):
        CHECKS.append((name, fn))
        return fn
    return deco


def _close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


@check("partition of [0,1]^2 at 1/2 gives the four quarter cubes")
def _partition():
    cubes = dyadic_partition(FrequencyCube.unit(2), F(1, 2))
    corners = sorted(c.corner for c in cubes)
    want = [(F(0), F(0)), (F(0), F(1, 2)), (F(1, 2), F(0)), (F(1, 2), F(1, 2))]
    return corners == want, f"{len(cubes)} cubes"


@check("partition at the cube's own side is the identity")
def _partition_identity():
    Q = FrequencyCube((F(0),), F(1, 4))
    return dyadic_partition(Q, F(1, 4)) == [Q], "1 cube"


@check("paraboloid normals at 0, 1/2 and (1/2,1/2)")
def _normals():
    a = paraboloid_normal([0.0])
    b = paraboloid_normal([0.5])
    c = paraboloid_normal([0.5, 0.5])
    ok = (np.allclose(a, [0, -1], atol=1e-15) and np.allclose(b, np.array([1, -1]) / math.sqrt(2), atol=1e-15)
          and np.allclose(c, np.array([1, 1, -1]) / math.sqrt(3), atol=1e-15))
    return ok, ""


@check("identical cubes are not transverse")
def _identical():
    Q = FrequencyCube((F(0),), F(1, 4))
    nu = transversality([Q, Q]).nu_lower
    return nu == 0, f"nu_lower={nu}"


@check("rescaling maps of the unit cube are the identity")
def _rescale_identity():
    maps = parabolic_rescale_maps(FrequencyCube.unit(2))
    pts = np.random.default_rng(0).random((10, 3))
    ok = all(np.array_equal(maps.space_map(x), x) for x in pts)
    return ok and maps.freq_map((F(1, 3), F(1, 5))) == (F(1, 3), F(1, 5)), ""


@check("space map round trip to 1e-12")
def _round_trip():
    maps = parabolic_rescale_maps(FrequencyCube((F(1, 2), F(1, 4)), F(1, 4)))
    pts = np.random.default_rng(1).normal(scale=10.0, size=(100, 3))
    err = max(float(np.max(np.abs(maps.space_map_inverse(maps.space_map(x)) - x))) / max(1.0, float(np.max(np.abs(x))))
              for x in pts)
    return err < 1e-12, f"max error {err:.2e}"


@check("constant test function has all 16 cells equal to 1")
def _constant():
    g = make_test_function("constant", FrequencyCube.unit(2), 4)
    return g.values.shape == (4, 4) and bool(np.all(g.values == 1)), ""


@check("cap indicator is 1 exactly on cells centered in the cap")
def _cap_indicator():
    cap = FrequencyCube((F(1, 4), F(0)), F(1, 4))
    g = make_test_function("cap-indicator", FrequencyCube.unit(2), 8, cap=cap)
    want = np.zeros((8, 8))
    want[2:4, 0:2] = 1
    return bool(np.array_equal(g.values.real, want)), f"{int(g.values.real.sum())} cells"


@check("random-gaussian draws are reproducible")
def _gauss_repeat():
    a = make_test_function("random-gaussian", FrequencyCube.unit(2), 8, seed=7).values
    b = make_test_function("random-gaussian", FrequencyCube.unit(2), 8, seed=7).values
    return a.tobytes() == b.tobytes(), ""


@check("E g(0) = |Q| for g = 1")
def _eg_origin():
    g = make_test_function("constant", FrequencyCube.unit(2), 8)
    v = complex(evaluate_extension(g, np.zeros((1, 3)))[0])
    return _close(v.real, 1.0) and abs(v.imag) < 1e-14, f"{v}"


@check("point mass has constant modulus")
def _point_mass():
    g = make_test_function("point-mass-lattice", FrequencyCube.unit(1), 16, seed=3)
    pts = np.random.default_rng(2).normal(scale=50.0, size=(20, 2))
    mod = np.abs(evaluate_extension(g, pts))
    return bool(np.allclose(mod, np.max(np.abs(g.values)), rtol=1e-12)), ""


@check("rescaling covariance is exact on the unit cube")
def _covariance_unit():
    g = make_test_function("random-gaussian", FrequencyCube.unit(1), 8, seed=4)
    lhs, rhs, _ = rescaling_covariance_check(g, FrequencyCube.unit(1), [1.3, -2.0])
    return lhs == rhs, f"{lhs} vs {rhs}"


@check("rescaling covariance ignores a global phase")
def _covariance_phase():
    Q = FrequencyCube((F(1, 4),), F(1, 4))
    g = make_test_function("random-gaussian", Q, 8, seed=5)
    h = g.with_values(g.values * np.exp(1j * math.pi / 3))
    a = rescaling_covariance_check(g, Q, [3.0, 7.0])
    b = rescaling_covariance_check(h, Q, [3.0, 7.0])
    return _close(a[0], b[0]) and _close(a[1], b[1]), ""


@check("weight equals 1 at the center and 2^-E at distance R")
def _weight_values():
    B = SpatialCube.centered(2, 16.0)
    ok = weight_value(WeightSpec(B, 8), [0.0, 0.0]) == 1.0
    return ok and _close(weight_value(WeightSpec(B, 5.5), [16.0, 0.0]), 2.0 ** -5.5), ""


@check("weight is nonincreasing in E")
def _weight_monotone():
    B = SpatialCube.centered(2, 8.0)
    pts = np.random.default_rng(6).normal(scale=20.0, size=(20, 2))
    return bool(np.all(weight_value(WeightSpec(B, 4), pts) >= weight_value(WeightSpec(B, 9), pts))), ""


@check("normalized indicator norm of 1 is 1; norms are homogeneous")
def _norms():
    B = SpatialCube.centered(2, 8.0)
    grid = SpatialGrid(B, 2.0, 0.5)
    one = np.ones(grid.shape)
    a = weighted_norm(one, grid, 3.0, WeightSpec(B, math.inf), normalized=True)
    f = np.random.default_rng(8).normal(size=grid.shape)
    w = WeightSpec(B, 8)
    return _close(a, 1.0) and weighted_norm(2 * f, grid, 4.0, w) == 2 * weighted_norm(f, grid, 4.0, w), f"{a}"


@check("one-cube cover lower constant reaches the corner value")
def _cover_one():
    B = SpatialCube.centered(2, 8.0)
    lo, _ = weight_cover_bounds(B, 8.0, 8.0)
    return lo >= (1 + math.sqrt(2) / 2) ** -8 * (1 - 1e-12), f"c_low={lo:.4g}"


@check("cover upper constant depends on E")
def _cover_E():
    B = SpatialCube.centered(2, 32.0)
    a = weight_cover_bounds(B, 8.0, 8.0)[1]
    b = weight_cover_bounds(B, 8.0, 16.0)[1]
    return a != b, f"E=8: {a:.4g}, E=16: {b:.4g}"


@check("reverse Hoelder ratio is 1 at p = q")
def _reverse_holder():
    g = make_test_function("random-gaussian", FrequencyCube((F(0),), F(1, 8)), 4, seed=9)
    r = reverse_holder_check(g, SpatialCube.centered(2, 8.0), 3.0, 3.0, 8.0, padding=2.0)
    return r == 1.0, f"{r}"


def _small_instance(p=4.0):
    return DecouplingInstance.from_exponent(2, p, 8.0, 1, M=4, padding=2.0)


@check("decoupling ratio of a single-cap function is 1")
def _single_cap():
    inst = _small_instance()
    cap = inst.caps()[1]
    g = make_test_function("cap-indicator", inst.frequency_cube, inst.cells_per_axis, cap=cap)
    r = decoupling_ratio(g, inst)
    return _close(r, 1.0, 1e-12), f"{r}"


@check("l2 decoupling: Parseval over the period box and the single-cap identity")
def _l2():
    Q = FrequencyCube.unit(1)
    B = SpatialCube.centered(2, 16.0)
    g = GridFunction(Q, 16, np.zeros(16, dtype=complex), "lattice")
    vals = np.zeros(16, dtype=complex)
    vals[[1, 9]] = [1.0, 0.5j]
    a = l2_decoupling_check(g.with_values(vals), Q, B, period_box=True, x_n=0.3)
    vals = np.zeros(16, dtype=complex)
    vals[5] = 2.0
    b = l2_decoupling_check(g.with_values(vals), Q, B, period_box=True)
    return abs(a - 1) < 1e-9 and abs(b - 1) < 1e-9, f"{a}, {b}"


@check("neighborhood ratio of a single point is 1")
def _nbhd():
    r = neighborhood_ratio(np.array([[0.3]]), np.array([0.0]), np.array([1.0]), 16.0, 4.0, 8.0, padding=2.0)
    return _close(r, 1.0, 1e-12), f"{r}"


@check("forced constant trial returns the constant ratio; search max is at least 1")
def _estimate():
    inst = _small_instance()
    est = estimate_constant(inst, 1, 0, force="constant")
    g = make_test_function("constant", inst.frequency_cube, inst.cells_per_axis)
    est2 = estimate_constant(inst, 4, 0)
    return _close(est.best_ratio, decoupling_ratio(g, inst)) and est2.best_ratio >= 1, ""


@check("slope fit recovers 1/2 and 0 on exact data")
def _fit():
    ds = [4.0 ** -k for k in range(1, 5)]
    a, _ = fit_eta([(d, d ** -0.5) for d in ds])
    b, _ = fit_eta([(d, 3.0) for d in ds])
    return abs(a - 0.5) < 1e-12 and abs(b) < 1e-12, f"{a}, {b}"


@check("kappa at n=2, p=6 and n=3, p=4 is 1/2")
def _kappa():
    return kappa(6, 2, exact=True) == F(1, 2) and kappa(4, 3, exact=True) == F(1, 2), ""


def _two_cube_cfg():
    cubes = (FrequencyCube((F(0),), F(1, 4)), FrequencyCube((F(3, 4),), F(1, 4)))
    return TransverseConfig(cubes, F(1, 16), 1)


@check("D vanishes when g vanishes on one cube; A(p, q, B, r) = D_2")
def _D_A():
    cfg = _two_cube_cfg()
    g = make_test_function("random-gaussian", FrequencyCube.unit(1), 16, seed=11)
    vals = g.values.copy()
    vals[12:] = 0
    B = SpatialCube.centered(2, 8.0)
    zero = multilinear_D(2.0, 1, B, g.with_values(vals), cfg, delta=F(1, 8), padding=2.0)
    d2 = multilinear_D(2.0, 1, B, g, cfg, delta=F(1, 8), padding=2.0)
    a = multilinear_A(6.0, 1, B, 1, g, cfg, delta=F(1, 8), padding=2.0)
    return zero == 0 and a == d2, f"D_2={d2:.6g}, A={a:.6g}"


@check("A_p is nondecreasing in p")
def _A_mono():
    cfg = _two_cube_cfg()
    g = make_test_function("random-gaussian", FrequencyCube.unit(1), 16, seed=12)
    B = SpatialCube.centered(2, 16.0)
    vals = [multilinear_A(p, 1, B, 1, g, cfg, delta=F(1, 4), padding=2.0) for p in (2.0, 4.0, 6.0)]
    return vals[0] <= vals[1] * (1 + 1e-12) and vals[1] <= vals[2] * (1 + 1e-12), str(vals)


@check("Kakeya ratio is invariant under amplitude scaling")
def _kakeya():
    R = 64.0
    fams = perpendicular_tiles(R)
    scaled = [fams[0], [Tile(t.center, t.direction, t.short_side, t.long_side, 3.0) for t in fams[1]]]
    a, b = kakeya_check(fams, R, 0.5), kakeya_check(scaled, R, 0.5)
    ok = _close(b.lhs, 3.0 * a.lhs, 1e-6) and _close(b.rhs, 3.0 * a.rhs, 1e-6) and _close(a.ratio, b.ratio, 1e-6)
    return ok, f"ratio {a.ratio:.6g}"


@check("ball inflation ignores a global phase")
def _ball_phase():
    cfg = _two_cube_cfg()
    g = make_test_function("random-gaussian", FrequencyCube.unit(1), 8, seed=13)
    h = g.with_values(g.values * np.exp(0.7j))
    a = ball_inflation_check(g, F(1, 8), 4.0, cfg, padding=2.0)[2]
    b = ball_inflation_check(h, F(1, 8), 4.0, cfg, padding=2.0)[2]
    return _close(a, b, 1e-10), f"{a:.6g}"


@check("broad-narrow: one dominant cap is scenario 1, a row is scenario 3")
def _broad_narrow():
    K = 32
    caps = dyadic_partition(FrequencyCube.unit(2), F(1, K))
    one = {q: (1.0 if q.corner == (F(3, 8), F(1, 2)) else 0.0) for q in caps}
    row = {q: (1.0 if q.corner[1] == F(1, 2) else 0.0) for q in caps}
    a = broad_narrow_classify(one, K)
    b = broad_narrow_classify(row, K)
    horizontal = b.line is not None and abs(float(np.asarray(b.line[1])[1])) < 1e-12
    return a.scenario == 1 and b.scenario == 3 and horizontal, f"{a.scenario}, {b.scenario}"


@check("bootstrap: eta = 0 gives 0, n=2 p=4 eta=0.1 m=4 gives 1.6")
def _bootstrap():
    zero = all(bootstrap_bound(F(0), m, F(4), 2, exact=True) == 0 for m in range(21))
    v = bootstrap_bound(F(1, 10), 4, F(4), 2, exact=True)
    return zero and v == F(8, 5), f"{v}"


def run_suite() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed invariant, reported in the table
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    return results
