from fractions import Fraction as F
import math

import numpy as np
import pytest

from decoupling_lab.decoupling import (SWEEP_COLUMNS, DecouplingInstance, decoupling_ratio, delta_exponent,
                                       delta_from_exponent, estimate_constant, fit_eta, l2_decoupling_check,
                                       neighborhood_ratio, read_sweep_csv, scale_sweep)
from decoupling_lab.errors import (DegenerateInputError, DomainError, InsufficientDataError,
                                   InvalidScaleError)
from decoupling_lab.fields import GridFunction, make_test_function
from decoupling_lab.geometry import FrequencyCube, SpatialCube


def _inst(k=2, p=4.0, **kw):
    return DecouplingInstance.from_exponent(2, p, 8.0, k, **kw)


def test_scales():
    assert delta_from_exponent(3) == F(1, 64)
    assert delta_exponent(F(1, 16)) == 2
    with pytest.raises(InvalidScaleError):
        delta_exponent(F(1, 8))
    with pytest.raises(InvalidScaleError):
        DecouplingInstance(2, 4.0, 8.0, F(1, 8))
    with pytest.raises(Exception):
        DecouplingInstance(2, 1.5, 8.0, F(1, 16))


def test_instance_geometry():
    inst = _inst(2)
    assert inst.cube.side == 16 and inst.cap_scale == F(1, 4)
    assert len(inst.caps()) == 4 and inst.cells_per_axis == 32


def test_single_cap_ratio_is_one():
    inst = _inst(2)
    g = make_test_function("cap-indicator", inst.frequency_cube, inst.cells_per_axis, cap=inst.caps()[2])
    assert decoupling_ratio(g, inst) == pytest.approx(1.0, abs=1e-13)


def test_zero_function_rejected():
    inst = _inst(1)
    g = make_test_function("constant", inst.frequency_cube, inst.cells_per_axis)
    with pytest.raises(DegenerateInputError):
        decoupling_ratio(g.with_values(np.zeros_like(g.values)), inst)


def test_grid_refinement():
    inst = _inst(2)
    fine = _inst(2, spacing=0.25)
    g = make_test_function("random-gaussian", inst.frequency_cube, inst.cells_per_axis, seed=11)
    a, b = decoupling_ratio(g, inst), decoupling_ratio(g, fine)
    assert abs(a / b - 1) < 0.01


def test_phase_invariance_and_cauchy_schwarz_ceiling():
    inst = _inst(3)
    g = make_test_function("random-gaussian", inst.frequency_cube, inst.cells_per_axis, seed=2)
    r = decoupling_ratio(g, inst)
    assert decoupling_ratio(g.with_values(g.values * np.exp(2.1j)), inst) == pytest.approx(r, rel=1e-12)
    assert r <= math.sqrt(len(inst.caps()))
    c = make_test_function("constant", inst.frequency_cube, inst.cells_per_axis)
    assert decoupling_ratio(c, inst) <= math.sqrt(len(inst.caps()))


def test_parseval_two_far_caps():
    # one frequency in each of two caps, summed over a full period in x1
    Q = FrequencyCube.unit(1)
    vals = np.zeros(16, dtype=complex)
    vals[1], vals[14] = 1.0, 2.0 - 1.0j
    g = GridFunction(Q, 16, vals, "lattice")
    r = l2_decoupling_check(g, Q, SpatialCube.centered(2, 16.0), period_box=True, x_n=1.7)
    assert abs(r - 1) < 1e-9


def test_parseval_random_lattice_function():
    Q = FrequencyCube.unit(1)
    g = make_test_function("random-gaussian", Q, 64, seed=4, model="lattice")
    assert abs(l2_decoupling_check(g, Q, SpatialCube.centered(2, 16.0), period_box=True) - 1) < 1e-9


def test_l2_single_cap_and_scale_error():
    Q = FrequencyCube.unit(1)
    B = SpatialCube.centered(2, 16.0)
    g = make_test_function("cap-indicator", Q, 32, cap=FrequencyCube((F(5, 16),), F(1, 16)))
    assert l2_decoupling_check(g, Q, B) == pytest.approx(1.0, abs=1e-13)
    with pytest.raises(InvalidScaleError):
        l2_decoupling_check(g, Q, B, cap_scale=F(1, 32))


def test_l2_constant_stable_across_R():
    Q = FrequencyCube.unit(1)
    ratios = []
    for R in (32, 64, 128):
        g = make_test_function("random-gaussian", Q, R, seed=6)
        ratios.append(l2_decoupling_check(g, Q, SpatialCube.centered(2, float(R)), padding=2.0))
    assert max(ratios) / min(ratios) < 2


def test_neighborhood_single_point():
    assert neighborhood_ratio([[0.4]], [0.01], [1 + 1j], 16.0, 4.0, 8.0) == pytest.approx(1.0, abs=1e-13)


def test_neighborhood_t0_matches_lattice_ratio():
    inst = DecouplingInstance(2, 4.0, 8.0, F(1, 16), M=1, model="lattice")
    vals = np.array([1.0, 2.0j, -1.0, 0.5])
    g = GridFunction(inst.frequency_cube, inst.cells_per_axis, vals, "lattice")
    xi = g.frequencies()[:, :1]
    assert neighborhood_ratio(xi, np.zeros(4), vals, 16.0, 4.0, 8.0) == pytest.approx(decoupling_ratio(g, inst),
                                                                                     rel=1e-12)


def test_neighborhood_offsets_are_harmless():
    rng = np.random.default_rng(7)
    R = 64.0
    xi = rng.random((32, 1))
    amps = rng.normal(size=32) + 1j * rng.normal(size=32)
    flat = neighborhood_ratio(xi, np.zeros(32), amps, R, 4.0, 8.0, padding=2.0)
    lifted = neighborhood_ratio(xi, rng.random(32) / R, amps, R, 4.0, 8.0, padding=2.0)
    assert 0.5 < lifted / flat < 2


def test_neighborhood_rejects_points_off_the_neighborhood():
    with pytest.raises(DomainError):
        neighborhood_ratio([[0.5]], [0.5], [1.0], 16.0, 4.0, 8.0)
    with pytest.raises(DomainError):
        neighborhood_ratio([[1.5]], [0.0], [1.0], 16.0, 4.0, 8.0)


def test_forced_constant_single_trial():
    inst = _inst(2)
    g = make_test_function("constant", inst.frequency_cube, inst.cells_per_axis)
    est = estimate_constant(inst, 1, 3, force="constant")
    assert est.best_ratio == decoupling_ratio(g, inst)
    assert est.argmax["kind"] == "constant"


def test_search_max_at_least_one():
    for k in (1, 2, 3):
        assert estimate_constant(_inst(k), 3, 0).best_ratio >= 1


def test_estimate_reproducible_across_runs_and_workers():
    inst = _inst(2)
    a = estimate_constant(inst, 200, 1, workers=1)
    b = estimate_constant(inst, 200, 1, workers=1)
    c = estimate_constant(inst, 200, 1, workers=2)
    assert a.best_ratio == b.best_ratio == c.best_ratio
    assert a.ratios == c.ratios and a.argmax == c.argmax


def test_p2_sweep_matches_l2_constant():
    rep = scale_sweep(2, 2.0, 8.0, [1, 2, 3], 20, 1)
    for row in rep.rows:
        inst = _inst(row.delta_exponent, p=2.0)
        c = make_test_function("constant", inst.frequency_cube, inst.cells_per_axis)
        l2 = l2_decoupling_check(c, inst.frequency_cube, inst.cube, cap_scale=inst.cap_scale)
        assert row.best_ratio <= l2 * (1 + 1e-12)
    assert abs(rep.eta_hat) < 0.05


def test_sweep_csv_schema_and_round_trip():
    rep = scale_sweep(2, 4.0, 8.0, [1, 2, 3], 3, 5)
    text = rep.to_csv()
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert read_sweep_csv(text) == [(r.delta, r.best_ratio) for r in rep.rows]
    assert rep.fit_json()["lower_bound"] is True


def test_sweep_with_two_scales_keeps_rows():
    rep = scale_sweep(2, 4.0, 8.0, [1, 2], 2, 5)
    assert len(rep.rows) == 2 and rep.eta_hat is None
    with pytest.raises(InsufficientDataError):
        fit_eta(rep.pairs())


def test_fit_exact_data():
    ds = [4.0 ** -k for k in range(1, 6)]
    assert fit_eta([(d, d ** -0.5) for d in ds])[0] == pytest.approx(0.5, abs=1e-12)
    assert fit_eta([(d, 2.5) for d in ds])[0] == pytest.approx(0.0, abs=1e-12)


def test_fit_noisy_synthetic():
    rng = np.random.default_rng(0)
    ds = [4.0 ** -k for k in range(1, 7)]
    eta, res = fit_eta([(d, d ** -0.3 * (1 + 0.05 * rng.standard_normal())) for d in ds])
    assert 0.25 <= eta <= 0.35 and res < 0.1


def test_fit_errors():
    with pytest.raises(InsufficientDataError):
        fit_eta([(0.25, 1.0), (0.0625, 1.0)])
    with pytest.raises(DegenerateInputError):
        fit_eta([(0.25, 1.0), (0.0625, 0.0), (1 / 64, 1.0)])
