import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from thermotopo import MaterialPair, ThermalBC, build_grid
from thermotopo.paramopt import (FinLayout, density_objective, generate_fin_layout, layout_to_density,
                                 nelder_mead_bounded, optimize_parameters, reflect_into,
                                 sweep_fin_count, sweep_thickness)


def test_setup_1a():
    lay = generate_fin_layout("1A")
    assert (lay.orientation, lay.count, lay.post) == ("single", 18, False)
    assert len(lay.rectangles()) == 36
    assert lay.solid_area() == pytest.approx(36 * 0.45 * 8 * 0.1)


def test_setup_2c():
    lay = generate_fin_layout("2c")
    assert (lay.orientation, lay.count, lay.post) == ("paired", 36, True)
    assert len(lay.thickness) == 72
    assert len(lay.rectangles()) == 146


def test_unknown_setup():
    with pytest.raises(ValueError):
        generate_fin_layout("3A")


def test_zero_fins():
    lay = FinLayout(count=0)
    assert lay.rectangles() == [] and lay.solid_area() == 0.0


def test_fin_thicker_than_pitch_rejected():
    with pytest.raises(ValueError, match="pitch"):
        FinLayout(count=3, thickness=(0.1, 2.5, 0.1))


def test_union_area_counts_overlap_once():
    lay = FinLayout(count=1, post=True, H=4, W=4, A=0.2, B=0.2)
    # fins 2*3.6*0.1, bars 0.8 each, minus bar crossing 0.04 and fin/bar overlap 3.2*0.1
    assert lay.solid_area() == pytest.approx(0.72 + 0.8 + 0.8 - 0.04 - 0.32, rel=1e-12)
    mesh = build_grid(64, 64, 8.0, 8.0)
    theta = layout_to_density(mesh, lay, theta_min=0.0, antialias=True)
    assert theta.sum() * mesh.element_area == pytest.approx(1.96, rel=1e-12)


@pytest.mark.parametrize("setup", ["1A", "1B", "2C", "2D"])
def test_centroid_raster_within_one_band(setup):
    mesh = build_grid(64, 64, 8.0, 8.0)
    lay = generate_fin_layout(setup)
    solid = layout_to_density(mesh, lay, theta_min=0.0) == 1.0
    perimeter = sum(2 * (r.x1 - r.x0 + r.y1 - r.y0) for r in lay.rectangles())
    assert abs(solid.sum() * mesh.element_area - lay.solid_area()) <= perimeter * mesh.hx


def test_antialias_fraction_bounds():
    mesh = build_grid(16, 16, 8.0, 8.0)
    theta = layout_to_density(mesh, generate_fin_layout("2B"), 1e-3, antialias=True)
    assert theta.min() >= 1e-3 and theta.max() <= 1.0


def test_sweep_thickness_shrinks_with_count():
    t = [sweep_thickness(c, 8.0) for c in range(0, 81, 2)]
    assert t[9] == pytest.approx(0.1)
    assert all(b < a for a, b in zip(t, t[1:]))
    assert all(ti < 8.0 / (c + 1) for ti, c in zip(t, range(0, 81, 2)))


def test_sweep_has_41_samples_and_zero_is_control():
    mesh = build_grid(16, 16, 8.0, 8.0)
    bc = ThermalBC()
    mat = MaterialPair()
    res = sweep_fin_count("single", (0, 80, 2), mesh, bc, mat)
    sweep_fin_count("paired", (0, 80, 2), mesh, bc, mat, threads=2, result=res)
    for fam in ("single", "paired"):
        assert len(res.counts[fam]) == 41
    control = density_objective(mesh, np.full(mesh.n_elements, 1e-3), bc, mat, antialias=True)[0]
    assert res.objectives["single"][0] == pytest.approx(control, rel=1e-12)
    assert res.objectives["paired"][0] == pytest.approx(control, rel=1e-12)
    assert len(list(res.rows())) == 82


def test_sweep_rejects_bad_input(mesh16, water_steel):
    with pytest.raises(ValueError):
        sweep_fin_count("triple", [1, 2], mesh16, ThermalBC(), water_steel)
    with pytest.raises(ValueError):
        sweep_fin_count("single", [4, 2], mesh16, ThermalBC(), water_steel)


@given(arrays(float, 5, elements=st.floats(-10, 10)))
def test_reflection_lands_in_unit_box(u):
    r = reflect_into(u)
    assert np.all((r >= 0) & (r <= 1))
    inside = (u >= 0) & (u <= 1)
    np.testing.assert_allclose(r[inside], u[inside])


def test_nelder_mead_recovers_interior_minimum():
    target = np.array([0.3, -1.2, 2.5])
    lo, hi = np.full(3, -3.0), np.full(3, 3.0)
    x, f, f0, nev, _ = nelder_mead_bounded(lambda v: np.sum((v - target) ** 2), np.zeros(3), lo, hi, 2000)
    np.testing.assert_allclose(x, target, atol=1e-3)
    assert f <= f0 and nev <= 2000


def test_nelder_mead_stays_in_box_and_finds_corner():
    seen = []
    lo, hi = np.zeros(2), np.ones(2)

    def fun(v):
        seen.append(v.copy())
        return np.sum((v - np.array([2.0, -1.0])) ** 2)

    x, *_ = nelder_mead_bounded(fun, np.full(2, 0.5), lo, hi, 500)
    seen = np.array(seen)
    assert np.all(seen >= lo) and np.all(seen <= hi)
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-3)


def test_nelder_mead_budget_floor():
    with pytest.raises(ValueError, match="budget"):
        nelder_mead_bounded(lambda v: 0.0, np.zeros(3), -np.ones(3), np.ones(3), 29)


def test_optimize_parameters_with_surrogate(mesh16):
    lay = FinLayout(count=2, thickness=(0.5, 0.5))
    target = np.array([0.9, 1.4])

    def surrogate(layout):
        return float(np.sum((np.array(layout.thickness) - target) ** 2))

    res = optimize_parameters(lay, mesh16, ThermalBC(), None, budget=400, objective=surrogate)
    np.testing.assert_allclose(res.layout.thickness, target, atol=1e-3)
    assert res.objective <= res.initial_objective and res.evaluations <= 400


def test_optimize_parameters_is_seed_deterministic(water_steel):
    mesh = build_grid(16, 16, 8.0, 8.0)
    lay = FinLayout(count=3)
    a = optimize_parameters(lay, mesh, ThermalBC(), water_steel, seed=5)
    b = optimize_parameters(lay, mesh, ThermalBC(), water_steel, seed=5)
    assert a.layout == b.layout and a.objective == b.objective
    assert a.objective <= a.initial_objective
