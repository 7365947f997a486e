import math

import numpy as np
import pytest

from dispersal.continuum import (
    QuadratureError,
    RectangleSet,
    continuum_evolve,
    continuum_evolve_grid,
    panel_rule,
    rasterize,
)
from dispersal.extremals import bourgain_datum
from dispersal.propagator import evolve_at
from dispersal.spectral_core import make_lattice
from dispersal.symbols import boussinesq, elliptic, finite_type, nonelliptic


def closed_box(box, x):
    out = 1 + 0j
    for (a, b), xi in zip(box, x):
        out *= (b - a) if xi == 0 else (np.exp(1j * b * xi) - np.exp(1j * a * xi)) / (1j * xi)
    return out


def test_rectangle_set_validation():
    with pytest.raises(ValueError):
        RectangleSet(())
    with pytest.raises(ValueError):
        RectangleSet((((0, 0), (0, 1)),))
    with pytest.raises(ValueError):
        RectangleSet((((0, 2), (0, 1)), ((1, 3), (0.5, 2))))
    touching = RectangleSet((((0, 1), (0, 1)), ((1, 2), (0, 1))))
    assert touching.area == 2.0 and touching.dim == 2


def test_unit_square_at_origin():
    A = RectangleSet((((0, 1), (0, 1)),))
    assert continuum_evolve(A, elliptic(), (0, 0), 0.0) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("P", [elliptic(), boussinesq(), finite_type(1.5)], ids=lambda P: P.name)
@pytest.mark.parametrize("x", [(0.0, 0.0), (2.5, -1.0), (-30.0, 12.0)])
def test_time_zero_closed_forms(P, x):
    box = ((0.5, 3.0), (1.0, 1.7))
    got = continuum_evolve(RectangleSet((box,)), P, x, 0.0, tol=1e-12)
    assert abs(got - closed_box(box, x)) <= 1e-9 * abs(closed_box(box, x))


@pytest.mark.parametrize("P", [elliptic(), nonelliptic()], ids=lambda P: P.name)
def test_separable_path_matches_tensor_path(P):
    A = RectangleSet((((1.0, 4.0), (-2.0, 0.5)), ((5.0, 6.0), (-1.0, 3.0))))
    for x, t in (((0.3, -0.2), 0.4), ((-1.0, 0.7), 1.0)):
        a = continuum_evolve(A, P, x, t, tol=1e-12)
        b = continuum_evolve(A, P, x, t, tol=1e-12, separable=False)
        assert abs(a - b) <= 1e-9 * max(abs(a), 1e-3)


def test_batched_grid_matches_pointwise():
    d = bourgain_datum(64.0)
    rng = np.random.default_rng(3)
    X = rng.uniform(-0.7, 0.7, (5, 2))
    T = np.array([0.001, 0.007, 1 / 64])
    G = continuum_evolve_grid(d.strips, elliptic(), X, T)
    for i, x in enumerate(X):
        for j, t in enumerate(T):
            v = continuum_evolve(d.strips, elliptic(), x, t, tol=1e-10)
            assert abs(G[i, j] - v) <= 1e-8 * d.area
    with pytest.raises(ValueError):
        continuum_evolve_grid(d.strips, boussinesq(), X, T)


def test_separable_value_is_product_of_axis_integrals():
    box = ((60.0, 68.0), (16.0, 17.0))
    x, t = (0.2, -0.4), 0.01
    s, w = panel_rule(box[0][0], box[0][1], 200)
    ax1 = np.sum(w * np.exp(1j * (x[0] * s + t * s * s)))
    s, w = panel_rule(box[1][0], box[1][1], 50)
    ax2 = np.sum(w * np.exp(1j * (x[1] * s + t * s * s)))
    got = continuum_evolve(RectangleSet((box,)), elliptic(), x, t, tol=1e-12)
    assert abs(got - ax1 * ax2) <= 1e-9 * abs(got)


def test_fine_lattice_agrees_with_continuum():
    d = bourgain_datum(64.0)
    lat = make_lattice(2, 1 / 64, 130.0)
    f = rasterize(d.strips, lat)
    rng = np.random.default_rng(11)
    for _ in range(3):
        x = rng.uniform(-0.5, 0.5, 2)
        t = float(rng.uniform(0, 1 / 64))
        exact = continuum_evolve(d.strips, elliptic(), x, t)
        lattice = evolve_at(f, elliptic(), x, t)
        assert abs(lattice - exact) <= 0.02 * abs(exact)


def test_rasterize_modes():
    lat = make_lattice(2, 0.5, 4.0)
    A = RectangleSet((((0.0, 1.0), (0.0, 1.5)),))
    closed = rasterize(A, lat, mode="center")
    assert len(closed) == 3 * 4 and np.all(closed.coefficients == 1)
    frac = rasterize(A, lat)
    assert frac.l1_mass() == pytest.approx(A.area, rel=1e-14)
    assert frac.as_dict()[(0, 0)] == pytest.approx(0.25) and frac.as_dict()[(1, 1)] == 1.0
    with pytest.raises(ValueError):
        rasterize(A, lat, mode="nearest")


def test_touching_boxes_fill_shared_cells():
    lat = make_lattice(2, 0.5, 4.0)
    A = RectangleSet((((0.0, 1.0), (0.0, 1.0)), ((1.0, 2.0), (0.0, 1.0))))
    whole = rasterize(RectangleSet((((0.0, 2.0), (0.0, 1.0)),)), lat)
    assert rasterize(A, lat).as_dict() == pytest.approx(whole.as_dict())


def test_non_convergence_is_reported():
    A = RectangleSet((((0.0, 1.0), (0.0, 1.0)),))
    with pytest.raises(QuadratureError):
        continuum_evolve(A, boussinesq(), (5.0, 0.0), 0.0, max_refine=0)


def test_modulus_never_exceeds_area():
    d = bourgain_datum(128.0)
    rng = np.random.default_rng(5)
    X = rng.uniform(-0.7, 0.7, (30, 2))
    T = np.linspace(1e-4, 1 / 128, 12)
    assert np.max(np.abs(continuum_evolve_grid(d.strips, elliptic(), X, T))) <= d.area * (1 + 1e-9)
    assert math.isclose(d.area, d.count * 2 * math.sqrt(128.0))
