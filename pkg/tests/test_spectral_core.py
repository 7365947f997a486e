import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersal.continuum import RectangleSet, rasterize
from dispersal.spectral_core import (
    BallQuadrature,
    SampledField,
    SpectralFunction,
    default_ball_spacing,
    l2_norm,
    lp_ball_norm,
    make_lattice,
    sobolev_norm,
    synthesize,
    synthesize_points,
    unit_ball,
)


def random_function(rng, lat, modes=64):
    K = lat.half_width
    idx = rng.integers(-K, K + 1, size=(modes, lat.dim))
    return SpectralFunction(lat, idx, rng.standard_normal(modes) + 1j * rng.standard_normal(modes))


class TestLattice:
    def test_point_counts(self):
        lat = make_lattice(2, 0.5, 8.0)
        assert lat.points_per_axis == 33 and lat.size == 33 ** 2
        assert make_lattice(1, 0.25, 0.25).size == 3

    @pytest.mark.parametrize("args", [(2, 2.0, 4.0), (2, 0.0, 4.0), (2, 0.5, -1.0),
                                      (2, 0.5, 1.3), (4, 0.5, 2.0)])
    def test_rejects_bad_parameters(self, args):
        with pytest.raises(ValueError):
            make_lattice(*args)

    def test_all_indices_cover_the_box(self):
        lat = make_lattice(2, 0.5, 1.0)
        idx = lat.all_indices()
        assert idx.shape == (25, 2) and np.all(lat.contains(idx))
        assert not lat.contains([[3, 0]])[0]


class TestSpectralFunction:
    def test_immutable(self):
        f = SpectralFunction(make_lattice(1, 0.5, 2.0), [[1]], [1.0])
        with pytest.raises(AttributeError):
            f.coefficients = None
        with pytest.raises(ValueError):
            f.coefficients[0] = 2.0

    def test_off_lattice_and_out_of_range(self):
        lat = make_lattice(2, 0.5, 2.0)
        with pytest.raises(ValueError):
            SpectralFunction(lat, [[5, 0]], [1.0])
        with pytest.raises(ValueError):
            SpectralFunction.from_frequencies(lat, [[0.3, 0.0]], [1.0])

    def test_duplicates_are_summed(self):
        lat = make_lattice(2, 0.5, 2.0)
        f = SpectralFunction(lat, [[1, 0], [1, 0], [0, 1]], [1.0, 2.0, 5.0])
        assert f.as_dict() == {(0, 1): 5.0, (1, 0): 3.0}


class TestSynthesis:
    def test_single_mode_at_origin(self):
        f = SpectralFunction(make_lattice(2, 0.5, 2.0), [[0, 0]], [1.0])
        for x in ([0, 0], [0.3, -2.0], [10.0, 7.0]):
            assert synthesize(f, np.array(x, float)) == pytest.approx(0.25, abs=1e-15)

    def test_conjugate_pair_is_real_cosine(self):
        lat = make_lattice(2, 0.5, 2.0)
        f = SpectralFunction.from_frequencies(lat, [[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
        X = np.random.default_rng(1).uniform(-3, 3, (20, 2))
        v = synthesize_points(f, X)
        assert np.max(np.abs(v.imag)) < 1e-15
        assert np.allclose(v.real, 0.5 * np.cos(X[:, 0]), atol=1e-15)

    def test_linearity(self, rng):
        lat = make_lattice(2, 0.5, 8.0)
        f, g = random_function(rng, lat), random_function(rng, lat)
        X = rng.uniform(-1, 1, (5, 2))
        a, b = 0.7 - 0.2j, -1.3
        lhs = synthesize_points(f.add(g, a, b), X)
        rhs = a * synthesize_points(f, X) + b * synthesize_points(g, X)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


class TestNorms:
    def test_l2_examples(self):
        lat = make_lattice(2, 0.5, 8.0)
        assert l2_norm(SpectralFunction(lat, [[3, -4]], [1.0])) == pytest.approx(0.5)
        assert l2_norm(SpectralFunction.zero(lat)) == 0.0

    def test_rectangle_indicator_norm(self):
        R, h = 16.0, 0.25
        lat = make_lattice(2, h, 24.0)
        f = rasterize(RectangleSet((((R, R + 1), (R, 1.5 * R)),)), lat)
        area = R / 2
        # each boundary cell moves the mass by at most one cell
        perimeter = 2 * (1 + R / 2)
        assert abs(l2_norm(f) ** 2 - area) <= perimeter * h + 4 * h * h
        assert l2_norm(f) == pytest.approx(math.sqrt(area), rel=0.15)

    def test_sobolev_examples(self, rng):
        lat = make_lattice(2, 0.5, 8.0)
        f = random_function(rng, lat)
        assert sobolev_norm(f, 0.0) == pytest.approx(l2_norm(f), rel=1e-15)
        single = SpectralFunction.from_frequencies(lat, [[1.0, 0.0]], [1.0])
        assert sobolev_norm(single, 1.0) == pytest.approx(math.sqrt(2) * 0.5, rel=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(-2, 2), st.floats(0, 2))
    def test_sobolev_monotone_in_s(self, seed, s, ds):
        f = random_function(np.random.default_rng(seed), make_lattice(2, 0.5, 4.0), 16)
        assert sobolev_norm(f, s + ds) >= sobolev_norm(f, s) * (1 - 1e-14)

    def test_dyadic_sobolev_ratio_is_annulus_bounded(self, rng):
        lat = make_lattice(2, 0.5, 16.0)
        idx = lat.all_indices()
        r = np.sqrt(np.sum(lat.frequencies(idx) ** 2, axis=1))
        k, s = 4, 0.75
        sel = (r > 2 ** (k - 1)) & (r <= 2 ** k)
        f = SpectralFunction(lat, idx[sel], rng.standard_normal(sel.sum()))
        ratio = sobolev_norm(f, s) / l2_norm(f)
        lo, hi = (1 + 4 ** (k - 1)) ** (s / 2), (1 + 4 ** k) ** (s / 2)
        assert lo <= ratio <= hi

    def test_parseval_over_disjoint_supports(self, rng):
        lat = make_lattice(2, 0.5, 8.0)
        f = random_function(rng, lat, 200)
        mask = rng.random(len(f)) < 0.4
        parts = l2_norm(f.restrict(mask)) ** 2 + l2_norm(f.restrict(~mask)) ** 2
        assert parts == pytest.approx(l2_norm(f) ** 2, rel=1e-12)


class TestBall:
    def test_constant_field_norms(self):
        ball = unit_ball(2, 0.01)
        one = SampledField(ball, np.ones(len(ball)))
        assert lp_ball_norm(one, 1) == pytest.approx(math.pi, rel=1e-3)
        assert lp_ball_norm(one, 2) == pytest.approx(math.sqrt(math.pi), rel=1e-3)
        assert lp_ball_norm(one, math.inf) == 1.0

    def test_rejects_p_below_one(self):
        ball = unit_ball(2, 0.1)
        with pytest.raises(ValueError):
            lp_ball_norm(SampledField(ball, np.ones(len(ball))), 0.5)

    def test_field_length_checked(self):
        with pytest.raises(ValueError):
            SampledField(unit_ball(2, 0.1), np.ones(3))

    def test_nodes_are_inside_and_weighted(self):
        ball = BallQuadrature((0.5, -0.5), 1.0, 0.1)
        d = np.sqrt(np.sum((ball.nodes - np.array([0.5, -0.5])) ** 2, axis=1))
        assert np.all(d <= 1 + 1e-12) and ball.weight == pytest.approx(0.01)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([1.0, 2.0, 3.5, math.inf]))
    def test_monotone_under_domination(self, seed, p):
        r = np.random.default_rng(seed)
        ball = unit_ball(2, 0.1)
        v = r.random(len(ball))
        w = v + r.random(len(ball))
        assert lp_ball_norm(SampledField(ball, v), p) <= lp_ball_norm(SampledField(ball, w), p)

    def test_halving_the_grid_moves_l1_norm_under_one_percent(self, rng):
        lat = make_lattice(2, 0.5, 8.0)
        f = random_function(rng, lat)
        sp = default_ball_spacing(lat.cutoff)
        norms = []
        for s in (sp, sp / 2):
            ball = unit_ball(2, s)
            norms.append(lp_ball_norm(SampledField(ball, synthesize_points(f, ball.nodes)), 1))
        assert abs(norms[1] - norms[0]) < 0.01 * norms[1]
