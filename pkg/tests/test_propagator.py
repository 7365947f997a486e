import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dispersal.continuum import rasterize
from dispersal.extremals import bourgain_datum
from dispersal.propagator import (
    TimeGrid,
    detect_quantum,
    evolve_at,
    evolve_field,
    evolve_points,
    field_values,
    maximal_field,
    perturbation_bound,
    propagate,
    support_symbol_max,
    sweep,
    sweep_costs,
    weighted_difference_field,
)
from dispersal.spectral_core import (
    SpectralFunction,
    l2_norm,
    lp_ball_norm,
    make_lattice,
    synthesize,
    synthesize_points,
    unit_ball,
)
from dispersal.symbols import beam, boussinesq, constant, elliptic, finite_type, nonelliptic

SYMBOLS = [elliptic(), nonelliptic(), boussinesq(), beam(), finite_type(2), finite_type(1.5)]


def random_function(rng, lat, modes=64):
    K = lat.half_width
    idx = rng.integers(-K, K + 1, size=(modes, lat.dim))
    return SpectralFunction(lat, idx, rng.standard_normal(modes) + 1j * rng.standard_normal(modes))


@pytest.fixture
def f64(rng):
    return random_function(rng, make_lattice(2, 0.5, 8.0))


@pytest.fixture
def dual_ball():
    return unit_ball(2, 2 * math.pi / 80)


class TestTimeGrid:
    def test_validation(self):
        for args in ((0.5, 0.5, 3), (-0.1, 1.0, 3), (0.0, 1.2, 3), (0.0, 1.0, 1)):
            with pytest.raises(ValueError):
                TimeGrid(*args)

    def test_resolving_grid_obeys_rule(self):
        tg = TimeGrid.resolving(300.0)
        assert tg.resolves(300.0) and tg.t_max == 1.0 and tg.t_min > 0
        assert not TimeGrid(0.01, 1.0, 10).resolves(300.0)
        assert tg.step <= 2 * math.pi / 3000 * (1 + 1e-12)

    def test_unresolved_grid_needs_override(self, f64, dual_ball):
        coarse = TimeGrid(0.1, 1.0, 4)
        with pytest.raises(ValueError):
            maximal_field(f64, elliptic(), dual_ball, coarse)
        forced = TimeGrid(0.1, 1.0, 4, override=True)
        assert len(maximal_field(f64, elliptic(), dual_ball, forced)) == len(dual_ball)


class TestPointwise:
    def test_time_zero_is_synthesis(self, f64, rng):
        x = rng.uniform(-1, 1, 2)
        for P in SYMBOLS:
            assert evolve_at(f64, P, x, 0.0) == synthesize(f64, x)

    def test_constant_symbol_is_a_phase(self, f64, rng):
        x = rng.uniform(-1, 1, 2)
        got = evolve_at(f64, constant(2.5), x, 0.3)
        assert got == pytest.approx(np.exp(0.75j) * synthesize(f64, x), rel=1e-13)

    def test_single_mode_closed_form(self):
        f = SpectralFunction.from_frequencies(make_lattice(2, 0.5, 4.0), [[1.0, 0.0]], [1.0])
        for x, t in (((0.2, -0.7), 0.3), ((-1.0, 2.0), 0.9)):
            assert evolve_at(f, elliptic(), x, t) == pytest.approx(
                0.25 * np.exp(1j * (x[0] + t)), abs=1e-15)


class TestInvariants:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(-3, 3), st.sampled_from(range(len(SYMBOLS))))
    def test_unitarity(self, seed, t, k):
        f = random_function(np.random.default_rng(seed), make_lattice(2, 0.5, 8.0), 32)
        assert l2_norm(propagate(f, SYMBOLS[k], t)) == pytest.approx(l2_norm(f), rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(-1, 1), st.floats(-1, 1))
    def test_group_law(self, seed, t1, t2):
        f = random_function(np.random.default_rng(seed), make_lattice(2, 0.5, 8.0), 32)
        for P in SYMBOLS:
            a = propagate(propagate(f, P, t1), P, t2).coefficients
            b = propagate(f, P, t1 + t2).coefficients
            assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
    def test_translation_covariance(self, seed, x0):
        r = np.random.default_rng(seed)
        f = random_function(r, make_lattice(2, 0.5, 8.0), 32)
        X = r.uniform(-1, 1, (4, 2))
        for P in SYMBOLS:
            a = evolve_points(f.modulate(x0), P, X, 0.37)
            b = evolve_points(f, P, X + np.asarray(x0), 0.37)
            assert np.max(np.abs(a - b)) <= 1e-12 * max(np.max(np.abs(b)), f.l1_mass() * 1e-3)


class TestFields:
    @pytest.mark.parametrize("method", ["fft", "separable"])
    def test_fast_paths_match_direct(self, f64, dual_ball, method):
        ref = synthesize_points(f64, dual_ball.nodes)
        got = field_values(f64, dual_ball, method)
        assert np.max(np.abs(got - ref)) <= 1e-9 * np.max(np.abs(ref))

    def test_fft_needs_commensurate_grid(self, f64):
        with pytest.raises(ValueError):
            field_values(f64, unit_ball(2, 0.05), "fft")

    def test_three_dimensional_fft(self, rng):
        lat = make_lattice(3, 0.5, 4.0)
        f = random_function(rng, lat, 40)
        ball = unit_ball(3, 2 * math.pi / 40)
        ref = synthesize_points(f, ball.nodes)
        for method in ("fft", "separable"):
            assert np.max(np.abs(field_values(f, ball, method) - ref)) <= 1e-9 * np.max(np.abs(ref))

    def test_offcentre_ball(self, f64):
        from dispersal.spectral_core import BallQuadrature
        ball = BallQuadrature((0.4, -1.3), 1.0, 2 * math.pi / 80)
        ref = synthesize_points(f64, ball.nodes)
        for method in ("fft", "separable"):
            assert np.max(np.abs(field_values(f64, ball, method) - ref)) <= 1e-9 * np.max(np.abs(ref))

    def test_evolve_field_examples(self, f64, dual_ball, rng):
        fld = evolve_field(f64, elliptic(), dual_ball, 0.0)
        assert np.allclose(fld.values, synthesize_points(f64, dual_ball.nodes), atol=1e-12)
        g = random_function(rng, f64.lattice)
        a, b = 2.0 - 1j, 0.5
        lhs = evolve_field(f64.add(g, a, b), boussinesq(), dual_ball, 0.6).values
        rhs = a * evolve_field(f64, boussinesq(), dual_ball, 0.6).values + \
            b * evolve_field(g, boussinesq(), dual_ball, 0.6).values
        idx = rng.choice(len(dual_ball), 3, replace=False)
        assert np.max(np.abs(lhs[idx] - rhs[idx])) <= 1e-12 * np.max(np.abs(rhs))

    def test_resolution_rule_enforced(self, f64):
        with pytest.raises(ValueError):
            evolve_field(f64, elliptic(), unit_ball(2, 0.2), 0.1)
        assert len(evolve_field(f64, elliptic(), unit_ball(2, 0.2), 0.1, allow_coarse=True)) > 0


class TestSweeps:
    @pytest.mark.parametrize("P", [finite_type(2), boussinesq(), nonelliptic()], ids=lambda P: P.name)
    def test_engines_agree(self, f64, dual_ball, P):
        times = np.linspace(0.05, 1.0, 48)
        blocks = {}
        for method in ("direct", "grid", "spectral"):
            out = np.zeros((len(dual_ball), len(times)), dtype=complex)
            for nsl, tsl, v in sweep(f64, P, dual_ball, times, method):
                out[nsl, tsl] = v
            blocks[method] = out
        ref = blocks["direct"]
        for method in ("grid", "spectral"):
            assert np.max(np.abs(blocks[method] - ref)) <= 1e-9 * np.max(np.abs(ref))

    def test_quantum_detection(self):
        lat = make_lattice(2, 0.5, 8.0)
        xi = lat.frequencies(lat.all_indices())
        assert detect_quantum(finite_type(2).evaluator(xi), 0.5) == pytest.approx(0.125)
        assert detect_quantum(elliptic().evaluator(xi), 0.5) == pytest.approx(0.25)
        assert detect_quantum(boussinesq().evaluator(xi), 0.5) is None

    def test_costs_are_reported(self, f64, dual_ball):
        costs = sweep_costs(f64, elliptic(), dual_ball, np.linspace(0.1, 1, 10))
        assert set(costs) == {"direct", "grid", "spectral"}


class TestMaximal:
    def test_single_mode_is_constant(self, dual_ball):
        f = SpectralFunction.from_frequencies(make_lattice(2, 0.5, 8.0), [[2.0, -1.5]], [3.0])
        mf = maximal_field(f, finite_type(2), dual_ball)
        assert np.allclose(mf.values, 3.0 * 0.25, rtol=1e-13)

    def test_zero_symbol_gives_modulus(self, f64, dual_ball):
        mf = maximal_field(f64, constant(0.0), dual_ball)
        assert np.allclose(mf.values, np.abs(synthesize_points(f64, dual_ball.nodes)), rtol=1e-12)

    def test_refinement_moves_l1_under_one_percent(self, f64, dual_ball):
        bound = support_symbol_max(f64, elliptic())
        tg = TimeGrid.resolving(bound)
        fine = TimeGrid(tg.t_max / (10 * tg.count), 1.0, 10 * tg.count)
        a = lp_ball_norm(maximal_field(f64, elliptic(), dual_ball, tg), 1)
        b = lp_ball_norm(maximal_field(f64, elliptic(), dual_ball, fine), 1)
        assert abs(b - a) < 0.01 * b

    def test_monotone_under_superset_of_times(self, f64, dual_ball):
        tg = TimeGrid.resolving(support_symbol_max(f64, elliptic()))
        fine = TimeGrid(tg.t_min / 2, 1.0, 2 * tg.count)  # contains every time of tg
        a = maximal_field(f64, elliptic(), dual_ball, tg).values
        b = maximal_field(f64, elliptic(), dual_ball, fine).values
        assert np.all(b >= a * (1 - 1e-12))


class TestWeightedDifference:
    def test_delta_zero_is_plain_difference(self, f64, dual_ball):
        tg = TimeGrid.resolving(support_symbol_max(f64, elliptic()))
        w = weighted_difference_field(f64, elliptic(), 0.0, ball=dual_ball, tg=tg)
        f0 = synthesize_points(f64, dual_ball.nodes)
        ref = np.zeros(len(dual_ball))
        for t in tg.times:
            ref = np.maximum(ref, np.abs(evolve_points(f64, elliptic(), dual_ball.nodes, t) - f0))
        assert np.allclose(w.values, ref, rtol=1e-10, atol=1e-12)

    def test_single_mode_closed_form(self, dual_ball):
        xi0 = np.array([[1.5, -2.0]])
        f = SpectralFunction.from_frequencies(make_lattice(2, 0.5, 4.0), xi0, [1.0])
        P, delta, t = elliptic(), 1.0, 0.1
        tg = TimeGrid(t / 2, t, 2, override=True)
        w = weighted_difference_field(f, P, delta, ball=dual_ball, tg=tg)
        p0 = float(P.evaluator(xi0)[0])
        expect = max(abs(np.exp(1j * s * p0) - 1) * 0.25 / s ** (delta / 2) for s in (t / 2, t))
        assert np.allclose(w.values, expect, rtol=1e-12)

    def test_rejects_delta_at_least_m(self, f64, dual_ball):
        for delta in (2.0, 3.0, -0.1):
            with pytest.raises(ValueError):
                weighted_difference_field(f64, elliptic(), delta, ball=dual_ball)

    def test_needs_positive_start(self, f64, dual_ball):
        with pytest.raises(ValueError):
            weighted_difference_field(f64, elliptic(), 1.0, ball=dual_ball,
                                      tg=TimeGrid(0.0, 1.0, 2000))


class TestPerturbationBound:
    def test_zero_time_and_equal_symbols(self, f64, dual_ball):
        assert perturbation_bound(f64, boussinesq(), elliptic(), 0.0, dual_ball) == (0.0, 0.0)
        b, m = perturbation_bound(f64, beam(), beam(), 0.7, dual_ball)
        assert b == 0.0 and m <= 1e-15 * f64.l1_mass()

    @pytest.mark.parametrize("Q", [boussinesq(), beam()], ids=lambda Q: Q.name)
    def test_bound_dominates_on_random_data(self, rng, dual_ball, Q):
        for _ in range(5):
            f = random_function(rng, make_lattice(2, 0.5, 8.0))
            for t in (0.01, 0.3, 1.0):
                b, m = perturbation_bound(f, Q, elliptic(), t, dual_ball)
                assert m <= b + 1e-9

    def test_bourgain_datum_instance(self):
        R = 64.0
        d = bourgain_datum(R)
        lat = make_lattice(2, 0.5, 132.0)
        f = rasterize(d.strips, lat)
        t = 1 / R
        ball = unit_ball(2, 0.05)
        b, m = perturbation_bound(f, boussinesq(), elliptic(), t, ball)
        assert b <= math.expm1(t / 2) * f.l1_mass() * (1 + 1e-12)
        assert m <= b
        # the discrete analogue of t R^(5/6) / 2 at this R
        assert b == pytest.approx(t * f.l1_mass() / 2, rel=0.01)
