import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgarch.basis import make_basis, reconstruct_kernel
from fgarch.errors import DimensionError
from fgarch.function_space import Curve, Grid, Kernel2D, apply_kernel, hs_norm, l2_norm, row_integrate, sup_norm
from fgarch.model import (
    CouplingRow,
    FGarchSpec,
    InnovationGen,
    coupling_decay,
    decay_fit,
    gamma_kernel,
    lyapunov_l2,
    lyapunov_sup,
    moment_norm,
    ou_innovation,
    series_solution,
    simulate,
    spawn_rng,
)
from oracles import brownian_innovations, series_by_operator_products


def bump(grid):
    return make_basis("poly", 1, grid)


def beta_only(grid, scale=0.4):
    b = reconstruct_kernel([[scale]], bump(grid))
    return FGarchSpec(Curve.constant(grid, 0.01), Kernel2D.zeros(grid), b)


def zero_spec(grid):
    return FGarchSpec(Curve.constant(grid, 0.01), Kernel2D.zeros(grid), Kernel2D.zeros(grid))


class TestSpec:
    def test_rejects_negative(self, grid):
        k = Kernel2D(grid, -np.ones((grid.T, grid.T)))
        with pytest.raises(ValueError):
            FGarchSpec(Curve.constant(grid, 0.01), k, Kernel2D.zeros(grid))
        with pytest.raises(ValueError):
            FGarchSpec(Curve.constant(grid, -0.01), Kernel2D.zeros(grid), Kernel2D.zeros(grid))

    def test_rejects_mixed_grids(self, grid):
        with pytest.raises(DimensionError):
            FGarchSpec(Curve.constant(Grid(10), 0.01), Kernel2D.zeros(grid), Kernel2D.zeros(grid))

    def test_preset_truth(self, preset):
        t = preset.grid.points
        bumps = 12 * np.outer(t * (1 - t), t * (1 - t))
        np.testing.assert_allclose(preset.spec.alpha.values, bumps, atol=1e-6)
        np.testing.assert_allclose(preset.spec.beta.values, bumps, atol=1e-6)
        np.testing.assert_array_equal(preset.spec.delta.values, 0.01)


class TestInnovation:
    def test_single_curve_and_determinism(self, grid):
        gen = InnovationGen(seed=7)
        a, b = ou_innovation(gen, grid), ou_innovation(gen, grid)
        assert isinstance(a, Curve)
        np.testing.assert_array_equal(a.values, b.values)

    def test_covariance_within_standard_errors(self, grid):
        gen = InnovationGen(rate=200.0)
        e = ou_innovation(gen, grid, size=20_000, rng=np.random.default_rng(3))
        t = grid.points
        for j, k in [(0, 1), (10, 11), (100, 102), (200, 203), (0, 0), (284, 284)]:
            prod = e[:, j] * e[:, k]
            target = 2.0 ** (-200.0 * abs(t[k] - t[j]))
            se = prod.std(ddof=1) / math.sqrt(prod.size)
            assert abs(prod.mean() - target) <= 3.5 * se

    def test_brownian_oracle_small_rate(self):
        grid = Grid(16)
        gen = InnovationGen(rate=2.0)
        ours = ou_innovation(gen, grid, size=50_000, rng=np.random.default_rng(1))
        ref = brownian_innovations(2.0, 16, 50_000, np.random.default_rng(2))
        C1 = ours.T @ ours / ours.shape[0]
        C2 = ref.T @ ref / ref.shape[0]
        assert np.abs(C1 - C2).max() < 0.03

    def test_iid_kind(self, grid):
        gen = InnovationGen(kind="iid_gaussian_pointwise")
        e = gen.draw(grid, 5000, np.random.default_rng(0))
        assert abs(np.corrcoef(e[:, 0], e[:, 1])[0, 1]) < 0.05
        assert np.var(e) == pytest.approx(1.0, abs=0.02)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            InnovationGen(kind="levy")
        with pytest.raises(ValueError):
            InnovationGen(rate=0.0)


class TestGammaKernel:
    def test_zero_innovation(self, preset, grid):
        K = gamma_kernel(preset.spec, Curve.constant(grid, 0.0))
        np.testing.assert_array_equal(K.values, preset.spec.beta.values)

    def test_unit_innovation(self, preset, grid):
        K = gamma_kernel(preset.spec, Curve.constant(grid, 1.0))
        t = grid.points
        np.testing.assert_allclose(K.values, 24 * np.outer(t * (1 - t), t * (1 - t)), atol=2e-6)
        assert hs_norm(K) == pytest.approx(0.8, abs=1e-6)

    def test_alpha_zero(self, grid, rng):
        spec = beta_only(grid)
        K = gamma_kernel(spec, Curve(grid, rng.standard_normal(grid.T)))
        np.testing.assert_array_equal(K.values, spec.beta.values)


class TestSimulate:
    def test_no_feedback(self, grid):
        spec = zero_spec(grid)
        sim = simulate(spec, InnovationGen(seed=1), 20, burnin=5)
        np.testing.assert_array_equal(sim.sigma2, 0.01)
        np.testing.assert_allclose(sim.y, np.sqrt(0.01) * sim.eps, rtol=1e-15)

    def test_preset_scale(self, preset):
        sim = simulate(preset.spec, preset.gen, 5, burnin=1000)
        assert sim.n == 5
        assert np.mean(np.abs(sim.y) < 0.4) > 0.95
        assert np.abs(sim.y).max() < 1.5

    def test_deterministic_fixed_point(self, preset):
        grid = preset.grid
        spec = preset.spec
        n = 200
        sim = simulate(spec, preset.gen, n, burnin=0, innovations=np.ones((n, grid.T)))
        A = np.eye(grid.T) - (spec.alpha.values + spec.beta.values) / grid.T
        star = Curve(grid, np.linalg.solve(A, spec.delta.values))
        errs = np.array([l2_norm(Curve(grid, s) - star) for s in sim.sigma2])
        assert errs[-1] < 1e-12
        ratios = errs[1:20] / errs[:19]
        # contraction factor is the top eigenvalue of (alpha + beta), 0.8
        np.testing.assert_allclose(ratios, 0.8, rtol=1e-3)

    def test_invariants(self, preset):
        sim = simulate(preset.spec, preset.gen, 300, burnin=50)
        np.testing.assert_allclose(sim.y**2, sim.sigma2 * sim.eps**2, rtol=1e-14, atol=0)
        assert np.all(sim.sigma2 >= preset.spec.delta.values)

    def test_bit_reproducible(self, preset):
        a = simulate(preset.spec, preset.gen, 50, burnin=10, rng=spawn_rng(5, 0))
        b = simulate(preset.spec, preset.gen, 50, burnin=10, rng=spawn_rng(5, 0))
        assert a.y.tobytes() == b.y.tobytes()
        c = simulate(preset.spec, preset.gen, 50, burnin=10, rng=spawn_rng(6, 0))
        assert a.y.tobytes() != c.y.tobytes()

    def test_burnin_is_a_prefix_drop(self, preset):
        e = preset.gen.draw(preset.grid, 30, np.random.default_rng(0))
        full = simulate(preset.spec, preset.gen, 30, burnin=0, innovations=e)
        tail = simulate(preset.spec, preset.gen, 20, burnin=10, innovations=e)
        np.testing.assert_array_equal(full.sigma2[10:], tail.sigma2)

    def test_argument_errors(self, preset):
        with pytest.raises(ValueError):
            simulate(preset.spec, preset.gen, 0)
        with pytest.raises(ValueError):
            simulate(preset.spec, preset.gen, 5, burnin=-1)
        with pytest.raises(DimensionError):
            simulate(preset.spec, preset.gen, 5, burnin=0, innovations=np.ones((4, preset.grid.T)))

    def test_curves_view(self, preset):
        sim = simulate(preset.spec, preset.gen, 3, burnin=0)
        curves = sim.curves("sigma2")
        assert len(curves) == 3
        np.testing.assert_array_equal(curves[1].values, sim.sigma2[1])


class TestLyapunov:
    def test_beta_only_is_deterministic(self, grid):
        est = lyapunov_l2(beta_only(grid), InnovationGen(seed=0), 500)
        assert est.mean == pytest.approx(math.log(0.4), abs=1e-6)
        assert est.stderr < 1e-15

    def test_boundary(self, grid):
        b = beta_only(grid)
        scale = 1.0 / hs_norm(b.beta)
        est = lyapunov_l2(beta_only(grid, 0.4 * scale), InnovationGen(seed=0), 100)
        assert est.mean == pytest.approx(0.0, abs=1e-12)

    def test_preset_negative(self, preset):
        est = lyapunov_l2(preset.spec, preset.gen, 20_000)
        assert est.mean < 0
        assert abs(est.mean) / est.stderr > 3
        assert est.n_neg_inf == 0

    def test_zero_kernels_give_minus_infinity(self, grid):
        est = lyapunov_l2(zero_spec(grid), InnovationGen(seed=0), 10)
        assert est.mean == -math.inf
        assert est.n_neg_inf == 10

    def test_sup_version_reproducible(self, preset):
        a = lyapunov_sup(preset.spec, preset.gen, 2000)
        b = lyapunov_sup(preset.spec, preset.gen, 2000)
        assert a == b
        assert math.isfinite(a.mean)


class TestMomentNorm:
    def test_beta_only(self, grid):
        est = moment_norm(beta_only(grid), InnovationGen(seed=1), nu=1.0, reps=300)
        assert est.mean == pytest.approx(0.4, abs=1e-6)
        assert est.stderr < 1e-15

    def test_zero(self, grid):
        for kind in ("hs", "sup"):
            assert moment_norm(zero_spec(grid), InnovationGen(seed=1), nu=2.5, reps=50, norm_kind=kind).mean == 0.0

    def test_preset_in_unit_interval(self, preset):
        est = moment_norm(preset.spec, preset.gen, 1.0, 20_000, "hs")
        assert 0 < est.mean < 1

    def test_sup_matches_direct_route(self, preset):
        # same stream as the library: first chunk of the lyapunov tag
        reps = 50
        est = moment_norm(preset.spec, preset.gen, 1.0, reps, "sup")
        e = preset.gen.draw(preset.grid, reps, spawn_rng(preset.gen.seed, 2, 0))
        direct = [sup_norm(row_integrate(gamma_kernel(preset.spec, Curve(preset.grid, x)))) for x in e]
        assert est.mean == pytest.approx(np.mean(direct), rel=1e-12)

    def test_hs_matches_direct_route(self, preset):
        reps = 50
        est = moment_norm(preset.spec, preset.gen, 2.0, reps, "hs")
        e = preset.gen.draw(preset.grid, reps, spawn_rng(preset.gen.seed, 2, 0))
        direct = [hs_norm(gamma_kernel(preset.spec, Curve(preset.grid, x))) ** 2 for x in e]
        assert est.mean == pytest.approx(np.mean(direct), rel=1e-10)

    def test_bad_arguments(self, preset):
        with pytest.raises(ValueError):
            moment_norm(preset.spec, preset.gen, nu=0.0, reps=10)
        with pytest.raises(ValueError):
            moment_norm(preset.spec, preset.gen, reps=0)
        with pytest.raises(ValueError):
            moment_norm(preset.spec, preset.gen, reps=10, norm_kind="op")


class TestSeriesSolution:
    def test_k_zero(self, preset, grid):
        out = series_solution(preset.spec, [], 0)
        np.testing.assert_array_equal(out.values, preset.spec.delta.values)

    def test_k_one(self, preset, grid, rng):
        e = Curve(grid, rng.standard_normal(grid.T))
        out = series_solution(preset.spec, [e], 1)
        expected = preset.spec.delta + apply_kernel(gamma_kernel(preset.spec, e), preset.spec.delta)
        np.testing.assert_allclose(out.values, expected.values, rtol=1e-15)

    def test_history_too_short(self, preset, grid):
        with pytest.raises(ValueError):
            series_solution(preset.spec, [Curve.constant(grid, 1.0)], 2)

    def test_operator_products(self, rng):
        grid = Grid(12)
        b = bump(grid)
        spec = FGarchSpec(Curve.constant(grid, 0.02), reconstruct_kernel([[0.5]], b),
                          Kernel2D(grid, rng.uniform(0, 0.3, (12, 12))))
        eps = rng.standard_normal((8, 12))
        out = series_solution(spec, [Curve(grid, x) for x in eps], 8)
        ref = series_by_operator_products(spec.delta.values, spec.alpha.values, spec.beta.values, eps, 8)
        np.testing.assert_allclose(out.values, ref, rtol=1e-13)

    def test_matches_simulate_from_delta(self, preset):
        # K = i - 1 reproduces the recursion started at sigma_1^2 = delta exactly
        grid = preset.grid
        e = preset.gen.draw(grid, 31, np.random.default_rng(9))
        sim = simulate(preset.spec, preset.gen, 1, burnin=30, innovations=e)
        hist = [Curve(grid, x) for x in e[:30][::-1]]
        out = series_solution(preset.spec, hist, 30)
        np.testing.assert_allclose(out.values, sim.sigma2[0], rtol=1e-12)


class TestCoupling:
    def test_no_feedback_is_exactly_zero(self, grid):
        rows = coupling_decay(zero_spec(grid), InnovationGen(seed=0), [0, 1, 3], reps=20)
        assert all(r.mean == 0.0 for r in rows)

    def test_long_lag_vanishes(self, preset):
        rows = coupling_decay(preset.spec, preset.gen, [1, 150], reps=50)
        assert rows[1].mean < 1e-12 * max(rows[0].mean, 1e-300) + 1e-14

    def test_geometric_decay(self, preset):
        rows = coupling_decay(preset.spec, preset.gen, [1, 2, 4, 8, 16], reps=200)
        fit = decay_fit(rows)
        assert fit["slope"] < 0
        assert fit["r2"] >= 0.9

    def test_deterministic(self, preset):
        a = coupling_decay(preset.spec, preset.gen, [2, 4], reps=30)
        b = coupling_decay(preset.spec, preset.gen, [2, 4], reps=30)
        assert a == b

    def test_decay_fit_degenerate(self):
        assert decay_fit([CouplingRow(1, 0.0, 0.0), CouplingRow(2, 0.0, 0.0)])["slope"] is None

    def test_bad_arguments(self, preset):
        with pytest.raises(ValueError):
            coupling_decay(preset.spec, preset.gen, [-1], reps=5)
        with pytest.raises(ValueError):
            coupling_decay(preset.spec, preset.gen, [3], reps=0)


small_T = 9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0, 0.6), b=st.floats(0, 0.6), d=st.floats(1e-4, 1.0))
def test_simulation_invariants(seed, a, b, d):
    grid = Grid(small_T)
    rng = np.random.default_rng(seed)
    spec = FGarchSpec(
        Curve.constant(grid, d),
        Kernel2D(grid, a * rng.uniform(size=(small_T, small_T))),
        Kernel2D(grid, b * rng.uniform(size=(small_T, small_T))),
    )
    sim = simulate(spec, InnovationGen(seed=seed), 40, burnin=5)
    assert np.all(sim.sigma2 >= d)
    np.testing.assert_allclose(sim.y**2, sim.sigma2 * sim.eps**2, rtol=1e-14, atol=0)
