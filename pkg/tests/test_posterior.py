import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from footloc.posterior import (
    Ecdf,
    GridSpec,
    angle_draws,
    angle_quantiles,
    circular_median,
    distance_draws,
    kde2d,
    map_estimate,
    map_of_draws,
    rmse_table,
    summarize_location,
)

CENTER = (35.0, 35.0)


class TestDistanceDraws:
    def test_zero_at_reference(self):
        assert distance_draws([(35.0, 35.0)], CENTER)[0] == 0.0

    def test_reported_systematic_error_pair(self):
        # convention lock: (29.40, 27.17) relative to (35, 35)
        d = distance_draws([(29.40, 27.17)], CENTER)[0]
        assert d == pytest.approx(9.62, abs=0.01)

    def test_elementwise_hypot_oracle(self):
        rng = np.random.default_rng(0)
        draws = rng.uniform(12.5, 57.5, size=(500, 2))
        got = distance_draws(draws, CENTER)
        want = [math.hypot(x - 35, y - 35) for x, y in draws]
        assert got == pytest.approx(want, rel=1e-15)

    def test_length_preserved(self):
        rng = np.random.default_rng(1)
        draws = rng.uniform(20, 50, size=(137, 2))
        assert distance_draws(draws, CENTER).shape == (137,)


class TestAngleDraws:
    def test_east_is_zero(self):
        assert angle_draws([(36.0, 35.0)], CENTER)[0] == 0.0

    def test_north_is_ninety(self):
        assert angle_draws([(35.0, 36.0)], CENTER)[0] == pytest.approx(90.0)

    def test_reported_systematic_error_angle(self):
        # fixes counterclockwise-from-easting convention (compass would be 215.6)
        a = angle_draws([(29.40, 27.17)], CENTER)[0]
        assert a == pytest.approx(234.43, abs=0.05)

    def test_range_wrapped(self):
        rng = np.random.default_rng(2)
        draws = rng.uniform(12.5, 57.5, size=(1000, 2))
        a = angle_draws(draws, CENTER)
        assert np.all((a >= 0) & (a < 360))

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_permutation_equivariant(self, seed):
        rng = np.random.default_rng(seed)
        draws = rng.uniform(20, 50, size=(50, 2))
        perm = rng.permutation(50)
        assert np.array_equal(angle_draws(draws, CENTER)[perm],
                              angle_draws(draws[perm], CENTER))
        assert np.array_equal(distance_draws(draws, CENTER)[perm],
                              distance_draws(draws[perm], CENTER))


class TestKde2d:
    def test_known_generator_peak_location(self):
        rng = np.random.default_rng(3)
        draws = rng.normal([30.0, 30.0], 2.0, size=(100_000, 2))
        est = map_of_draws(draws)
        assert math.hypot(est.location[0] - 30, est.location[1] - 30) < 0.3

    def test_surface_integral_one(self):
        rng = np.random.default_rng(4)
        draws = rng.normal([35.0, 35.0], 1.5, size=(5000, 2))
        surf = kde2d(draws)
        assert surf.integral() == pytest.approx(1.0, abs=0.01)

    def test_tight_cluster_map_at_cluster(self):
        rng = np.random.default_rng(5)
        draws = np.full((500, 2), (40.0, 28.0)) + rng.normal(0, 0.01, (500, 2))
        est = map_of_draws(draws)
        assert est.location[0] == pytest.approx(40.0, abs=0.33)
        assert est.location[1] == pytest.approx(28.0, abs=0.33)

    def test_degenerate_axis_bandwidth_floored(self):
        rng = np.random.default_rng(6)
        draws = np.column_stack([
            np.full(300, 33.0), rng.normal(35.0, 1.0, 300)])
        surf = kde2d(draws)
        grid = GridSpec()
        assert surf.bandwidths[0] == pytest.approx(grid.spacing)

    def test_requires_hundred_draws(self):
        with pytest.raises(ValueError):
            kde2d(np.zeros((99, 2)))

    def test_heavier_mode_wins(self):
        # two equal-spread modes, one holding 1.05x the weight of the other
        rng = np.random.default_rng(7)
        n_heavy = 10_500
        n_light = 10_000
        heavy = rng.normal([28.0, 35.0], 0.8, size=(n_heavy, 2))
        light = rng.normal([43.0, 35.0], 0.8, size=(n_light, 2))
        est = map_of_draws(np.vstack([heavy, light]))
        assert est.location[0] < 35.0

    def test_map_within_draw_bounding_box(self):
        rng = np.random.default_rng(8)
        draws = rng.uniform([25, 30], [31, 41], size=(2000, 2))
        est = map_of_draws(draws)
        assert 25 <= est.location[0] <= 31
        assert 30 <= est.location[1] <= 41

    def test_tie_break_smallest_easting_then_northing(self):
        from footloc.posterior import KdeSurface
        ax = np.array([0.0, 1.0, 2.0])
        density = np.zeros((3, 3))
        density[1, 2] = 1.0
        density[2, 0] = 1.0
        density[1, 1] = 1.0
        surf = KdeSurface(x=ax, y=ax.copy(), density=density, bandwidths=(1, 1))
        est = map_estimate(surf)
        assert est.location == (1.0, 1.0)

    def test_pooled_draws_composite_map(self):
        # pooled cloud over per-area clouds: composite mode sits where the
        # stacked draws are densest (oracle: histogram argmax)
        rng = np.random.default_rng(9)
        clouds = [rng.normal([30, 29], 0.5, size=(4000, 2)),
                  rng.normal([30.2, 29.1], 0.5, size=(4000, 2)),
                  rng.normal([45, 48], 0.5, size=(2000, 2))]
        pooled = np.vstack(clouds)
        est = map_of_draws(pooled)
        assert math.hypot(est.location[0] - 30.1, est.location[1] - 29.05) < 0.5


class TestEcdf:
    def test_basic_fractions(self):
        f = Ecdf([1.0, 2.0, 3.0])
        assert f(2.0) == pytest.approx(2.0 / 3.0)
        assert f(0.5) == 0.0
        assert f(99.0) == 1.0

    def test_right_continuity_and_monotone(self):
        f = Ecdf([1.0, 1.0, 4.0])
        assert f(1.0) == pytest.approx(2.0 / 3.0)
        xs = np.linspace(0, 5, 101)
        vals = f(xs)
        assert np.all(np.diff(vals) >= 0)

    def test_bounded_support_probability_one(self):
        rng = np.random.default_rng(10)
        draws = rng.uniform(12.5, 57.5, size=(5000, 2))
        d = distance_draws(draws, CENTER)
        d = d[d <= 22.5]
        assert Ecdf(d)(22.5) == 1.0


class TestAngleStatistics:
    def test_circular_median_wraps(self):
        angles = np.array([359.0, 1.0, 2.0, 358.0, 0.5])
        med = circular_median(angles)
        assert med < 3.0 or med > 357.0

    def test_angle_quantiles_straddling_zero(self):
        rng = np.random.default_rng(11)
        angles = np.mod(rng.normal(0.0, 5.0, 20_000), 360.0)
        lo, med, hi = angle_quantiles(angles, [0.025, 0.5, 0.975])
        assert med < 2.0 or med > 358.0
        # interval endpoints near +/- 1.96 sigma around zero
        assert 345.0 < lo < 358.0
        assert 2.0 < hi < 15.0

    def test_summarize_location_fields(self):
        rng = np.random.default_rng(12)
        draws = rng.normal([29.4, 27.2], 0.4, size=(5000, 2))
        s = summarize_location(draws, CENTER)
        assert s.distance_ci[0] < s.distance_median < s.distance_ci[1]
        d = s.to_dict()
        assert set(d) == {"distance_median_m", "distance_ci95_m",
                          "angle_median_deg", "angle_ci95_deg"}


class TestRmse:
    def test_exact_fit_zero(self):
        obs = np.arange(12.0).reshape(4, 3)
        assert rmse_table(obs, obs) == pytest.approx([0.0, 0.0, 0.0])

    def test_constant_offset(self):
        obs = np.zeros((5, 2))
        fit = obs + np.array([1.5, -2.0])
        assert rmse_table(obs, fit) == pytest.approx([1.5, 2.0])

    def test_elementwise_oracle(self):
        rng = np.random.default_rng(13)
        obs = rng.uniform(0, 30, size=(20, 4))
        fit = obs + rng.normal(0, 2, size=(20, 4))
        got = rmse_table(obs, fit)
        want = [math.sqrt(np.mean((obs[:, j] - fit[:, j]) ** 2)) for j in range(4)]
        assert got == pytest.approx(want, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            rmse_table(np.zeros((3, 2)), np.zeros((2, 3)))


class TestFittedValues:
    def _single_tree_area(self):
        from helpers import make_area
        pts = np.column_stack([np.full(200, 35.0), np.full(200, 35.0),
                               np.full(200, 10.0)])
        return make_area(pts, (50.0, 75.0, 98.0), [10.0, 10.0, 10.0])

    def _make_output(self, draws_by_column, percentiles, area_ids, model="sub"):
        from footloc.samplers import ChainOutput
        cols = list(draws_by_column)
        body = np.column_stack([draws_by_column[c] for c in cols])
        return ChainOutput(
            model=model, hierarchy="pooled", columns=cols,
            draws=body[None, :, :], percentiles=percentiles,
            area_ids=area_ids, acceptance={}, rhat={}, ess={}, seed=0,
            warmup=0, thin=1)

    def test_center_mode_single_tree(self):
        from footloc.footprint import KernelParams
        from footloc.posterior import fitted_values
        area = self._single_tree_area()
        out = self._make_output(
            {"alpha_rh50": np.zeros(2)}, (50.0, 75.0, 98.0), [area.id])
        fitted = fitted_values("center", out, [area], KernelParams())
        assert np.all(fitted == 10.0)

    def test_degenerate_posterior_recovers_affine_map(self):
        # all draws identical with vanishing noise: median fitted value is
        # alpha + beta * g exactly
        from footloc.footprint import KernelParams, RhSimulator
        from footloc.posterior import fitted_values
        area = self._single_tree_area()
        m_draws = 400
        cols = {}
        for p, a_val, b_val in zip(("50", "75", "98"), (1.0, -0.5, 2.0),
                                   (1.1, 0.9, 1.0)):
            cols[f"alpha_rh{p}"] = np.full(m_draws, a_val)
            cols[f"beta_rh{p}"] = np.full(m_draws, b_val)
            cols[f"tau2_rh{p}"] = np.full(m_draws, 1e-30)
        cols["ell_star_x"] = np.full(m_draws, 35.0)
        cols["ell_star_y"] = np.full(m_draws, 35.0)
        out = self._make_output(cols, (50.0, 75.0, 98.0), [area.id])
        fitted = fitted_values("sub", out, [area], KernelParams())
        want = np.array([1.0 + 1.1 * 10.0, -0.5 + 0.9 * 10.0, 2.0 + 1.0 * 10.0])
        assert fitted[0] == pytest.approx(want, abs=1e-9)

    def test_monte_carlo_median_tolerance(self):
        # median over many realizations of N(5, 1) lands within +/- 0.02
        from footloc.footprint import KernelParams
        from footloc.posterior import fitted_values
        area = self._single_tree_area()
        m_draws = 100_000
        cols = {}
        for p in ("50", "75", "98"):
            cols[f"alpha_rh{p}"] = np.full(m_draws, 5.0)
            cols[f"beta_rh{p}"] = np.zeros(m_draws)
            cols[f"tau2_rh{p}"] = np.ones(m_draws)
        cols["ell_star_x"] = np.full(m_draws, 35.0)
        cols["ell_star_y"] = np.full(m_draws, 35.0)
        out = self._make_output(cols, (50.0, 75.0, 98.0), [area.id])
        fitted = fitted_values("sub", out, [area], KernelParams())
        assert fitted[0] == pytest.approx([5.0, 5.0, 5.0], abs=0.02)
