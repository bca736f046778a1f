import math

import numpy as np
import pytest
from scipy.special import gammaln

from footloc.footprint import KernelParams, RhVector, simulate_rh
from footloc.ingest import FocalArea
from footloc.model import (
    FullModelState,
    Hyperparams,
    SubModelState,
    log_invgamma,
    log_likelihood_full,
    log_normal,
    log_posterior_full,
    log_posterior_sub,
)

PARAMS = KernelParams()
HYPER = Hyperparams()


def grid_area(area_id="g", percentiles=(50.0,), rh=None, seed=0):
    """Dense deterministic cloud covering the full buffer."""
    rng = np.random.default_rng(seed)
    n = 3000
    pts = np.column_stack([
        rng.uniform(0, 70, n), rng.uniform(0, 70, n), rng.uniform(0, 30, n)])
    values = np.zeros(len(percentiles)) if rh is None else np.asarray(rh, float)
    return FocalArea(id=area_id, points=pts,
                     observed_rh=RhVector(percentiles, values),
                     source_center=(35.0, 35.0))


def full_state(n, m, **overrides):
    state = FullModelState.initial(n, m, HYPER)
    for key, val in overrides.items():
        setattr(state, key, val)
    return state


class TestDensityPrimitives:
    def test_invgamma_closed_form(self):
        # IG(10 | 2, 10) = 2 log 10 - log Gamma(2) - 3 log 10 - 1
        got = log_invgamma(10.0, 2.0, 10.0)
        assert got == pytest.approx(-math.log(10.0) - 1.0, abs=1e-12)
        assert got == pytest.approx(-3.302585, abs=1e-6)

    def test_invgamma_against_scipy(self):
        from scipy.stats import invgamma
        for x, a, b in [(0.5, 2.0, 10.0), (3.0, 2.0, 100.0), (42.0, 5.0, 7.0)]:
            assert log_invgamma(x, a, b) == pytest.approx(
                invgamma.logpdf(x, a, scale=b), abs=1e-10)

    def test_invgamma_mean_matches_shape2_rule(self):
        # with shape 2 the mean equals the scale
        from scipy.stats import invgamma
        assert invgamma.mean(2.0, scale=10.0) == pytest.approx(10.0)

    def test_normal_sum(self):
        got = log_normal(np.array([0.0, 1.0]), 0.0, 1.0)
        want = -0.5 * (2 * math.log(2 * math.pi) + 1.0)
        assert got == pytest.approx(want, abs=1e-12)

    def test_invgamma_nonpositive(self):
        assert log_invgamma(-1.0, 2.0, 10.0) == -math.inf


class TestLikelihood:
    def test_zero_residual_single_term(self):
        area = grid_area()
        g = simulate_rh(area, (35.0, 35.0), PARAMS, (50.0,)).values
        area.observed_rh = RhVector((50.0,), g.copy())
        state = full_state(1, 1, tau2=np.ones(1))
        ll = log_likelihood_full(state, [area], PARAMS)
        assert ll == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_residual_quadratic_penalty(self):
        area = grid_area()
        g = simulate_rh(area, (35.0, 35.0), PARAMS, (50.0,)).values
        r = 1.7
        area.observed_rh = RhVector((50.0,), g + r)
        state = full_state(1, 1, tau2=np.ones(1))
        ll = log_likelihood_full(state, [area], PARAMS)
        assert ll == pytest.approx(-0.5 * math.log(2 * math.pi) - r * r / 2, abs=1e-12)

    def test_matches_per_term_brute_force(self):
        rng = np.random.default_rng(5)
        percentiles = (50.0, 75.0, 98.0)
        areas = []
        for k in range(3):
            a = grid_area(f"a{k}", percentiles, seed=k)
            a.observed_rh = RhVector(percentiles, rng.uniform(0, 25, 3))
            areas.append(a)
        state = full_state(3, 3,
                           alpha=rng.normal(0, 1, 3),
                           beta=rng.normal(1, 0.2, 3),
                           tau2=rng.uniform(0.5, 3.0, 3),
                           ell=np.asarray([[33.0, 36.0], [35.5, 30.0], [40.0, 40.0]]))
        got = log_likelihood_full(state, areas, PARAMS)
        # independent per-term evaluation then sum
        want = 0.0
        for i, a in enumerate(areas):
            g = simulate_rh(a, state.ell[i], PARAMS, percentiles).values
            for j in range(3):
                mu = state.alpha[j] + state.beta[j] * g[j]
                var = state.tau2[j]
                want += (-0.5 * math.log(2 * math.pi * var)
                         - (a.observed_rh.values[j] - mu) ** 2 / (2 * var))
        assert got == pytest.approx(want, rel=1e-12)

    def test_location_equivariance(self):
        # adding c to observations and to alpha leaves the likelihood unchanged
        percentiles = (50.0, 98.0)
        area = grid_area("e", percentiles)
        base = simulate_rh(area, (35.0, 35.0), PARAMS, percentiles).values
        area.observed_rh = RhVector(percentiles, base + 0.3)
        state = full_state(1, 2)
        ll0 = log_likelihood_full(state, [area], PARAMS)
        c = 5.0
        shifted = grid_area("e", percentiles)
        shifted.observed_rh = RhVector(percentiles, base + 0.3 + c)
        state_c = full_state(1, 2, alpha=state.alpha + c)
        ll1 = log_likelihood_full(state_c, [shifted], PARAMS)
        assert ll0 == pytest.approx(ll1, rel=1e-12)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(9)
        percentiles = (50.0, 75.0)
        areas = []
        for k in range(4):
            a = grid_area(f"r{k}", percentiles, seed=10 + k)
            a.observed_rh = RhVector(percentiles, rng.uniform(0, 25, 2))
            areas.append(a)
        state = full_state(4, 2, ell=np.asarray(
            [[33.0, 36.0], [35.5, 30.0], [40.0, 40.0], [30.0, 30.0]]))
        lp0 = log_posterior_full(state, areas, PARAMS, HYPER)
        perm = [2, 0, 3, 1]
        state_p = full_state(4, 2, ell=state.ell[perm])
        lp1 = log_posterior_full(state_p, [areas[i] for i in perm], PARAMS, HYPER)
        assert lp0 == pytest.approx(lp1, rel=1e-12)


class TestPosterior:
    def test_prior_terms_hand_summed(self):
        # zero-residual data so the likelihood term is a known constant
        area = grid_area()
        g = simulate_rh(area, (35.0, 35.0), PARAMS, (50.0,)).values
        area.observed_rh = RhVector((50.0,), g.copy())
        state = full_state(1, 1)
        lp = log_posterior_full(state, [area], PARAMS, HYPER)
        want = -0.5 * math.log(2 * math.pi * 10.0)               # likelihood, tau2 = 10
        want += log_normal(0.0, 0.0, 1000.0)                     # alpha at prior mean
        want += log_normal(1.0, 1.0, 1000.0)                     # beta at prior mean
        want += (2 * math.log(10) - gammaln(2.0)
                 - 3 * math.log(10.0) - 1.0)                     # IG(10 | 2, 10)
        want += 2 * log_normal(35.0, 35.0, HYPER.b_ell)          # ell | mu, sigma2
        want += 2 * log_normal(35.0, 35.0, 1000.0)               # mu_ell hyperprior
        want += 2 * log_invgamma(HYPER.b_ell, 2.0, 100.0)        # sigma2_ell
        assert lp == pytest.approx(want, rel=1e-12)

    def test_bound_violation_is_minus_inf(self):
        area = grid_area()
        area.observed_rh = RhVector((50.0,), np.array([5.0]))
        state = full_state(1, 1, ell=np.array([[35.0 + 22.6, 35.0]]))
        assert log_posterior_full(state, [area], PARAMS, HYPER) == -math.inf
        # just inside stays finite
        state2 = full_state(1, 1, ell=np.array([[35.0 + 22.4, 35.0]]))
        assert np.isfinite(log_posterior_full(state2, [area], PARAMS, HYPER))

    def test_sub_bound_violation(self):
        area = grid_area()
        area.observed_rh = RhVector((50.0,), np.array([5.0]))
        state = SubModelState.initial(1, HYPER)
        state.ell_star = np.array([20.0, 18.0])   # 22.67 m out
        assert log_posterior_sub(state, [area], PARAMS, HYPER) == -math.inf

    def test_sub_n1_reduces_to_full_minus_hierarchy(self):
        # with one area and ell(s_1) = ell*, the densities differ only by the
        # hierarchy terms evaluated at the current state
        percentiles = (50.0, 75.0)
        area = grid_area("n1", percentiles)
        area.observed_rh = RhVector(percentiles, np.array([4.0, 9.0]))
        loc = np.array([33.0, 37.0])
        sub = SubModelState.initial(2, HYPER)
        sub.ell_star = loc.copy()
        full = full_state(1, 2, ell=loc[None, :].copy())
        lp_sub = log_posterior_sub(sub, [area], PARAMS, HYPER)
        lp_full = log_posterior_full(full, [area], PARAMS, HYPER)
        hierarchy_terms = 0.0
        for k in range(2):
            hierarchy_terms += log_normal(loc[k], full.mu_ell[k], full.sigma2_ell[k])
        hierarchy_terms += log_normal(full.mu_ell, np.asarray(HYPER.s),
                                      HYPER.sigma2_mu_ell)
        hierarchy_terms += log_invgamma(full.sigma2_ell, HYPER.a_ell, HYPER.b_ell)
        star_prior = log_normal(loc, np.asarray(HYPER.s), HYPER.sigma2_ell_star)
        assert lp_full - hierarchy_terms == pytest.approx(lp_sub - star_prior,
                                                          rel=1e-12)

    def test_sub_grid_oracle_prefers_truth(self):
        # synthetic no-offset data: posterior at truth beats any 5 m shift
        percentiles = (50.0, 75.0, 98.0)
        rng = np.random.default_rng(2)
        areas = []
        for k in range(4):
            a = grid_area(f"t{k}", percentiles, seed=20 + k)
            g = simulate_rh(a, (35.0, 35.0), PARAMS, percentiles).values
            a.observed_rh = RhVector(percentiles, g + rng.normal(0, 0.25, 3))
            areas.append(a)
        state = SubModelState.initial(3, HYPER)
        state.tau2 = np.full(3, 0.25)
        at_truth = log_posterior_sub(state, areas, PARAMS, HYPER)
        for angle in np.linspace(0, 2 * math.pi, 8, endpoint=False):
            state_shift = SubModelState.initial(3, HYPER)
            state_shift.tau2 = np.full(3, 0.25)
            state_shift.ell_star = np.array(
                [35.0 + 5 * math.cos(angle), 35.0 + 5 * math.sin(angle)])
            assert log_posterior_sub(state_shift, areas, PARAMS, HYPER) < at_truth

    def test_fixed_center_hierarchy_variant(self):
        area = grid_area()
        area.observed_rh = RhVector((50.0,), np.array([5.0]))
        state = full_state(1, 1, ell=np.array([[33.0, 36.0]]))
        pooled = log_posterior_full(state, [area], PARAMS, HYPER, hierarchy="pooled")
        fixed = log_posterior_full(state, [area], PARAMS, HYPER,
                                   hierarchy="fixed_center")
        assert np.isfinite(pooled) and np.isfinite(fixed)
        assert pooled != fixed
        with pytest.raises(ValueError):
            log_posterior_full(state, [area], PARAMS, HYPER, hierarchy="bogus")


class TestHyperparams:
    def test_defaults_match_documented_values(self):
        h = Hyperparams()
        assert (h.mu_alpha, h.sigma2_alpha) == (0.0, 1000.0)
        assert (h.mu_beta, h.sigma2_beta) == (1.0, 1000.0)
        assert (h.a_tau, h.b_tau) == (2.0, 10.0)
        assert (h.a_ell, h.b_ell) == (2.0, 100.0)
        assert h.s == (35.0, 35.0)
        assert h.bound == 22.5

    def test_shape_must_exceed_one(self):
        with pytest.raises(ValueError):
            Hyperparams(a_tau=1.0)
        with pytest.raises(ValueError):
            Hyperparams(sigma2_alpha=0.0)
