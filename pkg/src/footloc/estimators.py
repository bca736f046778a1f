"""Scikit-learn style estimator facade over the sampling machinery.

``GeolocationErrorModel`` exposes the Bayesian fit through the familiar
``fit`` / ``predict`` / ``get_params`` surface so it composes with
scikit-learn tooling (cloning, parameter search over chain or kernel
settings, pipelines that pass focal-area lists through).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .footprint import KernelParams, RhSimulator
from .ingest import FocalArea, observed_matrix
from .model import Hyperparams
from .posterior import (
    GridSpec,
    fitted_values,
    kde2d,
    map_estimate,
    rmse_table,
    summarize_location,
)
from .samplers import ChainConfig, run_chains

CENTER = (35.0, 35.0)


def check_focal_areas(X):
    """Validate a focal-area collection and return it as a list.

    Requires at least one area, consistent RH percentiles across areas,
    (N, 3) point arrays, and matching observed-metric lengths.
    """
    areas = list(X)
    if not areas:
        raise ValueError("X must contain at least one FocalArea")
    reference = None
    for a in areas:
        if not isinstance(a, FocalArea):
            raise TypeError(f"expected FocalArea, got {type(a).__name__}")
        pts = np.asarray(a.points)
        if pts.ndim != 2 or pts.shape[1] < 3 or pts.shape[0] == 0:
            raise ValueError(f"area {a.id!r}: points must be a non-empty (N, 3) array")
        if reference is None:
            reference = a.observed_rh.percentiles
        elif a.observed_rh.percentiles != reference:
            raise ValueError(
                f"area {a.id!r}: RH percentiles differ from the first area")
    return areas


class GeolocationErrorModel(BaseEstimator):
    """Bayesian geolocation-error model with a scikit-learn interface.

    ``fit`` takes a list of ``FocalArea`` objects and runs the MCMC;
    ``predict`` returns median posterior fitted RH metrics. ``model="full"``
    estimates one latent center per focal area plus their population;
    ``model="sub"`` estimates a single shared offset.

    Parameters mirror the configuration file: kernel shape, prior
    hyperparameters, and chain layout. Fitted attributes:

    - ``output_``: the raw ``ChainOutput`` (draws and diagnostics)
    - ``areas_``: the training focal areas
    - ``systematic_offset_``: MAP systematic offset, local-frame (2,)
    """

    def __init__(self, model="full", hierarchy="pooled", sigma_f=5.5,
                 capture_radius=25.0, quantize=0.1, rh_interpolation="none",
                 n_chains=5, kept=10_000, warmup=None, thin=1, seed=0,
                 ram_step=2.0, ram_epsilon=1e-8, adapt=False, parallel_ell=True,
                 ell_sampler="ram", ell_star_sampler="metropolis",
                 mu_alpha=0.0, sigma2_alpha=1000.0, mu_beta=1.0,
                 sigma2_beta=1000.0, a_tau=2.0, b_tau=10.0,
                 sigma2_mu_ell=1000.0, a_ell=2.0, b_ell=100.0,
                 sigma2_ell_star=1000.0, bound=22.5, grid_size=141,
                 threads=1):
        self.model = model
        self.hierarchy = hierarchy
        self.sigma_f = sigma_f
        self.capture_radius = capture_radius
        self.quantize = quantize
        self.rh_interpolation = rh_interpolation
        self.n_chains = n_chains
        self.kept = kept
        self.warmup = warmup
        self.thin = thin
        self.seed = seed
        self.ram_step = ram_step
        self.ram_epsilon = ram_epsilon
        self.adapt = adapt
        self.parallel_ell = parallel_ell
        self.ell_sampler = ell_sampler
        self.ell_star_sampler = ell_star_sampler
        self.mu_alpha = mu_alpha
        self.sigma2_alpha = sigma2_alpha
        self.mu_beta = mu_beta
        self.sigma2_beta = sigma2_beta
        self.a_tau = a_tau
        self.b_tau = b_tau
        self.sigma2_mu_ell = sigma2_mu_ell
        self.a_ell = a_ell
        self.b_ell = b_ell
        self.sigma2_ell_star = sigma2_ell_star
        self.bound = bound
        self.grid_size = grid_size
        self.threads = threads

    # -- assembly helpers -------------------------------------------------
    def _kernel(self):
        return KernelParams(sigma_f=self.sigma_f, radius=self.capture_radius)

    def _hyper(self):
        return Hyperparams(
            mu_alpha=self.mu_alpha, sigma2_alpha=self.sigma2_alpha,
            mu_beta=self.mu_beta, sigma2_beta=self.sigma2_beta,
            a_tau=self.a_tau, b_tau=self.b_tau,
            sigma2_mu_ell=self.sigma2_mu_ell, a_ell=self.a_ell,
            b_ell=self.b_ell, sigma2_ell_star=self.sigma2_ell_star,
            bound=self.bound,
        )

    def _chain_config(self):
        return ChainConfig(
            n_chains=self.n_chains, kept=self.kept, warmup=self.warmup,
            thin=self.thin, seed=self.seed, ram_step=self.ram_step,
            ram_epsilon=self.ram_epsilon, adapt=self.adapt,
            parallel_ell=self.parallel_ell, ell_sampler=self.ell_sampler,
            ell_star_sampler=self.ell_star_sampler,
        )

    def _grid(self):
        return GridSpec(size=self.grid_size)

    # -- estimator API -----------------------------------------------------
    def fit(self, X, y=None):
        """Run the MCMC over a list of focal areas; returns self."""
        areas = check_focal_areas(X)
        self.areas_ = areas
        self.percentiles_ = areas[0].observed_rh.percentiles
        self.output_ = run_chains(
            self.model, areas, self._kernel(), self._hyper(),
            self._chain_config(), hierarchy=self.hierarchy,
            quantize=self.quantize, interpolation=self.rh_interpolation,
            threads=self.threads,
        )
        if self.model == "sub":
            est = map_estimate(kde2d(self.output_.ell_star_draws(), self._grid()))
        else:
            est = map_estimate(kde2d(self.output_.pooled_ell_draws(), self._grid()))
        self.systematic_offset_ = np.asarray(est.location) - np.asarray(CENTER)
        return self

    def _require_fitted(self):
        if not hasattr(self, "output_"):
            raise RuntimeError("estimator is not fitted; call fit() first")

    def predict(self, X=None, mode=None):
        """Median posterior fitted RH metrics, one (n, m) matrix.

        ``mode`` defaults to the fitted model; ``"center"`` gives the
        uncorrected simulation at reported centers. The full model can only
        predict its training areas (its latent centers are per-area); the
        submodel and center modes accept new areas.
        """
        self._require_fitted()
        mode = mode or self.model
        if mode not in ("center", self.model):
            raise ValueError(
                f"mode {mode!r} is not available from a {self.model!r} fit")
        areas = self.areas_ if X is None else check_focal_areas(X)
        if mode == "full" and X is not None:
            trained = {a.id for a in self.areas_}
            if {a.id for a in areas} - trained:
                raise ValueError(
                    "full-model fitted values exist only for training areas")
        sim = RhSimulator(self._kernel(), self.percentiles_,
                          quantize=self.quantize,
                          interpolation=self.rh_interpolation)
        return fitted_values(mode, self.output_, areas, self._kernel(), sim=sim)

    def score(self, X=None, y=None):
        """Negative mean per-metric RMSE of fitted values (higher is better)."""
        self._require_fitted()
        areas = self.areas_ if X is None else check_focal_areas(X)
        fitted = self.predict(X)
        return -float(np.mean(rmse_table(observed_matrix(areas), fitted)))

    # -- posterior accessors ------------------------------------------------
    def error_summary(self):
        """Distance/direction summary of the systematic error posterior."""
        self._require_fitted()
        draws = (self.output_.ell_star_draws() if self.model == "sub"
                 else self.output_.pooled_ell_draws())
        summary = summarize_location(draws, CENTER).to_dict()
        summary["systematic_offset_m"] = [float(v) for v in self.systematic_offset_]
        return summary

    def footprint_locations(self):
        """Per-footprint MAP locations, local frame (full model only)."""
        self._require_fitted()
        if self.model != "full":
            raise RuntimeError("per-footprint locations require model='full'")
        grid = self._grid()
        return np.vstack([
            map_estimate(kde2d(self.output_.ell_draws(a.id), grid)).location
            for a in self.areas_
        ])

    def corrected_locations(self):
        """Corrected footprint centers in the source CRS, one row per area."""
        self._require_fitted()
        if self.model == "full":
            maps = self.footprint_locations()
            return np.vstack([
                a.to_source(loc) for a, loc in zip(self.areas_, maps)
            ])
        offset = self.systematic_offset_
        return np.vstack([
            np.asarray(a.source_center) + offset for a in self.areas_
        ])
