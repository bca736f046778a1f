"""Hierarchical measurement-error model: states, priors, log densities.

Observed RH metrics are modeled as affine adjustments of simulated metrics
at latent footprint centers:

    z_ij = alpha_j + beta_j * g_j(ell_i) + eps_ij,   eps_ij ~ N(0, tau2_j)

The full model gives every focal area its own latent center ell_i with a
shared bivariate normal population (mu_ell, sigma2_ell); the submodel
replaces all ell_i with a single shared offset ell_star. Latent centers are
constrained to a disk of radius ``bound`` around the reported center
(35, 35); states outside score minus infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .footprint import KernelParams, RhSimulator, simulate_rh
from .ingest import observed_matrix

CENTER = (35.0, 35.0)

__all__ = [
    "Hyperparams", "FullModelState", "SubModelState",
    "log_normal", "log_invgamma",
    "log_likelihood_full", "log_posterior_full",
    "log_likelihood_sub", "log_posterior_sub",
]


@dataclass(frozen=True)
class Hyperparams:
    """Weakly informative prior settings.

    Inverse-gamma densities use the shape/scale convention
    p(x) ~ x^-(a+1) * exp(-b / x), whose mean is b / (a - 1); with shape 2
    the mean equals the scale.
    """

    mu_alpha: float = 0.0
    sigma2_alpha: float = 1000.0
    mu_beta: float = 1.0
    sigma2_beta: float = 1000.0
    a_tau: float = 2.0
    b_tau: float = 10.0
    s: tuple = CENTER
    sigma2_mu_ell: float = 1000.0
    a_ell: float = 2.0
    b_ell: float = 100.0
    sigma2_ell_star: float = 1000.0
    bound: float = 22.5

    def __post_init__(self):
        for name in ("sigma2_alpha", "sigma2_beta", "sigma2_mu_ell",
                     "sigma2_ell_star", "b_tau", "b_ell", "bound"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive")
        if not (self.a_tau > 1 and self.a_ell > 1):
            raise ValueError("inverse-gamma shapes must exceed 1 so prior means exist")


@dataclass
class FullModelState:
    """All sampled parameters of the full model at one iteration."""

    alpha: np.ndarray          # (m,)
    beta: np.ndarray           # (m,)
    tau2: np.ndarray           # (m,)
    ell: np.ndarray            # (n, 2) latent centers, local frame
    mu_ell: np.ndarray         # (2,)
    sigma2_ell: np.ndarray     # (2,)

    def copy(self):
        return FullModelState(self.alpha.copy(), self.beta.copy(),
                              self.tau2.copy(), self.ell.copy(),
                              self.mu_ell.copy(), self.sigma2_ell.copy())

    @classmethod
    def initial(cls, n, m, hyper: Hyperparams):
        """Null start: no adjustment, no geolocation error."""
        return cls(
            alpha=np.zeros(m),
            beta=np.ones(m),
            tau2=np.full(m, hyper.b_tau, dtype=float),
            ell=np.tile(np.asarray(hyper.s, dtype=float), (n, 1)),
            mu_ell=np.asarray(hyper.s, dtype=float).copy(),
            sigma2_ell=np.full(2, hyper.b_ell, dtype=float),
        )


@dataclass
class SubModelState:
    """All sampled parameters of the systematic-offset submodel."""

    alpha: np.ndarray
    beta: np.ndarray
    tau2: np.ndarray
    ell_star: np.ndarray       # (2,)

    def copy(self):
        return SubModelState(self.alpha.copy(), self.beta.copy(),
                             self.tau2.copy(), self.ell_star.copy())

    @classmethod
    def initial(cls, m, hyper: Hyperparams):
        return cls(
            alpha=np.zeros(m),
            beta=np.ones(m),
            tau2=np.full(m, hyper.b_tau, dtype=float),
            ell_star=np.asarray(hyper.s, dtype=float).copy(),
        )


def log_normal(x, mean, var):
    """Sum of normal log densities; broadcasts over arrays."""
    x = np.asarray(x, dtype=float)
    return float(np.sum(-0.5 * (np.log(2.0 * math.pi * var) + (x - mean) ** 2 / var)))


def log_invgamma(x, shape, scale):
    """Sum of inverse-gamma log densities (shape/scale convention)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        return -math.inf
    return float(np.sum(shape * np.log(scale) - gammaln(shape)
                        - (shape + 1.0) * np.log(x) - scale / x))


def _within_bound(points, hyper):
    d2 = np.sum((np.atleast_2d(points) - np.asarray(hyper.s)) ** 2, axis=1)
    return bool(np.all(d2 <= hyper.bound ** 2))


def _metric_matrix(areas, centers, params, percentiles, sim):
    """(n, m) simulated metrics; one center per area or a shared one."""
    if sim is not None:
        return sim.metrics_matrix(areas, centers)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[0] == 1 and len(areas) > 1:
        centers = np.repeat(centers, len(areas), axis=0)
    return np.vstack([
        simulate_rh(a, c, params, percentiles).values
        for a, c in zip(areas, centers)
    ])


def gaussian_loglik(z, g, alpha, beta, tau2):
    """Likelihood of an observed matrix given simulated metrics.

    ``z`` and ``g`` are (n, m); alpha, beta, tau2 are (m,).
    """
    resid = z - (alpha + beta * g)
    return float(np.sum(-0.5 * (np.log(2.0 * math.pi * tau2) + resid ** 2 / tau2)))


def log_likelihood_full(state: FullModelState, areas, params: KernelParams,
                        sim: RhSimulator | None = None):
    """Gaussian likelihood of all observed metrics at the state's centers.

    Raises EmptyFootprintError if any latent center has no points within
    the capture radius; samplers treat that as a minus-infinity density.
    """
    percentiles = areas[0].observed_rh.percentiles
    g = _metric_matrix(areas, state.ell, params, percentiles, sim)
    return gaussian_loglik(observed_matrix(areas), g, state.alpha, state.beta, state.tau2)


def log_posterior_full(state: FullModelState, areas, params: KernelParams,
                       hyper: Hyperparams, sim: RhSimulator | None = None,
                       hierarchy: str = "pooled"):
    """Unnormalized log posterior of the full model.

    Returns -inf when any latent center violates the search bound. With
    ``hierarchy="fixed_center"`` the latent centers are a priori centered
    on the reported location with fixed variance and the population-mean
    level (mu_ell, sigma2_ell) drops out.
    """
    if not _within_bound(state.ell, hyper):
        return -math.inf
    if np.any(state.tau2 <= 0) or np.any(state.sigma2_ell <= 0):
        return -math.inf
    lp = log_likelihood_full(state, areas, params, sim)
    lp += log_normal(state.alpha, hyper.mu_alpha, hyper.sigma2_alpha)
    lp += log_normal(state.beta, hyper.mu_beta, hyper.sigma2_beta)
    lp += log_invgamma(state.tau2, hyper.a_tau, hyper.b_tau)
    s = np.asarray(hyper.s)
    if hierarchy == "pooled":
        for k in range(2):
            lp += log_normal(state.ell[:, k], state.mu_ell[k], state.sigma2_ell[k])
        lp += log_normal(state.mu_ell, s, hyper.sigma2_mu_ell)
        lp += log_invgamma(state.sigma2_ell, hyper.a_ell, hyper.b_ell)
    elif hierarchy == "fixed_center":
        for k in range(2):
            lp += log_normal(state.ell[:, k], s[k], hyper.sigma2_ell_star)
    else:
        raise ValueError(f"unknown hierarchy {hierarchy!r}")
    return lp


def log_likelihood_sub(state: SubModelState, areas, params: KernelParams,
                       sim: RhSimulator | None = None):
    """Likelihood with one shared latent offset for every focal area."""
    percentiles = areas[0].observed_rh.percentiles
    g = _metric_matrix(areas, state.ell_star, params, percentiles, sim)
    return gaussian_loglik(observed_matrix(areas), g, state.alpha, state.beta, state.tau2)


def log_posterior_sub(state: SubModelState, areas, params: KernelParams,
                      hyper: Hyperparams, sim: RhSimulator | None = None):
    """Unnormalized log posterior of the submodel; -inf outside the bound."""
    if not _within_bound(state.ell_star, hyper):
        return -math.inf
    if np.any(state.tau2 <= 0):
        return -math.inf
    lp = log_likelihood_sub(state, areas, params, sim)
    lp += log_normal(state.alpha, hyper.mu_alpha, hyper.sigma2_alpha)
    lp += log_normal(state.beta, hyper.mu_beta, hyper.sigma2_beta)
    lp += log_invgamma(state.tau2, hyper.a_tau, hyper.b_tau)
    lp += log_normal(state.ell_star, np.asarray(hyper.s), hyper.sigma2_ell_star)
    return lp
