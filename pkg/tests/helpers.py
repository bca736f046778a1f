"""Shared test oracles: grid integration, KS distances, toy datasets."""

import numpy as np

from footloc.footprint import RhVector
from footloc.ingest import FocalArea


def grid_cdf(xs, log_density):
    """Normalized CDF on a dense grid from unnormalized log-density values."""
    xs = np.asarray(xs, dtype=float)
    logf = np.asarray(log_density, dtype=float)
    f = np.exp(logf - logf.max())
    mass = np.concatenate([[0.0], np.cumsum(
        0.5 * (f[1:] + f[:-1]) * np.diff(xs))])
    return mass / mass[-1]


def ks_to_grid_cdf(samples, xs, cdf):
    """Kolmogorov-Smirnov distance between samples and a gridded CDF."""
    samples = np.sort(np.asarray(samples, dtype=float))
    theory = np.interp(samples, xs, cdf)
    n = samples.size
    empirical_hi = np.arange(1, n + 1) / n
    empirical_lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(empirical_hi - theory)),
                     np.max(np.abs(empirical_lo - theory))))


def make_area(points, percentiles, rh_values, area_id="toy"):
    return FocalArea(
        id=area_id, points=np.asarray(points, dtype=float),
        observed_rh=RhVector(tuple(percentiles), np.asarray(rh_values, float)),
        source_center=(35.0, 35.0),
    )
