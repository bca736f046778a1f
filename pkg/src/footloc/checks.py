"""Reduced-budget self-checks behind the ``check`` CLI command.

Fast versions of the calibration and oracle-equivalence properties the full
test suite runs at higher budgets: worth running after installation or
before a long fit.
"""

from __future__ import annotations

import math

import numpy as np

from .footprint import KernelParams, kernel_weight, weighted_quantiles
from .model import Hyperparams, SubModelState
from .posterior import angle_draws, distance_draws
from .samplers import gibbs_update_tau2, metropolis_update, ram_update


def _check_kernel_forms():
    params = KernelParams()
    peak = kernel_weight((0.0, 0.0, 0.0), (0.0, 0.0), params)
    want = 1.0 / (5.5 * math.sqrt(2.0 * math.pi))
    ok = abs(peak - want) < 1e-12
    return ok, f"peak weight {peak:.7f} (closed form {want:.7f})"


def _check_quantile_oracle(rng):
    for _ in range(50):
        n = rng.integers(2, 12)
        z = np.round(rng.uniform(0, 30, n), 3)
        w = rng.integers(1, 9, n).astype(float)
        p = np.sort(rng.choice(np.arange(5.0, 100.5, 5.0), 4, replace=False))
        got = weighted_quantiles(z, w, p)
        replicated = np.sort(np.repeat(z, w.astype(int)))
        k = replicated.size
        want = replicated[np.ceil(p / 100.0 * k).astype(int) - 1]
        if not np.array_equal(got, want):
            return False, f"mismatch at percentiles {p}"
    return True, "50 random clouds agree exactly with the replication oracle"

def _check_tau2_mean(rng):
    hyper = Hyperparams()
    z = np.array([[1.0], [2.0], [0.5], [1.5]])
    g = np.zeros((4, 1))
    state = SubModelState.initial(1, hyper)
    state.alpha = np.zeros(1)
    state.beta = np.ones(1)
    shape = hyper.a_tau + 2.0
    scale = hyper.b_tau + 0.5 * float(np.sum(z ** 2))
    want = scale / (shape - 1.0)
    draws = np.empty(20_000)
    for i in range(draws.size):
        gibbs_update_tau2(state, z, g, hyper, rng)
        draws[i] = state.tau2[0]
    got = draws.mean()
    ok = abs(got - want) / want < 0.05
    return ok, f"conditional mean {got:.3f} vs analytic {want:.3f}"


def _check_ram_unimodal(rng):
    def log_target(x):
        return -0.5 * float(x @ x)

    x = np.zeros(2)
    lt = log_target(x)
    kept = np.empty(20_000)
    for i in range(kept.size):
        x, lt, _, _ = ram_update(x, lt, log_target, rng, scale=1.5)
        kept[i] = x[0]
    from math import erf
    sorted_x = np.sort(kept)
    cdf = 0.5 * (1.0 + np.vectorize(erf)(sorted_x / math.sqrt(2.0)))
    emp = np.arange(1, kept.size + 1) / kept.size
    ks = float(np.max(np.abs(emp - cdf)))
    return ks < 0.05, f"KS distance to standard normal {ks:.4f}"


def _check_bound(rng):
    def log_target(x):
        r = math.hypot(x[0] - 35.0, x[1] - 35.0)
        return 0.0 if r <= 22.5 else -math.inf

    x = np.array([35.0, 35.0])
    lt = 0.0
    worst = 0.0
    for _ in range(5_000):
        x, lt, _, _ = metropolis_update(x, lt, log_target, rng, scale=8.0)
        worst = max(worst, math.hypot(x[0] - 35.0, x[1] - 35.0))
    return worst <= 22.5, f"max distance reached {worst:.2f} m (bound 22.5)"


def _check_conventions():
    d = float(distance_draws([(29.40, 27.17)], (35.0, 35.0))[0])
    a = float(angle_draws([(29.40, 27.17)], (35.0, 35.0))[0])
    ok = abs(d - 9.62) <= 0.01 and abs(a - 234.43) <= 0.05
    return ok, f"distance {d:.3f} m at {a:.2f} deg"


def run_checks(seed=0):
    """Run every self-check; returns a list of (name, passed, detail)."""
    rng = np.random.default_rng(seed)
    checks = [
        ("kernel closed forms", _check_kernel_forms()),
        ("weighted quantile replication oracle", _check_quantile_oracle(rng)),
        ("tau2 conditional calibration", _check_tau2_mean(rng)),
        ("RAM stationary distribution", _check_ram_unimodal(rng)),
        ("bounded support", _check_bound(rng)),
        ("distance/angle conventions", _check_conventions()),
    ]
    return [(name, ok, detail) for name, (ok, detail) in checks]
