"""MCMC engine: Gibbs blocks, repelling-attracting Metropolis, chain runner.

Parameters with closed-form full conditionals (alpha, beta, tau2, mu_ell,
sigma2_ell) are drawn with a Gibbs sampler. Latent footprint centers have
multimodal conditionals, so they are updated with the repelling-attracting
Metropolis (RAM) kernel of Tak, Meng and van Dyk (2018): a forced-downhill
proposal stage followed by a forced-uphill stage, with an auxiliary
variable making the acceptance ratio tractable while preserving detailed
balance. The submodel's shared offset uses plain random-walk Metropolis by
default.

Everything is driven by explicit numpy Generators seeded through a
SeedSequence tree, so runs are bit-reproducible for a fixed seed no matter
how many worker processes execute the chains.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyFootprintError, InitializationError
from .footprint import KernelParams, RhSimulator
from .ingest import observed_matrix
from .model import FullModelState, Hyperparams, SubModelState

ADAPT_INTERVAL = 50
ADAPT_TARGET = 0.25
SCALE_BOUNDS = (1e-3, 20.0)


@dataclass(frozen=True)
class ChainConfig:
    """Chain layout and proposal tuning.

    ``kept`` counts post-warmup draws retained per chain after thinning;
    ``warmup`` defaults to ``kept``. ``ram_epsilon`` floors the target
    density inside the RAM stages so zero-density regions stay navigable.
    When ``adapt`` is true, proposal scales are tuned during warmup only
    and frozen before any kept draw; leave it off for strongly multimodal
    location posteriors, where tuning toward a comfortable acceptance rate
    shrinks the step below the mode separation and defeats the
    repelling-attracting kernel's mode hopping. ``ram_step`` should then be
    sized near the expected separation (a few meters here).
    """

    n_chains: int = 5
    kept: int = 10_000
    warmup: int | None = None
    thin: int = 1
    seed: int = 0
    ram_step: float = 2.0
    ram_epsilon: float = 1e-8
    adapt: bool = False
    parallel_ell: bool = True
    ell_sampler: str = "ram"
    ell_star_sampler: str = "metropolis"
    max_stage_tries: int = 10_000

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.kept < 1 or self.thin < 1:
            raise ValueError("kept and thin must be >= 1")
        if self.ram_step <= 0 or self.ram_epsilon <= 0:
            raise ValueError("ram_step and ram_epsilon must be positive")
        if self.ell_sampler not in ("ram", "metropolis"):
            raise ValueError(f"unknown ell_sampler {self.ell_sampler!r}")
        if self.ell_star_sampler not in ("ram", "metropolis"):
            raise ValueError(f"unknown ell_star_sampler {self.ell_star_sampler!r}")

    @property
    def effective_warmup(self):
        return self.kept if self.warmup is None else self.warmup


# ---------------------------------------------------------------------------
# Conjugate Gibbs blocks
# ---------------------------------------------------------------------------

def draw_alpha(state, z, g, hyper: Hyperparams, rng):
    """Additive-adjustment draw from its normal full conditional, per metric."""
    n = z.shape[0]
    tau2 = state.tau2
    prec = 1.0 / hyper.sigma2_alpha + n / tau2
    mean = (hyper.mu_alpha / hyper.sigma2_alpha
            + np.sum(z - state.beta * g, axis=0) / tau2) / prec
    return mean + rng.standard_normal(tau2.size) / np.sqrt(prec)


def draw_beta(state, z, g, hyper: Hyperparams, rng):
    """Multiplicative-adjustment draw from its normal full conditional."""
    tau2 = state.tau2
    prec = 1.0 / hyper.sigma2_beta + np.sum(g * g, axis=0) / tau2
    mean = (hyper.mu_beta / hyper.sigma2_beta
            + np.sum(g * (z - state.alpha), axis=0) / tau2) / prec
    return mean + rng.standard_normal(tau2.size) / np.sqrt(prec)


def draw_tau2(state, z, g, hyper: Hyperparams, rng):
    """Noise-variance draw from its inverse-gamma full conditional."""
    n = z.shape[0]
    resid = z - (state.alpha + state.beta * g)
    shape = hyper.a_tau + 0.5 * n
    scale = hyper.b_tau + 0.5 * np.sum(resid * resid, axis=0)
    return scale / rng.gamma(shape, 1.0, size=scale.size)


def draw_mu_ell(state: FullModelState, hyper: Hyperparams, rng):
    """Population-mean draw for the latent centers, per axis."""
    n = state.ell.shape[0]
    s = np.asarray(hyper.s, dtype=float)
    prec = 1.0 / hyper.sigma2_mu_ell + n / state.sigma2_ell
    mean = (s / hyper.sigma2_mu_ell
            + np.sum(state.ell, axis=0) / state.sigma2_ell) / prec
    return mean + rng.standard_normal(2) / np.sqrt(prec)


def draw_sigma2_ell(state: FullModelState, hyper: Hyperparams, rng):
    """Population-variance draw for the latent centers, per axis."""
    n = state.ell.shape[0]
    shape = hyper.a_ell + 0.5 * n
    scale = hyper.b_ell + 0.5 * np.sum((state.ell - state.mu_ell) ** 2, axis=0)
    return scale / rng.gamma(shape, 1.0, size=2)


def gibbs_update_alpha_beta(state, z, g, hyper: Hyperparams, rng):
    """Draw alpha then beta from their normal full conditionals, per metric.

    ``z`` and ``g`` are (n, m) observed and simulated metric matrices at the
    current latent centers. Two scalar conjugate draws per metric: alpha
    given beta, then beta given the fresh alpha.
    """
    state.alpha = draw_alpha(state, z, g, hyper, rng)
    state.beta = draw_beta(state, z, g, hyper, rng)
    return state


def gibbs_update_tau2(state, z, g, hyper: Hyperparams, rng):
    """Draw tau2 from its inverse-gamma full conditional, per metric."""
    state.tau2 = draw_tau2(state, z, g, hyper, rng)
    return state


def gibbs_update_mu_sigma_ell(state: FullModelState, hyper: Hyperparams, rng):
    """Draw the latent-center population mean and variance, per axis."""
    state.mu_ell = draw_mu_ell(state, hyper, rng)
    state.sigma2_ell = draw_sigma2_ell(state, hyper, rng)
    return state


# ---------------------------------------------------------------------------
# Metropolis kernels
# ---------------------------------------------------------------------------

class StageAborted(Exception):
    """A forced RAM stage failed to accept within the retry budget."""


def _forced_stage(x, lpe_x, log_target, rng, scale, log_eps, max_tries, uphill):
    """Propose from N(x, scale^2 I) until the stage accepts.

    Downhill stages accept with probability min(1, pe(x)/pe(y)); uphill
    stages with min(1, pe(y)/pe(x)), where pe is the epsilon-floored target.
    Returns the accepted point, its raw and floored log targets, and the
    number of target evaluations spent.
    """
    n_evals = 0
    for _ in range(max_tries):
        y = x + scale * rng.standard_normal(x.size)
        lt_y = log_target(y)
        lpe_y = np.logaddexp(lt_y, log_eps)
        n_evals += 1
        log_ratio = (lpe_y - lpe_x) if uphill else (lpe_x - lpe_y)
        if log_ratio >= 0 or math.log(rng.uniform()) < log_ratio:
            return y, lt_y, lpe_y, n_evals
    raise StageAborted


def ram_update(x, lt_x, log_target, rng, scale, epsilon=1e-8, max_tries=10_000):
    """One repelling-attracting Metropolis transition.

    The proposal walks downhill from the current point, then uphill from
    there, encouraging jumps across low-density valleys between posterior
    modes. An auxiliary point, refreshed from the proposal kernel and moved
    downhill from the proposal, yields the exact acceptance ratio

        pi(x') * min(1, pe(x)/pe(z)) / (pi(x) * min(1, pe(x')/pe(z')))

    so all intractable stage normalizers cancel. Underflow is handled in
    log space, with ``epsilon`` flooring the target inside the stages.

    Returns ``(x_new, lt_new, accepted, n_evals)``. A stage that exhausts
    ``max_tries`` aborts the transition, which counts as a rejection and is
    reported with a negated evaluation count.
    """
    x = np.asarray(x, dtype=float)
    log_eps = math.log(epsilon)
    lpe_x = np.logaddexp(lt_x, log_eps)
    n_evals = 0
    try:
        # Auxiliary refresh: exact draw from its conditional given x.
        z = x + scale * rng.standard_normal(x.size)
        lpe_z = np.logaddexp(log_target(z), log_eps)
        n_evals += 1
        down, _, lpe_down, used = _forced_stage(
            x, lpe_x, log_target, rng, scale, log_eps, max_tries, uphill=False)
        n_evals += used
        prop, lt_prop, lpe_prop, used = _forced_stage(
            down, lpe_down, log_target, rng, scale, log_eps, max_tries, uphill=True)
        n_evals += used
        _, _, lpe_z_new, used = _forced_stage(
            prop, lpe_prop, log_target, rng, scale, log_eps, max_tries, uphill=False)
        n_evals += used
    except StageAborted:
        return x, lt_x, False, -n_evals

    if lt_prop == -math.inf:
        return x, lt_x, False, n_evals
    if lt_x == -math.inf:
        return prop, lt_prop, True, n_evals
    log_r = (lt_prop + min(0.0, lpe_x - lpe_z)
             - lt_x - min(0.0, lpe_prop - lpe_z_new))
    if log_r >= 0 or math.log(rng.uniform()) < log_r:
        return prop, lt_prop, True, n_evals
    return x, lt_x, False, n_evals


def metropolis_update(x, lt_x, log_target, rng, scale):
    """One plain random-walk Metropolis transition.

    Returns ``(x_new, lt_new, accepted, n_evals)``.
    """
    x = np.asarray(x, dtype=float)
    y = x + scale * rng.standard_normal(x.size)
    lt_y = log_target(y)
    if lt_y == -math.inf:
        return x, lt_x, False, 1
    if lt_y - lt_x >= 0 or math.log(rng.uniform()) < lt_y - lt_x:
        return y, lt_y, True, 1
    return x, lt_x, False, 1


def ram_update_ell(state: FullModelState, area_index, areas, params, hyper,
                   rng, sim=None, scale=2.0, epsilon=1e-8,
                   hierarchy="pooled"):
    """One RAM transition for a single focal area's latent center."""
    sim = sim or RhSimulator(params, areas[area_index].observed_rh.percentiles,
                             quantize=0.0)
    target = _ell_target(state, area_index, areas[area_index], hyper, sim, hierarchy)
    x = state.ell[area_index]
    new, _, accepted, _ = ram_update(x, target(x), target, rng, scale, epsilon)
    state.ell[area_index] = new
    return state, accepted


def metropolis_update_ell_star(state: SubModelState, areas, params, hyper,
                               rng, sim=None, scale=2.0):
    """One random-walk Metropolis transition for the shared offset."""
    sim = sim or RhSimulator(params, areas[0].observed_rh.percentiles, quantize=0.0)
    target = _ell_star_target(state, areas, hyper, sim)
    x = state.ell_star
    new, _, accepted, _ = metropolis_update(x, target(x), target, rng, scale)
    state.ell_star = new
    return state, accepted


# ---------------------------------------------------------------------------
# Model-specific targets
# ---------------------------------------------------------------------------

def _gauss_row(z_row, g_row, alpha, beta, tau2):
    resid = z_row - (alpha + beta * g_row)
    return float(np.sum(-0.5 * (np.log(2.0 * math.pi * tau2) + resid * resid / tau2)))


def _ell_target(state, i, area, hyper, sim, hierarchy):
    """Log conditional of one latent center, all other blocks fixed."""
    s = np.asarray(hyper.s, dtype=float)
    bound2 = hyper.bound ** 2
    if hierarchy == "pooled":
        prior_mean = state.mu_ell
        prior_var = state.sigma2_ell
    else:
        prior_mean = s
        prior_var = np.full(2, hyper.sigma2_ell_star)
    z_row = area.observed_rh.values
    alpha, beta, tau2 = state.alpha, state.beta, state.tau2

    def log_target(cand):
        dx = cand[0] - s[0]
        dy = cand[1] - s[1]
        if dx * dx + dy * dy > bound2:
            return -math.inf
        try:
            g_row = sim.metrics(area, cand)
        except EmptyFootprintError:
            return -math.inf
        lp = _gauss_row(z_row, g_row, alpha, beta, tau2)
        lp -= 0.5 * float(np.sum((cand - prior_mean) ** 2 / prior_var))
        return lp

    return log_target


def _ell_star_target(state, areas, hyper, sim):
    """Log conditional of the shared offset given the adjustment blocks."""
    s = np.asarray(hyper.s, dtype=float)
    bound2 = hyper.bound ** 2
    z = observed_matrix(areas)
    alpha, beta, tau2 = state.alpha, state.beta, state.tau2
    var_star = hyper.sigma2_ell_star

    def log_target(cand):
        dx = cand[0] - s[0]
        dy = cand[1] - s[1]
        if dx * dx + dy * dy > bound2:
            return -math.inf
        try:
            g = sim.metrics_matrix(areas, cand)
        except EmptyFootprintError:
            return -math.inf
        resid = z - (alpha + beta * g)
        lp = float(np.sum(-0.5 * (np.log(2.0 * math.pi * tau2) + resid * resid / tau2)))
        lp -= 0.5 * float(np.sum((cand - s) ** 2)) / var_star
        return lp

    return log_target


# ---------------------------------------------------------------------------
# Chain runner
# ---------------------------------------------------------------------------

def _format_percentile(p):
    return f"{p:g}"


def _columns_for(model, percentiles, area_ids, hierarchy):
    cols = []
    for prefix in ("alpha", "beta", "tau2"):
        cols += [f"{prefix}_rh{_format_percentile(p)}" for p in percentiles]
    if model == "full":
        for aid in area_ids:
            cols += [f"ell_x_{aid}", f"ell_y_{aid}"]
        if hierarchy == "pooled":
            cols += ["mu_ell_x", "mu_ell_y", "sigma2_ell_x", "sigma2_ell_y"]
    else:
        cols += ["ell_star_x", "ell_star_y"]
    return cols


class _ScaleAdapter:
    """Robbins-Monro-style proposal-scale tuning, active during warmup only."""

    def __init__(self, scale, enabled):
        self.scale = scale
        self.enabled = enabled
        self.accepted = 0
        self.seen = 0

    def record(self, accepted, in_warmup):
        if not (self.enabled and in_warmup):
            return
        self.accepted += bool(accepted)
        self.seen += 1
        if self.seen >= ADAPT_INTERVAL:
            rate = self.accepted / self.seen
            self.scale = float(np.clip(
                self.scale * math.exp(0.7 * (rate - ADAPT_TARGET)),
                *SCALE_BOUNDS))
            self.accepted = 0
            self.seen = 0


def _run_single_chain(model, areas, params, hyper, config, hierarchy,
                      quantize, interpolation, chain_index):
    """Run one chain; returns (draws, acceptance_rates, ram_aborts)."""
    n = len(areas)
    percentiles = areas[0].observed_rh.percentiles
    m = len(percentiles)
    z = observed_matrix(areas)
    sim = RhSimulator(params, percentiles, quantize=quantize,
                      interpolation=interpolation)

    chain_ss = np.random.SeedSequence(config.seed).spawn(config.n_chains)[chain_index]
    children = chain_ss.spawn(2 + n)
    rng_gibbs = np.random.default_rng(children[0])
    rng_loc = np.random.default_rng(children[1])
    if config.parallel_ell:
        rng_ell = [np.random.default_rng(c) for c in children[2:]]
    else:
        rng_ell = [rng_loc] * n

    warmup = config.effective_warmup
    total = warmup + config.kept * config.thin
    epsilon = config.ram_epsilon
    max_tries = config.max_stage_tries
    area_ids = [a.id for a in areas]
    cols = _columns_for(model, percentiles, area_ids, hierarchy)
    draws = np.empty((config.kept, len(cols)))
    ram_aborts = 0

    if model == "full":
        state = FullModelState.initial(n, m, hyper)
        g_mat = np.vstack([sim.metrics(a, state.ell[i]) for i, a in enumerate(areas)])
        adapters = [_ScaleAdapter(config.ram_step, config.adapt) for _ in range(n)]
        accepted = np.zeros(n)
        kept_row = 0
        for it in range(total):
            in_warmup = it < warmup
            gibbs_update_alpha_beta(state, z, g_mat, hyper, rng_gibbs)
            gibbs_update_tau2(state, z, g_mat, hyper, rng_gibbs)
            for i in range(n):
                target = _ell_target(state, i, areas[i], hyper, sim, hierarchy)
                x = state.ell[i]
                new, _, acc, nev = (
                    ram_update(x, target(x), target, rng_ell[i],
                               adapters[i].scale, epsilon, max_tries)
                    if config.ell_sampler == "ram" else
                    metropolis_update(x, target(x), target, rng_ell[i],
                                      adapters[i].scale))
                ram_aborts += nev < 0
                if acc:
                    state.ell[i] = new
                    g_mat[i] = sim.metrics(areas[i], new)
                adapters[i].record(acc, in_warmup)
                if not in_warmup:
                    accepted[i] += acc
            if hierarchy == "pooled":
                gibbs_update_mu_sigma_ell(state, hyper, rng_gibbs)
            if not in_warmup and (it - warmup) % config.thin == config.thin - 1:
                row = np.concatenate([
                    state.alpha, state.beta, state.tau2, state.ell.ravel(),
                    np.concatenate([state.mu_ell, state.sigma2_ell])
                    if hierarchy == "pooled" else np.empty(0),
                ])
                draws[kept_row] = row
                kept_row += 1
        denom = config.kept * config.thin
        acceptance = {f"ell_{aid}": accepted[i] / denom
                      for i, aid in enumerate(area_ids)}
    else:
        state = SubModelState.initial(m, hyper)
        g_mat = sim.metrics_matrix(areas, state.ell_star)
        adapter = _ScaleAdapter(config.ram_step, config.adapt)
        accepted = 0
        kept_row = 0
        for it in range(total):
            in_warmup = it < warmup
            gibbs_update_alpha_beta(state, z, g_mat, hyper, rng_gibbs)
            gibbs_update_tau2(state, z, g_mat, hyper, rng_gibbs)
            target = _ell_star_target(state, areas, hyper, sim)
            x = state.ell_star
            new, _, acc, nev = (
                ram_update(x, target(x), target, rng_loc, adapter.scale,
                           epsilon, max_tries)
                if config.ell_star_sampler == "ram" else
                metropolis_update(x, target(x), target, rng_loc, adapter.scale))
            ram_aborts += nev < 0
            if acc:
                state.ell_star = new
                g_mat = sim.metrics_matrix(areas, new)
            adapter.record(acc, in_warmup)
            if not in_warmup:
                accepted += acc
                if (it - warmup) % config.thin == config.thin - 1:
                    draws[kept_row] = np.concatenate(
                        [state.alpha, state.beta, state.tau2, state.ell_star])
                    kept_row += 1
        acceptance = {"ell_star": accepted / (config.kept * config.thin)}

    return draws, acceptance, ram_aborts


def _check_initial_state(model, areas, params, hyper, hierarchy, quantize,
                         interpolation):
    from . import model as model_mod

    percentiles = areas[0].observed_rh.percentiles
    sim = RhSimulator(params, percentiles, quantize=quantize,
                      interpolation=interpolation)
    n, m = len(areas), len(percentiles)
    try:
        if model == "full":
            lp = model_mod.log_posterior_full(
                FullModelState.initial(n, m, hyper), areas, params, hyper,
                sim=sim, hierarchy=hierarchy)
        else:
            lp = model_mod.log_posterior_sub(
                SubModelState.initial(m, hyper), areas, params, hyper, sim=sim)
    except EmptyFootprintError as exc:
        raise InitializationError(str(exc)) from exc
    if not math.isfinite(lp):
        raise InitializationError(f"log posterior at initialization is {lp}")


@dataclass
class ChainOutput:
    """Thinned post-warmup draws plus diagnostics from all chains."""

    model: str
    hierarchy: str
    columns: list
    draws: np.ndarray                   # (n_chains, kept, n_params)
    percentiles: tuple
    area_ids: list
    acceptance: dict                    # block -> list of per-chain rates
    rhat: dict
    ess: dict
    seed: int
    warmup: int
    thin: int
    ram_aborts: int = 0

    @property
    def n_draws(self):
        return self.draws.shape[0] * self.draws.shape[1]

    def flat(self, column):
        j = self.columns.index(column)
        return self.draws[:, :, j].reshape(-1)

    def ell_draws(self, area_id):
        """(M, 2) latent-center draws for one focal area (full model)."""
        return np.column_stack(
            [self.flat(f"ell_x_{area_id}"), self.flat(f"ell_y_{area_id}")])

    def ell_star_draws(self):
        """(M, 2) shared-offset draws (submodel)."""
        return np.column_stack([self.flat("ell_star_x"), self.flat("ell_star_y")])

    def pooled_ell_draws(self):
        """All focal areas' center draws stacked into one cloud."""
        return np.vstack([self.ell_draws(aid) for aid in self.area_ids])

    def write_draws_csv(self, path):
        """One row per kept draw, leading ``chain`` column, full precision."""
        n_chains, kept, p = self.draws.shape
        chain_col = np.repeat(np.arange(n_chains), kept)[:, None]
        body = np.hstack([chain_col, self.draws.reshape(n_chains * kept, p)])
        header = ",".join(["chain"] + self.columns)
        fmt = ["%d"] + ["%.17g"] * p
        np.savetxt(path, body, delimiter=",", header=header, comments="", fmt=fmt)

    def diagnostics_dict(self):
        clean = lambda d: {k: (None if v is None or not np.isfinite(v) else v)
                           for k, v in d.items()}
        return {
            "model": self.model,
            "hierarchy": self.hierarchy,
            "percentiles": list(self.percentiles),
            "area_ids": list(self.area_ids),
            "n_chains": int(self.draws.shape[0]),
            "kept_per_chain": int(self.draws.shape[1]),
            "warmup": self.warmup,
            "thin": self.thin,
            "seed": self.seed,
            "acceptance": self.acceptance,
            "rhat": clean(self.rhat),
            "ess": clean(self.ess),
            "ram_aborts": self.ram_aborts,
        }

    def write_diagnostics_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.diagnostics_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def read(cls, draws_csv, diagnostics_json):
        """Rehydrate from the two files written by a fit run."""
        with open(diagnostics_json) as fh:
            meta = json.load(fh)
        with open(draws_csv) as fh:
            header = fh.readline().strip().split(",")
        body = np.loadtxt(draws_csv, delimiter=",", skiprows=1, ndmin=2)
        columns = header[1:]
        n_chains = meta["n_chains"]
        kept = meta["kept_per_chain"]
        draws = body[:, 1:].reshape(n_chains, kept, len(columns))
        return cls(
            model=meta["model"], hierarchy=meta["hierarchy"], columns=columns,
            draws=draws, percentiles=tuple(meta["percentiles"]),
            area_ids=list(meta["area_ids"]), acceptance=meta["acceptance"],
            rhat=meta["rhat"], ess=meta["ess"], seed=meta["seed"],
            warmup=meta["warmup"], thin=meta["thin"],
            ram_aborts=meta.get("ram_aborts", 0),
        )


def run_chains(model, areas, params: KernelParams, hyper: Hyperparams,
               config: ChainConfig, hierarchy="pooled", quantize=0.1,
               interpolation="none", threads=1) -> ChainOutput:
    """Run independent MCMC chains and assemble draws plus diagnostics.

    Chains use sub-seeds spawned from ``config.seed`` (one SeedSequence
    child per chain index) so output is identical whether chains run
    serially or across worker processes.
    """
    if model not in ("full", "sub"):
        raise ValueError(f"model must be 'full' or 'sub', got {model!r}")
    if not areas:
        raise ValueError("no focal areas supplied")
    _check_initial_state(model, areas, params, hyper, hierarchy, quantize,
                         interpolation)

    args = [(model, areas, params, hyper, config, hierarchy, quantize,
             interpolation, c)
            for c in range(config.n_chains)]
    if threads > 1 and config.n_chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, config.n_chains)) as ex:
            results = list(ex.map(_run_single_chain_star, args))
    else:
        results = [_run_single_chain(*a) for a in args]

    draws = np.stack([r[0] for r in results])
    acceptance = {}
    for r in results:
        for block, rate in r[1].items():
            acceptance.setdefault(block, []).append(float(rate))
    ram_aborts = sum(r[2] for r in results)

    percentiles = areas[0].observed_rh.percentiles
    area_ids = [a.id for a in areas]
    cols = _columns_for(model, percentiles, area_ids, hierarchy)
    rhat = {}
    ess = {}
    for j, col in enumerate(cols):
        chains_j = draws[:, :, j]
        rhat[col] = split_rhat(chains_j) if config.n_chains >= 2 else None
        ess[col] = effective_sample_size(chains_j)

    return ChainOutput(
        model=model, hierarchy=hierarchy, columns=cols, draws=draws,
        percentiles=percentiles, area_ids=area_ids, acceptance=acceptance,
        rhat=rhat, ess=ess, seed=config.seed,
        warmup=config.effective_warmup, thin=config.thin,
        ram_aborts=ram_aborts,
    )


def _run_single_chain_star(args):
    return _run_single_chain(*args)


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------

def split_rhat(chains):
    """Split potential-scale-reduction factor (Gelman et al.).

    ``chains`` is (n_chains, length); each chain is split in half so at
    least four sequences enter the between/within comparison. Returns nan
    for degenerate (constant) draws.
    """
    chains = np.asarray(chains, dtype=float)
    n_chains, length = chains.shape
    half = length // 2
    if half < 2:
        return float("nan")
    seqs = np.concatenate([chains[:, :half], chains[:, half:2 * half]], axis=0)
    w = np.mean(np.var(seqs, axis=1, ddof=1))
    b = half * np.var(np.mean(seqs, axis=1), ddof=1)
    if w <= 0:
        return float("nan")
    var_plus = (half - 1) / half * w + b / half
    return float(np.sqrt(var_plus / w))


def _autocov(x):
    n = x.size
    x = x - x.mean()
    size = int(2 ** np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conjugate(f))[:n].real
    return acov / n


def effective_sample_size(chains):
    """ESS from split chains with Geyer's initial-positive-pair truncation."""
    chains = np.asarray(chains, dtype=float)
    n_chains, length = chains.shape
    half = length // 2
    if half < 4:
        return float("nan")
    seqs = np.concatenate([chains[:, :half], chains[:, half:2 * half]], axis=0)
    n_seq = seqs.shape[0]
    acov = np.vstack([_autocov(s) for s in seqs])
    w = np.mean(acov[:, 0]) * half / (half - 1)
    b = half * np.var(np.mean(seqs, axis=1), ddof=1) if n_seq > 1 else 0.0
    var_plus = (half - 1) / half * w + b / half
    if var_plus <= 0:
        return float("nan")
    rho = 1.0 - (w - np.mean(acov, axis=0)) / var_plus
    rho[0] = 1.0
    # Sum consecutive pairs while they stay positive, enforcing monotonicity.
    total = 0.0
    prev_pair = np.inf
    for t in range(1, half - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair < 0:
            break
        pair = min(pair, prev_pair)
        prev_pair = pair
        total += pair
    ess = n_seq * half / (1.0 + 2.0 * total)
    return float(min(ess, n_seq * half))
