"""Run configuration: one TOML file drives every pipeline command."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .exceptions import ConfigError
from .footprint import DEFAULT_PERCENTILES, KernelParams
from .ingest import DEFAULT_MIN_POINTS
from .model import Hyperparams
from .posterior import GridSpec
from .samplers import ChainConfig
from .synthetic import SceneSpec

_KNOWN_SECTIONS = {
    "paths": {"observations", "cloud_dir", "output"},
    "model": {"model", "hierarchy", "percentiles"},
    "kernel": {"sigma_f", "radius", "quantize", "rh_interpolation"},
    "priors": {"mu_alpha", "sigma2_alpha", "mu_beta", "sigma2_beta", "a_tau",
               "b_tau", "sigma2_mu_ell", "a_ell", "b_ell", "sigma2_ell_star",
               "bound"},
    "chains": {"n_chains", "kept", "warmup", "thin", "seed", "ram_step",
               "ram_epsilon", "adapt", "parallel_ell", "ell_sampler",
               "ell_star_sampler"},
    "ingest": {"min_points"},
    "kde": {"grid_size", "grid_lo", "grid_hi"},
    "summarize": {"likelihood_surfaces"},
    "synthetic": {"n_areas", "density", "pattern", "pattern_params",
                  "true_offset", "jitter_sd", "tau2", "alpha", "beta",
                  "percentiles", "seed"},
}


@dataclass
class RunConfig:
    """Resolved configuration for one pipeline run."""

    observations: Path
    cloud_dir: Path
    output: Path
    model: str = "full"
    hierarchy: str = "pooled"
    percentiles: tuple | None = None
    kernel: KernelParams = field(default_factory=KernelParams)
    quantize: float = 0.1
    rh_interpolation: str = "none"
    hyper: Hyperparams = field(default_factory=Hyperparams)
    chains: ChainConfig = field(default_factory=ChainConfig)
    min_points: int = DEFAULT_MIN_POINTS
    grid: GridSpec = field(default_factory=GridSpec)
    likelihood_surfaces: bool = False
    scene: SceneSpec | None = None

    def __post_init__(self):
        if self.model not in ("full", "sub"):
            raise ConfigError(f"model must be 'full' or 'sub', got {self.model!r}")
        if self.hierarchy not in ("pooled", "fixed_center"):
            raise ConfigError(
                f"hierarchy must be 'pooled' or 'fixed_center', got {self.hierarchy!r}")
        if self.rh_interpolation not in ("none", "linear"):
            raise ConfigError("rh_interpolation must be 'none' or 'linear'")
        if self.quantize < 0:
            raise ConfigError("quantize must be >= 0")
        if self.min_points < 1:
            raise ConfigError("min_points must be >= 1")
        if self.percentiles is not None:
            p = list(self.percentiles)
            if not p or any(not (0 < v <= 100) for v in p) or any(
                    b <= a for a, b in zip(p, p[1:])):
                raise ConfigError(
                    "percentiles must be strictly increasing values in (0, 100]")

    def check_percentiles(self, areas):
        """Fail if the declared percentile set disagrees with the data."""
        if self.percentiles is None:
            return
        observed = areas[0].observed_rh.percentiles
        if tuple(self.percentiles) != tuple(observed):
            raise ConfigError(
                f"configured percentiles {list(self.percentiles)} do not match "
                f"the observation header {list(observed)}")

    def to_dict(self):
        """JSON-ready resolved configuration (used for hashing/manifests)."""
        d = {
            "paths": {
                "observations": str(self.observations),
                "cloud_dir": str(self.cloud_dir),
                "output": str(self.output),
            },
            "model": {"model": self.model, "hierarchy": self.hierarchy,
                      "percentiles": (None if self.percentiles is None
                                      else list(self.percentiles))},
            "kernel": {
                "sigma_f": self.kernel.sigma_f, "radius": self.kernel.radius,
                "quantize": self.quantize,
                "rh_interpolation": self.rh_interpolation,
            },
            "priors": {
                k: getattr(self.hyper, k)
                for k in _KNOWN_SECTIONS["priors"]
            },
            "chains": {
                "n_chains": self.chains.n_chains, "kept": self.chains.kept,
                "warmup": self.chains.effective_warmup, "thin": self.chains.thin,
                "seed": self.chains.seed, "ram_step": self.chains.ram_step,
                "ram_epsilon": self.chains.ram_epsilon,
                "adapt": self.chains.adapt,
                "parallel_ell": self.chains.parallel_ell,
                "ell_sampler": self.chains.ell_sampler,
                "ell_star_sampler": self.chains.ell_star_sampler,
            },
            "ingest": {"min_points": self.min_points},
            "kde": {"grid_size": self.grid.size, "grid_lo": self.grid.lo,
                    "grid_hi": self.grid.hi},
            "summarize": {"likelihood_surfaces": self.likelihood_surfaces},
        }
        if self.scene is not None:
            d["synthetic"] = {
                "n_areas": self.scene.n_areas, "density": self.scene.density,
                "pattern": self.scene.pattern,
                "pattern_params": dict(self.scene.pattern_params),
                "true_offset": list(self.scene.true_offset),
                "jitter_sd": self.scene.jitter_sd,
                "tau2": self.scene.tau2, "alpha": self.scene.alpha,
                "beta": self.scene.beta,
                "percentiles": list(self.scene.percentiles),
                "seed": self.scene.seed,
            }
        return d

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _check_unknown(raw):
    for section, body in raw.items():
        if section not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in body:
            if key not in _KNOWN_SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def load_config(path, seed=None, output=None) -> RunConfig:
    """Parse and validate a TOML config; optional seed/output overrides."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    _check_unknown(raw)

    paths = raw.get("paths", {})
    for required in ("observations", "cloud_dir", "output"):
        if required not in paths:
            raise ConfigError(f"[paths] must define {required!r}")
    base = path.parent

    def _resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    model = raw.get("model", {})
    kernel_raw = raw.get("kernel", {})
    priors = raw.get("priors", {})
    chains_raw = dict(raw.get("chains", {}))
    if seed is not None:
        chains_raw["seed"] = int(seed)
    try:
        kernel = KernelParams(sigma_f=kernel_raw.get("sigma_f", 5.5),
                              radius=kernel_raw.get("radius", 25.0))
        hyper = Hyperparams(**priors)
        chains = ChainConfig(**chains_raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None

    kde_raw = raw.get("kde", {})
    grid = GridSpec(lo=kde_raw.get("grid_lo", 12.5),
                    hi=kde_raw.get("grid_hi", 57.5),
                    size=kde_raw.get("grid_size", 141))
    if grid.size < 2 or grid.hi <= grid.lo:
        raise ConfigError("invalid kde grid settings")

    scene = None
    if "synthetic" in raw:
        syn = dict(raw["synthetic"])
        if "true_offset" in syn:
            syn["true_offset"] = tuple(syn["true_offset"])
        if "percentiles" in syn:
            syn["percentiles"] = tuple(float(p) for p in syn["percentiles"])
        scene = SceneSpec(**syn)

    declared = model.get("percentiles")
    return RunConfig(
        observations=_resolve(paths["observations"]),
        cloud_dir=_resolve(paths["cloud_dir"]),
        output=_resolve(output) if output is not None else _resolve(paths["output"]),
        model=model.get("model", "full"),
        hierarchy=model.get("hierarchy", "pooled"),
        percentiles=None if declared is None else tuple(float(p) for p in declared),
        kernel=kernel,
        quantize=kernel_raw.get("quantize", 0.1),
        rh_interpolation=kernel_raw.get("rh_interpolation", "none"),
        hyper=hyper,
        chains=chains,
        min_points=raw.get("ingest", {}).get("min_points", DEFAULT_MIN_POINTS),
        grid=grid,
        likelihood_surfaces=raw.get("summarize", {}).get("likelihood_surfaces", False),
        scene=scene,
    )
