"""Pipeline command line: generate, fit, summarize, check.

One TOML config drives everything. Every command writes its outputs under
the configured output directory along with a manifest recording the
resolved configuration, its hash, and the seed, so a run can be reproduced
exactly. Exit codes: 0 success, 1 user/configuration error or failed
checks, 2 internal error.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import traceback
from dataclasses import replace

import click

from .checks import run_checks
from .config import load_config
from .exceptions import FootlocError
from .ingest import load_dataset
from .reports import write_summary
from .samplers import ChainOutput, run_chains
from .synthetic import generate_scene, write_scene_files

log = logging.getLogger("footloc")


def _write_manifest(cfg, command, extra=None):
    cfg.output.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.chains.seed,
    }
    if extra:
        manifest.update(extra)
    path = cfg.output / f"manifest_{command}.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _config_options(f):
    f = click.option("--config", "-c", "config_path", required=True,
                     type=click.Path(), help="TOML run configuration.")(f)
    f = click.option("--seed", type=int, default=None,
                     help="Override the configured seed.")(f)
    f = click.option("--output", type=click.Path(), default=None,
                     help="Override the configured output directory.")(f)
    return f


@click.group()
def cli():
    """Quantify and correct geolocation error in large-footprint LiDAR."""


@cli.command()
@_config_options
def generate(config_path, seed, output):
    """Generate a synthetic scene (clouds, observations, truth)."""
    cfg = load_config(config_path, seed=seed, output=output)
    if cfg.scene is None:
        raise FootlocError("config has no [synthetic] section to generate from")
    scene_spec = cfg.scene
    if seed is not None:
        scene_spec = replace(scene_spec, seed=int(seed))
    scene = generate_scene(scene_spec, params=cfg.kernel)
    write_scene_files(scene.areas, scene.truth,
                      observations_csv=cfg.observations,
                      cloud_dir=cfg.cloud_dir,
                      truth_json=cfg.output / "truth.json")
    _write_manifest(cfg, "generate", {
        "outputs": ["truth.json", str(cfg.observations), str(cfg.cloud_dir)],
    })
    click.echo(f"generated {scene_spec.n_areas} focal areas "
               f"({scene_spec.pattern}) -> {cfg.cloud_dir}")


@cli.command()
@_config_options
@click.option("--threads", type=int, default=1,
              help="Worker processes for parallel chains.")
def fit(config_path, seed, output, threads):
    """Fit the configured model and write draws plus diagnostics."""
    cfg = load_config(config_path, seed=seed, output=output)
    areas = load_dataset(cfg.observations, cfg.cloud_dir, min_points=cfg.min_points)
    cfg.check_percentiles(areas)
    log.info("fitting %s model on %d focal areas", cfg.model, len(areas))
    out = run_chains(cfg.model, areas, cfg.kernel, cfg.hyper, cfg.chains,
                     hierarchy=cfg.hierarchy, quantize=cfg.quantize,
                     interpolation=cfg.rh_interpolation, threads=threads)
    fit_dir = cfg.output / "fit"
    fit_dir.mkdir(parents=True, exist_ok=True)
    out.write_draws_csv(fit_dir / "draws.csv")
    out.write_diagnostics_json(fit_dir / "diagnostics.json")
    _write_manifest(cfg, "fit", {"outputs": ["fit/draws.csv", "fit/diagnostics.json"]})
    bad = [c for c, v in out.rhat.items() if v is not None and v > 1.05]
    if bad:
        click.echo(f"warning: R-hat > 1.05 for {len(bad)} parameters", err=True)
    click.echo(f"fit complete: {out.n_draws} kept draws -> {fit_dir}")


@cli.command()
@_config_options
def summarize(config_path, seed, output):
    """Turn fitted draws into posterior summary products."""
    cfg = load_config(config_path, seed=seed, output=output)
    fit_dir = cfg.output / "fit"
    draws_csv = fit_dir / "draws.csv"
    diagnostics = fit_dir / "diagnostics.json"
    if not draws_csv.exists() or not diagnostics.exists():
        raise FootlocError(f"no fit outputs under {fit_dir}; run `footloc fit` first")
    chain_output = ChainOutput.read(draws_csv, diagnostics)
    areas = load_dataset(cfg.observations, cfg.cloud_dir, min_points=cfg.min_points)
    cfg.check_percentiles(areas)
    summary_dir = cfg.output / "summary"
    files = write_summary(summary_dir, chain_output, areas, cfg.kernel,
                          grid=cfg.grid, quantize=cfg.quantize,
                          interpolation=cfg.rh_interpolation,
                          likelihood_surfaces=cfg.likelihood_surfaces)
    _write_manifest(cfg, "summarize",
                    {"outputs": [f"summary/{f}" for f in files]})
    click.echo(f"wrote {len(files)} summary files -> {summary_dir}")


@cli.command()
@click.option("--seed", type=int, default=0, help="Seed for the check suite.")
def check(seed):
    """Run the reduced-budget calibration and oracle self-checks."""
    results = run_checks(seed=seed)
    all_ok = True
    for name, ok, detail in results:
        status = "PASS" if ok else "FAIL"
        click.echo(f"[{status}] {name}: {detail}")
        all_ok &= ok
    if not all_ok:
        raise FootlocError("one or more self-checks failed")
    click.echo(f"all {len(results)} checks passed")


def main(argv=None):
    """Entry point with the documented exit-code contract."""
    level = os.environ.get("FOOTLOC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (FootlocError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception:
        click.echo("internal error:", err=True)
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
