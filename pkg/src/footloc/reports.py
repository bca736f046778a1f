"""Summary-product files derived from a fitted chain output."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .footprint import RhSimulator
from .ingest import observed_matrix
from .posterior import (
    Ecdf,
    GridSpec,
    angle_draws,
    distance_draws,
    fitted_values,
    kde2d,
    loglik_surface,
    map_estimate,
    rmse_table,
    summarize_location,
)

CENTER = (35.0, 35.0)


def _write_xy_csv(path, arr, header):
    np.savetxt(path, arr, delimiter=",", header=header, comments="", fmt="%.17g")


def _write_kde_csv(path, surface):
    gx, gy = np.meshgrid(surface.x, surface.y, indexing="ij")
    body = np.column_stack([gx.ravel(), gy.ravel(), surface.density.ravel()])
    np.savetxt(path, body, delimiter=",", header="easting,northing,density",
               comments="", fmt="%.10g")


def _write_ecdf_csv(path, series):
    """``series`` maps a name to a 1-D array of distance values."""
    lines = ["series,value,cum_prob"]
    for name, values in series.items():
        vals, probs = Ecdf(values).support()
        lines += [f"{name},{v:.10g},{p:.10g}" for v, p in zip(vals, probs)]
    Path(path).write_text("\n".join(lines) + "\n")


def _write_rmse_csv(path, percentiles, table):
    names = sorted(table)
    lines = ["percentile," + ",".join(f"rmse_{n}" for n in names)]
    for j, p in enumerate(percentiles):
        row = [f"{p:g}"] + [f"{table[n][j]:.10g}" for n in names]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_corrected_csv(path, rows):
    lines = ["id,easting,northing"]
    lines += [f"{rid},{e:.10g},{n:.10g}" for rid, e, n in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary(out_dir, output, areas, params, grid: GridSpec = GridSpec(),
                  quantize=0.1, interpolation="none", likelihood_surfaces=False):
    """Write all posterior summary files for a fitted model run.

    Returns the list of files written (relative to ``out_dir``).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    area_by_id = {a.id: a for a in areas}
    percentiles = output.percentiles
    sim = RhSimulator(params, percentiles, quantize=quantize,
                      interpolation=interpolation)
    observed = observed_matrix(areas)

    def _emit(name):
        written.append(name)
        return out_dir / name

    if output.model == "full":
        map_by_id = {}
        pooled_dist = []
        for aid in output.area_ids:
            area = area_by_id[aid]
            draws = output.ell_draws(aid)
            _write_xy_csv(_emit(f"{aid}_draws.csv"), draws, "easting,northing")
            surface = kde2d(draws, grid)
            _write_kde_csv(_emit(f"{aid}_kde.csv"), surface)
            est = map_estimate(surface)
            map_by_id[aid] = est
            d = distance_draws(draws, CENTER)
            pooled_dist.append(d)
            map_src = area.to_source(est.location)
            summary = {
                "id": aid,
                "map_local": list(est.location),
                "map_source": [float(map_src[0]), float(map_src[1])],
                "d_map_m": float(np.hypot(est.location[0] - CENTER[0],
                                          est.location[1] - CENTER[1])),
                "angle_map_deg": float(angle_draws([est.location], CENTER)[0]),
                "location": summarize_location(draws, CENTER).to_dict(),
            }
            with open(_emit(f"{aid}_summary.json"), "w") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
                fh.write("\n")
            if likelihood_surfaces:
                ax, surf = loglik_surface(area, output, params, grid, sim=sim)
                gx, gy = np.meshgrid(ax, ax, indexing="ij")
                body = np.column_stack([gx.ravel(), gy.ravel(), surf.ravel()])
                np.savetxt(_emit(f"{aid}_loglik.csv"), body, delimiter=",",
                           header="easting,northing,loglik", comments="",
                           fmt="%.10g")

        pooled = output.pooled_ell_draws()
        eta = map_estimate(kde2d(pooled, grid))
        d_eta_per_area = np.array([
            np.hypot(map_by_id[aid].location[0] - CENTER[0],
                     map_by_id[aid].location[1] - CENTER[1])
            for aid in output.area_ids])
        d_ell_all = np.concatenate(pooled_dist)
        systematic = {
            "model": "full",
            "eta_ell_local": list(eta.location),
            "d_eta_ell_m": float(np.hypot(eta.location[0] - CENTER[0],
                                          eta.location[1] - CENTER[1])),
            "angle_eta_ell_deg": float(angle_draws([eta.location], CENTER)[0]),
            "d_ell": summarize_location(pooled, CENTER).to_dict(),
            "mu_ell_median": [float(np.median(output.flat("mu_ell_x"))),
                              float(np.median(output.flat("mu_ell_y")))]
            if "mu_ell_x" in output.columns else None,
        }
        _write_ecdf_csv(_emit("ecdf.csv"),
                        {"d_ell": d_ell_all, "d_eta_ell": d_eta_per_area})
        corrected = []
        for aid in output.area_ids:
            src = area_by_id[aid].to_source(map_by_id[aid].location)
            corrected.append((aid, float(src[0]), float(src[1])))
        table = {
            "center": rmse_table(observed, fitted_values("center", output, areas,
                                                         params, sim=sim)),
            "full": rmse_table(observed, fitted_values("full", output, areas,
                                                       params, sim=sim)),
        }
    else:
        draws = output.ell_star_draws()
        _write_xy_csv(_emit("systematic_draws.csv"), draws, "easting,northing")
        surface = kde2d(draws, grid)
        _write_kde_csv(_emit("systematic_kde.csv"), surface)
        est = map_estimate(surface)
        d = distance_draws(draws, CENTER)
        systematic = {
            "model": "sub",
            "ell_star_median_local": [float(np.median(draws[:, 0])),
                                      float(np.median(draws[:, 1]))],
            "eta_ell_star_local": list(est.location),
            "d_eta_ell_star_m": float(np.hypot(est.location[0] - CENTER[0],
                                               est.location[1] - CENTER[1])),
            "angle_eta_ell_star_deg": float(angle_draws([est.location], CENTER)[0]),
            "d_ell_star": summarize_location(draws, CENTER).to_dict(),
        }
        _write_ecdf_csv(_emit("ecdf.csv"), {"d_ell_star": d})
        offset = np.asarray(est.location) - np.asarray(CENTER)
        corrected = []
        for aid in output.area_ids:
            c = area_by_id[aid].source_center
            corrected.append((aid, float(c[0] + offset[0]), float(c[1] + offset[1])))
        table = {
            "center": rmse_table(observed, fitted_values("center", output, areas,
                                                         params, sim=sim)),
            "sub": rmse_table(observed, fitted_values("sub", output, areas,
                                                      params, sim=sim)),
        }

    with open(_emit("systematic.json"), "w") as fh:
        json.dump(systematic, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_rmse_csv(_emit("rmse.csv"), percentiles, table)
    _write_corrected_csv(_emit("corrected.csv"), corrected)
    return written
