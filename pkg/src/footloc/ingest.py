"""Input parsing and focal-area clipping.

Point clouds arrive as delimited text (``<id>.xyz``, comma or whitespace
separated x, y, z columns) and observations as a CSV table with columns
``id, easting, northing, rh<p>, ...``. Everything downstream works in a
local frame per observation: the reported footprint center maps to (35, 35)
inside a 70 m square buffer.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .exceptions import (
    EmptyInputError,
    InsufficientCoverageError,
    MissingCloudError,
    ParseError,
)
from .footprint import RhVector

log = logging.getLogger(__name__)

HALF_WIDTH = 35.0
CENTER_LOCAL = (35.0, 35.0)
SEARCH_RADIUS = 22.5
DEFAULT_MIN_POINTS = 100


class GeoPoint(NamedTuple):
    """One 3-D return: easting, northing, height above ground (meters)."""

    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Observation:
    """One footprint record: id, reported center in source CRS, observed RH."""

    id: str
    center: tuple
    rh: RhVector


@dataclass
class FocalArea:
    """One observation unit in local coordinates.

    ``points`` is an (N, 3) array with all returns inside the 70 m square
    buffer, translated so the reported center sits at (35, 35).
    ``source_center`` retains the original CRS coordinates so results can
    be mapped back.
    """

    id: str
    points: np.ndarray
    observed_rh: RhVector
    source_center: tuple
    reported_center_local: tuple = CENTER_LOCAL
    half_width: float = HALF_WIDTH
    search_radius: float = SEARCH_RADIUS

    def to_source(self, local_xy):
        """Map local coordinates back to the source CRS."""
        local_xy = np.asarray(local_xy, dtype=float)
        offset = np.asarray(self.source_center) - np.asarray(self.reported_center_local)
        return local_xy + offset


def parse_point_cloud(stream) -> np.ndarray:
    """Parse delimited x, y, z text into an (N, 3) float array.

    ``stream`` may be a file-like object, a ``Path`` to open, or a string
    holding the raw text itself. Accepts comma or whitespace delimiters and
    an optional header line (detected by a non-numeric first row). Heights
    below zero are clamped to zero. Row order is preserved.
    """
    if isinstance(stream, Path):
        with open(stream, "r") as fh:
            return parse_point_cloud(fh)
    if isinstance(stream, bytes):
        stream = stream.decode()
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    rows = []
    linenos = []
    first_data_row = True
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.replace(",", " ").split()
        if len(fields) < 3:
            raise ParseError(lineno, f"expected >= 3 columns, got {len(fields)}")
        try:
            x, y, z = float(fields[0]), float(fields[1]), float(fields[2])
        except ValueError as exc:
            if first_data_row:
                # Header line: skip it, but only once.
                first_data_row = False
                continue
            raise ParseError(lineno, str(exc)) from None
        first_data_row = False
        rows.append((x, y, z))
        linenos.append(lineno)

    if not rows:
        raise EmptyInputError("point cloud stream contains no data rows")
    pts = np.asarray(rows, dtype=float)
    finite = np.isfinite(pts).all(axis=1)
    if not finite.all():
        raise ParseError(linenos[int(np.flatnonzero(~finite)[0])],
                         "non-finite field")
    np.maximum(pts[:, 2], 0.0, out=pts[:, 2])
    return pts


def _percentile_from_column(name):
    if not name.lower().startswith("rh"):
        return None
    try:
        return float(name[2:])
    except ValueError:
        return None


def read_observations(path) -> list:
    """Read the observation table; RH percentiles come from the header.

    Columns ``id, easting, northing`` are required, followed by one
    ``rh<p>`` column per metric with strictly increasing percentiles.
    Non-monotone observed RH vectors are tolerated (measurement noise can
    reorder near-equal metrics) but counted and logged.
    """
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: empty observations table") from None
        header = [h.strip() for h in header]
        required = ["id", "easting", "northing"]
        if [h.lower() for h in header[:3]] != required:
            raise ParseError(1, f"header must start with {required}, got {header[:3]}")
        percentiles = []
        for name in header[3:]:
            p = _percentile_from_column(name)
            if p is None:
                raise ParseError(1, f"unrecognized RH column {name!r}")
            percentiles.append(p)
        if not percentiles:
            raise ParseError(1, "no rh<percentile> columns found")
        if np.any(np.diff(percentiles) <= 0):
            raise ParseError(1, "rh percentile columns must be strictly increasing")

        observations = []
        n_nonmonotone = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3 + len(percentiles):
                raise ParseError(
                    lineno, f"expected {3 + len(percentiles)} fields, got {len(row)}"
                )
            try:
                easting, northing = float(row[1]), float(row[2])
                values = np.array([float(c) for c in row[3:]], dtype=float)
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            rh = RhVector(tuple(percentiles), values)
            if not rh.is_monotone:
                n_nonmonotone += 1
            observations.append(Observation(row[0].strip(), (easting, northing), rh))

    if not observations:
        raise EmptyInputError(f"{path}: no observation rows")
    seen = {}
    for idx, obs in enumerate(observations):
        if obs.id in seen:
            raise ParseError(idx + 2, f"duplicate observation id {obs.id!r}")
        seen[obs.id] = idx
    if n_nonmonotone:
        log.warning(
            "%d of %d observations have non-monotone RH vectors",
            n_nonmonotone, len(observations),
        )
    return observations


def clip_focal_area(obs: Observation, cloud, min_points=DEFAULT_MIN_POINTS,
                    half_width=HALF_WIDTH) -> FocalArea:
    """Clip the buffered focal window around an observation and localize it.

    Retains points with |x - cx| <= half_width and |y - cy| <= half_width,
    then translates them so the reported center lands on (35, 35).
    """
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim != 2 or pts.shape[1] < 3:
        raise ValueError("cloud must be an (N, >=3) array")
    cx, cy = obs.center
    mask = (np.abs(pts[:, 0] - cx) <= half_width) & (np.abs(pts[:, 1] - cy) <= half_width)
    kept = int(np.count_nonzero(mask))
    if kept < min_points:
        raise InsufficientCoverageError(obs.id, kept, min_points)
    local = pts[mask, :3].copy()
    local[:, 0] += CENTER_LOCAL[0] - cx
    local[:, 1] += CENTER_LOCAL[1] - cy
    return FocalArea(
        id=obs.id,
        points=local,
        observed_rh=obs.rh,
        source_center=(float(cx), float(cy)),
        half_width=float(half_width),
    )


def load_dataset(observations_csv, cloud_dir, min_points=DEFAULT_MIN_POINTS) -> list:
    """Load the observation table plus one ``<id>.xyz`` cloud per row.

    All missing cloud files are collected and reported together.
    """
    observations = read_observations(observations_csv)
    cloud_dir = Path(cloud_dir)
    missing = [o.id for o in observations if not (cloud_dir / f"{o.id}.xyz").exists()]
    if missing:
        raise MissingCloudError(missing)
    areas = []
    for obs in observations:
        cloud = parse_point_cloud(cloud_dir / f"{obs.id}.xyz")
        areas.append(clip_focal_area(obs, cloud, min_points=min_points))
    return areas


def observed_matrix(areas) -> np.ndarray:
    """Stack observed RH vectors into an (n, m) matrix."""
    return np.vstack([a.observed_rh.values for a in areas])
