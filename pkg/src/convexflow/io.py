"""Plain-text outputs: body snapshots, boundary exports, traces and the run manifest.

Every writer is deterministic given its inputs.  The only wall-clock value
anywhere is the timestamp in the manifest header line.
"""
from __future__ import annotations

import csv
import json
import math
import os
import xml.etree.ElementTree as ET
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .body import ConvexBody, Snapshot, boundary_embedding
from .grid import grid_from_identifier

SVG_NS = "http://www.w3.org/2000/svg"


def output_root(default: str | os.PathLike = "convexflow_out") -> Path:
    """Output directory, overridable with the CONVEXFLOW_OUT environment variable."""
    return Path(os.environ.get("CONVEXFLOW_OUT", default))


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=True)


def write_snapshot(path, snap: Snapshot) -> Path:
    path = Path(path)
    path.write_text(_dump(snap.to_dict()) + "\n")
    return path


def read_snapshot(path) -> tuple[ConvexBody, float]:
    data = json.loads(Path(path).read_text())
    grid = grid_from_identifier(data["grid"])
    if grid.dim != data["dim"]:
        raise ValueError(f"snapshot dim {data['dim']} disagrees with grid {data['grid']}")
    return ConvexBody(grid, np.asarray(data["h"], dtype=float)), float(data["t"])


def write_boundary_csv(path, K: ConvexBody) -> Path:
    """Boundary points x(u) = h u + grad h as rows (x, y[, z])."""
    path = Path(path)
    points = boundary_embedding(K).points
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x", "y", "z")[: K.dim])
        writer.writerows([[repr(float(c)) for c in row] for row in points])
    return path


def read_boundary_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def svg_extent(bodies) -> float:
    """Half-width of a square viewbox holding every boundary in ``bodies``."""
    radius = max(float(np.max(np.abs(boundary_embedding(K).points))) for K in bodies)
    return 1.05 * radius


def polyline_svg(points: np.ndarray, extent: float) -> str:
    """Standalone SVG with one closed polyline in data coordinates (y up)."""
    ET.register_namespace("", SVG_NS)
    size = 2.0 * extent
    root = ET.Element(f"{{{SVG_NS}}}svg", {
        "viewBox": f"{-extent!r} {-extent!r} {size!r} {size!r}",
        "width": "400", "height": "400",
    })
    group = ET.SubElement(root, f"{{{SVG_NS}}}g", {"transform": "scale(1,-1)"})
    ET.SubElement(group, f"{{{SVG_NS}}}polygon", {
        "points": " ".join(f"{float(x)!r},{float(y)!r}" for x, y in points),
        "fill": "none", "stroke": "black", "stroke-width": repr(size / 400.0),
    })
    return ET.tostring(root, encoding="unicode") + "\n"


def read_svg_polyline(path) -> np.ndarray:
    root = ET.parse(path).getroot()
    poly = root.find(f".//{{{SVG_NS}}}polygon")
    return np.array([[float(c) for c in pair.split(",")] for pair in poly.get("points").split()])


def export_svg(snapshots, directory, stem: str = "snapshot") -> list[Path]:
    """One file per snapshot: SVG polylines in the plane, point-cloud CSV on the sphere.

    All planar files of one call share the same viewbox so frames overlay.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    bodies = []
    for snap in snapshots:
        grid = grid_from_identifier(snap.grid)
        bodies.append(ConvexBody(grid, np.asarray(snap.h, dtype=float), validate=False))
    paths = []
    if not bodies:
        return paths
    width = max(3, len(str(len(bodies) - 1)))
    if bodies[0].dim == 2:
        extent = svg_extent(bodies)
        for i, K in enumerate(bodies):
            path = directory / f"{stem}_{i:0{width}d}.svg"
            path.write_text(polyline_svg(boundary_embedding(K).points, extent))
            paths.append(path)
    else:
        for i, K in enumerate(bodies):
            paths.append(write_boundary_csv(directory / f"{stem}_{i:0{width}d}.csv", K))
    return paths


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_entropy_reports(path, reports) -> Path:
    reports = list(reports)
    return write_table(path, reports[0].csv_header(), [r.csv_row() for r in reports])


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, Path):
        return str(value)
    return value


class Manifest:
    """JSON-lines run manifest: a timestamped header, then one record per experiment."""

    def __init__(self, path, command: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        header = {"manifest": "convexflow", "command": command,
                  "created": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        self.path.write_text(_dump(header) + "\n")
        self.count = 0

    def append(self, record: dict) -> None:
        with open(self.path, "a") as fh:
            fh.write(_dump(_jsonable(record)) + "\n")
        self.count += 1

    @staticmethod
    def read(path) -> tuple[dict, list[dict]]:
        lines = Path(path).read_text().splitlines()
        return json.loads(lines[0]), [json.loads(line) for line in lines[1:]]
