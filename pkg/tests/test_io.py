import json
import math

import numpy as np
import pytest

from convexflow.body import Snapshot, ball, boundary_embedding, ellipsoid, rotation_2d
from convexflow.experiments import random_body
from convexflow.flow import FlowConfig, run
from convexflow.io import (
    Manifest,
    export_svg,
    output_root,
    polyline_svg,
    read_boundary_csv,
    read_snapshot,
    read_svg_polyline,
    svg_extent,
    write_boundary_csv,
    write_snapshot,
)
from convexflow.plotting import boundary_figure, trace_figure


def test_unit_disk_polyline(tmp_path, circle512):
    paths = export_svg([Snapshot.of(ball(circle512))], tmp_path)
    assert len(paths) == 1 and paths[0].suffix == ".svg"
    pts = read_svg_polyline(paths[0])
    assert pts.shape == (512, 2)
    assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) < 1e-12
    assert '<polygon' in paths[0].read_text()


def test_vertices_satisfy_support_identity(tmp_path, circle512):
    K = random_body(3, 2, 0.6, grid=circle512)
    path = export_svg([Snapshot.of(K)], tmp_path)[0]
    pts = read_svg_polyline(path)
    u = circle512.nodes
    assert np.max(np.abs(np.sum(pts * u, axis=1) - K.h)) < 1e-10


def test_shared_viewbox(tmp_path, circle256):
    bodies = [ball(circle256, r) for r in (0.5, 1.0, 2.0)]
    paths = export_svg([Snapshot.of(K) for K in bodies], tmp_path)
    boxes = {p.read_text().split('viewBox="')[1].split('"')[0] for p in paths}
    assert len(boxes) == 1
    assert svg_extent(bodies) == pytest.approx(2.1)


@pytest.mark.parametrize("steps, every", [(30, 7), (40, 10), (25, 1)])
def test_snapshot_count(tmp_path, circle256, steps, every):
    K = random_body(1, 2, 0.4, symmetric=True, grid=circle256)
    out = run(K, FlowConfig(p=2.0, max_steps=steps, min_steps=steps, snapshot_every=every,
                            diagnostics=False))
    assert out.state.step == steps
    assert len(out.trace.snapshots) == steps // every + 1
    paths = export_svg(out.trace.snapshots, tmp_path)
    assert len(paths) == steps // every + 1


def test_3d_exports_point_clouds(tmp_path, sphere3):
    K = random_body(0, 3, 0.4, grid=sphere3)
    paths = export_svg([Snapshot.of(K)], tmp_path)
    assert paths[0].suffix == ".csv"
    pts = read_boundary_csv(paths[0])
    assert pts.shape == (sphere3.size, 3)
    assert np.max(np.abs(np.sum(pts * sphere3.nodes, axis=1) - K.h)) < 1e-10


def test_boundary_csv_round_trip(tmp_path, circle256):
    K = ellipsoid(circle256, [1.5, 0.7], rotation_2d(0.3))
    pts = read_boundary_csv(write_boundary_csv(tmp_path / "b.csv", K))
    assert np.array_equal(pts, boundary_embedding(K).points)


@pytest.mark.parametrize("grid_name", ["circle256", "sphere3"])
def test_snapshot_round_trip(tmp_path, request, grid_name):
    grid = request.getfixturevalue(grid_name)
    K = random_body(2, grid.dim, 0.4, grid=grid)
    path = write_snapshot(tmp_path / "s.json", Snapshot.of(K, 0.25))
    L, t = read_snapshot(path)
    assert t == 0.25
    assert np.array_equal(L.h, K.h)
    assert L.grid.identifier == grid.identifier


def test_polyline_is_deterministic(circle256):
    pts = boundary_embedding(random_body(5, 2, 0.4, grid=circle256)).points
    assert polyline_svg(pts, 1.5) == polyline_svg(pts.copy(), 1.5)


def test_figures_are_deterministic(tmp_path, circle256):
    K = random_body(1, 2, 0.4, grid=circle256)
    out = run(K, FlowConfig(p=2.0, max_steps=20, min_steps=20))
    a = trace_figure(out.trace, tmp_path / "a.svg", "t").read_bytes()
    b = trace_figure(out.trace, tmp_path / "b.svg", "t").read_bytes()
    assert a == b
    c = boundary_figure([K, out.normalized], tmp_path / "c.svg").read_bytes()
    d = boundary_figure([K, out.normalized], tmp_path / "d.svg").read_bytes()
    assert c == d


def test_manifest(tmp_path):
    m = Manifest(tmp_path / "m.jsonl", "verify")
    m.append({"x": np.float64(1.5), "flag": np.bool_(True), "bad": math.inf, "arr": np.arange(3)})
    header, records = Manifest.read(m.path)
    assert header["command"] == "verify" and "created" in header
    assert records == [{"x": 1.5, "flag": True, "bad": "inf", "arr": [0, 1, 2]}]
    assert json.loads(m.path.read_text().splitlines()[1]) == records[0]


def test_output_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv("CONVEXFLOW_OUT", str(tmp_path))
    assert output_root() == tmp_path
    monkeypatch.delenv("CONVEXFLOW_OUT")
    assert str(output_root()) == "convexflow_out"
