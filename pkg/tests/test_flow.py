import math

import numpy as np
import pytest

from convexflow.body import ball, ellipsoid, hausdorff_distance, rotation_2d, translate, volume
from convexflow.entropy import EntropyParams, entropy_point
from convexflow.errors import ConvexFlowError
from convexflow.experiments import random_body
from convexflow.flow import (
    CONTRACTING,
    TRACE_COLUMNS,
    FlowConfig,
    initial_state,
    polar_duality_check,
    run,
    speed,
    step,
)
from convexflow.grid import make_circle_grid


def centred(K, p):
    e, _ = entropy_point(K, EntropyParams(p=p))
    return translate(K, -e)


def radius(out):
    """Physical radius of a run whose body stays a ball about the origin."""
    h = out.state.scale * out.state.h
    assert np.ptp(h) < 1e-12 * h.max()
    return float(h.mean())


# ---------------------------------------------------------------------------
# speed


def test_speed_unit_disk_p2(circle256):
    assert np.max(np.abs(speed(ball(circle256), FlowConfig(p=2.0)) - 1.0)) < 1e-14


@pytest.mark.parametrize("p", [-2.0, 0.0, 0.5, 3.0])
@pytest.mark.parametrize("R", [0.5, 2.0])
def test_speed_of_ball_2d(circle256, p, R):
    v = speed(ball(circle256, R), FlowConfig(p=p))
    assert np.max(np.abs(v / R ** (3 - p) - 1.0)) < 1e-12


@pytest.mark.parametrize("p", [-3.0, 1.0, 4.0])
def test_speed_of_ball_3d(sphere3, p):
    v = speed(ball(sphere3, 1.5), FlowConfig(p=p))
    assert np.max(np.abs(v / 1.5 ** (4 - p) - 1.0)) < 1e-12


def test_speed_contracting_unit_ball(sphere3):
    v = speed(ball(sphere3), FlowConfig(p=-3.0, kind=CONTRACTING))
    assert np.max(np.abs(v + 1.0)) < 1e-12


def test_speed_weighted(circle256):
    phi = 1.0 + 0.3 * np.cos(2 * circle256.theta)
    v = speed(ball(circle256), FlowConfig(p=2.0, phi=phi))
    assert np.max(np.abs(v - phi)) < 1e-14


def test_speed_needs_origin_inside(circle256):
    with pytest.raises(ConvexFlowError):
        speed(ball(circle256, 1.0, center=[2.0, 0.0]), FlowConfig(p=2.0))


# ---------------------------------------------------------------------------
# configuration


@pytest.mark.parametrize("cfl", [0.0, -0.1, 0.51, 1.0])
def test_cfl_range(cfl):
    with pytest.raises(ConvexFlowError):
        FlowConfig(p=2.0, cfl=cfl)


def test_bad_kind_and_mode():
    with pytest.raises(ConvexFlowError):
        FlowConfig(p=2.0, kind="sideways")
    with pytest.raises(ConvexFlowError):
        FlowConfig(p=2.0, renormalize="shear")


def test_degree():
    assert FlowConfig(p=0.5).degree(2) == 2.5
    assert FlowConfig(p=-3.0, kind=CONTRACTING).degree(3) == -5.0


# ---------------------------------------------------------------------------
# ball solutions


@pytest.mark.parametrize("p, exact", [(3.0, 1.5), (2.0, math.exp(0.5)), (0.5, (1 - 1.5 * 0.5) ** (-1 / 1.5))])
def test_disk_closed_form(circle256, p, exact):
    out = run(ball(circle256), FlowConfig(p=p, t_end=0.5, diagnostics=False))
    assert out.status == "t_end"
    assert out.state.t == pytest.approx(0.5, abs=1e-15)
    assert abs(radius(out) - exact) < 1e-8


def test_contracting_ball_3d(sphere3):
    out = run(ball(sphere3), FlowConfig(p=-3.0, kind=CONTRACTING, t_end=0.1, diagnostics=False))
    assert abs(radius(out) - 0.4 ** (1 / 6)) < 1e-6


def test_disk_is_fixed(circle256):
    out = run(ball(circle256, 1.7), FlowConfig(p=0.5, max_steps=200))
    assert out.status == "plateau"
    assert out.trace.column("drift").max() < 1e-12
    assert np.max(np.abs(out.normalized.h - 1.0)) < 1e-12


def test_finite_time_singularity_reported():
    grid = make_circle_grid(64)
    out = run(ball(grid), FlowConfig(p=-2.0, t_end=0.3, diagnostics=False))
    assert out.status == "blowup"
    assert out.state.t == pytest.approx(0.25, rel=1e-6)


# ---------------------------------------------------------------------------
# runs on random bodies


@pytest.mark.slow
def test_symmetric_body_rounds_off(circle256):
    K = random_body(0, 2, 0.4, symmetric=True, grid=circle256)
    out = run(K, FlowConfig(p=0.5))
    assert out.status == "plateau"
    assert hausdorff_distance(out.normalized, ball(circle256)) < 1e-3
    assert out.trace.entropy_monotone


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_entropy_point_stays_at_origin(circle256, p):
    K = centred(random_body(1, 2, 0.4, grid=circle256), p)
    out = run(K, FlowConfig(p=p, max_steps=400))
    assert np.linalg.norm(out.trace.e_drift[0]) < 1e-9
    assert max(out.trace.e_drift) < 1e-7


@pytest.mark.parametrize("p", [-1.0, 0.5, 2.0])
def test_expanding_volume_increases(circle256, p):
    K = centred(random_body(2, 2, 0.4, grid=circle256), p)
    out = run(K, FlowConfig(p=p, max_steps=300, diagnostics=False))
    assert np.all(np.diff(out.trace.column("V")) > 0.0)
    assert np.all(np.diff(out.trace.column("t")) > 0.0)


def test_contracting_volume_decreases(sphere3):
    K = random_body(2, 3, 0.4, grid=sphere3)
    out = run(K, FlowConfig(p=-3.0, kind=CONTRACTING, max_steps=100, diagnostics=False))
    assert np.all(np.diff(out.trace.column("V")) < 0.0)


@pytest.mark.parametrize("p", [-2.0, 0.0, 2.0])
def test_entropy_monotone_per_step(circle256, p):
    K = centred(random_body(3, 2, 0.5, grid=circle256), p)
    out = run(K, FlowConfig(p=p, max_steps=300, recenter_every=50))
    assert out.trace.entropy_monotone
    assert all(out.trace.bracket)


def test_affine_step_breaks_weighted_monotonicity():
    # the weighted functional is not SL(2) invariant, so only volume scaling is admissible
    grid = make_circle_grid(128)
    phi = 1.0 + 0.3 * np.cos(2 * grid.theta)
    params = EntropyParams(p=-2.0, phi=phi, phi_is_even=True)
    K = random_body(0, 2, 0.4, grid=grid)
    K = translate(K, -entropy_point(K, params)[0])
    runs = {mode: run(K, FlowConfig(p=-2.0, phi=phi, renormalize=mode, recenter_every=50, max_steps=1000))
            for mode in ("volume", "volume+affine")}
    assert all(runs["volume"].trace.monotone_A) and all(runs["volume"].trace.monotone_B)
    assert not all(runs["volume+affine"].trace.monotone_A)


def test_rotation_equivariance(circle256):
    K = centred(random_body(4, 2, 0.5, grid=circle256), 2.0)
    shift = 37
    rotated = K.with_h(np.roll(K.h, shift))
    cfg = FlowConfig(p=2.0, max_steps=200, min_steps=200, diagnostics=False)
    a = run(K, cfg)
    b = run(rotated, cfg)
    assert np.max(np.abs(np.roll(a.normalized.h, shift) - b.normalized.h)) < 1e-8
    assert b.state.t == pytest.approx(a.state.t, rel=1e-12)


def test_step_respects_time_cap(circle256):
    cfg = FlowConfig(p=2.0)
    state = initial_state(ball(circle256), cfg)
    new = step(state, cfg, dt_max=1e-9)
    assert new.t == pytest.approx(1e-9, rel=1e-12)


def test_trace_csv(tmp_path, circle256):
    out = run(ball(circle256), FlowConfig(p=2.0, max_steps=5, min_steps=5))
    path = tmp_path / "trace.csv"
    out.trace.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(TRACE_COLUMNS)
    assert len(lines) == len(out.trace) + 1


# ---------------------------------------------------------------------------
# polar duality


def test_duality_ball(circle256):
    check = polar_duality_check(ball(circle256, 0.8), 0.3)
    assert check.max_deviation < 1e-9


@pytest.mark.slow
def test_duality_ellipse(circle512):
    E = ellipsoid(circle512, [0.9, 0.6], rotation_2d(0.4))
    check = polar_duality_check(E, 0.3)
    assert check.max_deviation < 5e-4
    assert check.times[-1] == pytest.approx(0.3, rel=1e-12)


def test_duality_mismatched_p_fails(circle256):
    E = ellipsoid(circle256, [0.9, 0.6], rotation_2d(0.4))
    check = polar_duality_check(E, 0.3, p=0.0)
    assert check.max_deviation > 1e-2
