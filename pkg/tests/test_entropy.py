import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from convexflow.body import (
    ball,
    boundary_embedding,
    ellipsoid,
    linear_image,
    polar_volume,
    rotation_2d,
    translate,
)
from convexflow.entropy import (
    EntropyParams,
    EntropyReport,
    entropy_A,
    entropy_B,
    entropy_point,
    entropy_report,
    gl_invariant,
    santalo_point,
    santalo_product,
)
from convexflow.errors import ConvexFlowError, SymmetryViolation
from convexflow.experiments import random_body
from convexflow.grid import make_sphere_grid
from convexflow.minkowski import curvature_image


@pytest.fixture(scope="module")
def blob(circle512):
    return random_body(11, 2, 0.6, grid=circle512)


def brute_force_minimizer(K, p, cells=400):
    """Lattice minimizer of sum w (h - x.u)^p over interior lattice points."""
    pts = boundary_embedding(K).points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    xs = np.linspace(lo[0], hi[0], cells)
    ys = np.linspace(lo[1], hi[1], cells)
    X = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    u, w = K.grid.nodes, K.grid.weights
    best, arg = np.inf, None
    for chunk in np.array_split(X, 80):
        t = K.h[None, :] - chunk @ u.T
        inside = t.min(axis=1) > 0.0
        if not inside.any():
            continue
        vals = (np.where(t > 0.0, t, 1.0) ** p) @ w
        vals[~inside] = np.inf
        i = int(np.argmin(vals))
        if vals[i] < best:
            best, arg = vals[i], chunk[i]
    cell = (hi - lo) / (cells - 1)
    return arg, cell


# ---------------------------------------------------------------------------
# entropy point


@pytest.mark.parametrize("p", [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0])
def test_symmetric_body_gives_origin(circle512, p):
    K = random_body(4, 2, 0.6, symmetric=True, grid=circle512)
    e, res = entropy_point(K, EntropyParams(p=p))
    assert np.linalg.norm(e) < 1e-10
    assert res < 1e-10


def test_translated_disk(circle512):
    K = ball(circle512, 1.0, center=[0.3, 0.0])
    e, _ = entropy_point(K, EntropyParams(p=-2.0))
    assert np.max(np.abs(e - [0.3, 0.0])) < 1e-10


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1])
def test_matches_lattice_search(circle512, seed):
    K = translate(random_body(seed, 2, 0.6, grid=circle512), [0.2, -0.1])
    e, _ = entropy_point(K, EntropyParams(p=-2.0))
    x, cell = brute_force_minimizer(K, -2.0)
    assert np.all(np.abs(e - x) <= cell)


@pytest.mark.parametrize("p", [-2.0, -1.0, 0.0, 0.5, 2.0, 3.0])
def test_residual_and_interior(blob, p):
    e, res = entropy_point(blob, EntropyParams(p=p))
    assert res < 1e-10
    assert np.min(blob.h - blob.grid.nodes @ e) > 0.0


@pytest.mark.parametrize("p", [-2.0, -1.0, 0.0, 0.5, 3.0])
def test_translation_equivariance_2d(blob, p):
    v = np.array([0.17, -0.23])
    e0, _ = entropy_point(blob, EntropyParams(p=p))
    e1, _ = entropy_point(translate(blob, v), EntropyParams(p=p))
    assert np.max(np.abs(e1 - (e0 + v))) < 1e-9


def test_translation_equivariance_3d(sphere4):
    K = random_body(2, 3, 0.5, grid=sphere4)
    v = np.array([0.1, -0.05, 0.2])
    e0, _ = entropy_point(K, EntropyParams(p=-3.0))
    e1, _ = entropy_point(translate(K, v), EntropyParams(p=-3.0))
    assert np.max(np.abs(e1 - (e0 + v))) < 1e-9


def test_santalo_point_minimizes_polar_volume(blob):
    e = santalo_point(blob)
    best = polar_volume(blob, e)
    rng = np.random.default_rng(0)
    probes = 0
    while probes < 20:
        x = e + rng.uniform(-0.3, 0.3, size=2)
        if np.min(blob.h - blob.grid.nodes @ x) <= 0.05:
            continue
        assert polar_volume(blob, x) >= best
        probes += 1


def test_p1_rejected_for_nonsymmetric(blob):
    with pytest.raises(ConvexFlowError):
        entropy_point(blob, EntropyParams(p=1.0))


def test_p_below_range_rejected(blob):
    with pytest.raises(ConvexFlowError):
        entropy_point(blob, EntropyParams(p=-2.5))


def test_nonconstant_phi_needs_symmetry_or_range(blob, circle512):
    phi = 1.0 + 0.3 * np.cos(2 * circle512.theta)
    with pytest.raises(SymmetryViolation):
        entropy_point(blob, EntropyParams(p=2.0, phi=phi))
    # p in [-n, -n+1] is allowed for any body
    e, res = entropy_point(blob, EntropyParams(p=-1.5, phi=phi))
    assert res < 1e-10


def test_even_flag_checked(blob, circle512):
    phi = 1.0 + 0.3 * np.cos(circle512.theta)
    with pytest.raises(SymmetryViolation):
        entropy_point(blob, EntropyParams(p=-2.0, phi=phi, phi_is_even=True))


def test_nonpositive_phi_rejected(blob, circle512):
    phi = np.cos(2 * circle512.theta)
    with pytest.raises(ConvexFlowError):
        entropy_point(blob, EntropyParams(p=-2.0, phi=phi))


# ---------------------------------------------------------------------------
# A_p


def test_A_of_disk_p2(circle512):
    assert abs(entropy_A(ball(circle512), EntropyParams(p=2.0)) - 0.5) < 1e-12


@pytest.mark.parametrize("p", [-1.0, 0.5, 2.0, 3.0])
def test_A_of_disk_closed_form(circle512, p):
    expected = np.pi * (2 * np.pi) ** (-2.0 / p)
    assert entropy_A(ball(circle512, 2.5), EntropyParams(p=p)) == pytest.approx(expected, rel=1e-12)


def test_A_of_disk_p0(circle512):
    # exponential branch: V exp(-n mean log h) with h = 1
    assert entropy_A(ball(circle512), EntropyParams(p=0.0)) == pytest.approx(np.pi, rel=1e-12)


@given(st.floats(1.0, 3.0), st.floats(0.0, np.pi))
def test_A_minus_two_of_centred_ellipse(circle512, ratio, angle):
    E = ellipsoid(circle512, [ratio, 0.5], rotation_2d(angle))
    assert entropy_A(E, EntropyParams(p=-2.0)) == pytest.approx(2 * np.pi**2, rel=1e-8)


@pytest.mark.parametrize("p", [-2.0, 0.0, 2.0])
def test_A_scale_invariance(blob, p):
    params = EntropyParams(p=p)
    assert entropy_A(blob.scaled(3.7), params) == pytest.approx(entropy_A(blob, params), rel=1e-10)


def test_A_scale_invariance_3d(sphere4):
    K = random_body(3, 3, 0.5, grid=sphere4)
    params = EntropyParams(p=-3.0)
    assert entropy_A(K.scaled(3.7), params) == pytest.approx(entropy_A(K, params), rel=1e-10)


def test_santalo_product_of_ball(sphere4):
    assert santalo_product(ball(sphere4)) == pytest.approx((4 * np.pi / 3) ** 2, rel=1e-10)


# ---------------------------------------------------------------------------
# B_p


def centred_B(K, p):
    params = EntropyParams(p=p)
    e, _ = entropy_point(K, params)
    Kc = translate(K, -e)
    return entropy_B(Kc, params, curvature_image(Kc, params)), entropy_A(Kc, params)


def test_B_of_disk_equals_A(circle512):
    B, A = centred_B(ball(circle512), 2.0)
    assert B == pytest.approx(A, rel=1e-12)


@pytest.mark.parametrize("p", [-1.0, 0.5, 2.0, 3.0])
def test_B_dominates_A(blob, p):
    B, A = centred_B(blob, p)
    assert B > A


def test_B_scale_invariance(blob):
    B0, _ = centred_B(blob, 2.0)
    B1, _ = centred_B(blob.scaled(0.5), 2.0)
    assert abs(B1 - B0) < 1e-9 * B0


def test_B_needs_plane(sphere3):
    K = ball(sphere3)
    with pytest.raises(ConvexFlowError):
        entropy_B(K, EntropyParams(p=2.0), K)


# ---------------------------------------------------------------------------
# GL invariant and reports


@pytest.mark.parametrize("det", [1.0, -1.0, 2.0, -2.0])
def test_gl_invariant_2d(blob, det):
    rng = np.random.default_rng(int(abs(det) * 10 + (det < 0)))
    A = rng.normal(size=(2, 2))
    A *= np.sqrt(abs(det / np.linalg.det(A)))
    if np.sign(np.linalg.det(A)) != np.sign(det):
        A[0] *= -1.0
    assert np.linalg.det(A) == pytest.approx(det)
    assert gl_invariant(linear_image(blob, A)) == pytest.approx(gl_invariant(blob), rel=1e-6)


@pytest.mark.parametrize("det", [1.0, -2.0])
def test_gl_invariant_3d_converges(sphere4, sphere5, det):
    # quadrature of h^{-3} is second order on the icosphere, so check the trend
    A = np.diag([1.3, 1.0 / 1.3, det]) @ np.linalg.qr(np.random.default_rng(1).normal(size=(3, 3)))[0]
    errors = []
    for grid in (sphere4, sphere5, make_sphere_grid(6)):
        K = random_body(5, 3, 0.3, grid=grid)
        errors.append(abs(gl_invariant(linear_image(K, A)) / gl_invariant(K) - 1.0))
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 1e-5


def test_report_row(blob):
    report = entropy_report(blob, EntropyParams(p=-2.0), None)
    assert isinstance(report, EntropyReport)
    row = report.csv_row()
    assert len(row) == len(report.csv_header()) == 7
    assert row[5] == ""
    assert float(row[4]) == report.A_value
