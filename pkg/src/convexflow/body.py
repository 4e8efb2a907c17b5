"""Convex bodies represented by sampled support functions.

A :class:`ConvexBody` stores ``h(u_i)`` on a :class:`~convexflow.grid.SphereGrid`
and derives everything else from it: the radii-of-curvature matrix
``r = D^2 h + h I`` on the sphere, its determinant ``S`` (the reciprocal Gauss
curvature as a function of the normal), volume, mixed volumes, boundary
points and moments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import linprog
from scipy.special import gamma

from .errors import (
    DegenerateBody,
    GridMismatch,
    NonConvexBody,
    NotConverged,
    OriginNotInterior,
    SingularMatrix,
)
from .grid import CircleGrid, SphereGrid, scattered_interpolate

CONVEXITY_THRESHOLD = 1e-10


def unit_ball_volume(n: int) -> float:
    """omega_n, the volume of the unit ball in R^n."""
    return float(np.pi ** (n / 2) / gamma(n / 2 + 1))


class ConvexBody:
    """Support-function samples on a grid together with cached curvature data.

    Parameters
    ----------
    grid : SphereGrid
    h : array of support values at ``grid.nodes``.
    validate : if True (default) raise :class:`NonConvexBody` unless the
        smallest principal radius exceeds ``1e-10 * max h``.
    """

    __slots__ = ("grid", "h", "radii", "S", "min_radius", "_grad")

    def __init__(self, grid: SphereGrid, h, validate: bool = True):
        h = np.array(grid.check(h), dtype=float)
        h.setflags(write=False)
        self.grid = grid
        self.h = h
        if grid.dim == 2:
            rho = grid.radii(h)
            self.radii = rho
            self.S = rho
            self.min_radius = float(rho.min())
            self._grad = None
        else:
            r11, r12, r22, g1, g2 = grid.derivatives(h)
            self.radii = np.stack([np.stack([r11, r12], -1), np.stack([r12, r22], -1)], -2)
            self.S = r11 * r22 - r12 * r12
            tr = 0.5 * (r11 + r22)
            disc = np.sqrt(0.25 * (r11 - r22) ** 2 + r12 * r12)
            self.min_radius = float(np.min(tr - disc))
            self._grad = g1[:, None] * grid.e1 + g2[:, None] * grid.e2
        if validate and not self.is_convex():
            raise NonConvexBody(
                f"smallest principal radius {self.min_radius:.3e} is below "
                f"{CONVEXITY_THRESHOLD:g} * max h"
            )

    @property
    def dim(self) -> int:
        return self.grid.dim

    def is_convex(self) -> bool:
        return bool(np.isfinite(self.min_radius)) and self.min_radius > CONVEXITY_THRESHOLD * float(np.max(np.abs(self.h)))

    @property
    def origin_interior(self) -> bool:
        return bool(self.h.min() > 0.0)

    def is_symmetric(self, tol: float = 1e-9) -> bool:
        return bool(np.max(np.abs(self.h - self.h[self.grid.antipode])) < tol * np.max(np.abs(self.h)))

    def gradient(self) -> np.ndarray:
        """Tangential gradient of h lifted to R^n, shape (N, n)."""
        if self._grad is None:
            return self.grid.gradient(self.h)
        return self._grad

    def with_h(self, h, validate: bool = True) -> "ConvexBody":
        return ConvexBody(self.grid, h, validate=validate)

    def scaled(self, factor: float) -> "ConvexBody":
        return ConvexBody(self.grid, factor * self.h)

    def __repr__(self) -> str:
        return f"ConvexBody({self.grid.identifier}, V={volume(self):.6g})"


class BoundaryEmbedding(NamedTuple):
    """Boundary points ``x_i`` with outer normals ``u_i``."""

    points: np.ndarray
    normals: np.ndarray


class WidthDiameter(NamedTuple):
    mean_width: float
    diameter: float
    circumradius: float
    inradius: float


def _same_grid(K: ConvexBody, L: ConvexBody) -> None:
    if K.grid is not L.grid and K.grid.identifier != L.grid.identifier:
        raise GridMismatch(f"{K.grid.identifier} vs {L.grid.identifier}")


# ---------------------------------------------------------------------------
# curvature and volumes


def gauss_curvature(K: ConvexBody) -> np.ndarray:
    """Gauss curvature at the boundary point with normal u_i, i.e. 1/S."""
    if np.any(K.S <= 0.0):
        raise NonConvexBody("radii determinant is not positive everywhere")
    return 1.0 / K.S


def volume(K: ConvexBody) -> float:
    """V = (1/n) sum_i w_i h_i S_i."""
    return float(K.grid.weights @ (K.h * K.S)) / K.dim


def surface_area(K: ConvexBody) -> float:
    return float(K.grid.weights @ K.S)


def mixed_volume(K: ConvexBody, L: ConvexBody) -> float:
    """V_1(K, L) = (1/n) integral of h_L against the surface measure of K."""
    _same_grid(K, L)
    return float(K.grid.weights @ (L.h * K.S)) / K.dim


def polar_volume(K: ConvexBody, center=None) -> float:
    """Volume of (K - center)^*, i.e. (1/n) integral of (h - center.u)^{-n}."""
    h = K.h if center is None else K.h - K.grid.nodes @ np.asarray(center, dtype=float)
    if h.min() <= 0.0:
        raise OriginNotInterior("polar volume needs the center strictly inside")
    return float(K.grid.weights @ h ** (-K.dim)) / K.dim


def surface_measure_center(K: ConvexBody) -> np.ndarray:
    """sum_i w_i u_i S_i; vanishes for a closed boundary."""
    return K.grid.first_harmonic(K.S)


# ---------------------------------------------------------------------------
# derived bodies


def translate(K: ConvexBody, x0) -> ConvexBody:
    """Translate the body by ``+x0``: h(u) -> h(u) + x0 . u."""
    return K.with_h(K.h + K.grid.nodes @ np.asarray(x0, dtype=float))


def linear_image(K: ConvexBody, A) -> ConvexBody:
    """Image ``A K``; h_{AK}(u) = |A^T u| h_K(A^T u / |A^T u|)."""
    A = np.asarray(A, dtype=float)
    n = K.dim
    if A.shape != (n, n):
        raise SingularMatrix(f"expected a {n}x{n} matrix, got shape {A.shape}")
    scale = max(np.linalg.norm(A, 2), 1e-300)
    if not np.isfinite(A).all() or abs(np.linalg.det(A)) <= 1e-12 * scale**n:
        raise SingularMatrix("linear map is singular")
    v = K.grid.nodes @ A  # rows are A^T u
    norm = np.linalg.norm(v, axis=1)
    return K.with_h(norm * K.grid.interpolate(K.h, v / norm[:, None]))


def rotation_2d(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def _polar_2d(K: ConvexBody, iterations: int = 8) -> np.ndarray:
    # r_K(psi) = min over normals theta of h(theta) / cos(theta - psi); the
    # minimiser is the normal at the boundary point in direction psi.  Start
    # from the discrete minimum and polish by Newton on the stationarity
    # condition h' cos + h sin = 0, whose derivative is rho cos.
    grid: CircleGrid = K.grid
    theta, h = grid.theta, K.h
    psi = theta
    cosd = np.cos(theta[None, :] - psi[:, None])
    ratio = np.where(cosd > 1e-12, h[None, :] / np.where(cosd > 1e-12, cosd, 1.0), np.inf)
    t = theta[np.argmin(ratio, axis=1)]
    for _ in range(iterations):
        d = t - psi
        h0, h1, h2 = grid.fourier_eval(h, t, order=(0, 1, 2))
        F = h1 * np.cos(d) + h0 * np.sin(d)
        dF = (h2 + h0) * np.cos(d)
        step = F / dF
        t = t - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return np.cos(t - psi) / grid.fourier_eval(h, t)


def polar_body(K: ConvexBody) -> ConvexBody:
    """Polar body K^*; its support function is the reciprocal radial function of K."""
    if not K.origin_interior:
        raise OriginNotInterior("polar body requires the origin strictly inside K")
    if K.dim == 2:
        return K.with_h(_polar_2d(K))
    x = boundary_embedding(K).points
    r = np.linalg.norm(x, axis=1)
    return K.with_h(scattered_interpolate(x / r[:, None], 1.0 / r, K.grid.nodes))


def duality_defect(K: ConvexBody, polar: ConvexBody | None = None) -> np.ndarray:
    """(h^{n+1} S)(u) (h*^{n+1} S*)(x/|x|) - 1 at every node u.

    x is the boundary point of K with normal u; the boundary point of K^*
    with normal x/|x| is u/h(u).  The product is identically 1 for smooth
    bodies, so this measures the joint accuracy of curvature and polarity.
    """
    P = polar_body(K) if polar is None else polar
    x = boundary_embedding(K).points
    dirs = x / np.linalg.norm(x, axis=1)[:, None]
    n = K.dim
    h_star = K.grid.interpolate(P.h, dirs)
    S_star = K.grid.interpolate(P.S, dirs)
    return K.h ** (n + 1) * K.S * h_star ** (n + 1) * S_star - 1.0


def hausdorff_distance(K: ConvexBody, L: ConvexBody) -> float:
    """max_i |h_K(u_i) - h_L(u_i)|."""
    _same_grid(K, L)
    return float(np.max(np.abs(K.h - L.h)))


# ---------------------------------------------------------------------------
# boundary, moments, widths


def boundary_embedding(K: ConvexBody) -> BoundaryEmbedding:
    """Inverse Gauss map x(u) = h(u) u + grad h(u)."""
    u = K.grid.nodes
    return BoundaryEmbedding(K.h[:, None] * u + K.gradient(), u)


def centroid(K: ConvexBody) -> np.ndarray:
    """Centroid via the divergence theorem: int_K x = (1/(n+1)) int x h dS."""
    x = boundary_embedding(K).points
    hs = K.grid.weights * K.h * K.S
    return (hs @ x) / ((K.dim + 1) * volume(K))


def second_moment(K: ConvexBody) -> np.ndarray:
    """int_K x x^T dx = (1/(n+2)) int x x^T h dS."""
    x = boundary_embedding(K).points
    hs = K.grid.weights * K.h * K.S
    return np.einsum("i,ij,ik->jk", hs, x, x) / (K.dim + 2)


def covariance(K: ConvexBody) -> np.ndarray:
    """Covariance matrix of the uniform distribution on K."""
    c = centroid(K)
    return second_moment(K) / volume(K) - np.outer(c, c)


def covariance_normalize(K: ConvexBody) -> tuple[ConvexBody, np.ndarray]:
    """Map K by T in SL(n) so that its covariance becomes a multiple of the identity.

    T = det(C)^{1/(2n)} C^{-1/2} with C the centroid-centred covariance.  T is
    applied about the origin, so points fixed at the origin stay there.
    """
    C = covariance(K)
    evals, evecs = np.linalg.eigh(C)
    if evals[0] <= 0.0 or evals[-1] / evals[0] > 1e12:
        raise DegenerateBody(f"covariance condition number {evals[-1] / max(evals[0], 1e-300):.3e}")
    n = K.dim
    T = (evecs * evals ** -0.5) @ evecs.T * np.prod(evals) ** (1.0 / (2 * n))
    return linear_image(K, T), T


def _diameter_2d(K: ConvexBody) -> float:
    grid: CircleGrid = K.grid
    width = K.h + K.h[grid.antipode]
    t = grid.theta[np.argmax(width)]
    for _ in range(20):
        d1, d2 = grid.fourier_eval(K.h, [t, t + np.pi], order=(1, 2)).sum(axis=1)
        if d2 >= 0.0:
            break
        step = d1 / d2
        t -= step
        if abs(step) < 1e-14:
            break
    refined = grid.fourier_eval(K.h, [t, t + np.pi]).sum()
    return float(max(refined, width.max()))


def circumcenter(K: ConvexBody, iterations: int = 200) -> tuple[np.ndarray, float]:
    """Centre and radius of the smallest enclosing ball of the boundary points.

    Subgradient descent on c -> max_i |x_i - c| from the centroid with
    diminishing steps; the best iterate is returned (ties: first index).
    """
    x = boundary_embedding(K).points
    c = centroid(K)
    best_c, best_r = c, float(np.max(np.linalg.norm(x - c, axis=1)))
    step0 = 0.5 * best_r
    for k in range(iterations):
        d = np.linalg.norm(x - c, axis=1)
        i = int(np.argmax(d))
        r = d[i]
        if r < best_r:
            best_c, best_r = c, float(r)
        if r == 0.0:
            break
        c = c + step0 / (k + 1) * (x[i] - c) / r
    d = float(np.max(np.linalg.norm(x - c, axis=1)))
    if d < best_r:
        best_c, best_r = c, d
    return best_c, best_r


def inradius(K: ConvexBody) -> tuple[np.ndarray, float]:
    """Largest inscribed ball: maximise r subject to c.u_i + r <= h_i."""
    n = K.dim
    u = K.grid.nodes
    A = np.hstack([u, np.ones((u.shape[0], 1))])
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    res = linprog(cost, A_ub=A, b_ub=K.h, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if not res.success:
        raise NotConverged(f"inradius linear program failed: {res.message}")
    return res.x[:n], float(res.x[-1])


def mean_width(K: ConvexBody) -> float:
    """w = (2 / (n omega_n)) int h dsigma."""
    n = K.dim
    return 2.0 * K.grid.integrate(K.h) / (n * unit_ball_volume(n))


def width_diameter(K: ConvexBody) -> WidthDiameter:
    if K.dim == 2:
        diameter = _diameter_2d(K)
    else:
        diameter = float(np.max(K.h + K.h[K.grid.antipode]))
    return WidthDiameter(
        mean_width=mean_width(K),
        diameter=diameter,
        circumradius=circumcenter(K)[1],
        inradius=inradius(K)[1],
    )


# ---------------------------------------------------------------------------
# constructors


def ball(grid: SphereGrid, radius: float = 1.0, center=None) -> ConvexBody:
    h = np.full(grid.size, float(radius))
    if center is not None:
        h = h + grid.nodes @ np.asarray(center, dtype=float)
    return ConvexBody(grid, h)


def ellipsoid(grid: SphereGrid, axes, rotation=None) -> ConvexBody:
    """Ellipsoid with semi-axes ``axes``; h(u) = |diag(axes) R^T u|."""
    axes = np.asarray(axes, dtype=float)
    M = np.diag(axes) if rotation is None else np.asarray(rotation) @ np.diag(axes)
    return ConvexBody(grid, np.linalg.norm(grid.nodes @ M, axis=1))


@dataclass(frozen=True)
class Snapshot:
    """Serializable body state: grid identifier, support samples and time."""

    dim: int
    grid: str
    h: tuple
    t: float = 0.0

    @classmethod
    def of(cls, K: ConvexBody, t: float = 0.0) -> "Snapshot":
        return cls(K.dim, K.grid.identifier, tuple(float(v) for v in K.h), float(t))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "grid": self.grid, "h": list(self.h), "t": self.t}
