"""Discretizations of the unit circle and the unit sphere.

Two grids are provided:

* :class:`CircleGrid` -- ``M`` equispaced angles on S^1 with spectral
  (discrete Fourier) differentiation and interpolation.
* :class:`IcosphereGrid` -- vertices of a subdivided icosahedron projected to
  S^2, spherical Voronoi areas as quadrature weights, and per-node weighted
  least-squares stencils for the tangential gradient and the radii matrix.

Both expose the same small surface: ``nodes``, ``weights``, ``spacing``,
``radii(h)``, ``gradient(h)`` and ``interpolate(values, dirs)``.
"""
from __future__ import annotations

import functools

import numpy as np
from scipy import sparse
from scipy.spatial import SphericalVoronoi, cKDTree

from .errors import ConvexFlowError, GridMismatch


class SphereGrid:
    """Common interface for the S^1 and S^2 discretizations."""

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    spacing: float
    identifier: str

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, f) -> float:
        return float(self.weights @ f)

    def check(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if h.shape != (self.size,):
            raise GridMismatch(
                f"samples of shape {h.shape} do not match grid {self.identifier}"
            )
        return h

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.identifier!r})"


class CircleGrid(SphereGrid):
    """Uniform grid on S^1, theta_j = 2 pi j / M."""

    dim = 2

    def __init__(self, M: int):
        self.M = M
        self.theta = 2.0 * np.pi * np.arange(M) / M
        self.nodes = np.column_stack([np.cos(self.theta), np.sin(self.theta)])
        self.weights = np.full(M, 2.0 * np.pi / M)
        self.spacing = 2.0 * np.pi / M
        self.identifier = f"circle:{M}"
        # largest stable dt * D / spacing^2 for RK4: the top Fourier mode has
        # eigenvalue -(M/2)^2 = -pi^2 / spacing^2, RK4 is stable up to ~2.78
        self.stable_cfl = 0.25
        self.wavenumbers = np.arange(M // 2 + 1)
        self.antipode = (np.arange(M) + M // 2) % M
        self._radii_multiplier = 1.0 - self.wavenumbers.astype(float) ** 2
        self._d1 = 1j * self.wavenumbers
        self._d1[-1] = 0.0  # Nyquist mode has no real odd derivative
        for arr in (self.theta, self.nodes, self.weights):
            arr.setflags(write=False)

    # spectral operators -------------------------------------------------
    def radii(self, h) -> np.ndarray:
        """rho = h'' + h."""
        return np.fft.irfft(self._radii_multiplier * np.fft.rfft(h), n=self.M)

    def derivative(self, h, order: int = 1) -> np.ndarray:
        hk = np.fft.rfft(h)
        if order == 1:
            return np.fft.irfft(self._d1 * hk, n=self.M)
        return np.fft.irfft((1j * self.wavenumbers) ** order * hk, n=self.M)

    def gradient(self, h) -> np.ndarray:
        """Tangential gradient lifted to R^2: h'(theta) * (-sin, cos)."""
        dh = self.derivative(h)
        return dh[:, None] * np.column_stack([-self.nodes[:, 1], self.nodes[:, 0]])

    def fourier_eval(self, h, theta, order=0) -> np.ndarray:
        """Evaluate the trigonometric interpolant of ``h`` or its derivatives.

        ``order`` may be an int or a sequence of ints; for a sequence the
        results are stacked along the first axis.
        """
        theta = np.asarray(theta, dtype=float)
        c = np.fft.rfft(h) / self.M
        fac = np.full(c.shape, 2.0)
        fac[0] = 1.0
        fac[-1] = 1.0
        c = fac * c
        phase = np.exp(1j * np.multiply.outer(theta, self.wavenumbers))
        if np.ndim(order) == 0:
            return (phase @ (c * (1j * self.wavenumbers) ** order)).real
        coefs = np.stack([c * (1j * self.wavenumbers) ** m for m in order], axis=-1)
        return np.moveaxis((phase @ coefs).real, -1, 0)

    def interpolate(self, values, dirs) -> np.ndarray:
        dirs = np.asarray(dirs, dtype=float)
        return self.fourier_eval(values, np.arctan2(dirs[..., 1], dirs[..., 0]))

    def first_harmonic(self, f) -> np.ndarray:
        """Sum_j w_j u_j f_j."""
        return self.weights @ (self.nodes * np.asarray(f)[:, None])


# ---------------------------------------------------------------------------
# icosphere


_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1, _T, 0], [1, _T, 0], [-1, -_T, 0], [1, -_T, 0],
        [0, -1, _T], [0, 1, _T], [0, -1, -_T], [0, 1, -_T],
        [_T, 0, -1], [_T, 0, 1], [-_T, 0, -1], [-_T, 0, 1],
    ]
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
)


def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices and faces of the icosahedron subdivided ``level`` times."""
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS, axis=1, keepdims=True)
    faces = _ICO_FACES.copy()
    for _ in range(level):
        edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        mid = verts[uniq[:, 0]] + verts[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        base = verts.shape[0]
        verts = np.concatenate([verts, mid])
        m = faces.shape[0]
        ab, bc, ca = (base + inverse[i * m:(i + 1) * m] for i in range(3))
        a, b, c = faces.T
        faces = np.concatenate(
            [
                np.column_stack([a, ab, ca]),
                np.column_stack([b, bc, ab]),
                np.column_stack([c, ca, bc]),
                np.column_stack([ab, bc, ca]),
            ]
        )
    return verts, faces


def tangent_frames(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent vectors (e1, e2) with e1 x e2 = u."""
    ref = np.zeros_like(u)
    polar = np.abs(u[:, 2]) > 0.9
    ref[~polar, 2] = 1.0
    ref[polar, 0] = 1.0
    e1 = np.cross(u, ref)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(u, e1)
    return e1, e2


def _neighbors(tree: cKDTree, points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest tree points for each query, distance ties broken by index."""
    extra = min(k + 6, tree.n)
    dist, idx = tree.query(points, k=extra)
    order = np.lexsort((idx, np.round(dist, 12)), axis=1)
    dist = np.take_along_axis(dist, order, axis=1)[:, :k]
    idx = np.take_along_axis(idx, order, axis=1)[:, :k]
    return dist, idx


def _gaussian_weights(dist: np.ndarray) -> np.ndarray:
    scale = 1.5 * np.mean(dist[:, 1:7], axis=1, keepdims=True)
    return np.exp(-((dist / scale) ** 2))


def _monomials(x, y, degree: int, lowest: int) -> np.ndarray:
    return np.stack(
        [x**i * y ** (d - i) for d in range(lowest, degree + 1) for i in range(d, -1, -1)],
        axis=-1,
    )


def _gnomonic_fit(src: np.ndarray, idx: np.ndarray, query: np.ndarray, dist: np.ndarray,
                  lowest: int, degree: int = 4):
    """Weighted least-squares polynomial fit in gnomonic coordinates about each query.

    With (a, b, c) the neighbour coordinates in the query's frame, the
    1-homogeneous extension of h restricted to the tangent plane is
    g(xi, eta) = h / c at xi = a / c, eta = b / c.  Its Hessian at the origin
    is the radii matrix and its gradient the tangential gradient of h.

    Returns the projector ``P`` (Q, nbasis, k) onto monomial coefficients in
    scaled coordinates, the scale ``s`` (Q,), and ``c`` (Q, k).
    """
    e1, e2 = tangent_frames(query)
    v = src[idx]
    a = np.einsum("qkd,qd->qk", v, e1)
    b = np.einsum("qkd,qd->qk", v, e2)
    c = np.einsum("qkd,qd->qk", v, query)
    xi, eta = a / c, b / c
    s = np.max(np.hypot(xi, eta), axis=1, keepdims=True)
    phi = _monomials(xi / s, eta / s, degree, lowest)
    sw = np.sqrt(_gaussian_weights(dist))
    P = np.linalg.pinv(phi * sw[:, :, None]) * sw[:, None, :]
    return P, s[:, 0], c


class IcosphereGrid(SphereGrid):
    """Subdivided icosahedron on S^2 with least-squares derivative stencils."""

    dim = 3
    stencil_size = 29
    interp_size = 30

    def __init__(self, level: int):
        self.level = level
        verts, faces = icosphere(level)
        self.nodes = verts
        self.faces = faces
        sv = SphericalVoronoi(verts, radius=1.0, center=np.zeros(3))
        self.weights = sv.calculate_areas()
        edges = np.unique(
            np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1),
            axis=0,
        )
        cosang = np.einsum("ij,ij->i", verts[edges[:, 0]], verts[edges[:, 1]])
        self.spacing = float(np.min(np.arccos(np.clip(cosang, -1.0, 1.0))))
        self.identifier = f"icosphere:{level}"
        # measured: most negative stencil eigenvalue is about -3.05 / spacing^2
        self.stable_cfl = 0.8
        self.tree = cKDTree(verts)
        self.antipode = self.tree.query(-verts)[1]
        self.e1, self.e2 = tangent_frames(verts)
        self._build_stencils()
        for arr in (self.nodes, self.weights, self.e1, self.e2):
            arr.setflags(write=False)

    def _build_stencils(self) -> None:
        n = self.size
        k = self.stencil_size + 1
        dist, idx = _neighbors(self.tree, self.nodes, k)
        u = self.nodes
        v = u[idx]
        a = np.einsum("qkd,qd->qk", v, self.e1)
        b = np.einsum("qkd,qd->qk", v, self.e2)
        c = np.einsum("qkd,qd->qk", v, u)
        sw = np.sqrt(_gaussian_weights(dist))
        center = np.zeros(k)
        center[0] = 1.0  # idx[:, 0] is the node itself

        # Stage 1: quartic fit of (h_j - h_0) / c_j^2 in gnomonic coordinates.
        # For degree-0 and degree-2 harmonics this quotient is a polynomial,
        # so the fit reproduces them exactly.
        xi, eta = a / c, b / c
        g = np.max(np.hypot(xi, eta), axis=1, keepdims=True)
        mono = _monomials(xi / g, eta / g, 4, 1)
        P = np.linalg.pinv(mono * sw[:, :, None]) * sw[:, None, :] / (c * c)[:, None, :]
        P = P - P.sum(axis=2, keepdims=True) * center
        # monomial order: xi, eta, xi^2, xi eta, eta^2, ...
        W = np.stack(
            [
                center + 2.0 * P[:, 2] / g**2,  # r11
                P[:, 3] / g**2,  # r12
                center + 2.0 * P[:, 4] / g**2,  # r22
                P[:, 0] / g,  # d/de1
                P[:, 1] / g,  # d/de2
            ],
            axis=1,
        )

        # Stage 2: remove the (small) error of W on linear functions, weighted
        # by the degree-1 coefficients of a fit exact on all harmonics of
        # degree <= 2.  gamma = (1 - c) / s^2, computed without cancellation.
        s = np.max(np.hypot(a, b), axis=1, keepdims=True)
        al, be = a / s, b / s
        gamma = (a * a + b * b) / ((1.0 + c) * s * s)
        basis9 = np.stack(
            [np.ones_like(a), al, be, gamma, al * al, al * be, be * be, al * c, be * c], axis=-1
        )
        A = np.linalg.pinv(basis9 * sw[:, :, None]) * sw[:, None, :]
        linear_coef = np.stack([A[:, 1] / s, A[:, 2] / s, -A[:, 3] / s**2], axis=1)
        E = np.einsum("qok,qkd->qod", W, np.stack([a, b, c], axis=-1))
        E[:, 3, 0] -= 1.0
        E[:, 4, 1] -= 1.0
        W = W - np.einsum("qod,qdk->qok", E, linear_coef)

        data = W.transpose(1, 0, 2).ravel()
        row_idx = np.concatenate([np.repeat(np.arange(n) + j * n, k) for j in range(5)])
        col_idx = np.tile(idx.ravel(), 5)
        self.stencil_index = idx
        self._ops = sparse.csr_matrix((data, (row_idx, col_idx)), shape=(5 * n, n))

    # stencil operators ----------------------------------------------------
    def derivatives(self, h) -> np.ndarray:
        """Rows r11, r12, r22, g1, g2 of the radii matrix and gradient."""
        return (self._ops @ h).reshape(5, -1)

    def radii(self, h) -> np.ndarray:
        r11, r12, r22, _, _ = self.derivatives(h)
        return np.stack([np.stack([r11, r12], -1), np.stack([r12, r22], -1)], -2)

    def gradient(self, h) -> np.ndarray:
        _, _, _, g1, g2 = self.derivatives(h)
        return g1[:, None] * self.e1 + g2[:, None] * self.e2

    def first_harmonic(self, f) -> np.ndarray:
        return self.weights @ (self.nodes * np.asarray(f)[:, None])

    def interpolate(self, values, dirs) -> np.ndarray:
        """Local least-squares interpolation of node values at ``dirs``."""
        return scattered_interpolate(self.nodes, values, dirs, tree=self.tree, k=self.interp_size)


def scattered_interpolate(src, values, query, tree: cKDTree | None = None, k: int = 30,
                          chunk: int = 20000) -> np.ndarray:
    """Interpolate samples at unit vectors ``src`` to unit vectors ``query``.

    Local quartic least-squares fit in gnomonic coordinates about each query,
    relative to the nearest sample so that constants are reproduced exactly.
    """
    src = np.asarray(src, dtype=float)
    values = np.asarray(values, dtype=float)
    query = np.atleast_2d(np.asarray(query, dtype=float))
    query = query / np.linalg.norm(query, axis=1, keepdims=True)
    if tree is None:
        tree = cKDTree(src)
    out = np.empty(query.shape[0])
    for start in range(0, query.shape[0], chunk):
        q = query[start:start + chunk]
        dist, idx = _neighbors(tree, q, k)
        P, _, c = _gnomonic_fit(src, idx, q, dist, lowest=0)
        near = values[idx[:, :1]]
        resid = (values[idx] - near) / c
        out[start:start + chunk] = near[:, 0] + np.einsum("qk,qk->q", P[:, 0], resid)
    return out


# ---------------------------------------------------------------------------
# constructors


@functools.lru_cache(maxsize=None)
def make_circle_grid(M: int) -> CircleGrid:
    """Uniform grid of ``M`` nodes on S^1 (M even, M >= 16)."""
    if not isinstance(M, (int, np.integer)) or M < 16 or M % 2:
        raise ConvexFlowError(f"circle grid needs an even node count >= 16, got {M!r}")
    return CircleGrid(int(M))


@functools.lru_cache(maxsize=None)
def make_sphere_grid(level: int) -> IcosphereGrid:
    """Icosphere grid; ``level`` in [2, 7] (level 4 has 2562 nodes)."""
    if not isinstance(level, (int, np.integer)) or not 2 <= level <= 7:
        raise ConvexFlowError(f"icosphere level must be in [2, 7], got {level!r}")
    return IcosphereGrid(int(level))


def grid_from_identifier(identifier: str) -> SphereGrid:
    kind, _, size = identifier.partition(":")
    if kind == "circle":
        return make_circle_grid(int(size))
    if kind == "icosphere":
        return make_sphere_grid(int(size))
    raise ConvexFlowError(f"unknown grid identifier {identifier!r}")


def hessian_radii(grid: SphereGrid, h) -> np.ndarray:
    """Radii-of-curvature field: rho = h'' + h on S^1, (n-1)x(n-1) matrices on S^2."""
    return grid.radii(grid.check(h))
