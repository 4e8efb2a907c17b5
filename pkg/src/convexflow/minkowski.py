"""Planar Minkowski problem, curvature images and self-similar shapes.

In the plane the surface area measure of a body has density rho = h'' + h,
so prescribing it is a linear problem that is diagonal in Fourier space:
mode k of h is f_k / (1 - k^2).  Mode 1 is the translation gauge and is set
to zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import ConvexBody, centroid, hausdorff_distance, translate, volume
from .entropy import EntropyParams, entropy_point
from .errors import (
    DimensionUnsupported,
    MeasureNotCentered,
    NotConverged,
    OriginNotInterior,
    SymmetryViolation,
)
from .grid import CircleGrid


@dataclass(frozen=True)
class MeasureDensity:
    """Density dS/dsigma of a surface area measure on a circle grid."""

    grid: CircleGrid
    f: np.ndarray

    def check(self, tol: float = 1e-9) -> None:
        f = np.asarray(self.f, dtype=float)
        if f.min() <= 0.0:
            raise MeasureNotCentered("surface measure density must be positive")
        moment = np.linalg.norm(self.grid.first_harmonic(f))
        total = self.grid.integrate(f)
        if moment >= tol * total:
            raise MeasureNotCentered(
                f"first moment {moment:.3e} exceeds {tol:g} * total mass {total:.3e}"
            )


def solve_minkowski_2d(f: MeasureDensity, check: bool = True) -> ConvexBody:
    """Body whose radius of curvature is ``f`` and whose first Fourier modes vanish."""
    grid = f.grid
    if grid.dim != 2:
        raise DimensionUnsupported("the Minkowski solver is planar")
    if check:
        f.check()
    fk = np.fft.rfft(np.asarray(f.f, dtype=float))
    k = grid.wavenumbers
    hk = np.zeros_like(fk)
    mask = k != 1
    hk[mask] = fk[mask] / (1.0 - k[mask] ** 2)
    return ConvexBody(grid, np.fft.irfft(hk, n=grid.M))


def curvature_image(K: ConvexBody, params: EntropyParams) -> ConvexBody:
    """Curvature image: surface density proportional to h^{p-1}/phi, same volume pairing.

    K must already be translated so that its (weighted) entropy point is at
    the origin.  The result is translated to share the centroid of K, and
    satisfies V_1(Lambda, K) = V(K).
    """
    if K.dim != 2:
        raise DimensionUnsupported("curvature images are computed in the plane only")
    if not K.origin_interior:
        raise OriginNotInterior("curvature image needs the origin inside K")
    p = float(params.p)
    n = K.dim
    inv_phi = params.inv_phi(K)
    scale = volume(K) / (K.grid.integrate(K.h**p * inv_phi) / n)
    f = scale * inv_phi * K.h ** (p - 1.0)
    Lam = solve_minkowski_2d(MeasureDensity(K.grid, f))
    return translate(Lam, centroid(K) - centroid(Lam))


def _check_symmetric_phi(grid: CircleGrid, phi: np.ndarray | None) -> None:
    if phi is not None and np.max(np.abs(phi - phi[grid.antipode])) >= 1e-10:
        raise SymmetryViolation("a symmetric self-similar shape needs an even phi")


@dataclass
class SelfSimilarResult:
    body: ConvexBody
    c: float
    iterations: int
    residual: float


def self_similar_residual(K: ConvexBody, p: float, phi: np.ndarray | None, c: float) -> float:
    """max |h^{1-p} rho - c/phi| / c."""
    inv_phi = np.ones_like(K.h) if phi is None else 1.0 / phi
    return float(np.max(np.abs(K.h ** (1.0 - p) * K.S - c * inv_phi))) / c


def self_similar_solve(grid: CircleGrid, p: float, phi: np.ndarray | None = None,
                       target_volume: float = np.pi, *, symmetric: bool = True,
                       alpha: float = 0.5, tol: float = 1e-11, max_iter: int = 10000,
                       h0=None) -> SelfSimilarResult:
    """Solve h^{1-p} (h'' + h) = c / phi with V = target_volume.

    Damped fixed point h <- (1 - alpha) h + alpha * Solve(c / (phi h^{1-p})),
    with c fixed at each iterate by the volume constraint (the volume of the
    Minkowski solution scales like c^n).  For ``symmetric=False`` each iterate
    is first moved so its weighted entropy point sits at the origin.
    """
    if grid.dim != 2:
        raise DimensionUnsupported("self-similar shapes are computed in the plane only")
    phi = None if phi is None else np.asarray(phi, dtype=float)
    if symmetric:
        _check_symmetric_phi(grid, phi)
    inv_phi = np.ones(grid.size) if phi is None else 1.0 / phi
    n = 2

    def normalized_solve(f):
        body = solve_minkowski_2d(MeasureDensity(grid, f))
        c = (target_volume / volume(body)) ** (1.0 / n)
        return ConvexBody(grid, c * body.h), c

    if p == 1.0:
        body, c = normalized_solve(inv_phi)
        return SelfSimilarResult(body, c, 1, self_similar_residual(body, p, phi, c))

    h = np.ones(grid.size) if h0 is None else np.asarray(h0, dtype=float).copy()
    h *= np.sqrt(target_volume / volume(ConvexBody(grid, h)))
    params = EntropyParams(p=p, phi=phi, phi_is_even=symmetric, body_is_symmetric=symmetric)
    c = 1.0
    for it in range(1, max_iter + 1):
        if not symmetric:
            K = ConvexBody(grid, h)
            e, _ = entropy_point(K, params)
            h = h - grid.nodes @ e
        new, c = normalized_solve(inv_phi * h ** (p - 1.0))
        h_next = (1.0 - alpha) * h + alpha * new.h
        change = float(np.max(np.abs(h_next - h)))
        h = h_next
        if change < tol:
            body = ConvexBody(grid, h)
            return SelfSimilarResult(body, c, it, self_similar_residual(body, p, phi, c))
    raise NotConverged(f"self-similar iteration did not settle in {max_iter} steps (last change {change:.3e})")


def self_similar_branches(grid: CircleGrid, p: float, phi: np.ndarray | None = None,
                          target_volume: float = np.pi, seeds: int = 8, amplitude: float = 0.3,
                          distinct_tol: float = 1e-6, **kwargs) -> list[SelfSimilarResult]:
    """All distinct fixed points reached from ``seeds`` random symmetric starts."""
    from .experiments import random_body  # local import: experiments builds on this module

    found: list[SelfSimilarResult] = []
    for seed in range(seeds):
        start = random_body(seed, 2, amplitude, symmetric=True, grid=grid)
        res = self_similar_solve(grid, p, phi, target_volume, h0=start.h, **kwargs)
        if all(hausdorff_distance(res.body, other.body) > distinct_tol for other in found):
            found.append(res)
    return found
