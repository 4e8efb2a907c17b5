"""Entropy points and the scale-invariant entropy functionals A_p and B_p.

For a body K with support function h, exponent p and positive weight phi,
the entropy point e is the interior zero of

    G(x) = sum_i w_i u_i (h_i - x.u_i)^{p-1} / phi_i .

It is the critical point of the concave (p < 1) or convex (p > 1) function
x -> (1/p) sum w (h - x.u)^p / phi (log for p = 0), which is what the damped
Newton iteration below minimises or maximises.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .body import ConvexBody, centroid, volume
from .errors import (
    ConvexFlowError,
    DimensionUnsupported,
    InteriorLost,
    NotConverged,
    SymmetryViolation,
)


@dataclass(frozen=True)
class EntropyParams:
    """Exponent ``p`` and weight ``phi`` (None means phi == 1)."""

    p: float
    phi: np.ndarray | None = None
    phi_is_even: bool = False
    body_is_symmetric: bool = False
    phi_id: str = "1"

    def check(self, K: ConvexBody) -> None:
        n = K.dim
        if not np.isfinite(self.p) or self.p < -n:
            raise ConvexFlowError(f"p must lie in [-{n}, inf), got {self.p}")
        if self.phi is None:
            return
        phi = np.asarray(self.phi)
        if phi.shape != K.h.shape:
            raise ConvexFlowError("phi samples do not match the body's grid")
        if phi.min() <= 0.0:
            raise ConvexFlowError("phi must be positive")
        if self.phi_is_even and np.max(np.abs(phi - phi[K.grid.antipode])) >= 1e-10:
            raise SymmetryViolation("phi is flagged even but phi(u) != phi(-u)")
        constant = np.ptp(phi) == 0.0
        if not constant and not self.body_is_symmetric and not (-n <= self.p <= -n + 1):
            raise SymmetryViolation(
                "a weighted entropy point with nonconstant phi needs p in "
                f"[-{n}, {-n + 1}] or an origin-symmetric body"
            )

    def inv_phi(self, K: ConvexBody) -> np.ndarray:
        if self.phi is None:
            return np.ones_like(K.h)
        return 1.0 / np.asarray(self.phi, dtype=float)

    @property
    def is_weighted(self) -> bool:
        return self.phi is not None and np.ptp(self.phi) > 0.0


@dataclass
class EntropyReport:
    """Entropy point with the functional values for one body and one (p, phi)."""

    p: float
    phi_id: str
    e_point: np.ndarray
    A_value: float
    B_value: float | None = None
    residual: float = 0.0
    extra: dict = field(default_factory=dict)

    CSV_HEADER_2D = ("p", "phi_id", "e_x", "e_y", "A", "B", "residual")
    CSV_HEADER_3D = ("p", "phi_id", "e_x", "e_y", "e_z", "A", "B", "residual")

    def csv_header(self) -> tuple:
        return self.CSV_HEADER_2D if len(self.e_point) == 2 else self.CSV_HEADER_3D

    def csv_row(self) -> list:
        B = "" if self.B_value is None else repr(float(self.B_value))
        return [repr(float(self.p)), self.phi_id, *(repr(float(c)) for c in self.e_point),
                repr(float(self.A_value)), B, repr(float(self.residual))]


def _residual(K: ConvexBody, p: float, inv_phi: np.ndarray, x: np.ndarray):
    u, w = K.grid.nodes, K.grid.weights
    t = K.h - u @ x
    wt = w * inv_phi * t ** (p - 1.0)
    G = wt @ u
    return t, G, float(np.sum(wt))


def _merit(t: np.ndarray, p: float, wphi: np.ndarray) -> float:
    # convex function whose minimiser is the entropy point
    if p == 0.0:
        return -float(wphi @ np.log(t))
    value = float(wphi @ t**p) / p
    return -value if p < 1.0 else value


def entropy_point(K: ConvexBody, params: EntropyParams, x0=None, tol: float = 1e-10,
                  max_iter: int = 100) -> tuple[np.ndarray, float]:
    """Entropy point of K and the relative residual |G| / sum w t^{p-1}/phi.

    Damped Newton from the centroid; steps are halved until the iterate stays
    strictly inside K and the convex merit function decreases.
    """
    params.check(K)
    p = float(params.p)
    n = K.dim
    if p == 1.0:
        if params.body_is_symmetric or K.is_symmetric():
            return np.zeros(n), 0.0
        raise ConvexFlowError("p = 1 is only admissible for origin-symmetric bodies")
    u = K.grid.nodes
    inv_phi = params.inv_phi(K)
    wphi = K.grid.weights * inv_phi
    x = centroid(K) if x0 is None else np.asarray(x0, dtype=float)
    t, G, scale = _residual(K, p, inv_phi, x)
    if t.min() <= 0.0:
        raise InteriorLost("starting point is not interior")
    merit = _merit(t, p, wphi)
    for _ in range(max_iter):
        res = float(np.linalg.norm(G)) / scale
        if res < tol:
            return x, res
        J = (1.0 - p) * np.einsum("i,ij,ik->jk", wphi * t ** (p - 2.0), u, u)
        dx = -np.linalg.solve(J, G)
        lam = 1.0
        for _ in range(60):
            x_new = x + lam * dx
            t_new = K.h - u @ x_new
            if t_new.min() > 0.0:
                m_new = _merit(t_new, p, wphi)
                if m_new <= merit + 1e-14 * abs(merit):
                    break
            lam *= 0.5
        else:
            raise InteriorLost("step halving could not keep the iterate inside the body")
        x = x_new
        merit = m_new
        t, G, scale = _residual(K, p, inv_phi, x)
    res = float(np.linalg.norm(G)) / scale
    if res < tol:
        return x, res
    raise NotConverged(f"entropy point residual {res:.3e} after {max_iter} iterations")


def entropy_A(K: ConvexBody, params: EntropyParams, e=None) -> float:
    """A_p = V(K) (int (h - e.u)^p / phi)^{-n/p}; exponential branch at p = 0.

    At p = 0 the mean of -log(h - e.u) is taken against the probability
    measure proportional to dsigma/phi.
    """
    if e is None:
        e, _ = entropy_point(K, params)
    p = float(params.p)
    n = K.dim
    t = K.h - K.grid.nodes @ np.asarray(e, dtype=float)
    if t.min() <= 0.0:
        raise InteriorLost("entropy point is not interior")
    wphi = K.grid.weights * params.inv_phi(K)
    V = volume(K)
    if p == 0.0:
        return V * float(np.exp(-n * (wphi @ np.log(t)) / np.sum(wphi)))
    return V * float(wphi @ t**p) ** (-n / p)


def entropy_B(K: ConvexBody, params: EntropyParams, Lambda: ConvexBody, A: float | None = None) -> float:
    """B_p = V(K)^{n-1} A_p(K) / V(Lambda)^{n-1}, Lambda the curvature image."""
    if K.dim != 2:
        raise DimensionUnsupported("B_p is only available in the plane")
    if A is None:
        A = entropy_A(K, params)
    n = K.dim
    return (volume(K) / volume(Lambda)) ** (n - 1) * A


def santalo_point(K: ConvexBody) -> np.ndarray:
    """Entropy point for p = -n, the minimiser of the polar volume."""
    return entropy_point(K, EntropyParams(p=-K.dim))[0]


def santalo_product(K: ConvexBody, e=None) -> float:
    """V(K) V((K - e)^*) at the Santalo point (equal to A_{-n} / n)."""
    return entropy_A(K, EntropyParams(p=-K.dim), e) / K.dim


def gl_invariant(K: ConvexBody) -> float:
    """V(K) int h^{-n} dsigma, unchanged by linear maps of the body."""
    return volume(K) * float(K.grid.weights @ K.h ** (-K.dim))


def entropy_report(K: ConvexBody, params: EntropyParams, Lambda: ConvexBody | None = None) -> EntropyReport:
    e, res = entropy_point(K, params)
    A = entropy_A(K, params, e)
    B = entropy_B(K, params, Lambda, A) if Lambda is not None else None
    return EntropyReport(p=float(params.p), phi_id=params.phi_id, e_point=e, A_value=A,
                         B_value=B, residual=res)
