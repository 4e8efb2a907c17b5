"""Time integration of the expanding and contracting Gauss-curvature flows.

Expanding:    d/dt h = phi h^{2-p} S          (S = det r = 1 / Gauss curvature)
Contracting:  d/dt h = -1 / (h^n S)

Both right-hand sides F are homogeneous in h of degree beta (n + 1 - p and
1 - 2n respectively).  The integrator therefore works with the volume
normalized support function h_hat = h / lam (V(h_hat) = omega_n): one step
integrates d/dtau h = F(h) from h_hat over a natural-time increment dtau and
rescales the result back to volume omega_n.  The physical time advances by
dt = dtau * lam^{1 - beta}, which is exact for a homogeneous F.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .body import (
    ConvexBody,
    Snapshot,
    centroid,
    covariance_normalize,
    hausdorff_distance,
    mixed_volume,
    polar_body,
    translate,
    unit_ball_volume,
    volume,
)
from .entropy import EntropyParams, entropy_A, entropy_B, entropy_point
from .errors import ConvexFlowError, NonConvexBody, OriginNotInterior, StepCollapse
from .minkowski import curvature_image

EXPANDING = "expanding"
CONTRACTING = "contracting"
RENORMALIZE_MODES = ("none", "volume", "volume+affine")
TRACE_COLUMNS = ("step", "t", "dt", "V", "h_min", "h_max", "K_min", "K_max",
                 "A_p", "B_p", "drift", "santalo_product")


@dataclass
class FlowConfig:
    """Parameters of one flow run.

    ``stop_hausdorff_tol`` bounds the rate of change of the normalized body,
    i.e. the sup-norm change of h_hat per unit of natural time.  For
    contracting runs ``p`` only selects the diagnostic functional.
    """

    p: float
    phi: np.ndarray | None = None
    kind: str = EXPANDING
    cfl: float = 0.2
    max_steps: int = 200_000
    stop_hausdorff_tol: float = 1e-7
    renormalize: str = "volume"
    affine_every: int = 20
    seed: int = 0
    t_end: float | None = None
    snapshot_every: int = 0
    max_halvings: int = 8
    diagnostics: bool = True
    recenter_every: int = 0
    monotone_tol: float = 1e-8
    min_steps: int = 10
    phi_id: str = "1"

    def __post_init__(self):
        if self.kind not in (EXPANDING, CONTRACTING):
            raise ConvexFlowError(f"flow kind must be '{EXPANDING}' or '{CONTRACTING}', got {self.kind!r}")
        if not 0.0 < self.cfl <= 0.5:
            raise ConvexFlowError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if self.renormalize not in RENORMALIZE_MODES:
            raise ConvexFlowError(f"renormalize must be one of {RENORMALIZE_MODES}, got {self.renormalize!r}")
        if self.phi is not None:
            self.phi = np.asarray(self.phi, dtype=float)
            if self.phi.min() <= 0.0:
                raise ConvexFlowError("phi must be positive")

    def degree(self, n: int) -> float:
        """Homogeneity degree beta of the speed in h."""
        return n + 1.0 - self.p if self.kind == EXPANDING else 1.0 - 2.0 * n


@dataclass
class FlowState:
    """Normalized support samples plus the scale and clocks."""

    grid: object
    h: np.ndarray
    log_scale: float = 0.0
    t: float = 0.0
    tau: float = 0.0
    step: int = 0

    @property
    def body(self) -> ConvexBody:
        return ConvexBody(self.grid, self.h)

    @property
    def scale(self) -> float:
        return math.exp(self.log_scale)

    def physical(self) -> ConvexBody:
        return ConvexBody(self.grid, self.scale * self.h)


@dataclass
class FlowTrace:
    """Per accepted step diagnostics (column order fixed by TRACE_COLUMNS)."""

    rows: list = field(default_factory=list)
    monotone_A: list = field(default_factory=list)
    monotone_B: list = field(default_factory=list)
    bracket: list = field(default_factory=list)
    e_drift: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    status: str = "running"
    message: str = ""

    def column(self, name: str) -> np.ndarray:
        i = TRACE_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def entropy_monotone(self) -> bool:
        return all(self.monotone_A) and all(self.monotone_B)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


@dataclass
class FlowRun:
    trace: FlowTrace
    state: FlowState
    normalized: ConvexBody
    affine_normalized: ConvexBody | None
    status: str
    initial: ConvexBody | None = None


# ---------------------------------------------------------------------------
# speed and stepping


def _radii_data(grid, h):
    """(S, largest principal radius, smallest principal radius)."""
    if grid.dim == 2:
        rho = grid.radii(h)
        return rho, rho, rho
    r11, r12, r22, _, _ = grid.derivatives(h)
    tr = 0.5 * (r11 + r22)
    disc = np.sqrt(0.25 * (r11 - r22) ** 2 + r12 * r12)
    return r11 * r22 - r12 * r12, tr + disc, tr - disc


def _rhs(grid, h, config: FlowConfig):
    S, lam_max, _ = _radii_data(grid, h)
    n = grid.dim
    if config.kind == EXPANDING:
        F = h ** (2.0 - config.p) * S
        if config.phi is not None:
            F = F * config.phi
    else:
        F = -1.0 / (h**n * S)
    return F, S, lam_max


def speed(K: ConvexBody, config: FlowConfig) -> np.ndarray:
    """Normal speed of the flow at each grid node."""
    if not K.origin_interior:
        raise OriginNotInterior("flow speed needs h > 0")
    if not K.is_convex():
        raise NonConvexBody("flow speed needs a strictly convex body")
    return _rhs(K.grid, K.h, config)[0]


def diffusion_coefficient(grid, h, config: FlowConfig) -> np.ndarray:
    """Coefficient of the leading second-order term of the linearized speed.

    Expanding: phi h^{2-p} lambda_max(cof r); contracting:
    lambda_max(cof r) / (h^n S^2).  For n <= 3 the cofactor matrix of r has
    the same largest eigenvalue as r (n = 3) or is 1 (n = 2).
    """
    S, lam_max, _ = _radii_data(grid, h)
    cof_max = np.ones_like(h) if grid.dim == 2 else lam_max
    if config.kind == EXPANDING:
        D = h ** (2.0 - config.p) * cof_max
        if config.phi is not None:
            D = D * config.phi
        return D
    return cof_max / (h**grid.dim * S * S)


def stable_dtau(grid, h, config: FlowConfig) -> float:
    cfl = min(config.cfl, grid.stable_cfl)
    return cfl * grid.spacing**2 / float(np.max(diffusion_coefficient(grid, h, config)))


def _valid(grid, h) -> bool:
    if not np.all(np.isfinite(h)) or h.min() <= 0.0:
        return False
    _, _, lam_min = _radii_data(grid, h)
    return bool(np.isfinite(lam_min).all() and lam_min.min() > 1e-10 * h.max())


def _rk4(grid, h, dtau, config: FlowConfig):
    k1 = _rhs(grid, h, config)[0]
    stages = [k1]
    for coef in (0.5, 0.5, 1.0):
        trial = h + coef * dtau * stages[-1]
        if not np.all(np.isfinite(trial)) or trial.min() <= 0.0:
            return None
        stages.append(_rhs(grid, trial, config)[0])
    k1, k2, k3, k4 = stages
    return h + dtau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _normalize(grid, h, mode: str):
    if mode == "none":
        return h, 0.0
    n = grid.dim
    S = _radii_data(grid, h)[0]
    V = float(grid.weights @ (h * S)) / n
    mu = (V / unit_ball_volume(n)) ** (1.0 / n)
    return h / mu, math.log(mu)


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def advance(state: FlowState, config: FlowConfig, dtau: float) -> FlowState:
    """RK4 step of natural length ``dtau`` with dt halving on failure."""
    grid = state.grid
    beta = config.degree(grid.dim)
    for _ in range(config.max_halvings + 1):
        h_new = _rk4(grid, state.h, dtau, config)
        if h_new is not None and _valid(grid, h_new):
            h_norm, dlog = _normalize(grid, h_new, config.renormalize)
            dt = dtau * _exp((1.0 - beta) * state.log_scale)
            return FlowState(grid, h_norm, state.log_scale + dlog, state.t + dt,
                             state.tau + dtau, state.step + 1)
        dtau *= 0.5
    raise StepCollapse(
        f"convexity or positivity lost at step {state.step + 1} after "
        f"{config.max_halvings} halvings (dtau = {dtau * 2:.3e})"
    )


def step(state: FlowState, config: FlowConfig, dt_max: float | None = None) -> FlowState:
    """One CFL-limited RK4 step; ``dt_max`` caps the physical time increment."""
    grid = state.grid
    dtau = stable_dtau(grid, state.h, config)
    if dt_max is not None:
        beta = config.degree(grid.dim)
        dtau = min(dtau, dt_max * _exp((beta - 1.0) * state.log_scale))
    return advance(state, config, dtau)


def initial_state(K0: ConvexBody, config: FlowConfig) -> FlowState:
    h, log_scale = _normalize(K0.grid, np.array(K0.h, dtype=float), config.renormalize)
    return FlowState(K0.grid, h, log_scale)


# ---------------------------------------------------------------------------
# runs


class _Diagnostics:
    """Entropy functionals of the normalized body, with monotonicity flags."""

    def __init__(self, K0: ConvexBody, config: FlowConfig):
        n = K0.dim
        self.config = config
        phi = config.phi
        even = phi is not None and bool(np.max(np.abs(phi - phi[K0.grid.antipode])) < 1e-10)
        self.params = EntropyParams(p=config.p, phi=phi, phi_is_even=even,
                                    body_is_symmetric=K0.is_symmetric(), phi_id=config.phi_id)
        self.santalo = EntropyParams(p=-n) if config.p == -n else None
        self.e = None
        self.e0 = None
        self.prev = None

    def measure(self, K: ConvexBody):
        p = self.config.p
        A = B = bracket = math.nan
        try:
            self.e, _ = entropy_point(K, self.params, x0=self.e)
            A = entropy_A(K, self.params, self.e)
            if K.dim == 2:
                Kc = translate(K, -self.e)
                Lam = curvature_image(Kc, self.params)
                B = entropy_B(Kc, self.params, Lam, A)
                bracket = mixed_volume(Kc, Lam) / volume(Lam) - 1.0
        except ConvexFlowError:
            self.e = None
        santalo = A / K.dim if self.santalo is not None else math.nan
        if self.e0 is None and self.e is not None:
            self.e0 = self.e.copy()
        tol = self.config.monotone_tol
        flags = None
        if self.prev is not None:
            A0, B0 = self.prev
            okA = not (A - A0 < -tol * abs(A0))
            okB = True
            if K.dim == 2 and p != 1.0 and np.isfinite(B) and np.isfinite(B0):
                okB = not ((math.log(B) - math.log(B0)) / (1.0 - p) < -tol)
            flags = (okA, okB, not bracket < -tol)
        self.prev = (A, B)
        return A, B, santalo, flags


def _recenter(K: ConvexBody, config: FlowConfig, diag: _Diagnostics) -> np.ndarray:
    if config.kind == CONTRACTING:
        return K.h - K.grid.nodes @ centroid(K)
    e, _ = entropy_point(K, diag.params, x0=diag.e)
    diag.e = None
    return K.h - K.grid.nodes @ e


def affine_normalized(K: ConvexBody) -> ConvexBody:
    """Covariance-isotropic SL(n) image of K (about the origin) with volume omega_n."""
    image, _ = covariance_normalize(K)
    n = K.dim
    return image.scaled((unit_ball_volume(n) / volume(image)) ** (1.0 / n))


def run(K0: ConvexBody, config: FlowConfig) -> FlowRun:
    """Integrate until the normalized shape stalls, t_end, max_steps or collapse.

    With ``renormalize='volume+affine'`` in the plane the SL(2) normalization
    is fed back into the state every ``affine_every`` steps; on the sphere it
    is applied to the reported body only.
    """
    grid = K0.grid
    n = grid.dim
    state = initial_state(K0, config)
    trace = FlowTrace()
    diag = _Diagnostics(K0, config)

    def record(state: FlowState, dt: float, drift: float):
        K = ConvexBody(grid, state.h)
        with np.errstate(over="ignore"):
            lam, lam_n, lam_n1 = np.exp(state.log_scale * np.array([1.0, n, n - 1.0]))
        V = volume(K) * lam_n
        if config.diagnostics:
            A, B, santalo, flags = diag.measure(K)
        else:
            A = B = santalo = math.nan
            flags = None
        Kmin, Kmax = 1.0 / (K.S.max() * lam_n1), 1.0 / (K.S.min() * lam_n1)
        trace.rows.append((state.step, state.t, dt, float(V), float(lam * K.h.min()), float(lam * K.h.max()),
                           float(Kmin), float(Kmax), A, B, drift, santalo))
        if flags is not None:
            trace.monotone_A.append(flags[0])
            trace.monotone_B.append(flags[1])
            trace.bracket.append(flags[2])
        if diag.e is not None and diag.e0 is not None:
            trace.e_drift.append(float(np.linalg.norm(diag.e - diag.e0)))
        if config.snapshot_every and state.step % config.snapshot_every == 0:
            trace.snapshots.append(Snapshot.of(K, state.t))

    record(state, 0.0, 0.0)
    affine_feedback = config.renormalize == "volume+affine" and n == 2
    status = "max_steps"
    try:
        while state.step < config.max_steps:
            dt_max = None if config.t_end is None else config.t_end - state.t
            new = step(state, config, dt_max)
            # without t_end the normalized shape is the target, so a stalled
            # physical clock near a finite-time singularity is harmless
            stalled = config.t_end is not None and new.t <= state.t
            if stalled or not math.isfinite(new.log_scale) or abs(new.log_scale) > 700:
                status = "blowup"
                trace.message = f"time stalls at t = {state.t!r} (finite-time singularity)"
                break
            h_new = new.h
            if affine_feedback and new.step % config.affine_every == 0:
                h_new = affine_normalized(ConvexBody(grid, h_new)).h
            if config.recenter_every and new.step % config.recenter_every == 0:
                h_new = _recenter(ConvexBody(grid, h_new), config, diag)
            new.h = h_new
            drift = float(np.max(np.abs(new.h - state.h)))
            dtau = new.tau - state.tau
            dt = new.t - state.t
            state = new
            record(state, dt, drift)
            if config.t_end is not None and state.t >= config.t_end * (1.0 - 1e-15):
                status = "t_end"
                break
            if (config.t_end is None and state.step >= config.min_steps
                    and drift < config.stop_hausdorff_tol * dtau):
                status = "plateau"
                break
    except StepCollapse as exc:
        status = "collapse"
        trace.message = str(exc)
    trace.status = status
    normalized = ConvexBody(grid, state.h)
    affine = None
    if config.renormalize == "volume+affine":
        affine = affine_normalized(normalized)
    return FlowRun(trace, state, normalized, affine, status, K0)


# ---------------------------------------------------------------------------
# polar co-evolution


@dataclass
class DualityCheck:
    max_deviation: float
    times: np.ndarray
    deviations: np.ndarray


def polar_duality_check(K0: ConvexBody, t_end: float, cfl: float = 0.2, compare_every: int = 50,
                        p: float | None = None) -> DualityCheck:
    """Co-evolve K_t (expanding, p = -n) and L_t (contracting) from L_0 = K_0^*.

    Both runs share one physical time grid; returns max_t of the Hausdorff
    distance between polar(K_t) and L_t.  Passing another ``p`` runs a
    mismatched expanding flow (negative control).
    """
    n = K0.dim
    p = -n if p is None else p
    cfg_K = FlowConfig(p=p, kind=EXPANDING, cfl=cfl, diagnostics=False)
    cfg_L = FlowConfig(p=-n, kind=CONTRACTING, cfl=cfl, diagnostics=False)
    sK = initial_state(K0, cfg_K)
    sL = initial_state(polar_body(K0), cfg_L)
    grid = K0.grid
    bK, bL = cfg_K.degree(n), cfg_L.degree(n)
    times, devs = [], []

    def compare():
        PK = polar_body(sK.physical())
        devs.append(hausdorff_distance(PK, sL.physical()))
        times.append(sK.t)

    compare()
    count = 0
    while sK.t < t_end * (1.0 - 1e-15):
        dt = min(stable_dtau(grid, sK.h, cfg_K) * math.exp((1.0 - bK) * sK.log_scale),
                 stable_dtau(grid, sL.h, cfg_L) * math.exp((1.0 - bL) * sL.log_scale),
                 t_end - sK.t)
        sK = advance(sK, cfg_K, dt * math.exp((bK - 1.0) * sK.log_scale))
        sL = advance(sL, cfg_L, dt * math.exp((bL - 1.0) * sL.log_scale))
        count += 1
        if count % compare_every == 0:
            compare()
    if count % compare_every:
        compare()
    return DualityCheck(float(max(devs)), np.array(times), np.array(devs))
