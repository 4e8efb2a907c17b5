"""Random bodies and the verification experiments built on the flows.

Every experiment returns an :class:`ExperimentResult` with the measured
quantities, the tolerance it was judged against and a pass / fail /
inconclusive status.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats
from scipy.special import sph_harm_y

from .body import (
    ConvexBody,
    ball,
    centroid,
    circumcenter,
    ellipsoid,
    hausdorff_distance,
    mean_width,
    polar_volume,
    rotation_2d,
    translate,
    unit_ball_volume,
    volume,
)
from .entropy import EntropyParams, entropy_A, entropy_point, santalo_point
from .errors import ConvexFlowError, DimensionUnsupported, RejectionExhausted
from .flow import CONTRACTING, EXPANDING, FlowConfig, FlowRun, affine_normalized, polar_duality_check, run
from .grid import SphereGrid, make_circle_grid, make_sphere_grid
from .minkowski import MeasureDensity, curvature_image, self_similar_solve, solve_minkowski_2d

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass
class ExperimentResult:
    experiment: str
    inputs: dict
    measured: dict
    status: str
    tolerance: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    series: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    @property
    def digest(self) -> str:
        blob = json.dumps(self.inputs, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def record(self) -> dict:
        out = asdict(self)
        del out["series"]
        out["digest"] = self.digest
        return out


def _fingerprint(values) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype=float).tobytes()).hexdigest()[:16]


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


# ---------------------------------------------------------------------------
# random bodies


def _real_harmonics(u: np.ndarray, degree: int) -> np.ndarray:
    """Orthonormal real spherical harmonics of one degree at unit vectors u."""
    theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(u[:, 1], u[:, 0]), 2.0 * np.pi)
    cols = []
    for m in range(-degree, degree + 1):
        Y = sph_harm_y(degree, abs(m), theta, phi)
        if m == 0:
            cols.append(Y.real)
        elif m > 0:
            cols.append(np.sqrt(2.0) * Y.real)
        else:
            cols.append(np.sqrt(2.0) * Y.imag)
    return np.stack(cols, axis=1)


def random_body(seed: int, n: int, amplitude: float, symmetric: bool = False,
                grid: SphereGrid | None = None, max_tries: int = 1000) -> ConvexBody:
    """Smooth random convex body around the unit ball.

    Plane: radius of curvature rho = 1 + sum_{k=2..8} (a_k cos k + b_k sin k),
    scaled so min rho = 1 - amplitude, then the Minkowski solve.  Sphere:
    h = 1 + a combination of degree 2..4 harmonics (even degrees when
    symmetric) scaled so the smallest principal radius is 1 - amplitude,
    redrawn until it exceeds 0.05 on the grid.
    """
    if not 0.0 <= amplitude < 0.9:
        raise ConvexFlowError(f"amplitude must lie in [0, 0.9), got {amplitude}")
    rng = np.random.default_rng(seed)
    if n == 2:
        grid = make_circle_grid(512) if grid is None else grid
        ks = np.arange(2, 9)
        if symmetric:
            ks = ks[ks % 2 == 0]
        a = rng.normal(size=ks.size) / ks
        b = rng.normal(size=ks.size) / ks
        pert = np.cos(np.outer(grid.theta, ks)) @ a + np.sin(np.outer(grid.theta, ks)) @ b
        if amplitude == 0.0 or pert.min() >= 0.0:
            pert = np.zeros_like(pert)
        else:
            pert *= amplitude / -pert.min()
        return solve_minkowski_2d(MeasureDensity(grid, 1.0 + pert))
    if n != 3:
        raise DimensionUnsupported(f"random bodies exist for n = 2, 3, not {n}")
    grid = make_sphere_grid(4) if grid is None else grid
    if amplitude == 0.0:
        return ball(grid)
    degrees = (2, 4) if symmetric else (2, 3, 4)
    basis = np.hstack([_real_harmonics(grid.nodes, l) / l for l in degrees])
    for _ in range(max_tries):
        pert = basis @ rng.normal(size=basis.shape[1])
        # radii of 1 + s*pert are 1 + s*eig(radii(pert)): scale is linear
        low = float(np.min(np.linalg.eigvalsh(grid.radii(pert))))
        if low >= 0.0:
            continue
        K = ConvexBody(grid, 1.0 + pert * (amplitude / -low), validate=False)
        if K.min_radius > 0.05:
            return K.with_h(K.h)
    raise RejectionExhausted(f"no convex sample in {max_tries} draws (amplitude {amplitude})")


def random_ellipse(seed: int, grid: SphereGrid | None = None, max_ratio: float = 2.0,
                   translate_by: float = 0.0) -> ConvexBody:
    """Area-preserving random ellipse, optionally translated off the origin."""
    rng = np.random.default_rng(seed)
    grid = make_circle_grid(512) if grid is None else grid
    a = np.exp(rng.uniform(0.0, np.log(max_ratio)) / 2.0)
    E = ellipsoid(grid, [a, 1.0 / a], rotation_2d(rng.uniform(0.0, np.pi)))
    if translate_by:
        E = translate(E, translate_by * rng.uniform(-1.0, 1.0, size=2))
    return E


# ---------------------------------------------------------------------------
# inequality verifiers


def verify_lutwak(K: ConvexBody, slack: float = 1e-8, sign_flip: bool = False) -> ExperimentResult:
    """V(K) V((K - e)^*) <= (V(Lambda)/V(K))^{n-1} omega_n^2 <= omega_n^2 with e the Santalo point.

    ``sign_flip`` deliberately uses K + e instead of K - e (negative control).
    """
    if K.dim != 2:
        raise DimensionUnsupported("the curvature image is only available in the plane")
    n = K.dim
    e = santalo_point(K)
    center = -e if sign_flip else e
    V = volume(K)
    try:
        left = V * polar_volume(K, center)
    except ConvexFlowError:
        left = math.inf
    Lam = curvature_image(translate(K, -e), EntropyParams(p=-n))
    w2 = unit_ball_volume(n) ** 2
    middle = (volume(Lam) / V) ** (n - 1) * w2
    ok = left <= middle * (1 + slack) and middle <= w2 * (1 + slack)
    return ExperimentResult(
        "lutwak", {"grid": K.grid.identifier, "sign_flip": sign_flip},
        {"left": left, "middle": middle, "right": w2, "equality_gap": 1.0 - left / w2,
         "slack_left": middle - left, "slack_right": w2 - middle},
        _status(ok), {"relative_slack": slack},
    )


def sharp_2d_constant(p: float) -> float:
    """pi (2 pi)^{-2/p}, or pi on the exponential branch p = 0."""
    return math.pi if p == 0.0 else math.pi * (2.0 * math.pi) ** (-2.0 / p)


def verify_sharp_2d(K: ConvexBody, p: float, slack: float = 1e-8) -> ExperimentResult:
    """A_p(K) against pi (2 pi)^{-2/p} V(Lambda_p K)/V(K): >= for p > 1, <= for -2 < p < 1."""
    if K.dim != 2:
        raise DimensionUnsupported("the sharp inequalities are planar")
    if p == 1.0 or p <= -2.0:
        raise ConvexFlowError("the sharp planar inequality needs p in (-2, 1) or p > 1")
    params = EntropyParams(p=p)
    e, _ = entropy_point(K, params)
    Kc = translate(K, -e)
    A = entropy_A(Kc, params, np.zeros(2))
    Lam = curvature_image(Kc, params)
    right = sharp_2d_constant(p) * volume(Lam) / volume(K)
    if p > 1.0:
        ok, branch = A >= right * (1 - slack), "ge"
    else:
        ok, branch = A <= right * (1 + slack), "le"
    return ExperimentResult(
        "sharp2d", {"grid": K.grid.identifier, "p": p},
        {"A_p": A, "bound": right, "branch": branch, "relative_gap": (A - right) / right},
        _status(ok), {"relative_slack": slack},
    )


def verify_urysohn_chain(K: ConvexBody, p: float, slack: float = 1e-8) -> ExperimentResult:
    """pi V(Lambda_p K)/V(K) <= V(K)/(w/2)^2 <= pi for p > 1."""
    if K.dim != 2:
        raise DimensionUnsupported("the Urysohn chain is checked in the plane")
    if p <= 1.0:
        raise ConvexFlowError("the Urysohn chain needs p > 1")
    params = EntropyParams(p=p)
    e, _ = entropy_point(K, params)
    Kc = translate(K, -e)
    Lam = curvature_image(Kc, params)
    V = volume(K)
    first = math.pi * volume(Lam) / V
    middle = V / (mean_width(K) / 2.0) ** 2
    ok = first <= middle * (1 + slack) and middle <= math.pi * (1 + slack)
    return ExperimentResult(
        "urysohn", {"grid": K.grid.identifier, "p": p},
        {"first": first, "middle": middle, "right": math.pi},
        _status(ok), {"relative_slack": slack},
    )


def stability_measurement(K: ConvexBody, p: float) -> tuple[float, float]:
    """(eps, d): eps = V(K)/V(Lambda_p K) - 1 and the distance to the nearest disk.

    d is the Hausdorff distance from the circumcentred, area-pi rescaled body
    to the best origin-centred disk, i.e. (max h - min h)/2.
    """
    params = EntropyParams(p=p)
    e, _ = entropy_point(K, params)
    Kc = translate(K, -e)
    eps = volume(Kc) / volume(curvature_image(Kc, params)) - 1.0
    x, _ = circumcenter(Kc)
    h = (Kc.h - Kc.grid.nodes @ x) * math.sqrt(math.pi / volume(Kc))
    return eps, 0.5 * float(h.max() - h.min())


def stability_sweep(p: float, count: int, seed: int, grid: SphereGrid | None = None,
                    amplitudes=(0.02, 0.85)) -> ExperimentResult:
    """Fit the smallest gamma with d <= gamma eps^{1/3} over random bodies."""
    if p <= 1.0:
        raise ConvexFlowError("the stability sweep needs p > 1")
    grid = make_circle_grid(256) if grid is None else grid
    amps = np.linspace(amplitudes[0], amplitudes[1], count)
    eps, dist = [], []
    for i, a in enumerate(amps):
        K = random_body(seed * 100_003 + i, 2, float(a), grid=grid)
        e_, d_ = stability_measurement(K, p)
        eps.append(e_)
        dist.append(d_)
    eps, dist = np.array(eps), np.array(dist)
    positive = eps > 0
    ratios = dist[positive] / np.cbrt(eps[positive])
    gamma = float(ratios.max()) if ratios.size else math.inf
    rho = float(stats.spearmanr(eps, dist).statistic)
    ok = bool(np.all(positive)) and math.isfinite(gamma) and rho > 0.0
    return ExperimentResult(
        "stability", {"p": p, "count": count, "seed": seed, "grid": grid.identifier},
        {"gamma_hat": gamma, "spearman": rho, "eps_min": float(eps.min()),
         "eps_max": float(eps.max()), "d_max": float(dist.max())},
        _status(ok), {"gamma": "finite", "spearman": "> 0"},
        series={"eps": eps, "distance": dist, "amplitude": amps},
    )


# ---------------------------------------------------------------------------
# convergence experiments


THEOREMS = ("A1", "A2", "A3", "1.1", "1.2", "1.3")


@dataclass
class ConvergenceSetup:
    """Initial body, flow configuration and the limit the run is compared to."""

    K0: ConvexBody
    config: FlowConfig
    target: ConvexBody
    tolerance: float
    use_affine: bool


def convergence_setup(theorem: str, seed: int, grid: SphereGrid, p: float | None = None,
                      phi: np.ndarray | None = None, amplitude: float = 0.4,
                      cfl: float | None = None, max_steps: int = 1_000_000,
                      stop_tol: float = 1e-7) -> ConvergenceSetup:
    """Build the theorem-specific initial body, centering and predicted limit."""
    if theorem not in THEOREMS:
        raise ConvexFlowError(f"unknown theorem id {theorem!r}; expected one of {THEOREMS}")
    n = grid.dim
    base = dict(max_steps=max_steps, stop_hausdorff_tol=stop_tol, seed=seed)
    if theorem in ("1.1", "1.3"):
        if n != 3:
            raise DimensionUnsupported(f"theorem {theorem} is run on the sphere grid")
        K = random_body(seed, 3, amplitude, grid=grid)
        cfg = dict(base, cfl=0.5 if cfl is None else cfl, renormalize="volume+affine",
                   recenter_every=10, monotone_tol=1e-6)
        if theorem == "1.1":
            K = translate(K, -santalo_point(K))
            config = FlowConfig(p=-3.0, kind=EXPANDING, **cfg)
        else:
            K = translate(K, -centroid(K))
            config = FlowConfig(p=-3.0, kind=CONTRACTING, **cfg)
        return ConvergenceSetup(K, config, ball(grid), 5e-2, True)
    if n != 2:
        raise DimensionUnsupported(f"theorem {theorem} is run on the circle grid")
    cfl = 0.2 if cfl is None else cfl
    if theorem == "A1":
        if p is None:
            raise ConvexFlowError("theorem A1 needs p")
        K = random_body(seed, 2, amplitude, grid=grid)
        K = translate(K, -entropy_point(K, EntropyParams(p=p))[0])
        mode = "volume+affine" if p == -2.0 else "volume"
        config = FlowConfig(p=p, cfl=cfl, renormalize=mode, recenter_every=50, **base)
        return ConvergenceSetup(K, config, ball(grid), 1e-3, p == -2.0)
    if theorem == "1.2":
        p = 1.0
    if p is None:
        raise ConvexFlowError(f"theorem {theorem} needs p")
    symmetric = theorem != "A3"
    K = random_body(seed, 2, amplitude, symmetric=symmetric, grid=grid)
    params = EntropyParams(p=p, phi=phi, phi_is_even=phi is not None, body_is_symmetric=symmetric)
    if not symmetric:
        K = translate(K, -entropy_point(K, params)[0])
    config = FlowConfig(p=p, phi=phi, cfl=cfl, recenter_every=0 if symmetric else 50, **base)
    target = self_similar_solve(grid, p, phi, target_volume=math.pi, symmetric=symmetric).body
    return ConvergenceSetup(K, config, target, 1e-3, False)


def convergence_experiment(theorem: str, seed: int, grid: SphereGrid, p: float | None = None,
                           phi: np.ndarray | None = None, tolerance: float | None = None,
                           **kwargs) -> tuple[ExperimentResult, FlowRun]:
    """Run a flow to its plateau and compare the normalized body with the predicted limit."""
    setup = convergence_setup(theorem, seed, grid, p, phi, **kwargs)
    tol = setup.tolerance if tolerance is None else tolerance
    result = run(setup.K0, setup.config)
    final = result.affine_normalized if setup.use_affine else result.normalized
    distance = hausdorff_distance(final, setup.target)
    n = grid.dim
    A = result.trace.column("A_p")
    measured = {
        "hausdorff": distance,
        "steps": result.state.step,
        "t": result.state.t,
        "tau": result.state.tau,
        "A_initial": float(A[0]),
        "A_terminal": float(A[-1]),
        "A_monotone": bool(all(result.trace.monotone_A)),
        "B_monotone": bool(all(result.trace.monotone_B)),
        "bracket_nonnegative": bool(all(result.trace.bracket)),
        "run_status": result.status,
    }
    checks = [distance < tol, measured["A_monotone"], measured["B_monotone"]]
    tolerance_info = {"hausdorff": tol, "monotone": setup.config.monotone_tol}
    if setup.config.p == -n and setup.config.kind == EXPANDING:
        floor = (1 - 1e-4) if n == 2 else 0.98
        limit = n * unit_ball_volume(n) ** 2
        measured["A_limit"] = limit
        checks.append(A[-1] >= floor * limit)
        tolerance_info["A_terminal_fraction"] = floor
    if result.status == "collapse":
        status = INCONCLUSIVE
    else:
        status = _status(all(checks) and result.status == "plateau")
    inputs = {"theorem": theorem, "seed": seed, "grid": grid.identifier, "p": setup.config.p,
              "phi": setup.config.phi_id if phi is None else [float(v) for v in phi[:4]]}
    return ExperimentResult(f"convergence:{theorem}", inputs, measured, status, tolerance_info), result


def duality_body(seed: int, grid: SphereGrid, amplitude: float = 0.4, radius: float = 0.8) -> ConvexBody:
    """Random body about its Santalo point with volume radius ``radius``.

    The expanding p = -n flow from a ball of radius r blows up at
    t = r^{-2n} / (2n), so radius 0.8 leaves room for t = 0.3 in both dimensions.
    """
    n = grid.dim
    K = random_body(seed, n, amplitude, grid=grid)
    K = translate(K, -santalo_point(K))
    return K.scaled(radius * (unit_ball_volume(n) / volume(K)) ** (1.0 / n))


def duality_experiment(K0: ConvexBody, t_end: float, tolerance: float, compare_every: int = 50,
                       cfl: float = 0.2) -> ExperimentResult:
    """Co-evolution of polars: max Hausdorff(polar(K_t), L_t) over [0, t_end]."""
    check = polar_duality_check(K0, t_end, cfl=cfl, compare_every=compare_every)
    return ExperimentResult(
        "duality", {"grid": K0.grid.identifier, "t_end": t_end, "h0": _fingerprint(K0.h)},
        {"max_deviation": check.max_deviation, "samples": int(check.times.size)},
        _status(check.max_deviation < tolerance), {"max_deviation": tolerance},
    )
