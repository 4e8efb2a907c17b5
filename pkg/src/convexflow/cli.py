"""Command-line front end.

Every command resolves a flat key=value configuration (CLI flag > config
file > default), writes the resolved configuration next to its outputs,
runs one or more experiments, appends one manifest record per experiment and
prints one tab-separated summary line per record.

Exit codes: 0 all pass, 1 any fail, 2 usage error, 3 inconclusive present.
"""
from __future__ import annotations

import argparse
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import plotting
from .body import Snapshot, ball, centroid, hausdorff_distance, translate
from .entropy import EntropyParams, entropy_point, entropy_report
from .errors import ConvexFlowError, UsageError
from .experiments import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    ExperimentResult,
    convergence_experiment,
    duality_body,
    duality_experiment,
    random_body,
    stability_sweep,
    verify_lutwak,
    verify_sharp_2d,
    verify_urysohn_chain,
)
from .flow import CONTRACTING, EXPANDING, FlowConfig, run
from .grid import make_circle_grid, make_sphere_grid
from .io import Manifest, export_svg, output_root, write_snapshot, write_table
from .minkowski import self_similar_branches, self_similar_solve

COMMANDS = ("flow", "selfsimilar", "entropy", "verify", "sweep", "suite")
EXPERIMENTS = ("lutwak", "sharp2d", "urysohn", "stability", "duality")
PRESETS = {"thmA1": "A1", "thmA2": "A2", "thmA3": "A3", "thm11": "1.1", "thm12": "1.2", "thm13": "1.3"}
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
PHI_KEY = re.compile(r"^phi\.k(\d+)\.(cos|sin)$")


# ---------------------------------------------------------------------------
# configuration keys


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError
    return value


def _optional_float(text: str):
    return None if text.lower() == "none" else _float(text)


def _floats(text: str) -> tuple:
    return tuple(_float(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return "none" if value is None else str(value)


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable
    valid: str
    check: Callable = lambda v: True
    default: object = None
    commands: tuple = COMMANDS
    help: str = ""


def _default_grid(cfg):
    if cfg["dim"] == 3:
        return 5 if cfg.get("preset") in ("thm11", "thm13") else 4
    return 256 if cfg["command"] in ("sweep", "suite") else 512


_COUNTS = {"lutwak": 100, "sharp2d": 50, "urysohn": 50, "stability": 200, "duality": 3,
           "thmA1": 5, "thm11": 3, "thm13": 3}


def _default_count(cfg):
    if cfg["command"] == "sweep":
        return 20
    return _COUNTS.get(cfg.get("experiment") or cfg.get("preset"), 1)


def _default_amplitude(cfg):
    if cfg.get("preset") in ("thmA2", "thmA3", "thm12"):
        return 0.3
    return 0.5 if cfg["dim"] == 3 else 0.4


def _default_p_values(cfg):
    if cfg.get("p") is not None:
        return (cfg["p"],)
    table = {"sharp2d": (3.0, 0.5, 0.0), "urysohn": (1.5, 2.0, 4.0), "stability": (2.0,),
             "thmA1": (0.5, 2.0, 3.0, -2.0), "thmA2": (2.0,), "thmA3": (-1.0,), "thm12": (1.0,),
             "thm11": (-3.0,), "thm13": (-3.0,)}
    if cfg["command"] == "sweep":
        return (-2.0, -1.0, 0.0, 0.5, 2.0, 3.0)
    return table.get(cfg.get("experiment") or cfg.get("preset"), ())


def _default_max_steps(cfg):
    return {"suite": 1_000_000, "sweep": 3000}.get(cfg["command"], 200_000)


def _default_dim(cfg):
    return 3 if cfg.get("preset") in ("thm11", "thm13") else 2


KEYS = {k.name: k for k in [
    Key("dim", int, "2 or 3", lambda v: v in (2, 3), _default_dim),
    Key("grid", int, "even M >= 16 (dim 2) or icosphere level 2..7 (dim 3)", default=_default_grid,
        help="circle grid size or icosphere level"),
    Key("p", _optional_float, "a finite real number", commands=("flow", "selfsimilar", "entropy", "verify")),
    Key("p_values", _floats, "comma-separated finite reals", default=_default_p_values,
        commands=("verify", "sweep", "suite")),
    Key("seed", int, "integer >= 0", lambda v: v >= 0, 0),
    Key("count", int, "integer >= 1", lambda v: v >= 1, _default_count,
        commands=("entropy", "selfsimilar", "verify", "sweep", "suite")),
    Key("amplitude", _float, "real in [0, 0.9)", lambda v: 0.0 <= v < 0.9, _default_amplitude),
    Key("symmetric", _bool, "true or false", default=lambda cfg: cfg["command"] == "selfsimilar",
        commands=("flow", "selfsimilar", "entropy", "sweep")),
    Key("kind", str, f"{EXPANDING} or {CONTRACTING}", lambda v: v in (EXPANDING, CONTRACTING),
        EXPANDING, commands=("flow",)),
    Key("cfl", _float, "real in (0, 0.5]", lambda v: 0.0 < v <= 0.5, 0.2,
        commands=("flow", "sweep", "suite", "verify")),
    Key("max_steps", int, "integer >= 1", lambda v: v >= 1, _default_max_steps,
        commands=("flow", "sweep", "suite")),
    Key("stop_tol", _float, "real > 0", lambda v: v > 0.0, 1e-7, commands=("flow", "sweep", "suite")),
    Key("t_end", _optional_float, "real > 0 or none", lambda v: v is None or v > 0.0, None,
        commands=("flow", "verify")),
    Key("snapshot_every", int, "integer >= 0", lambda v: v >= 0, 0, commands=("flow", "suite")),
    Key("renormalize", str, "auto, none, volume or volume+affine",
        lambda v: v in ("auto", "none", "volume", "volume+affine"), "auto", commands=("flow",)),
    Key("experiment", str, "|".join(EXPERIMENTS), lambda v: v in EXPERIMENTS, commands=("verify",)),
    Key("preset", str, "|".join(PRESETS), lambda v: v in PRESETS, commands=("suite",)),
    Key("tolerance", _optional_float, "real > 0 or none", lambda v: v is None or v > 0.0, None),
    Key("jobs", int, "integer >= 1", lambda v: v >= 1, 1),
    Key("out", str, "a directory path", default=None),
]}
REQUIRED = {"flow": ("p",), "selfsimilar": ("p",), "entropy": ("p",), "verify": ("experiment",),
            "suite": ("preset",), "sweep": ()}
NOT_ECHOED = ("out", "jobs")


@dataclass
class RunConfig:
    command: str
    values: dict
    phi: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> str:
        lines = [f"command={self.command}"]
        for key in sorted(self.values):
            if key not in NOT_ECHOED:
                lines.append(f"{key}={_fmt(self.values[key])}")
        for (k, part), value in sorted(self.phi.items()):
            lines.append(f"phi.k{k}.{part}={value!r}")
        return "\n".join(lines) + "\n"

    def phi_samples(self, grid):
        """phi(theta) = 1 + sum (c_k cos k theta + s_k sin k theta); the k0.cos term replaces the 1."""
        if not self.phi:
            return None
        values = np.full(grid.size, self.phi.get((0, "cos"), 1.0))
        for (k, part), c in self.phi.items():
            if k > 0:
                values += c * (np.cos if part == "cos" else np.sin)(k * grid.theta)
        return values

    @property
    def phi_id(self) -> str:
        if not self.phi:
            return "1"
        parts = [_fmt(self.phi.get((0, "cos"), 1.0))]
        parts += [f"{c!r}{part}{k}" for (k, part), c in sorted(self.phi.items()) if k > 0]
        return "+".join(parts)

    @property
    def phi_is_even(self) -> bool:
        return all(k % 2 == 0 for (k, _), c in self.phi.items() if c != 0.0)


def read_config_file(path) -> dict:
    """Flat key=value lines; blank lines and '#' comments ignored."""
    out = {}
    for number, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{number}: expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def resolve(command: str, cli: dict, file: dict) -> RunConfig:
    """Merge raw string settings (cli over file), parse, validate and fill defaults."""
    raw = dict(file)
    file_command = raw.pop("command", command)
    if file_command != command:
        raise UsageError(f"config file is for command {file_command!r}, not {command!r}")
    raw.update(cli)
    phi = {}
    values = {"command": command}
    for key, text in raw.items():
        m = PHI_KEY.match(key)
        if m:
            k, part = int(m.group(1)), m.group(2)
            if k == 0 and part == "sin":
                raise UsageError("key 'phi.k0.sin' is not allowed (valid: phi.kN.cos / phi.kN.sin with N >= 1, or phi.k0.cos)")
            try:
                phi[(k, part)] = _float(text)
            except ValueError:
                raise UsageError(f"key '{key}': invalid value {text!r} (valid: a finite real number)") from None
            continue
        key_def = KEYS.get(key)
        if key_def is None:
            raise UsageError(f"unknown key '{key}' (valid keys: {', '.join(sorted(KEYS))}, phi.kN.cos, phi.kN.sin)")
        if command not in key_def.commands:
            raise UsageError(f"key '{key}' does not apply to command '{command}'")
        try:
            value = key_def.parse(text)
        except ValueError:
            raise UsageError(f"key '{key}': invalid value {text!r} (valid: {key_def.valid})") from None
        if not key_def.check(value):
            raise UsageError(f"key '{key}': value {text!r} out of range (valid: {key_def.valid})")
        values[key] = value
    for key in REQUIRED[command]:
        if values.get(key) is None:
            raise UsageError(f"missing required key '{key}' (valid: {KEYS[key].valid})")
    if command == "suite" and values["preset"] in ("thmA2", "thmA3", "thm12") and not phi:
        phi = {(2, "cos"): 0.3}
    for name in ("dim", "preset", "experiment", "p"):
        key_def = KEYS[name]
        if name not in values and command in key_def.commands:
            values[name] = key_def.default(values) if callable(key_def.default) else key_def.default
    for name, key_def in KEYS.items():
        if command in key_def.commands and name not in values:
            values[name] = key_def.default(values) if callable(key_def.default) else key_def.default
    values.pop("command")
    cfg = RunConfig(command, values, phi)
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg: RunConfig) -> None:
    dim, grid = cfg["dim"], cfg["grid"]
    if dim == 2 and (grid < 16 or grid % 2):
        raise UsageError(f"key 'grid': {grid} out of range (valid: {KEYS['grid'].valid})")
    if dim == 3 and not 2 <= grid <= 7:
        raise UsageError(f"key 'grid': {grid} out of range (valid: {KEYS['grid'].valid})")
    if cfg.phi and dim != 2:
        raise UsageError("phi.kN keys describe a weight on the circle and need dim=2")
    if cfg.command in ("selfsimilar",) and dim != 2:
        raise UsageError("key 'dim': selfsimilar runs in the plane (valid: 2)")
    preset = cfg.values.get("preset")
    if preset in ("thm11", "thm13") and dim != 3:
        raise UsageError(f"key 'dim': preset {preset} runs on the sphere (valid: 3)")
    if preset in ("thmA1", "thmA2", "thmA3", "thm12") and dim != 2:
        raise UsageError(f"key 'dim': preset {preset} runs in the plane (valid: 2)")
    if preset == "thm12" and cfg["p_values"] != (1.0,):
        raise UsageError("key 'p_values': preset thm12 is the p = 1 case (valid: 1)")
    if preset in ("thm11", "thm13") and cfg["p_values"] != (-3.0,):
        raise UsageError(f"key 'p_values': preset {preset} is the p = -3 case (valid: -3)")
    exp = cfg.values.get("experiment")
    if exp in ("lutwak", "sharp2d", "urysohn", "stability") and dim != 2:
        raise UsageError(f"key 'dim': experiment {exp} runs in the plane (valid: 2)")


# ---------------------------------------------------------------------------
# tasks (top-level so they can run in worker processes)


def _grid(cfg: RunConfig):
    return make_circle_grid(cfg["grid"]) if cfg["dim"] == 2 else make_sphere_grid(cfg["grid"])


def _tag(p: float) -> str:
    return format(p, "g").replace("-", "m")


def _write_run(directory: Path, result, every: int, title: str) -> list:
    """Trace CSV, final body, snapshots and figures for one flow run."""
    directory.mkdir(parents=True, exist_ok=True)
    trace_path = directory / "trace.csv"
    result.trace.write_csv(trace_path)
    final = result.affine_normalized if result.affine_normalized is not None else result.normalized
    artifacts = [trace_path, write_snapshot(directory / "final.json", Snapshot.of(final, result.state.t))]
    artifacts.append(plotting.trace_figure(result.trace, directory / "trace.svg", title))
    if every:
        snaps = result.trace.snapshots
        artifacts += export_svg(snaps, directory / "snapshots")
        for i, snap in enumerate(snaps):
            write_snapshot(directory / "snapshots" / f"snapshot_{i:03d}.json", snap)
    if final.dim == 2:
        artifacts.append(plotting.boundary_figure([result.initial, result.normalized, final],
                                                  directory / "boundary.svg",
                                                  labels=["initial", "normalized", "final"], title=title))
    return [str(a) for a in artifacts]


def _flow_status(result) -> str:
    monotone = all(result.trace.monotone_A) and all(result.trace.monotone_B)
    if result.status in ("collapse", "max_steps"):
        return INCONCLUSIVE
    if result.status == "blowup" or not monotone:
        return FAIL
    return PASS


def _auto_renormalize(p: float, n: int, phi) -> str:
    # a nonconstant weight breaks the SL(n) invariance the affine step relies on
    uniform = phi is None or np.ptp(phi) == 0.0
    return "volume+affine" if p == -n and uniform else "volume"


def task_flow(cfg: RunConfig, directory: Path) -> ExperimentResult:
    grid = _grid(cfg)
    n, p = cfg["dim"], cfg["p"]
    phi = cfg.phi_samples(grid)
    K = random_body(cfg["seed"], n, cfg["amplitude"], symmetric=cfg["symmetric"], grid=grid)
    if cfg["kind"] == CONTRACTING:
        K = translate(K, -centroid(K))
    else:
        params = EntropyParams(p=p, phi=phi, phi_is_even=cfg.phi_is_even,
                               body_is_symmetric=cfg["symmetric"], phi_id=cfg.phi_id)
        K = translate(K, -entropy_point(K, params)[0])
    mode = cfg["renormalize"]
    if mode == "auto":
        mode = _auto_renormalize(p, n, phi)
    recenter = 10 if n == 3 else (0 if cfg["symmetric"] else 50)
    config = FlowConfig(p=p, phi=phi, kind=cfg["kind"], cfl=cfg["cfl"], max_steps=cfg["max_steps"],
                        stop_hausdorff_tol=cfg["stop_tol"], renormalize=mode, seed=cfg["seed"],
                        t_end=cfg["t_end"], snapshot_every=cfg["snapshot_every"],
                        recenter_every=recenter, phi_id=cfg.phi_id)
    result = run(K, config)
    final = result.affine_normalized if result.affine_normalized is not None else result.normalized
    A = result.trace.column("A_p")
    measured = {"steps": result.state.step, "t": result.state.t, "tau": result.state.tau,
                "run_status": result.status, "A_initial": float(A[0]), "A_terminal": float(A[-1]),
                "A_monotone": all(result.trace.monotone_A), "B_monotone": all(result.trace.monotone_B),
                "hausdorff_to_ball": hausdorff_distance(final, ball(grid)),
                "snapshots": len(result.trace.snapshots)}
    artifacts = _write_run(directory, result, cfg["snapshot_every"], f"{cfg['kind']} p={p:g}")
    inputs = {"seed": cfg["seed"], "p": p, "phi": cfg.phi_id, "grid": grid.identifier,
              "kind": cfg["kind"], "amplitude": cfg["amplitude"]}
    return ExperimentResult("flow", inputs, measured, _flow_status(result),
                            {"monotone": config.monotone_tol}, artifacts)


def task_selfsimilar(cfg: RunConfig, directory: Path) -> list:
    grid = _grid(cfg)
    p = cfg["p"]
    phi = cfg.phi_samples(grid)
    tol = cfg["tolerance"] or 1e-8
    if cfg["count"] > 1:
        found = self_similar_branches(grid, p, phi, seeds=cfg["count"], symmetric=cfg["symmetric"])
    else:
        found = [self_similar_solve(grid, p, phi, symmetric=cfg["symmetric"])]
    directory.mkdir(parents=True, exist_ok=True)
    results, rows = [], []
    for i, res in enumerate(found):
        path = write_snapshot(directory / f"branch_{i:02d}.json", Snapshot.of(res.body))
        svg = export_svg([Snapshot.of(res.body)], directory, stem=f"branch_{i:02d}")
        rows.append([i, repr(res.c), res.iterations, repr(res.residual)])
        results.append(ExperimentResult(
            "selfsimilar", {"p": p, "phi": cfg.phi_id, "grid": grid.identifier, "branch": i},
            {"c": res.c, "iterations": res.iterations, "residual": res.residual,
             "hausdorff_to_disk": hausdorff_distance(res.body, ball(grid))},
            PASS if res.residual < tol else FAIL, {"residual": tol},
            [str(path)] + [str(s) for s in svg]))
    write_table(directory / "branches.csv", ("branch", "c", "iterations", "residual"), rows)
    plotting.boundary_figure([r.body for r in found], directory / "branches.svg",
                             labels=[f"branch {i}" for i in range(len(found))], title=f"p={p:g}")
    return results


def task_entropy(cfg: RunConfig, directory: Path) -> list:
    grid = _grid(cfg)
    p = cfg["p"]
    phi = cfg.phi_samples(grid) if cfg["dim"] == 2 else None
    directory.mkdir(parents=True, exist_ok=True)
    reports, results = [], []
    for i in range(cfg["count"]):
        seed = cfg["seed"] + i
        K = random_body(seed, cfg["dim"], cfg["amplitude"], symmetric=cfg["symmetric"], grid=grid)
        params = EntropyParams(p=p, phi=phi, phi_is_even=cfg.phi_is_even,
                               body_is_symmetric=cfg["symmetric"], phi_id=cfg.phi_id)
        params.check(K)
        rep = entropy_report(K, params)
        reports.append(rep)
        results.append(ExperimentResult(
            "entropy", {"seed": seed, "p": p, "phi": cfg.phi_id, "grid": grid.identifier},
            {"A": rep.A_value, "residual": rep.residual, "e": [float(c) for c in rep.e_point]},
            PASS if rep.residual < 1e-8 else FAIL, {"residual": 1e-8}))
    path = write_table(directory / "entropy.csv", reports[0].csv_header(), [r.csv_row() for r in reports])
    for r in results:
        r.artifacts.append(str(path))
    return results


def task_verify_one(experiment: str, seed: int, p: float | None, cfg: RunConfig, directory: Path):
    grid = _grid(cfg)
    if experiment == "duality":
        K0 = duality_body(seed, grid, cfg["amplitude"])
        tol = cfg["tolerance"] or (5e-4 if cfg["dim"] == 2 else 5e-3)
        res = duality_experiment(K0, cfg["t_end"] or 0.3, tol, cfl=cfg["cfl"])
    else:
        K = random_body(seed, 2, cfg["amplitude"], grid=grid)
        if experiment == "lutwak":
            res = verify_lutwak(K)
        elif experiment == "sharp2d":
            res = verify_sharp_2d(K, p)
        else:
            res = verify_urysohn_chain(K, p)
    res.inputs["seed"] = seed
    return res


def task_stability(cfg: RunConfig, p: float, directory: Path) -> ExperimentResult:
    res = stability_sweep(p, cfg["count"], cfg["seed"], grid=_grid(cfg))
    path = plotting.stability_figure(res.series["eps"], res.series["distance"],
                                     res.measured["gamma_hat"], directory / f"stability_p{_tag(p)}.svg")
    write_table(directory / f"stability_p{_tag(p)}.csv", ("amplitude", "eps", "distance"),
                [[repr(float(a)), repr(float(e)), repr(float(d))] for a, e, d in
                 zip(res.series["amplitude"], res.series["eps"], res.series["distance"])])
    res.artifacts.append(str(path))
    return res


def task_sweep_one(cfg: RunConfig, p: float, seed: int, directory: Path) -> ExperimentResult:
    grid = _grid(cfg)
    phi = cfg.phi_samples(grid)
    symmetric = cfg["symmetric"] or (bool(cfg.phi) and not (-2.0 <= p <= -1.0))
    K = random_body(seed, 2, cfg["amplitude"], symmetric=symmetric, grid=grid)
    params = EntropyParams(p=p, phi=phi, phi_is_even=cfg.phi_is_even, body_is_symmetric=symmetric,
                           phi_id=cfg.phi_id)
    K = translate(K, -entropy_point(K, params)[0])
    config = FlowConfig(p=p, phi=phi, cfl=cfg["cfl"], max_steps=cfg["max_steps"],
                        stop_hausdorff_tol=cfg["stop_tol"], seed=seed, phi_id=cfg.phi_id,
                        renormalize=_auto_renormalize(p, 2, phi),
                        recenter_every=0 if symmetric else 50)
    result = run(K, config)
    run_dir = directory / f"p{_tag(p)}_seed{seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    result.trace.write_csv(run_dir / "trace.csv")
    okA, okB = all(result.trace.monotone_A), all(result.trace.monotone_B)
    status = PASS if okA and okB and result.status not in ("collapse", "blowup") else FAIL
    return ExperimentResult(
        "sweep", {"p": p, "seed": seed, "phi": cfg.phi_id, "grid": grid.identifier},
        {"steps": result.state.step, "run_status": result.status, "A_monotone": okA, "B_monotone": okB},
        status, {"monotone": config.monotone_tol}, [str(run_dir / "trace.csv")])


def task_suite_one(cfg: RunConfig, theorem: str, p: float, seed: int, directory: Path) -> list:
    grid = _grid(cfg)
    phi = cfg.phi_samples(grid)
    kwargs = dict(amplitude=cfg["amplitude"], cfl=cfg["cfl"], max_steps=cfg["max_steps"],
                  stop_tol=cfg["stop_tol"])
    res, flow_run = convergence_experiment(theorem, seed, grid, p=p, phi=phi,
                                           tolerance=cfg["tolerance"], **kwargs)
    run_dir = directory / f"{theorem.replace('.', '')}_p{_tag(res.inputs['p'])}_seed{seed}"
    res.artifacts = _write_run(run_dir, flow_run, cfg["snapshot_every"], f"{theorem} p={res.inputs['p']:g}")
    results = [res]
    if theorem == "1.3":
        dual = duality_experiment(duality_body(seed, grid, cfg["amplitude"]), 0.3,
                                  cfg["tolerance"] or 5e-3, cfl=cfg["cfl"])
        dual.inputs["seed"] = seed
        results.append(dual)
    return results


def _execute(task):
    func, args = task
    out = func(*args)
    return out if isinstance(out, list) else [out]


def plan(cfg: RunConfig, directory: Path) -> list:
    """List of (function, args) tasks in deterministic (experiment, seed) order."""
    c = cfg.command
    if c == "flow":
        return [(task_flow, (cfg, directory))]
    if c == "selfsimilar":
        return [(task_selfsimilar, (cfg, directory))]
    if c == "entropy":
        return [(task_entropy, (cfg, directory))]
    seeds = [cfg["seed"] + i for i in range(cfg["count"])]
    if c == "verify":
        exp = cfg["experiment"]
        if exp == "stability":
            return [(task_stability, (cfg, p, directory)) for p in cfg["p_values"]]
        if exp in ("lutwak", "duality"):
            return [(task_verify_one, (exp, s, None, cfg, directory)) for s in seeds]
        return [(task_verify_one, (exp, s, p, cfg, directory)) for p in cfg["p_values"] for s in seeds]
    if c == "sweep":
        return [(task_sweep_one, (cfg, p, s, directory)) for p in cfg["p_values"] for s in seeds]
    theorem = PRESETS[cfg["preset"]]
    return [(task_suite_one, (cfg, theorem, p, s, directory)) for p in cfg["p_values"] for s in seeds]


def _summary_table(results, path: Path) -> None:
    keys = []
    for r in results:
        for k, v in r.measured.items():
            if k not in keys and isinstance(v, (int, float, bool, np.floating, np.integer)):
                keys.append(k)
    rows = []
    for r in results:
        seed = r.inputs.get("seed", "")
        p = r.inputs.get("p", "")
        rows.append([r.experiment, seed, _fmt(p) if isinstance(p, float) else p, r.status]
                    + [_fmt(float(r.measured[k])) if k in r.measured else "" for k in keys])
    write_table(path, ["experiment", "seed", "p", "status", *keys], rows)


_FIGURE_KEYS = {"lutwak": ("equality_gap", None), "sharp2d": ("relative_gap", 0.0),
                "urysohn": ("middle", math.pi), "duality": ("max_deviation", None),
                "sweep": ("steps", None), "entropy": ("A", None)}


def _report_figure(cfg: RunConfig, results, directory: Path) -> None:
    key, threshold = _FIGURE_KEYS.get(results[0].experiment if results else "", (None, None))
    if key is None:
        return
    groups = {}
    for r in results:
        if key in r.measured:
            groups.setdefault(f"p={_fmt(r.inputs.get('p', ''))}", []).append(r.measured[key])
    if groups:
        plotting.measure_figure(groups, directory / f"{results[0].experiment}.svg", key, threshold)


def execute(cfg: RunConfig) -> int:
    directory = Path(cfg["out"]) if cfg["out"] else output_root() / cfg.command / (
        cfg.values.get("experiment") or cfg.values.get("preset") or "run")
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.resolved").write_text(cfg.echo())
    tasks = plan(cfg, directory)
    if cfg["jobs"] > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            batches = list(pool.map(_execute, tasks))
    else:
        batches = [_execute(t) for t in tasks]
    results = [r for batch in batches for r in batch]
    manifest = Manifest(directory / "manifest.jsonl", cfg.command)
    for r in results:
        # relative artifact paths keep the manifest independent of the output root
        r.artifacts = [str(Path(a).relative_to(directory)) if Path(a).is_relative_to(directory) else str(a)
                       for a in r.artifacts]
        manifest.append(r.record())
        shown = " ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in r.measured.items()
                         if not isinstance(v, list))
        print(f"{r.experiment}\t{r.status}\t{shown}")
    _summary_table(results, directory / "results.csv")
    _report_figure(cfg, results, directory)
    statuses = {r.status for r in results}
    print(f"# {len(results)} records, {sum(r.passed for r in results)} pass -> {directory}")
    if FAIL in statuses:
        return EXIT_FAIL
    if INCONCLUSIVE in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="convexflow", description="Gauss-curvature flows of convex bodies.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for command in COMMANDS:
        sp = sub.add_parser(command)
        sp.add_argument("--config", help="flat key=value configuration file")
        sp.add_argument("--phi", action="append", default=[], metavar="kN.cos=VALUE",
                        help="weight coefficient, e.g. k2.cos=0.3 (repeatable)")
        for key in KEYS.values():
            if command in key.commands:
                sp.add_argument("--" + key.name.replace("_", "-"), dest=key.name,
                                default=argparse.SUPPRESS, metavar=key.name.upper(),
                                help=f"{key.help or key.valid}")
    return parser


def parse(argv) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    if command is None:
        raise UsageError(f"a command is required (valid: {', '.join(COMMANDS)})")
    config_path = args.pop("config")
    cli = {k: v for k, v in args.items() if k != "phi"}
    for item in args["phi"]:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--phi expects kN.cos=VALUE or kN.sin=VALUE, got {item!r}")
        cli["phi." + key.removeprefix("phi.")] = value
    file = read_config_file(config_path) if config_path else {}
    return resolve(command, cli, file)


def main(argv=None) -> int:
    try:
        cfg = parse(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"convexflow: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"convexflow: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return execute(cfg)
    except ConvexFlowError as exc:
        print(f"convexflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
