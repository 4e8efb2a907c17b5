import csv

import numpy as np
import pytest

from convexflow.cli import EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_PASS, EXIT_USAGE, main, parse, resolve
from convexflow.errors import UsageError
from convexflow.io import Manifest


def read_trace(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def tree(directory):
    return {p.relative_to(directory): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


# ---------------------------------------------------------------------------
# usage errors


@pytest.mark.parametrize("argv, needle", [
    (["flow", "--dim", "2"], "'p'"),
    (["verify"], "'experiment'"),
    (["suite"], "'preset'"),
    (["flow", "--p", "2", "--cfl", "0.7"], "cfl"),
    (["flow", "--p", "2", "--dim", "4"], "dim"),
    (["flow", "--p", "abc"], "'p'"),
    (["flow", "--p", "2", "--grid", "15"], "grid"),
    (["flow", "--p", "2", "--bogus", "1"], "bogus"),
    (["verify", "--experiment", "nope"], "experiment"),
    (["suite", "--preset", "thm11", "--dim", "2"], "dim"),
    (["suite", "--preset", "thm12", "--p-values", "2"], "p_values"),
    ([], "command"),
])
def test_usage_errors(capsys, tmp_path, argv, needle):
    assert main(argv + (["--out", str(tmp_path)] if argv and argv[0] in ("flow",) else [])) == EXIT_USAGE
    assert needle in capsys.readouterr().err


def test_unknown_file_key(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("p=2\nshape=round\n")
    assert main(["flow", "--config", str(cfg)]) == EXIT_USAGE
    assert "shape" in capsys.readouterr().err


def test_key_for_other_command_rejected():
    with pytest.raises(UsageError, match="does not apply"):
        resolve("entropy", {"p": "2", "kind": "contracting"}, {})


def test_precedence():
    cfg = resolve("flow", {"seed": "4"}, {"seed": "9", "p": "3", "grid": "64"})
    assert cfg["seed"] == 4 and cfg["p"] == 3.0 and cfg["grid"] == 64
    assert cfg["cfl"] == 0.2 and cfg["dim"] == 2


def test_defaults_depend_on_command():
    assert resolve("verify", {"experiment": "lutwak"}, {})["count"] == 100
    assert resolve("verify", {"experiment": "urysohn"}, {})["p_values"] == (1.5, 2.0, 4.0)
    suite = resolve("suite", {"preset": "thm11"}, {})
    assert suite["dim"] == 3 and suite["grid"] == 5 and suite["count"] == 3
    assert resolve("suite", {"preset": "thmA2"}, {}).phi == {(2, "cos"): 0.3}


def test_phi_keys(circle256):
    cfg = parse(["flow", "--p", "2", "--phi", "k2.cos=0.3", "--phi", "k4.sin=0.1"])
    phi = cfg.phi_samples(circle256)
    t = circle256.theta
    assert np.max(np.abs(phi - (1 + 0.3 * np.cos(2 * t) + 0.1 * np.sin(4 * t)))) < 1e-15
    assert cfg.phi_is_even
    assert "phi.k2.cos=0.3" in cfg.echo()
    with pytest.raises(UsageError):
        parse(["flow", "--p", "2", "--phi", "k0.sin=1"])
    with pytest.raises(UsageError):
        parse(["flow", "--p", "2", "--phi", "k2.cos"])


def test_constant_phi():
    cfg = resolve("flow", {"p": "2", "phi.k0.cos": "2.5"}, {})
    assert cfg.phi_id == "2.5"


# ---------------------------------------------------------------------------
# end-to-end runs


def test_verify_lutwak_batch(tmp_path, capsys):
    assert main(["verify", "--experiment", "lutwak", "--count", "100", "--seed", "1",
                 "--out", str(tmp_path)]) == EXIT_PASS
    header, records = Manifest.read(tmp_path / "manifest.jsonl")
    assert header["command"] == "verify"
    assert len(records) == 100
    assert all(r["status"] == "pass" for r in records)
    assert [r["inputs"]["seed"] for r in records] == list(range(1, 101))
    out = capsys.readouterr().out.splitlines()
    assert sum(line.startswith("lutwak\tpass") for line in out) == 100
    assert (tmp_path / "results.csv").exists() and (tmp_path / "lutwak.svg").exists()


def test_flow_writes_trace(tmp_path):
    code = main(["flow", "--p", "-2", "--grid", "128", "--seed", "3", "--snapshot-every", "500",
                 "--out", str(tmp_path)])
    assert code == EXIT_PASS
    trace = read_trace(tmp_path / "trace.csv")
    A = trace["A_p"]
    assert np.all(np.diff(A) >= -1e-8 * A[:-1])
    assert A[-1] == pytest.approx(2 * np.pi**2, rel=1e-4)
    for name in ("final.json", "trace.svg", "boundary.svg", "config.resolved", "snapshots/snapshot_000.svg"):
        assert (tmp_path / name).exists()


@pytest.mark.slow
def test_flow_reference_run(tmp_path):
    assert main(["flow", "--dim", "2", "--p", "-2", "--grid", "512", "--seed", "3",
                 "--out", str(tmp_path)]) == EXIT_PASS
    A = read_trace(tmp_path / "trace.csv")["A_p"]
    assert np.all(np.diff(A) >= -1e-8 * A[:-1])


def test_max_steps_is_inconclusive(tmp_path):
    assert main(["flow", "--p", "2", "--grid", "64", "--max-steps", "5", "--out", str(tmp_path)]) == EXIT_INCONCLUSIVE


def test_failure_exit_code(tmp_path):
    # the disk under p = -2 hits its singularity at t = 1/4
    assert main(["flow", "--p", "-2", "--grid", "32", "--amplitude", "0", "--t-end", "0.3",
                 "--out", str(tmp_path)]) == EXIT_FAIL


def test_rerun_from_echo_is_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["flow", "--p", "0.5", "--grid", "64", "--max-steps", "300", "--snapshot-every", "100",
                 "--phi", "k2.cos=0.2", "--symmetric", "true", "--out", str(first)]) in (EXIT_PASS, EXIT_INCONCLUSIVE)
    assert main(["flow", "--config", str(first / "config.resolved"), "--out", str(second)]) in (EXIT_PASS, EXIT_INCONCLUSIVE)
    a, b = tree(first), tree(second)
    assert a.keys() == b.keys()
    manifest = next(k for k in a if k.name == "manifest.jsonl")
    for key in a:
        if key == manifest:
            assert a[key].splitlines()[1:] == b[key].splitlines()[1:]
        else:
            assert a[key] == b[key], key


def test_parallel_matches_serial(tmp_path):
    args = ["verify", "--experiment", "urysohn", "--count", "3", "--grid", "128"]
    assert main(args + ["--out", str(tmp_path / "s")]) == EXIT_PASS
    assert main(args + ["--jobs", "3", "--out", str(tmp_path / "j")]) == EXIT_PASS
    assert (tmp_path / "s" / "results.csv").read_bytes() == (tmp_path / "j" / "results.csv").read_bytes()


@pytest.mark.parametrize("argv", [
    ["selfsimilar", "--p", "2", "--phi", "k2.cos=0.3", "--grid", "128"],
    ["entropy", "--p", "-3", "--dim", "3", "--grid", "3", "--count", "2"],
    ["entropy", "--p", "0.5", "--grid", "128", "--count", "3"],
    ["verify", "--experiment", "sharp2d", "--count", "2", "--grid", "128"],
    ["verify", "--experiment", "stability", "--count", "12", "--grid", "128"],
    ["verify", "--experiment", "duality", "--count", "1", "--grid", "128", "--t-end", "0.05"],
    ["sweep", "--count", "1", "--grid", "64", "--max-steps", "200", "--p-values=-1,2"],
    ["sweep", "--count", "1", "--grid", "128", "--max-steps", "1000", "--p-values=-2", "--phi", "k2.cos=0.3"],
])
def test_commands_run(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_PASS
    assert (tmp_path / "config.resolved").read_text().startswith(f"command={argv[0]}\n")
    _, records = Manifest.read(tmp_path / "manifest.jsonl")
    assert records
