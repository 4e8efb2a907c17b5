import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from convexflow.grid import make_circle_grid, make_sphere_grid

settings.register_profile(
    "convexflow", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
settings.load_profile("convexflow")


@pytest.fixture(scope="session")
def circle256():
    return make_circle_grid(256)


@pytest.fixture(scope="session")
def circle512():
    return make_circle_grid(512)


@pytest.fixture(scope="session")
def sphere3():
    return make_sphere_grid(3)


@pytest.fixture(scope="session")
def sphere4():
    return make_sphere_grid(4)


@pytest.fixture(scope="session")
def sphere5():
    return make_sphere_grid(5)


def real_harmonic(u, degree, order):
    """Real spherical harmonic (unnormalized) evaluated in Cartesian form."""
    x, y, z = u.T
    table = {
        (0, 0): np.ones_like(x),
        (1, 0): z, (1, 1): x, (1, -1): y,
        (2, 0): 3 * z**2 - 1, (2, 1): x * z, (2, -1): y * z,
        (2, 2): x**2 - y**2, (2, -2): x * y,
        (3, 0): 5 * z**3 - 3 * z, (3, 3): x**3 - 3 * x * y**2,
        (4, 0): 35 * z**4 - 30 * z**2 + 3,
    }
    return table[(degree, order)]


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance case, print its verdict line and assert it."""
    store = request.config.stash.setdefault(_CRITERIA, {})

    def record(number, case, ok, detail):
        ok = bool(ok)
        store.setdefault(number, []).append((case, ok))
        line = f"criterion {number} [{case}]: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        cases = store[number]
        failing = [case for case, ok in cases if not ok]
        verdict = "FAIL" if failing else "PASS"
        note = f"; failing: {', '.join(failing)}" if failing else ""
        terminalreporter.write_line(f"criterion {number}: {verdict} ({len(cases) - len(failing)}/{len(cases)} cases{note})")
