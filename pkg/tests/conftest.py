import functools

import pytest

from plapshoot.model import ci1, ci2, make_problem
from plapshoot.shooting import shoot


@pytest.fixture(scope="session")
def p1():
    return make_problem(ci1())


@pytest.fixture(scope="session")
def p2():
    return make_problem(ci2())


@functools.lru_cache(maxsize=None)
def cached_trajectory(name, a, tol=1e-10):
    params = {"ci1": ci1, "ci2": ci2}[name]()
    return shoot(make_problem(params), a, tol)


@pytest.fixture(scope="session")
def traj():
    """Cached production trajectories keyed by (instance name, a)."""
    return cached_trajectory


@functools.lru_cache(maxsize=None)
def cached_ladder(name, extra=3, tol=1e-10):
    from plapshoot.shooting import ShootSettings, solve_ladder
    params = {"ci1": ci1, "ci2": ci2}[name]()
    return solve_ladder(make_problem(params), settings=ShootSettings(tol=tol), extra=extra)


@pytest.fixture(scope="session")
def ladder():
    """Cached solution ladders keyed by (instance name, extra, tol)."""
    return cached_ladder


_CRITERIA = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """report(k, ok, detail): record one pass/fail line and fail the test if not ok."""
    lines = request.config.stash.setdefault(_CRITERIA, {})

    def report(k, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
        lines[k] = line
        print(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
