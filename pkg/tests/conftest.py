import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hardysym.morse import morse_index  # noqa: E402
from hardysym.solve import ProblemSpec, solve  # noqa: E402
from hardysym.sphere import SphereProblem, constant_solution, shoot_nodal_solution  # noqa: E402


@lru_cache(maxsize=None)
def cached_solve(**kw):
    return solve(ProblemSpec(**kw))


@lru_cache(maxsize=None)
def cached_index(index_class="biradial", **kw):
    return morse_index(cached_solve(**kw), index_class)


@lru_cache(maxsize=None)
def cached_nodal(nodes: int, n: int = 2048, k: int = 2, N: int = 4):
    prob = SphereProblem(N, k, n)
    return constant_solution(prob) if nodes == 0 else shoot_nodal_solution(prob, nodes)


@pytest.fixture(scope="session")
def radial_a0():
    return cached_solve(cls="radial", a=0.0)


@pytest.fixture(scope="session")
def biradial_a0_64():
    return cached_solve(cls="biradial", a=0.0, n=64)


@pytest.fixture(scope="session")
def sphere_constant():
    return cached_nodal(0)


@pytest.fixture(scope="session")
def sphere_v1():
    return cached_nodal(1)


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
