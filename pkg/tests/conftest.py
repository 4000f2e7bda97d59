import functools

import pytest

from kintraj.trajectory import build_pair


@functools.lru_cache(maxsize=None)
def cached_pair(k):
    return build_pair(k)


@pytest.fixture(scope="session")
def pair1():
    return cached_pair(1)


@pytest.fixture(scope="session")
def pair2():
    return cached_pair(2)


@pytest.fixture(scope="session")
def pair3():
    return cached_pair(3)


@pytest.fixture(scope="session")
def geometry1(pair1):
    from kintraj.probe import CylinderGeometry

    return CylinderGeometry.from_pair(pair1, 1.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
