import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ahg.models import build_model, default_origin, random_points

settings.register_profile(
    "numeric",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("numeric")

ALL_MODELS = ("flat_cn", "cpn_fs", "chn_ball", "s6_nk", "hopf")


@functools.lru_cache(maxsize=None)
def model(name, n=None, K=None):
    return build_model(name, n, K)


@pytest.fixture(params=ALL_MODELS)
def any_model(request):
    return model(request.param)


@pytest.fixture
def s6():
    return model("s6_nk")


@pytest.fixture
def hopf():
    return model("hopf")


def points(M, count=3, seed=0):
    return random_points(M, count, seed)


def origin(M):
    return default_origin(M)


def assert_close(a, b, tol):
    diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
    assert diff <= tol, f"max deviation {diff:.3e} exceeds {tol:.1e}"


ACCEPTANCE_LINES = []


def record_acceptance(number, passed, summary):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {summary}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
