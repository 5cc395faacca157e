import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "rlx", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("rlx")


@functools.lru_cache(maxsize=None)
def _operator(name: str, leaf: int = 64):
    from rlx import meshes
    from rlx.system_operator import FmmConfig, SystemOperator

    return SystemOperator(meshes.BUILTIN[name](), FmmConfig(leaf_size=leaf))


@pytest.fixture
def builtin_operator():
    """Cached operator factory; callers must set their own frequency."""
    return _operator


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("tests.test_acceptance") or \
        __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
