import numpy as np
import pytest

from tmla.attack import AttackConfig
from tmla.codec import SurrogateCodec
from tmla.fixtures import attack_fixture_set

# Surrogate operating point: targets relative to each image's clean
# reconstruction, lr lowered from the default for the undamped detail bands.
SURROGATE_ATTACK = AttackConfig(q_in=50.0, q_out_offset=15.0, lr=3e-3)

_ACCEPTANCE = {}
TIMINGS = {}


def record_acceptance(number, ok, detail):
    _ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def codec():
    return SurrogateCodec()


@pytest.fixture(scope="session")
def fixtures():
    return attack_fixture_set()


@pytest.fixture(scope="session")
def tmla_results(codec, fixtures):
    """T-MLA at the surrogate operating point on the three attack fixtures (shared, slow)."""
    import time

    from tmla.attack import run_tmla

    start = time.perf_counter()
    results = [run_tmla(x, codec, SURROGATE_ATTACK) for x in fixtures]
    TIMINGS["tmla_fixture_attacks"] = time.perf_counter() - start
    return results


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
