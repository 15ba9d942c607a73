import numpy as np
import pytest

from lpeuler.lp import FrequencyGrid, build_partition


@pytest.fixture(scope="session")
def grid64():
    return FrequencyGrid(64)


@pytest.fixture(scope="session")
def part64(grid64):
    return build_partition(grid64)


@pytest.fixture(scope="session")
def grid128():
    return FrequencyGrid(128)


@pytest.fixture(scope="session")
def part128(grid128):
    return build_partition(grid128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and print one pass/fail line for an acceptance criterion."""
    log = request.config.stash.setdefault(_VERDICTS, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"AC{number:<2d} {'PASS' if ok else 'FAIL'}  {detail}"
        log.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s[2:4])):
            terminalreporter.write_line(line)
