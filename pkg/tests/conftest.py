import pytest

from teloinv.model import Gamma, ModelConfig, Uniform


@pytest.fixture(scope="session")
def cfg912():
    return ModelConfig(1.0, 40.0, Uniform(1.0), Gamma(9, 12))


@pytest.fixture(scope="session")
def cfg2530():
    return ModelConfig(1.0, 40.0, Uniform(1.0), Gamma(25, 30))


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion; printed after the run."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
