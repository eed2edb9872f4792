import pytest

from primecantor.conformal import MeasureModel
from primecantor.dimension import TruncatedAlphabet, conformal_dimension
from primecantor.primes import sieve

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def table_1e6():
    return sieve(10**6)


@pytest.fixture(scope="session")
def delta_1e5():
    return conformal_dimension(TruncatedAlphabet.primes(10**5), tol=1e-8).delta


@pytest.fixture(scope="session")
def model_1e4():
    return MeasureModel.build(TruncatedAlphabet.primes(10**4))


@pytest.fixture(scope="session")
def model_1e5(delta_1e5):
    return MeasureModel.build(TruncatedAlphabet.primes(10**5), delta_1e5)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
