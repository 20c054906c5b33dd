import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("opfree", max_examples=25, deadline=None)
settings.load_profile("opfree")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rand_c(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_herm(rng, D):
    a = rand_c(rng, D, D)
    return (a + a.conj().T) / 2


ACCEPTANCE: list[str] = []


@pytest.fixture
def record():
    """Record one acceptance line ``PASS|FAIL criterion N: ...`` and print it."""

    def _record(num: int, title: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {title} ({detail})"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
