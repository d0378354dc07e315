import numpy as np
import pytest

ACCEPTANCE = {}


def record(n, title, passed, detail=""):
    ACCEPTANCE[n] = (title, bool(passed), detail)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:2d}  {title}  {detail}")
