import os

import pytest

from cobro import fourier

_ACCEPTANCE = []


def record_acceptance(number, title, passed, detail):
    _ACCEPTANCE.append((number, title, bool(passed), detail))


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture(autouse=True, scope="module")
def _bounded_cache():
    # N=1000 lattices are a few hundred MB each
    yield
    if os.environ.get("COBRO_KEEP_CACHE") != "1":
        fourier.clear_cache()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
