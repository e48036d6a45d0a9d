import functools

import pytest

from mrrpa import fixtures
from mrrpa.manifold import build_manifold
from mrrpa.pipeline import evaluate, prepare_reference

ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def reference(name):
    fx = fixtures.get_fixture(name)
    ref = prepare_reference(fx.integrals, fx.spaces)
    return fx, ref, build_manifold(ref.part, ref.sectors)


@functools.lru_cache(maxsize=None)
def results(name):
    fx = fixtures.get_fixture(name)
    return evaluate(fx.integrals, fx.spaces, methods=('rpa', 'sosex', 'quadrature'))


@pytest.fixture
def ref_of():
    return reference


@pytest.fixture
def results_of():
    return results


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section('acceptance criteria')
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
