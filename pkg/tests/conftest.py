import numpy as np
import pytest
import sympy

from rhdg.exact import X, Y, ExactSolution


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_polynomial_field(rng, degree: int) -> ExactSolution:
    """Vector field with random coefficients of total degree ``degree`` (not divergence-free)."""
    comps = []
    for _ in range(2):
        expr = 0
        for a in range(degree + 1):
            for b in range(degree + 1 - a):
                expr += sympy.Float(rng.uniform(-1, 1)) * X**a * Y**b
        comps.append(expr)
    return ExactSolution.from_sympy(comps, 0, name="random")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion; the body must set ``detail`` then assert."""

    class Recorder:
        detail = ""

    rec = Recorder()
    yield rec
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {request.node.name}: {rec.detail}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
