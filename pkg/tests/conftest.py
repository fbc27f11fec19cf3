import numpy as np
import pytest

from pppcontract import hjb, model
from pppcontract.numerics import monotone_inverse


def make_bundle(U, dU, invU, inv_dU, phi, dphi, h, dh, inv_h=None, name="test"):
    """Bundle from the primitive maps; psi and its inverse are derived."""

    def psi(a):
        return 0.5 * (dh(a) / dphi(a)) ** 2

    def inv_psi(q):
        return monotone_inverse(lambda a: psi(a), q)

    if inv_h is None:
        def inv_h(c):
            return monotone_inverse(h, c)

    return model.FunctionBundle(U, dU, invU, inv_dU, phi, dphi, h, dh, inv_h, psi, inv_psi, name=name)


def sqrt_utility():
    return dict(U=np.sqrt, dU=lambda x: 0.5 / np.sqrt(x), invU=np.square,
                inv_dU=lambda m: 0.25 / np.square(m))


def linear(c):
    return dict(f=lambda x: c * np.asarray(x, dtype=float),
                df=lambda x: c * np.ones_like(np.asarray(x, dtype=float)),
                inv=lambda y: np.asarray(y, dtype=float) / c)


@pytest.fixture(scope="session")
def example():
    return model.example_bundle()


@pytest.fixture(scope="session")
def params():
    return model.ModelParams(delta=0.1, k=2.0, sigma=0.8, r_bar=6.0)


@pytest.fixture(scope="session")
def solved(params, example):
    return hjb.solve(params, example, 500, keep_iterates=True)


@pytest.fixture(scope="session")
def solved_small(params, example):
    return hjb.solve(params, example, 50)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def record_criterion(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} -- {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
