import numpy as np
import pytest

from twowell.density import TwoWellDensity
from twowell.harness import ExperimentConfig, run_convergence
from twowell.profile import ReducedDensity, analytic_K

SWEEP = (0.1, 0.05, 0.025)

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def hard_min():
    return TwoWellDensity(2, 1.0, 1.0, "hard-min")


@pytest.fixture(scope="session")
def smooth():
    return TwoWellDensity(2, 1.0, 1.0, "smooth-harmonic")


@pytest.fixture(scope="session")
def K_hard(hard_min):
    return analytic_K(ReducedDensity(hard_min))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240601)


_SWEEPS = {}


def sweep(scenario, **kw):
    """Cached convergence report, shared by the harness and acceptance tests."""
    key = (scenario, tuple(sorted(kw.items())))
    if key not in _SWEEPS:
        _SWEEPS[key] = run_convergence(ExperimentConfig(scenario=scenario, eps=SWEEP, **kw))
    return _SWEEPS[key]


@pytest.fixture(scope="session")
def example_sweeps():
    return {l: sweep("example-ex", l=l) for l in (2.0, 1.0, 0.5)}


def random_rotation(rng, d=2):
    Q, Rm = np.linalg.qr(rng.standard_normal((d, d)))
    Q = Q * np.sign(np.diag(Rm))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q
