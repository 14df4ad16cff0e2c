import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from panfem.calibration import init_params
from panfem.material import MR_COMPRESSIBLE, MR_NEARLY_INCOMPRESSIBLE, MooneyRivlin, pann_build

settings.register_profile(
    "panfem", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("panfem")


@pytest.fixture(scope="session")
def mr():
    return MooneyRivlin(MR_COMPRESSIBLE)


@pytest.fixture(scope="session")
def mr_ni():
    return MooneyRivlin(MR_NEARLY_INCOMPRESSIBLE)


@pytest.fixture(scope="session")
def pann():
    return pann_build(init_params(8, 3))


@pytest.fixture(params=["mr", "pann"])
def model(request, mr, pann):
    return {"mr": mr, "pann": pann}[request.param]


def random_F(rng, scale=0.3, n=None):
    shape = (3, 3) if n is None else (n, 3, 3)
    while True:
        F = np.eye(3) + scale * rng.uniform(-1.0, 1.0, shape)
        if np.all(np.linalg.det(F) > 0.2):
            return F


def random_spd(rng, scale=0.3, n=None):
    F = random_F(rng, scale, n)
    return np.einsum("...ki,...kj->...ij", F, F)


def random_sym(rng):
    A = rng.normal(size=(3, 3))
    return 0.5 * (A + A.T)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1.0
    return Q


#: finite 3x3 matrices with moderate entries
matrices = hnp.arrays(np.float64, (3, 3), elements=st.floats(-3.0, 3.0))
#: deformation gradients near identity with det F bounded away from zero
deformations = hnp.arrays(np.float64, (3, 3), elements=st.floats(-0.35, 0.35)).map(
    lambda A: np.eye(3) + A).filter(lambda F: np.linalg.det(F) > 0.3)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
