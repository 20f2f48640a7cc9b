import pytest

from sqfqueue.model import validate_symmetric

PARAM_SETS = [(1.2, 2.0), (1.8, 2.0), (0.6, 2.0)]


@pytest.fixture(scope="session")
def p12():
    return validate_symmetric(1.2, 2.0)


@pytest.fixture(scope="session")
def p18():
    return validate_symmetric(1.8, 2.0)


@pytest.fixture(scope="session")
def p06():
    return validate_symmetric(0.6, 2.0)


@pytest.fixture(scope="session", params=PARAM_SETS, ids=lambda lm: f"lam{lm[0]}_mu{lm[1]}")
def params(request):
    return validate_symmetric(*request.param)
