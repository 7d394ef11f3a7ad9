import pytest

from bindsem import builtin
from bindsem.model import lc_1cong_doc, lc_closure_doc


@pytest.fixture(scope="session")
def lc():
    return builtin("lc")


@pytest.fixture(scope="session")
def lc_beta_eta():
    return builtin("lc_beta_eta")


@pytest.fixture(scope="session")
def lc_fix():
    return builtin("lc_fix")


@pytest.fixture(scope="session")
def monoid():
    return builtin("monoid")


@pytest.fixture(scope="session")
def lc_ex():
    return builtin("lc_ex")


@pytest.fixture(scope="session")
def lc_closure():
    return lc_closure_doc()


@pytest.fixture(scope="session")
def lc_1cong():
    return lc_1cong_doc()
