import pytest

from layerforge.acceptance import AcceptanceContext


@pytest.fixture(scope="session")
def actx():
    """Shared pipeline cache; the expensive builds happen once per session."""
    return AcceptanceContext()


@pytest.fixture(scope="session")
def cubic(actx):
    return actx.pipeline("cubic")


@pytest.fixture(scope="session")
def wavy(actx):
    return actx.pipeline("cubic-wavy")


@pytest.fixture(scope="session")
def cubic_terms(actx):
    return actx.terms("cubic")


@pytest.fixture(scope="session")
def wavy_terms(actx):
    return actx.terms("cubic-wavy")
