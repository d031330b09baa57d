import pytest

from tipcrit import ScalarField, analyze_basin


@pytest.fixture(scope="session")
def quad_field():
    return ScalarField.from_text("x^2-1")


@pytest.fixture(scope="session")
def quad_geometry(quad_field):
    return analyze_basin(quad_field, -1.0)


@pytest.fixture(scope="session")
def cubic_field():
    return ScalarField.from_text("x*(x-1)*(x+2)")


@pytest.fixture(scope="session")
def cubic_geometry(cubic_field):
    return analyze_basin(cubic_field, 0.0)
