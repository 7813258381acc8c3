import pytest

from povmsim import fixtures


@pytest.fixture(scope="session")
def tetrahedral():
    return fixtures.ideal_povm("tetrahedral")


@pytest.fixture(scope="session")
def trine():
    return fixtures.ideal_povm("trine")


@pytest.fixture(scope="session")
def random4():
    return fixtures.ideal_povm("random4")


@pytest.fixture(scope="session")
def all_fixture_povms(tetrahedral, trine, random4):
    return {"tetrahedral": tetrahedral, "trine": trine, "random4": random4}
