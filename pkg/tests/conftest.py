import pytest

from droid.timing import SurrogateParams, characterize_surrogate


@pytest.fixture(scope="session")
def tf():
    """Default surrogate timing tables shared across the suite."""
    return characterize_surrogate(SurrogateParams(), 7)


@pytest.fixture(scope="session")
def params():
    return SurrogateParams()
