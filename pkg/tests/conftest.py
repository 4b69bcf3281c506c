import pytest

from cfextremes.measures import stationary_sample_hccf
from cfextremes.numerics import RandomStream


@pytest.fixture(scope="session")
def hurwitz_sample_1m():
    """One million stationary Hurwitz samples shared across test modules."""
    return stationary_sample_hccf(RandomStream(0xC0FFEE), 1_000_000, burn_in=50)
