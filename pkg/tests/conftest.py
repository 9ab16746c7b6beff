import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fragsched import build_scheme, cyclic_shift, projective_plane

# Fano-plane scheme with the fragment numbering used throughout the worked
# examples: S_1={1,2,3}, S_2={3,4,5}, ..., S_7={2,4,6}.
FANO_OCCUPANCY = [
    {1, 3, 4},
    {1, 5, 7},
    {1, 2, 6},
    {2, 4, 7},
    {2, 3, 5},
    {3, 6, 7},
    {4, 5, 6},
]

# Two 4-fragment, 4-server layouts with capacity 2: a ring (consecutive
# pairs) and a paired layout where opposite servers mirror each other.
RING_OCCUPANCY = [{1, 4}, {1, 2}, {2, 3}, {3, 4}]
PAIRED_OCCUPANCY = [{1, 3}, {2, 4}, {1, 3}, {2, 4}]


@pytest.fixture(scope="session")
def fano():
    return build_scheme(FANO_OCCUPANCY, mu=1.0)


@pytest.fixture(scope="session")
def ring4():
    return build_scheme(RING_OCCUPANCY, mu=1.0)


@pytest.fixture(scope="session")
def paired4():
    return build_scheme(PAIRED_OCCUPANCY, mu=1.0)


@pytest.fixture(scope="session")
def pp2():
    return projective_plane(2)


@pytest.fixture(scope="session")
def cyclic73():
    return cyclic_shift(7, 3)
