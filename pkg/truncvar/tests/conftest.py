import numpy as np
import pytest
from hypothesis import strategies as st

from truncvar.path_core import CadlagPath

# Values small enough that float rounding stays far below the tolerances used in the tests
sample_values = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)
levels = st.floats(min_value=0.01, max_value=5.0, allow_nan=False, allow_infinity=False)


@st.composite
def paths(draw, max_size=30):
    values = draw(st.lists(sample_values, min_size=1, max_size=max_size))
    gaps = draw(st.lists(st.floats(min_value=0.01, max_value=3.0), min_size=len(values), max_size=len(values)))
    times = np.cumsum(gaps)
    return CadlagPath(times=times, values=values)


@pytest.fixture
def four_point():
    """The running example: values 0, 1, 0.2, 1.2 at times 0..3."""
    return CadlagPath.from_values([0.0, 1.0, 0.2, 1.2])


@pytest.fixture
def ramp():
    return CadlagPath.from_values([0.0, 0.4, 1.0])


@pytest.fixture
def dip():
    return CadlagPath.from_values([0.0, -1.0, 0.5])


def random_paths(count, max_n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, max_n + 1))
        yield CadlagPath.from_values(rng.normal(0.0, 1.0, size=n))
