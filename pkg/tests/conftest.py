import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
