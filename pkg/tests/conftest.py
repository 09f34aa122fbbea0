import numpy as np
import pytest
from hypothesis import settings

# property tests share the suite budget; timing enforcement stays off so a
# loaded CI box cannot flake them
settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
