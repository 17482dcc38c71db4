import numpy as np
import pytest

from singherm.metric import SectionInducedMetric, example_sections


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def example_h():
    return SectionInducedMetric(example_sections(), label="h")
