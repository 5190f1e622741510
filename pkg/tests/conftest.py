import numpy as np
import pytest

from narxprune import datasets, narx
from narxprune.evaluation import fit_baseline


@pytest.fixture(scope="session")
def sdse():
    return datasets.make_dataset("sdse", 0)


@pytest.fixture(scope="session")
def sdse_baseline(sdse):
    return fit_baseline(sdse, narx.get_preset("sdse"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
