# tests/conftest.py

import pytest
import torch

from shadowformer.services.retinex import generate_dataset


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(0)


@pytest.fixture
def synthetic_root(tmp_path):
    """Four 32x32 train and two test triplets in the ISTD layout."""

    root = tmp_path / "synthetic"
    generate_dataset(4, 32, 32, rng_seed=0, out_dir=root, split="train")
    generate_dataset(2, 32, 32, rng_seed=4, out_dir=root, split="test")
    return root
