import numpy as np
import pytest

from frag_core.trees import path_tree, star_tree


@pytest.fixture
def rng():
    """Fresh generator with a pinned seed for every test."""
    return np.random.default_rng(12345)


@pytest.fixture
def star4():
    return star_tree(4)


@pytest.fixture
def path3():
    return path_tree(3)


@pytest.fixture
def write_config(tmp_path):
    """Write a key = value experiment config and return its path."""
    def _write(text: str, name: str = "experiment.env"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return _write
