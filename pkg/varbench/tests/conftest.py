"""
Global pytest fixtures
"""

import shutil

import numpy as np
import pytest

from varbench.config import load_config_file
from varbench.data.files import MINI_SPL


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def mini_spl(tmp_path):
    """Writable copy of the bundled mini product line."""
    tree = tmp_path / 'mini-spl'
    shutil.copytree(MINI_SPL, tree)
    return tree


@pytest.fixture
def experiment(mini_spl, tmp_path):
    """Load one of the mini product line's configurations, writing to a
    fresh output directory."""
    def load(name, *overrides, output='out'):
        return load_config_file(mini_spl / f'{name}.properties',
                                [f'output_dir={tmp_path / output}',
                                 *overrides])
    return load
