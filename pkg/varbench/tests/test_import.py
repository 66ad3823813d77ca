"""
Unit and regression test for the varbench package.
"""

import sys

import varbench


def test_varbench_imported():
    """Sample test, will always pass so long as import statement worked."""
    assert "varbench" in sys.modules


def test_version_is_text():
    assert isinstance(varbench.__version__, str) and varbench.__version__
