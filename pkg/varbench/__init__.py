"""
varbench
A workbench for variability analyses of C-preprocessor product lines
"""

from importlib.metadata import version, PackageNotFoundError

try:
    __version__ = version("varbench")
except PackageNotFoundError:
    __version__ = "0+unknown"
