# Configuration file for the Sphinx documentation builder.
#
# This file does only contain a selection of the most common options. For a
# full list see the documentation:
# http://www.sphinx-doc.org/en/master/config

# -- Path setup --------------------------------------------------------------

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here.

import os
import sys
sys.path.insert(0, os.path.abspath("../../"))

import varbench  # noqa


# -- Project information -----------------------------------------------------

project = "varbench"
copyright = (
    "2026, The varbench developers. "
    "Project structure based on the "
    "MDAnalysis Cookiecutter version 0.1"
)
author = "The varbench developers"

# The short X.Y version
version = varbench.__version__
# The full version, including alpha/beta/rc tags
release = varbench.__version__


# -- General configuration ---------------------------------------------------

needs_sphinx = "6.2.1"

extensions = [
    "sphinx.ext.autosummary",
    "sphinx.ext.autodoc",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "sphinx.ext.intersphinx",
]

autosummary_generate = True
# This skips generating an autodoc of the test module
# when using the autosummary directive that is included
# by default in the template for the api docs.
autodoc_mock_imports = [
    'varbench.tests'
]
napoleon_google_docstring = False
napoleon_use_param = False
napoleon_use_ivar = True

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"
language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "default"


# -- Options for HTML output -------------------------------------------------

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
htmlhelp_basename = "varbenchdoc"


# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, "varbench", "varbench Documentation",
     [author], 1)
]


# -- Extension configuration -------------------------------------------------

intersphinx_mapping = {
    "python": ("https://docs.python.org/3/", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
}
