# Sphinx configuration for the latteds API reference.
#
# Build with ``sphinx-build docs docs/_build``; the package is imported from
# the repository root, so its dependencies must be installed.
import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from latteds import __version__  # noqa: E402

project = 'latteds'
copyright = '2026, Pelmenoff'
author = 'Pelmenoff'
release = __version__

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.coverage',
    'sphinx.ext.napoleon',
    'sphinx.ext.intersphinx',
    'sphinx.ext.mathjax',
]

exclude_patterns = ['_build']

# Google-style docstrings with "Attributes:" sections on records and dataclasses.
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_use_ivar = True

autodoc_default_options = {
    'members': True,
    'member-order': 'bysource',
    'show-inheritance': True,
}
autodoc_typehints = 'description'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
    'scipy': ('https://docs.scipy.org/doc/scipy', None),
    'pydantic': ('https://docs.pydantic.dev/latest', None),
}

html_theme = 'alabaster'
html_theme_options = {
    'description': 'Energy balance diagnostics for lattice dissipative systems',
}
