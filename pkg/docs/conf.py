# Sphinx configuration for the contractclear docs.

import re
import os
import sys
sys.path.insert(0, os.path.abspath('..'))

# -- Project information -----------------------------------------------------

project = 'contractclear'
copyright = '2026-present, contractclear developers'
author = 'contractclear developers'

version = ''
with open('../contractclear/__init__.py') as f:
    version = re.search(r'^__version__\s*=\s*[\'"]([^\'"]*)[\'"]', f.read(), re.MULTILINE).group(1)

release = version

intersphinx_mapping = {
  'py': ('https://docs.python.org/3', None),
  'numpy': ('https://numpy.org/doc/stable/', None),
  'scipy': ('https://docs.scipy.org/doc/scipy/', None),
  'pandas': ('https://pandas.pydata.org/docs/', None),
}

highlight_language = 'python3'
source_suffix = '.rst'

# -- General configuration ---------------------------------------------------

extensions = [
  'sphinx.ext.autodoc',
  'sphinx.ext.intersphinx',
  'sphinx.ext.napoleon',
]

autodoc_member_order = 'bysource'
autodoc_typehints = 'none'

napoleon_numpy_docstring = True

templates_path = ['_templates']
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_sidebars = {
  '**': [
    'localtoc.html',
    'searchbox.html'
  ]
}
