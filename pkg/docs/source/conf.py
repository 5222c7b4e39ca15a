# -*- coding: utf-8 -*-
#
# TxRPT documentation build configuration file.
#
# All configuration values have a default; values that are commented out
# serve to show the default.

import sys
import os

# The package is documented from the source tree, not from an installed copy.
sys.path.insert(0, os.path.abspath('../../'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.todo',
    'sphinx.ext.coverage',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'TxRPT'
copyright = u'2026, The TxRPT Developers'

# The short X.Y version and the full version, including alpha/beta/rc tags.
version = '26.1.0'
release = version

exclude_patterns = []
pygments_style = 'sphinx'

# Document members in source order so the forward pass reads top to bottom.
autodoc_member_order = 'bysource'

# -- Options for HTML output ----------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'TxRPTdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
  ('index', 'TxRPT.tex', u'TxRPT Documentation',
   u'The TxRPT Developers', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('index', 'txrpt', u'TxRPT Documentation',
     [u'The TxRPT Developers'], 1),
    ('cli', 'rpt', u'Train and evaluate region prompt text detectors',
     [u'The TxRPT Developers'], 1),
]

# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
  ('index', 'TxRPT', u'TxRPT Documentation',
   u'The TxRPT Developers', 'TxRPT', 'Region prompt tuning for scene-text detection.',
   'Miscellaneous'),
]
