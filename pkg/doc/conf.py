#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# gradflow documentation build configuration file, created by
# sphinx-quickstart.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))
# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.autodoc']

templates_path = ['_templates']

source_suffix = '.rst'

# The master toctree document.
master_doc = 'index'

# General information about the project.
project = 'gradflow'
copyright = '2026, gradflow developers'
author = 'gradflow developers'

# The short X.Y version.
version = '0.1'
# The full version, including alpha/beta/rc tags.
release = '0.1.0'

language = None

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

pygments_style = 'sphinx'

todo_include_todos = False

autodoc_mock_imports = ['numpy', 'scipy', 'networkx']

# -- Options for HTML output ----------------------------------------------

html_theme = 'nature'

html_static_path = ['_static']

html_sidebars = {
    '**': [
        'relations.html',  # needs 'show_related': True theme option to display
        'searchbox.html',
    ]
}

# -- Options for HTMLHelp output ------------------------------------------

htmlhelp_basename = 'gradflowdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {}

latex_documents = [
    (master_doc, 'gradflow.tex', 'gradflow Documentation',
     'gradflow developers', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'gradflow', 'gradflow Documentation',
     [author], 1)
]

# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
    (master_doc, 'gradflow', 'gradflow Documentation',
     author, 'gradflow', 'Continuous-time P, I and PI distributed optimization.',
     'Miscellaneous'),
]
