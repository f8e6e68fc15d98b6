# -*- coding: utf-8 -*-
#
# ksflow documentation build configuration file.

import sys
import os

# the package is documented from the source tree
sys.path.insert(0, os.path.abspath(".."))

# -- General configuration ------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.coverage",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "ksflow"
copyright = "2025-2026, The ksflow developers"
author = "The ksflow developers"

version = "0.1.0"
release = "0.1.0"

language = "en"
exclude_patterns = ["_build"]
pygments_style = "sphinx"
todo_include_todos = False

# numpy style sections in the docstrings
napoleon_numpy_docstring = True
napoleon_google_docstring = False

# -- Options for HTML output ----------------------------------------------

html_theme = "alabaster"
html_static_path = ["_static"]
htmlhelp_basename = "ksflowdoc"

# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
    (master_doc, "ksflow.tex", "ksflow Documentation", author, "manual"),
]

man_pages = [(master_doc, "ksflow", "ksflow Documentation", [author], 1)]
