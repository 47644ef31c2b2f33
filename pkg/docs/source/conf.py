# Configuration file for the Sphinx documentation builder.
#
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

import setid

sys.path.insert(0, os.path.abspath("."))
sys.path.insert(0, os.path.abspath(".."))


# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinxcontrib.autodoc_pydantic",
    "sphinx_click",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "setid"
copyright = "2026, setid contributors"
author = "setid developers"

version = setid.__version__
release = setid.__version__

language = "en"

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]


# -- Options for HTML output -------------------------------------------------

html_theme = "pydata_sphinx_theme"

html_theme_options = {
    "collapse_navigation": True,
    "show_nav_level": 2,
    "secondary_sidebar_items": ["page-toc", "sourcelink"],
}

html_sidebars = {
  "**": ["globaltoc.html"],
}

# -- Options for manual page output ------------------------------------

man_pages = [(master_doc, "setid", "setid Documentation", [author], 1)]

autoclass_content = "class"

autodoc_pydantic_model_show_json = False
autodoc_pydantic_model_show_config_summary = False
