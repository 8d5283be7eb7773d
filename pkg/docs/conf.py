# mtsa documentation build configuration file.

from __future__ import annotations

import mtsa as py_pkg

# -- General configuration -----------------------------------------------------

needs_sphinx = "4.0.0"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    # External
    "sphinx_copybutton",
]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3.9", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
}

autodoc_default_options = {
    "member-order": "bysource",
    "members": True,
    "show-inheritance": True,
    "special-members": "__init__",
    "undoc-members": True,
}
autodoc_inherit_docstrings = False

nitpick_ignore = [
    # numpy and pandas aliases that autodoc cannot resolve
    ("py:class", "np.ndarray"),
    ("py:class", "numpy.ndarray"),
    ("py:class", "pd.DataFrame"),
    ("py:class", "pandas.core.frame.DataFrame"),
    ("py:class", "typing_extensions.Literal"),
    ("py:class", "SolverName"),
    ("py:class", "pyo.ConcreteModel"),
    ("py:class", "pyo.Var"),
]

source_suffix = ".rst"
master_doc = "index"

# General information about the project.
project = py_pkg.__name__
copyright = "2026, the mtsa developers"

version = py_pkg.__version__
release = py_pkg.__version__

today = "1"

exclude_patterns = ["_build"]

pygments_style = "sphinx"

# -- Options for HTML output ---------------------------------------------------

html_theme = "furo"
html_last_updated_fmt = "%b %d, %Y"
html_show_sphinx = False
html_show_copyright = False
htmlhelp_basename = "mtsadoc"

# -- Options for LaTeX output --------------------------------------------------

latex_elements = {"papersize": "a4paper", "pointsize": "10pt"}

# Grouping the document tree into LaTeX files. List of tuples
# (source start file, target name, title, author, documentclass [howto/manual]).
latex_documents = [
    ("index", "mtsa.tex", "mtsa Documentation", "the mtsa developers", "manual")
]

# -- Options for manual page output --------------------------------------------

# One entry per manual page. List of tuples
# (source start file, name, description, authors, manual section).
man_pages = [("index", "mtsa", "mtsa Documentation", ["the mtsa developers"], 1)]

# -- Options for Napoleon  -----------------------------------------------------

napoleon_google_docstring = True
napoleon_numpy_docstring = False  # Explicitly prefer Google style docstring
napoleon_use_param = True  # for type hint support
