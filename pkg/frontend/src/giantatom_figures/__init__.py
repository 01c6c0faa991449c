"""Publication-style figure rendering for giantatom CSV outputs.

This package never computes physics: it reads the CSV files and JSON
metadata sidecars written by the ``giantatom`` command-line tool and
renders them with matplotlib.  Rendering is deterministic; SVG output is
byte-stable across reruns.
"""

from .render import FigureSpecError, render_spec

__all__ = ["FigureSpecError", "render_spec"]
__version__ = "0.1.0"
