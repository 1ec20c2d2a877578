"""Publication-style figure regeneration from trionw output files."""

__version__ = "0.1.0"

from .data import MissingColumn, SchemaMismatch
from .render import KINDS, FigureSpec, render

__all__ = ["FigureSpec", "render", "KINDS", "SchemaMismatch", "MissingColumn"]
