"""Figure rendering for the tumbling-kernel reconstruction CSV outputs."""

from .io import FigureDataError, load_table
from .render import (
    render_convergence,
    render_eigmap,
    render_illcond,
    render_landscape,
)

__version__ = "0.1.0"

__all__ = [
    "FigureDataError",
    "load_table",
    "render_convergence",
    "render_eigmap",
    "render_illcond",
    "render_landscape",
]
