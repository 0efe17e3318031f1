"""Scene-coherency objectives for multi-body triangle-mesh scenes."""

from . import parallel  # noqa: F401  (must configure numba before other imports)

__version__ = "0.1.0"
