"""Kernel backend selection: compiled extension if built, numpy otherwise."""

try:
    from ._kernels import match_links, interference_power  # noqa: F401
    BACKEND = "compiled"
except ImportError:
    from .kernels_py import match_links, interference_power  # noqa: F401
    BACKEND = "python"
