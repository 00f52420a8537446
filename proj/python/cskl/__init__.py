"""Compressive learning: mergeable random-feature sketches and solvers."""

try:
    from ._cskl import *  # noqa: F401,F403
    from . import _cskl as _core
except ImportError:  # in-tree builds put the extension on PYTHONPATH directly
    from _cskl import *  # noqa: F401,F403
    import _cskl as _core

__all__ = [name for name in dir(_core) if not name.startswith("_")]
