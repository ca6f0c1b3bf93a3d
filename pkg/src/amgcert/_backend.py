"""Kernel backend selection.

The Cython extension is preferred; the pure-Python module is the fallback.
Setting ``AMGCERT_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

kernels = _fallback
COMPILED = False

if os.environ.get("AMGCERT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
        COMPILED = True
    except ImportError:  # extension not built
        kernels = _fallback

BACKEND = "cython" if COMPILED else "python"


def get(name):
    """Return kernel module by name: ``"cython"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
