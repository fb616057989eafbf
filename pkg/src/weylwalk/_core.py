"""Kernel backend selection.

The compiled extension is used when importable; setting ``WEYLWALK_PURE=1``
forces the pure-Python kernels.
"""
import os

from . import _fallback

BACKEND = "python"
kernels = _fallback

if os.environ.get("WEYLWALK_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        kernels = _fallback

MODE_TRIVIAL = _fallback.MODE_TRIVIAL
MODE_MODULAR = _fallback.MODE_MODULAR
MODE_CYCLIC = _fallback.MODE_CYCLIC
MODE_GREEDY = _fallback.MODE_GREEDY
