"""Random walks on SL_d(R) and their quotients."""
__version__ = "0.1.0"

from ._core import BACKEND  # noqa: E402  "cython" or "python"

__all__ = ["BACKEND", "__version__"]
