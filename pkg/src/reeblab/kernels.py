"""Kernel backend selection.

The compiled extension is used when it was built; ``REEBLAB_PURE_PYTHON=1``
forces the numpy fallback.
"""
import os

BACKEND = "python"
if os.environ.get("REEBLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import crossing_sum, gauss_sum  # noqa: F401

        BACKEND = "cython"
    except ImportError:
        pass
if BACKEND == "python":
    from ._kernels_py import crossing_sum, gauss_sum  # noqa: F401,F811
