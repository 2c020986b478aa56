"""Hot kernels: compiled Cython when available, numpy otherwise.

Set ``GROWDP_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

if os.environ.get("GROWDP_PURE_PYTHON"):
    from ._pykernels import *  # noqa: F401,F403
    BACKEND = "python"
else:
    try:
        from ._ckernels import *  # noqa: F401,F403
        BACKEND = "cython"
    except ImportError:
        from ._pykernels import *  # noqa: F401,F403
        BACKEND = "python"

from . import _pykernels as python_kernels  # noqa: E402

__all__ = [
    "BACKEND",
    "atg_halt_batch",
    "laplace_from_uniform",
    "mw_update",
    "python_kernels",
    "relative_entropy",
    "uniform_update",
]
