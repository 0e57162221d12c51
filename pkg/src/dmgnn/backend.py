"""Kernel backend selection.

Imports the compiled Cython kernels when available, otherwise the numpy
fallback. ``DMGNN_PURE_PYTHON=1`` forces the fallback (used by the
benchmark and the parity tests).
"""

import os

if os.environ.get("DMGNN_PURE_PYTHON"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

USING_COMPILED = bool(kernels.COMPILED)
