"""Hot kernels with a compiled core and a pure-numpy fallback.

The compiled ``_core`` extension is used when it imports; setting
``SEHFS_PURE_PYTHON=1`` forces the fallback.  ``BACKEND`` names the active one.
"""

import os

from . import _fallback

if os.environ.get("SEHFS_PURE_PYTHON"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:
        _core = None

if _core is not None:
    mi_matrix = _core.mi_matrix
    project_rows_simplex = _core.project_rows_simplex
    BACKEND = "cython"
else:
    mi_matrix = _fallback.mi_matrix
    project_rows_simplex = _fallback.project_rows_simplex
    BACKEND = "python"

__all__ = ["mi_matrix", "project_rows_simplex", "BACKEND"]
