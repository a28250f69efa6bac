"""Hot-loop backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise (or
when ``DUALSRC_PURE_PYTHON=1``) the numpy versions in ``_pykernels`` are used.
"""
import os

from . import _pykernels

if os.environ.get("DUALSRC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

tbs_path = _impl.tbs_path
table_path = _impl.table_path
walk_sup = _impl.walk_sup
walk_sup_bytes = _impl.walk_sup_bytes
bellman_sweep = _impl.bellman_sweep
gth_band = _impl.gth_band

__all__ = ["BACKEND", "tbs_path", "table_path", "walk_sup", "walk_sup_bytes", "bellman_sweep", "gth_band"]
