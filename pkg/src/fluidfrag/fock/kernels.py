"""Kernel backend selection.

The compiled extension is used when importable; set ``FLUIDFRAG_PURE_PYTHON=1``
to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("FLUIDFRAG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

build_table = _impl.build_table
apply_one_body = _impl.apply_one_body
excite_all = _impl.excite_all
contract = _impl.contract

__all__ = ["BACKEND", "build_table", "apply_one_body", "excite_all", "contract"]
