"""Select the evaluation kernel at import time.

The compiled ``_evalc`` extension is used when it was built; otherwise, or
when ``BIRLIFT_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the pure-Python ``_evalpy`` module is used.
"""

from __future__ import annotations

import importlib
import os
from types import ModuleType

from . import _evalpy


def _load_compiled() -> ModuleType | None:
    try:
        return importlib.import_module("birlift._evalc")
    except ImportError:
        return None


def available() -> dict[str, ModuleType]:
    """All kernels importable in this installation, keyed by name."""
    found = {"python": _evalpy}
    compiled = _load_compiled()
    if compiled is not None:
        found["cython"] = compiled
    return found


def _select() -> ModuleType:
    if os.environ.get("BIRLIFT_PURE_PYTHON", "") not in ("", "0"):
        return _evalpy
    return _load_compiled() or _evalpy


kernel = _select()
BACKEND: str = kernel.BACKEND
eval_expr = kernel.eval_expr
run_stmts = kernel.run_stmts
run_block = kernel.run_block
weak_run = kernel.weak_run
