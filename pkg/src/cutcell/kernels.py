"""Selection of the per-cell batch kernel.

The compiled extension ``cutcell._kernel`` is used when it imports; otherwise,
or when ``CUTCELL_PURE_PYTHON`` is set to a non-empty value other than ``0``,
the pure-Python implementation is used.  Both produce bitwise-identical
results.
"""
from __future__ import annotations

import os

from .global_cut import process_cells_py

IMPLEMENTATION = "python"
process_cells = process_cells_py
compiled_process_cells = None

try:
    from ._kernel import process_cells as compiled_process_cells  # type: ignore
except ImportError:  # extension not built
    compiled_process_cells = None

if compiled_process_cells is not None and os.environ.get("CUTCELL_PURE_PYTHON", "") in ("", "0"):
    process_cells = compiled_process_cells
    IMPLEMENTATION = "compiled"
