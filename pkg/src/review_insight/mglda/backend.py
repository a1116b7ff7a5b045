"""Pick the Gibbs sweep implementation at import time.

The compiled kernel is used when it was built; set
``REVIEW_INSIGHT_BACKEND=python`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _sweep_py

python_sweep = _sweep_py.sweep

try:
    from ._gibbs import sweep as compiled_sweep
except ImportError:  # extension not built
    compiled_sweep = None

if compiled_sweep is not None and os.environ.get("REVIEW_INSIGHT_BACKEND", "").lower() != "python":
    BACKEND = "cython"
    sweep = compiled_sweep
else:
    BACKEND = "python"
    sweep = python_sweep


def get_sweep(name: str | None = None):
    """Return the sweep for ``name`` ("cython" or "python"); the active one when None."""
    if name is None:
        return sweep
    if name == "python":
        return python_sweep
    if name == "cython":
        if compiled_sweep is None:
            raise RuntimeError("compiled Gibbs kernel is not built")
        return compiled_sweep
    raise ValueError(f"unknown backend {name!r}")
