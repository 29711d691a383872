"""Channel kernel backend selection.

The compiled Cython extension is used when present; otherwise the numpy
fallback takes over with identical semantics. Set MCLINK_KERNEL=python or
MCLINK_KERNEL=compiled to force a backend (the latter raises if the
extension was not built).
"""

import os

from . import fallback
from .fallback import EXPONENT_CUTOFF

try:
    from . import _core

    HAVE_COMPILED = True
except ImportError:
    _core = None
    HAVE_COMPILED = False

_forced = os.environ.get("MCLINK_KERNEL", "").strip().lower()
if _forced == "compiled" and not HAVE_COMPILED:
    raise ImportError("MCLINK_KERNEL=compiled but the mclink._kernels._core extension is not built")

if _forced == "python" or not HAVE_COMPILED:
    BACKEND = "python"
    superpose_emissions = fallback.superpose_emissions
else:
    BACKEND = "compiled"
    superpose_emissions = _core.superpose_emissions


def get_backend(name: str):
    """Return a backend module by name ('python' or 'compiled'), for benchmarks/tests."""
    if name == "python":
        return fallback
    if name == "compiled":
        if not HAVE_COMPILED:
            raise ImportError("compiled kernel not available")
        return _core
    raise ValueError(f"unknown kernel backend {name!r}")
