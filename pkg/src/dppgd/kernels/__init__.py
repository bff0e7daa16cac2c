"""Round kernels: a compiled Cython build when available, numpy otherwise.

Set ``DPPGD_PURE_PYTHON=1`` to ignore the compiled module.
"""
import os

from . import _numpy

try:
    if os.environ.get("DPPGD_PURE_PYTHON"):
        raise ImportError("compiled kernel disabled by DPPGD_PURE_PYTHON")
    from . import _compiled
except ImportError:
    _compiled = None

HAVE_COMPILED = _compiled is not None
DEFAULT = "compiled" if HAVE_COMPILED else "python"


def get(name: str = DEFAULT):
    if name == "python":
        return _numpy
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled
    raise ValueError(f"unknown kernel {name!r}")
