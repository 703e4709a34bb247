"""Orbit kernel selection.

The compiled Cython kernel is preferred when it was built; the pure Python
implementation is the fallback and the reference.  Set the environment
variable ``DEGREELAB_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _green_py

_FORCE_PURE = os.environ.get("DEGREELAB_PURE_PYTHON", "").strip().lower() in (
    "1", "true", "yes")

_compiled = None
if not _FORCE_PURE:
    try:
        from . import _green_cy as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _green_py

BACKEND = _impl.BACKEND_NAME
green_orbit = _impl.green_orbit
green_grid = _impl.green_grid


def available_backends():
    """Names of the kernel backends importable in this environment."""
    out = ["python"]
    try:
        from . import _green_cy  # noqa: F401
        out.append("compiled")
    except ImportError:
        pass
    return out


def backend_module(name):
    if name == "python":
        return _green_py
    if name == "compiled":
        from . import _green_cy
        return _green_cy
    raise ValueError(f"unknown kernel backend {name!r}")
