"""Kernel backend selection.

The compiled sweep is preferred; the NumPy fallback keeps the package
importable when the extension was not built. ``LASSOSI_KERNEL=python``
forces the fallback (used by the backend benchmark and equivalence tests).
"""

import os

from . import _cd_numpy

try:
    from . import _cd_cython
except ImportError:
    _cd_cython = None

_BACKENDS = {"python": _cd_numpy}
if _cd_cython is not None:
    _BACKENDS["cython"] = _cd_cython


def get_backend(name):
    """Return a kernel module by name ('python' or 'cython')."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {name!r}; built: {sorted(_BACKENDS)}"
        ) from None


def available_backends():
    return sorted(_BACKENDS)


_requested = os.environ.get("LASSOSI_KERNEL", "auto")
if _requested == "auto":
    default_backend = _cd_cython if _cd_cython is not None else _cd_numpy
else:
    default_backend = get_backend(_requested)

cd_sweep = default_backend.cd_sweep
BACKEND_NAME = default_backend.NAME
