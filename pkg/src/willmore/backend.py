"""Kernel backend selection: compiled extension with numpy fallback.

The pointwise geometry kernels exist twice: as a Cython extension
(``willmore._geomcore``) and as a numpy twin (``willmore._geomcore_np``).
The compiled module is preferred when importable; set the environment
variable ``WILLMORE_FORCE_NUMPY=1`` to force the fallback (used by the
benchmark and the equivalence tests).
"""

from __future__ import annotations

import os

from . import _geomcore_np

_FORCE_NUMPY = os.environ.get("WILLMORE_FORCE_NUMPY", "").strip() in ("1", "true", "yes")

if not _FORCE_NUMPY:
    try:
        from . import _geomcore as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _geomcore_np
        BACKEND = "numpy"
else:
    _impl = _geomcore_np
    BACKEND = "numpy"


def backend_name() -> str:
    """Name of the active kernel backend ('cython' or 'numpy')."""
    return BACKEND


def get_backends():
    """(name, module) pairs of all available backends, for benchmarking."""
    out = [("numpy", _geomcore_np)]
    try:
        from . import _geomcore

        out.append(("cython", _geomcore))
    except ImportError:
        pass
    return out


import numpy as _np


def _ascontig(a):
    return _np.ascontiguousarray(a, dtype=_np.float64)


def assemble_geometry(fu, fv, fuu, fuv, fvv):
    return _impl.assemble_geometry(
        _ascontig(fu), _ascontig(fv), _ascontig(fuu), _ascontig(fuv), _ascontig(fvv)
    )


def q_action(ginv, A0, phi):
    return _impl.q_action(_ascontig(ginv), _ascontig(A0), _ascontig(phi))


def project_tangent(fu, fv, ginv, W):
    return _impl.project_tangent(
        _ascontig(fu), _ascontig(fv), _ascontig(ginv), _ascontig(W)
    )
