"""Backend selection for the hot kernels.

The compiled extension ``entfree._ckernels`` is used when it imports;
otherwise the numpy versions in ``entfree._pykernels`` are used. Setting
``ENTFREE_PURE_PYTHON=1`` forces the fallback.

All wrappers here take arbitrary array-likes, coerce them to contiguous
complex128/float64 buffers and dispatch to the selected backend.
"""
import os

import numpy as np

from . import _pykernels

_ckernels = None
if os.environ.get("ENTFREE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"
_impl = _ckernels if _ckernels is not None else _pykernels


def backends():
    """Return the available backend modules keyed by name."""
    out = {"python": _pykernels}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out


def _c2(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def kron(a, b):
    return _impl.kron(_c2(a), _c2(b))


def partial_trace(m, d_a, d_b, keep_a):
    return _impl.partial_trace(_c2(m), int(d_a), int(d_b), bool(keep_a))


def phase_kick(psi, v, factor):
    """Multiply ``psi`` in place by exp(-i*factor*v).

    ``psi`` must be a C-contiguous complex128 array; ``v`` is broadcast to
    its shape.
    """
    if psi.dtype != np.complex128 or not psi.flags.c_contiguous:
        raise TypeError("phase_kick needs a C-contiguous complex128 array")
    v = np.ascontiguousarray(np.broadcast_to(v, psi.shape), dtype=np.float64)
    _impl.phase_kick(psi.reshape(-1), v.reshape(-1), float(factor))
    return psi


def abs2_sum(psi):
    return float(_impl.abs2_sum(_c2(psi).reshape(-1)))
