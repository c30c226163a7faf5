"""Backend selection for the hot loops.

The compiled extension ``ericksen._ckernels`` is used when it was built;
otherwise (or when ``ERICKSEN_PURE_PYTHON`` is set to a non-empty value)
the NumPy implementations in ``ericksen._pykernels`` are used.
"""
import os

import numpy as np

from . import _pykernels

BACKENDS = {"python": _pykernels}
try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and not os.environ.get("ERICKSEN_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = BACKENDS[BACKEND]


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None


def _i32(a):
    return np.ascontiguousarray(a, dtype=np.int32)


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def csr_matvec(indptr, indices, data, x, backend=None):
    impl = get_backend(backend)
    return impl.csr_matvec(_i32(indptr), _i32(indices), _f64(data), _f64(x))


def pcg(indptr, indices, data, b, x, dinv, rtol, atol, maxiter, backend=None):
    impl = get_backend(backend)
    return impl.pcg(_i32(indptr), _i32(indices), _f64(data), _f64(b), x,
                    _f64(dinv), float(rtol), float(atol), int(maxiter))


def pair_sqdist(ei, ej, v, backend=None):
    impl = get_backend(backend)
    return impl.pair_sqdist(_i32(ei), _i32(ej), _f64(v))


def scatter_pairs(ei, ej, w, n, backend=None):
    impl = get_backend(backend)
    return impl.scatter_pairs(_i32(ei), _i32(ej), _f64(w), int(n))
