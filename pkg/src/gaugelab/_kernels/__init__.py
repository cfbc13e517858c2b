"""Kernel backend selection.

The compiled extension (`_fast`) implements the stencil and gauge kernels in
Cython; the numpy module (`py_backend`) is the reference.  Selection happens
once at import: the extension is used when present unless GAUGELAB_BACKEND is
set to "python".  Public call sites import from this module only.
"""

import importlib
import os

import numpy as np

from . import py_backend as _py

_requested = os.environ.get("GAUGELAB_BACKEND", "auto").lower()
_impl = None
if _requested in ("auto", "compiled", "c", "fast"):
    try:
        _impl = importlib.import_module("._fast", __name__)
    except ImportError:
        _impl = None
        if _requested != "auto":
            raise

BACKEND = "compiled" if _impl is not None else "python"


def _c2(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def diff(F, axis, h):
    if _impl is not None and axis in (0, 1):
        return _impl.diff(_c2(F), int(axis), float(h))
    return _py.diff(F, axis, h)


def diff_t(F, axis, h):
    if _impl is not None and axis in (0, 1):
        return _impl.diff_t(_c2(F), int(axis), float(h))
    return _py.diff_t(F, axis, h)


def gauge_fields(P, Om, h):
    if _impl is not None:
        return _impl.gauge_fields(_c2(P), _c2(Om), float(h))
    return _py.gauge_fields(P, Om, h)


def energy(P, Om, h):
    # one summation path for both backends: the descent loop compares energies
    # between calls, so the reduction order must not depend on the call site
    A, _, _ = gauge_fields(P, Om, h)
    return float(np.sum(A * A) * h * h)


def so_exp(Z, tau=1.0):
    Z = np.asarray(Z)
    if _impl is not None and Z.shape[-1] in (2, 3):
        return _impl.so_exp(_c2(Z), float(tau))
    return _py.so_exp(Z, tau)


def rot_update(P, Z, tau):
    P = np.asarray(P)
    if _impl is not None and P.shape[-1] in (2, 3):
        return _impl.rot_update(_c2(P), _c2(Z), float(tau))
    return _py.rot_update(P, Z, tau)
