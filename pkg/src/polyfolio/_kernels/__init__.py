"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set the environment variable ``POLYFOLIO_PURE=1`` before import to force the
pure implementation (used by the benchmark and the equivalence tests).
"""
import os

import numpy as np

from . import pure

if os.environ.get("POLYFOLIO_PURE"):
    _impl = pure
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = pure

IMPLEMENTATION = _impl.IMPLEMENTATION


def _c1(x):
    a = np.ascontiguousarray(x, dtype=np.float64)
    if not a.flags.writeable:
        a = a.copy()
    return a


def _c2(x):
    a = np.ascontiguousarray(x, dtype=np.float64)
    if not a.flags.writeable:
        a = a.copy()
    return a


def varsi_fraction(R, c):
    return float(_impl.varsi_fraction(_c1(R), float(c)))


def varsi_many(R, cs):
    return np.asarray(_impl.varsi_many(_c1(R), _c1(cs)))


def rehmc_quadratic(A2, a1, B, z, y0, step, n_leapfrog, count, walk_length,
                    burn_in, normals, uniforms, max_reflections=100):
    samples, n_accept, denergy, status = _impl.rehmc_quadratic(
        _c2(A2), _c1(a1), _c2(B), _c1(z), _c1(y0), float(step),
        int(n_leapfrog), int(count), int(walk_length), int(burn_in),
        _c2(normals), _c1(uniforms), int(max_reflections))
    return np.asarray(samples), int(n_accept), float(denergy), int(status)


def min_cost_transport(a, b, C):
    return float(_impl.min_cost_transport(_c1(a), _c1(b), _c2(C)))
