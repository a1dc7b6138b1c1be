"""Backend selection for the hot loops.

The compiled extension ``pdn25d._ckernels`` is used when it imports and
``PDN25D_PURE_PYTHON`` is not set to ``1``; otherwise the numpy versions in
``pdn25d._pykernels`` run. Both produce the same results to rounding.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

HAVE_EXTENSION = _ckernels is not None
BACKEND = "cython" if HAVE_EXTENSION and os.environ.get("PDN25D_PURE_PYTHON") != "1" else "python"


def set_backend(name: str) -> None:
    global BACKEND
    if name not in ("cython", "python"):
        raise ValueError(name)
    if name == "cython" and not HAVE_EXTENSION:
        raise RuntimeError("compiled kernels are not available; build with `pip install -e .`")
    BACKEND = name


def _factors(lu):
    n = lu.shape[0]
    out = []
    for mat in (lu.L.tocsc(), lu.U.tocsc()):
        mat.sort_indices()
        ind = mat.indices.astype(np.int32)
        ptr = mat.indptr.astype(np.int32)
        diag = np.empty(n, dtype=np.int32)
        for j in range(n):
            seg = np.flatnonzero(ind[ptr[j] : ptr[j + 1]] == j)
            if not len(seg):
                raise ZeroDivisionError(f"zero pivot in column {j}")
            diag[j] = ptr[j] + seg[0]
        out.append((np.ascontiguousarray(mat.data, dtype=np.float64), ind, ptr, diag))
    return out


def march(lu, br_a, br_b, g, ca, cb, cc, cd, i_state, s_state, x0,
          const_rhs, src_unknown, src_values, monitored, out, backend=None):
    backend = backend or BACKEND
    if backend == "python":
        return _pykernels.march(lu, br_a, br_b, g, ca, cb, cc, cd, i_state, s_state, x0,
                                const_rhs, src_unknown, src_values, monitored, out)
    (ld, li, lp, ldg), (ud, ui, up, udg) = _factors(lu)
    i32 = lambda a: np.ascontiguousarray(a, dtype=np.int32)  # noqa: E731
    f64 = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
    return _ckernels.march(
        ld, li, lp, ldg, ud, ui, up, udg, i32(lu.perm_r), i32(lu.perm_c),
        i32(br_a), i32(br_b), f64(g), f64(ca), f64(cb), f64(cc), f64(cd),
        i_state, s_state, f64(x0), f64(const_rhs), i32(src_unknown),
        np.ascontiguousarray(src_values, dtype=np.float64), i32(monitored), out,
    )


def vvi_batch(t, v, vmin, vmax, backend=None):
    backend = backend or BACKEND
    if backend == "python":
        return _pykernels.vvi_batch(t, v, vmin, vmax)
    return _ckernels.vvi_batch(
        np.ascontiguousarray(t, dtype=np.float64),
        np.ascontiguousarray(v, dtype=np.float64),
        float(vmin),
        float(vmax),
    )
