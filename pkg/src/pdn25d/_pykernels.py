"""Pure-Python/numpy reference versions of the compiled kernels."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def march(lu, br_a, br_b, g, ca, cb, cc, cd, i_state, s_state, x0,
          const_rhs, src_unknown, src_values, monitored, out):
    """Trapezoidal time stepping with a fixed factorization.

    Mirrors ``_ckernels.march``: returns -1 on success or the index of the
    first step whose solution is not finite. ``i_state``/``s_state`` are
    updated in place; ``out[n]`` receives the monitored unknowns at step n.
    """
    n = len(x0)
    nb = len(br_a)
    # incidence of dynamic branches; ground terminals (-1) dropped
    rows = np.concatenate([br_a, br_b])
    cols = np.concatenate([np.arange(nb), np.arange(nb)])
    vals = np.concatenate([np.ones(nb), -np.ones(nb)])
    keep = rows >= 0
    inc = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, nb))
    inc_t = inc.T.tocsr()
    src = sp.csr_matrix(
        (np.ones(len(src_unknown)), (src_unknown, np.arange(len(src_unknown)))),
        shape=(n, len(src_unknown)),
    )
    src_rhs = (src @ src_values.T).T if len(src_unknown) else None

    x = np.array(x0, dtype=float)
    out[0] = x[monitored]
    v = inc_t @ x
    for step in range(src_values.shape[0] - 1):
        j = ca * v + cb * i_state + cc * s_state
        rhs = const_rhs - inc @ j
        if src_rhs is not None:
            rhs -= src_rhs[step + 1]
        x = lu.solve(rhs)
        if not np.isfinite(x).all():
            return step + 1
        v = inc_t @ x
        i_new = g * v + j
        s_state += cd * (i_state + i_new)
        i_state[:] = i_new
        out[step + 1] = x[monitored]
    return -1


def vvi_batch(t, v, vmin, vmax):
    """Exact integral of the out-of-band excess of piecewise-linear traces.

    ``v`` has shape (n_samples, n_traces); returns one value per trace.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    dt = np.diff(t)[:, None]
    total = np.zeros(v.shape[1])
    for u in (v - vmax, vmin - v):
        u0, u1 = u[:-1], u[1:]
        both = (u0 >= 0) & (u1 >= 0)
        area = np.where(both, 0.5 * (u0 + u1) * dt, 0.0)
        cross = (u0 > 0) != (u1 > 0)
        cross &= ~both
        if cross.any():
            up = np.where(u0 > 0, u0, u1)
            span = np.abs(u1 - u0)
            with np.errstate(divide="ignore", invalid="ignore"):
                tri = np.where(span > 0, 0.5 * up * up / span * dt, 0.0)
            area = area + np.where(cross, tri, 0.0)
        total += area.sum(axis=0)
    return total
