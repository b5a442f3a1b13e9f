"""Hot kernels with a numba path and a pure-numpy fallback.

Set ``SGM_DISABLE_NUMBA=1`` before import to force the numpy path.  Both
paths compute the same arithmetic; the fallback is vectorized over points.
"""

import os
import types

import numpy as np

_DISABLED = os.environ.get("SGM_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via env flag
    NUMBA_AVAILABLE = False


SNAP = 1e-10


def _lagrange_weights_np(t):
    # 4-point Lagrange basis on nodes -1, 0, 1, 2 evaluated at t in [0, 1)
    w0 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w2 = -(t + 1.0) * t * (t - 2.0) / 2.0
    w3 = (t + 1.0) * t * (t - 1.0) / 6.0
    return w0, w1, w2, w3


def bicubic_numpy(values, px, py, dx, dy):
    """Tensor-product cubic Lagrange interpolation on a periodic grid.

    ``values`` has shape (ny, nx); ``px``, ``py`` are 1-D point coordinates.
    """
    ny, nx = values.shape
    sx = px / dx
    sy = py / dy
    # snap coordinates that are nodes up to rounding so nodal values come back exactly
    rx, ry = np.round(sx), np.round(sy)
    sx = np.where(np.abs(sx - rx) < SNAP, rx, sx)
    sy = np.where(np.abs(sy - ry) < SNAP, ry, sy)
    ix = np.floor(sx)
    iy = np.floor(sy)
    tx = sx - ix
    ty = sy - iy
    ix = ix.astype(np.int64)
    iy = iy.astype(np.int64)
    wx = _lagrange_weights_np(tx)
    wy = _lagrange_weights_np(ty)
    out = np.zeros(px.shape[0])
    for b in range(4):
        jj = (iy + b - 1) % ny
        row = np.zeros(px.shape[0])
        for a in range(4):
            ii = (ix + a - 1) % nx
            row += wx[a] * values[jj, ii]
        out += wy[b] * row
    return out


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _bicubic_numba(values, px, py, dx, dy):
        ny, nx = values.shape
        n = px.shape[0]
        out = np.empty(n)
        wx = np.empty(4)
        wy = np.empty(4)
        for k in range(n):
            sx = px[k] / dx
            sy = py[k] / dy
            if abs(sx - np.round(sx)) < SNAP:
                sx = np.round(sx)
            if abs(sy - np.round(sy)) < SNAP:
                sy = np.round(sy)
            fx = np.floor(sx)
            fy = np.floor(sy)
            tx = sx - fx
            ty = sy - fy
            ix = int(fx)
            iy = int(fy)
            wx[0] = -tx * (tx - 1.0) * (tx - 2.0) / 6.0
            wx[1] = (tx + 1.0) * (tx - 1.0) * (tx - 2.0) / 2.0
            wx[2] = -(tx + 1.0) * tx * (tx - 2.0) / 2.0
            wx[3] = (tx + 1.0) * tx * (tx - 1.0) / 6.0
            wy[0] = -ty * (ty - 1.0) * (ty - 2.0) / 6.0
            wy[1] = (ty + 1.0) * (ty - 1.0) * (ty - 2.0) / 2.0
            wy[2] = -(ty + 1.0) * ty * (ty - 2.0) / 2.0
            wy[3] = (ty + 1.0) * ty * (ty - 1.0) / 6.0
            acc = 0.0
            for b in range(4):
                jj = (iy + b - 1) % ny
                row = 0.0
                for a in range(4):
                    ii = (ix + a - 1) % nx
                    row += wx[a] * values[jj, ii]
                acc += wy[b] * row
            out[k] = acc
        return out

    def bicubic(values, px, py, dx, dy):
        return _bicubic_numba(
            np.ascontiguousarray(values, dtype=np.float64),
            np.ascontiguousarray(px, dtype=np.float64),
            np.ascontiguousarray(py, dtype=np.float64),
            float(dx),
            float(dy),
        )

else:
    bicubic = bicubic_numpy


def _lp_rhs(x, inertia, grav, xis, dw, dt, out):
    # -ad*_{(m/I, grav)}(m,a) dt - sum_i ad*_{(xi_i,0)}(m,a) dW_i, written out in R^3
    m0, m1, m2, a0, a1, a2 = x[0], x[1], x[2], x[3], x[4], x[5]
    w0 = m0 / inertia[0]
    w1 = m1 / inertia[1]
    w2 = m2 / inertia[2]
    out[0] = ((w1 * m2 - w2 * m1) + (grav[1] * a2 - grav[2] * a1)) * dt
    out[1] = ((w2 * m0 - w0 * m2) + (grav[2] * a0 - grav[0] * a2)) * dt
    out[2] = ((w0 * m1 - w1 * m0) + (grav[0] * a1 - grav[1] * a0)) * dt
    out[3] = (w1 * a2 - w2 * a1) * dt
    out[4] = (w2 * a0 - w0 * a2) * dt
    out[5] = (w0 * a1 - w1 * a0) * dt
    for i in range(xis.shape[0]):
        s0, s1, s2 = xis[i, 0], xis[i, 1], xis[i, 2]
        w = dw[i]
        out[0] += (s1 * m2 - s2 * m1) * w
        out[1] += (s2 * m0 - s0 * m2) * w
        out[2] += (s0 * m1 - s1 * m0) * w
        out[3] += (s1 * a2 - s2 * a1) * w
        out[4] += (s2 * a0 - s0 * a2) * w
        out[5] += (s0 * a1 - s1 * a0) * w


def _lp_run(x0, inertia, grav, xis, dws, dt, tol, max_iter, save_every):
    """Implicit-midpoint Lie-Poisson run on so(3) x R^3.

    Returns (saved_states, status, residual); status 0 ok, else the failing
    step index + 1.
    """
    n_steps = dws.shape[0]
    n_save = n_steps // save_every + (1 if n_steps % save_every else 0) + 1
    saved = np.empty((n_save, 6))
    saved[0, :] = x0
    x = x0.copy()
    x1 = np.empty(6)
    xm = np.empty(6)
    inc = np.empty(6)
    k = 1
    for n in range(n_steps):
        dw = dws[n]
        _lp_rhs(x, inertia, grav, xis, dw, dt, inc)
        for c in range(6):
            x1[c] = x[c] + inc[c]
        scale = 1.0
        for c in range(6):
            if abs(x[c]) > scale:
                scale = abs(x[c])
        ok = False
        res = 0.0
        for it in range(max_iter):
            for c in range(6):
                xm[c] = 0.5 * (x[c] + x1[c])
            _lp_rhs(xm, inertia, grav, xis, dw, dt, inc)
            res = 0.0
            for c in range(6):
                new = x[c] + inc[c]
                d = abs(new - x1[c])
                if d > res:
                    res = d
                x1[c] = new
            if res <= tol * scale:
                ok = True
                break
        if not ok:
            return saved[:k], n + 1, res
        for c in range(6):
            x[c] = x1[c]
        if (n + 1) % save_every == 0 or n + 1 == n_steps:
            saved[k, :] = x
            k += 1
    return saved[:k], 0, 0.0


# Same code object bound to the un-jitted rhs: the pure fallback path.
lie_poisson_run_python = types.FunctionType(_lp_run.__code__, {**globals(), "_lp_rhs": _lp_rhs})

if NUMBA_AVAILABLE:
    _lp_rhs = njit(cache=True)(_lp_rhs)
    lie_poisson_run = njit(cache=True)(_lp_run)
else:
    lie_poisson_run = lie_poisson_run_python
