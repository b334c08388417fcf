"""Pure-Python reference versions of the hot polynomial kernels.

Same signatures as the compiled ``_ckernels`` module. The tensor ``T[k, i, j]``
holds the coefficient of ``x**k * u**i * v**j``.
"""
import math

import numpy as np


def _taylor(coeffs, t, m):
    """Taylor coefficients at t (orders 0..m) along axis 0, by Horner shifts."""
    a = [c.copy() for c in coeffs]
    d = len(a) - 1
    out = []
    for r in range(m + 1):
        if r > d:
            out.append(np.zeros_like(a[0]))
            continue
        for j in range(d - 1, r - 1, -1):
            a[j] = a[j] + t * a[j + 1]
        out.append(a[r])
    return np.stack(out)


def derivatives(T, x, u, v, mx, mp, mq):
    """``out[a, b, c]`` = partial derivative of orders (a, b, c) at (x, u, v)."""
    T = np.asarray(T, dtype=float)
    A = _taylor(list(np.moveaxis(T, 2, 0)), v, mq)       # (mq+1, K, I)
    A = _taylor(list(np.moveaxis(A, 2, 0)), u, mp)       # (mp+1, mq+1, K)
    A = _taylor(list(np.moveaxis(A, 2, 0)), x, mx)       # (mx+1, mp+1, mq+1)
    fa = np.array([math.factorial(k) for k in range(mx + 1)], dtype=float)
    fb = np.array([math.factorial(k) for k in range(mp + 1)], dtype=float)
    fc = np.array([math.factorial(k) for k in range(mq + 1)], dtype=float)
    return A * fa[:, None, None] * fb[None, :, None] * fc[None, None, :]


def _scales(c, x):
    ax = abs(x)
    sD = 0.0
    sDx = 0.0
    for k in range(len(c) - 1, -1, -1):
        sD = sD * ax + abs(c[k])
    for k in range(len(c) - 1, 0, -1):
        sDx = sDx * ax + k * abs(c[k])
    return max(sD, 1e-300), max(sDx, 1e-300)


def correct(T, u, x, v, tol, maxit):
    """Newton on (D, D_x) = 0 in (x, v) at fixed u.

    Returns ``(x, v, iterations, converged, res_D, res_Dx)`` where residuals
    are normalized by the magnitude of the evaluated terms.
    """
    T = np.asarray(T, dtype=float)
    step = np.inf
    for it in range(maxit + 1):
        d = derivatives(T, x, u, v, 2, 0, 1)
        c = (T @ (v ** np.arange(T.shape[2]))) @ (u ** np.arange(T.shape[1]))
        sD, sDx = _scales(c, x)
        D, Dx, Dxx = d[0, 0, 0], d[1, 0, 0], d[2, 0, 0]
        Dq, Dxq = d[0, 0, 1], d[1, 0, 1]
        rD, rDx = abs(D) / sD, abs(Dx) / sDx
        if not (math.isfinite(rD) and math.isfinite(rDx)):
            return x, v, it, False, rD, rDx
        if max(rD, rDx) <= tol and step <= 1e-6 * (1.0 + abs(x) + abs(v)):
            return x, v, it, True, rD, rDx
        if it == maxit:
            break
        det = Dx * Dxq - Dq * Dxx
        if det == 0.0:
            return x, v, it, False, rD, rDx
        dx = (D * Dxq - Dq * Dx) / det
        dv = (Dx * Dx - D * Dxx) / det
        x -= dx
        v -= dv
        step = abs(dx) + abs(dv)
    return x, v, maxit, max(rD, rDx) <= tol, rD, rDx
