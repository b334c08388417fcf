# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled polynomial kernels. See ``_kernels_py`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF MAXD = 64


cdef double _fact(int k) noexcept nogil:
    cdef double f = 1.0
    cdef int i
    for i in range(2, k + 1):
        f *= i
    return f


cdef void _taylor_inplace(double* a, int d, double t, int m, double* out) noexcept nogil:
    """Taylor coefficients of sum a[j] t^j for orders 0..m; a is destroyed."""
    cdef int r, j
    for r in range(m + 1):
        if r > d:
            out[r] = 0.0
            continue
        for j in range(d - 1, r - 1, -1):
            a[j] = a[j] + t * a[j + 1]
        out[r] = a[r]


cdef int _derivs(const double[:, :, ::1] T, double x, double u, double v,
                 int mx, int mp, int mq, double* out) noexcept nogil:
    """out[(a*(mp+1)+b)*(mq+1)+c] = raw Taylor coefficient of order (a, b, c)."""
    cdef int K = T.shape[0], I = T.shape[1], J = T.shape[2]
    cdef int k, i, j, b, c, a
    cdef int nb = mp + 1, nc = mq + 1
    cdef double buf[MAXD]
    cdef double tay[MAXD]
    if K > MAXD or I > MAXD or J > MAXD or mx >= MAXD or mp >= MAXD or mq >= MAXD:
        return -1
    # stage 1: collapse q -> A1[k][i][c]
    cdef double* A1 = <double*> malloc(K * I * nc * sizeof(double))
    cdef double* A2 = <double*> malloc(K * nb * nc * sizeof(double))
    if A1 == NULL or A2 == NULL:
        free(A1)
        free(A2)
        return -2
    for k in range(K):
        for i in range(I):
            for j in range(J):
                buf[j] = T[k, i, j]
            _taylor_inplace(buf, J - 1, v, mq, tay)
            for c in range(nc):
                A1[(k * I + i) * nc + c] = tay[c]
    # stage 2: collapse p -> A2[k][b][c]
    for k in range(K):
        for c in range(nc):
            for i in range(I):
                buf[i] = A1[(k * I + i) * nc + c]
            _taylor_inplace(buf, I - 1, u, mp, tay)
            for b in range(nb):
                A2[(k * nb + b) * nc + c] = tay[b]
    # stage 3: collapse x
    for b in range(nb):
        for c in range(nc):
            for k in range(K):
                buf[k] = A2[(k * nb + b) * nc + c]
            _taylor_inplace(buf, K - 1, x, mx, tay)
            for a in range(mx + 1):
                out[(a * nb + b) * nc + c] = tay[a] * _fact(a) * _fact(b) * _fact(c)
    free(A1)
    free(A2)
    return 0


def derivatives(T, double x, double u, double v, int mx, int mp, int mq):
    """``out[a, b, c]`` = partial derivative of orders (a, b, c) at (x, u, v)."""
    cdef const double[:, :, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    out = np.empty((mx + 1, mp + 1, mq + 1), dtype=np.float64)
    cdef double[:, :, ::1] ov = out
    cdef int status
    with nogil:
        status = _derivs(Tv, x, u, v, mx, mp, mq, &ov[0, 0, 0])
    if status != 0:
        raise ValueError("polynomial tensor too large for compiled kernel")
    return out


def correct(T, double u, double x, double v, double tol, int maxit):
    """Newton on (D, D_x) = 0 in (x, v) at fixed u.

    Returns ``(x, v, iterations, converged, res_D, res_Dx)``.
    """
    cdef const double[:, :, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef int K = Tv.shape[0], I = Tv.shape[1], J = Tv.shape[2]
    cdef double d[3 * 2]
    cdef double cvec[MAXD]
    cdef double step = 1e308
    cdef double D, Dx, Dxx, Dq, Dxq, sD, sDx, rD = 0.0, rDx = 0.0, det, dx, dv
    cdef double ax, upow, vpow, acc
    cdef int it = 0, k, i, j, status = 0
    cdef bint ok = False
    if K > MAXD:
        raise ValueError("polynomial tensor too large for compiled kernel")
    with nogil:
        for it in range(maxit + 1):
            status = _derivs(Tv, x, u, v, 2, 0, 1, d)
            if status != 0:
                break
            # coefficient vector at (u, v) for residual scaling
            for k in range(K):
                acc = 0.0
                upow = 1.0
                for i in range(I):
                    vpow = 1.0
                    for j in range(J):
                        acc += Tv[k, i, j] * upow * vpow
                        vpow *= v
                    upow *= u
                cvec[k] = acc
            ax = fabs(x)
            sD = 0.0
            sDx = 0.0
            for k in range(K - 1, -1, -1):
                sD = sD * ax + fabs(cvec[k])
            for k in range(K - 1, 0, -1):
                sDx = sDx * ax + k * fabs(cvec[k])
            if sD < 1e-300:
                sD = 1e-300
            if sDx < 1e-300:
                sDx = 1e-300
            D = d[0]
            Dq = d[1]
            Dx = d[2]
            Dxq = d[3]
            Dxx = d[4]
            rD = fabs(D) / sD
            rDx = fabs(Dx) / sDx
            if not (isfinite(rD) and isfinite(rDx)):
                break
            if rD <= tol and rDx <= tol and step <= 1e-6 * (1.0 + fabs(x) + fabs(v)):
                ok = True
                break
            if it == maxit:
                ok = rD <= tol and rDx <= tol
                break
            det = Dx * Dxq - Dq * Dxx
            if det == 0.0:
                break
            dx = (D * Dxq - Dq * Dx) / det
            dv = (Dx * Dx - D * Dxx) / det
            x -= dx
            v -= dv
            step = fabs(dx) + fabs(dv)
    if status != 0:
        raise ValueError("polynomial tensor too large for compiled kernel")
    return x, v, it, ok, rD, rDx
