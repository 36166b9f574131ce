# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled planar-crossing and Gauss-integral kernels.

Both take closed polygons as ``(n, 3)`` float64 arrays whose last row repeats
the first. Crossings are counted in the xy-plane with z as height.
"""
import numpy as np
from libc.math cimport fabs, sqrt

cdef double PI = 3.141592653589793


def crossing_sum(P, Q, double tol=1e-9):
    """Signed crossings of ``P`` over ``Q`` and of ``Q`` over ``P``.

    Returns
    -------
    (over, under, n_cross, degenerate)
        ``over`` sums the crossing signs where P is on top, ``under`` where Q is.
        ``degenerate`` is nonzero if any crossing sits on a vertex, is
        collinear, or has equal heights.
    """
    cdef const double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    Qa = np.asarray(q)
    qmin_a = np.minimum(Qa[:-1, 0], Qa[1:, 0])
    qmax_a = np.maximum(Qa[:-1, 0], Qa[1:, 0])
    order_a = np.argsort(qmin_a, kind="stable").astype(np.intp)
    cdef const double[::1] qmin_s = np.ascontiguousarray(qmin_a[order_a])
    cdef const double[::1] qmax = np.ascontiguousarray(qmax_a)
    cdef const Py_ssize_t[::1] order = order_a
    cdef double maxlen = float(np.max(qmax_a - qmin_a)) if qmin_a.size else 0.0
    cdef Py_ssize_t n = p.shape[0] - 1, m = q.shape[0] - 1
    cdef Py_ssize_t i, j, k, lo, hi, mid
    cdef long over = 0, under = 0, ncross = 0
    cdef int degenerate = 0
    cdef double px, py, rx, ry, qx, qy, sx, sy, pxmin, pxmax, pymin, pymax
    cdef double denom, wx, wy, t, u, zp, zq, rn, sn
    for i in range(n):
        px = p[i, 0]; py = p[i, 1]
        rx = p[i + 1, 0] - px; ry = p[i + 1, 1] - py
        pxmin = px if rx > 0 else px + rx
        pxmax = px + rx if rx > 0 else px
        pymin = py if ry > 0 else py + ry
        pymax = py + ry if ry > 0 else py
        # first sorted index with qmin >= pxmin - maxlen
        lo = 0; hi = m
        while lo < hi:
            mid = (lo + hi) // 2
            if qmin_s[mid] < pxmin - maxlen:
                lo = mid + 1
            else:
                hi = mid
        k = lo
        while k < m and qmin_s[k] <= pxmax:
            j = order[k]
            k += 1
            if qmax[j] < pxmin:
                continue
            qx = q[j, 0]; qy = q[j, 1]
            sx = q[j + 1, 0] - qx; sy = q[j + 1, 1] - qy
            if (qy > pymax and qy + sy > pymax) or (qy < pymin and qy + sy < pymin):
                continue
            denom = rx * sy - ry * sx
            wx = qx - px; wy = qy - py
            rn = sqrt(rx * rx + ry * ry); sn = sqrt(sx * sx + sy * sy)
            if fabs(denom) <= tol * rn * sn:
                if fabs(wx * ry - wy * rx) <= tol * rn * (rn + sn + 1.0):
                    degenerate = 1
                continue
            t = (wx * sy - wy * sx) / denom
            u = (wx * ry - wy * rx) / denom
            if t < -tol or t > 1.0 + tol or u < -tol or u > 1.0 + tol:
                continue
            if t < tol or t > 1.0 - tol or u < tol or u > 1.0 - tol:
                degenerate = 1
                continue
            zp = p[i, 2] + t * (p[i + 1, 2] - p[i, 2])
            zq = q[j, 2] + u * (q[j + 1, 2] - q[j, 2])
            if fabs(zp - zq) <= tol:
                degenerate = 1
                continue
            ncross += 1
            if zp > zq:
                over += 1 if denom > 0 else -1
            else:
                under += -1 if denom > 0 else 1
    return int(over), int(under), int(ncross), int(degenerate)


def gauss_sum(P, Q):
    """Midpoint-rule Gauss linking integral of two closed polygons."""
    cdef const double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, ::1] q = np.ascontiguousarray(Q, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0] - 1, m = q.shape[0] - 1, i, j
    cdef double acc = 0.0, mx, my, mz, ax, ay, az, bx, by, bz, dx, dy, dz, cx, cy, cz, r2
    for i in range(n):
        mx = 0.5 * (p[i, 0] + p[i + 1, 0]); my = 0.5 * (p[i, 1] + p[i + 1, 1]); mz = 0.5 * (p[i, 2] + p[i + 1, 2])
        ax = p[i + 1, 0] - p[i, 0]; ay = p[i + 1, 1] - p[i, 1]; az = p[i + 1, 2] - p[i, 2]
        for j in range(m):
            bx = q[j + 1, 0] - q[j, 0]; by = q[j + 1, 1] - q[j, 1]; bz = q[j + 1, 2] - q[j, 2]
            dx = mx - 0.5 * (q[j, 0] + q[j + 1, 0])
            dy = my - 0.5 * (q[j, 1] + q[j + 1, 1])
            dz = mz - 0.5 * (q[j, 2] + q[j + 1, 2])
            cx = ay * bz - az * by; cy = az * bx - ax * bz; cz = ax * by - ay * bx
            r2 = dx * dx + dy * dy + dz * dz
            acc += (dx * cx + dy * cy + dz * cz) / (r2 * sqrt(r2))
    return acc / (4.0 * PI)
