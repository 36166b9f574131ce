"""Numpy fallback for the compiled kernels (same signatures and results)."""
import numpy as np

_CHUNK = 1 << 21


def _pairs(P, Q):
    """Candidate segment pairs whose x-extents overlap."""
    qmin = np.minimum(Q[:-1, 0], Q[1:, 0])
    qmax = np.maximum(Q[:-1, 0], Q[1:, 0])
    order = np.argsort(qmin, kind="stable")
    qs = qmin[order]
    maxlen = float(np.max(qmax - qmin)) if qmin.size else 0.0
    pmin = np.minimum(P[:-1, 0], P[1:, 0])
    pmax = np.maximum(P[:-1, 0], P[1:, 0])
    lo = np.searchsorted(qs, pmin - maxlen, side="left")
    hi = np.searchsorted(qs, pmax, side="right")
    counts = np.maximum(hi - lo, 0)
    csum = np.cumsum(counts)
    start = 0
    n = len(counts)
    while start < n:
        base = csum[start - 1] if start else 0
        stop = int(np.searchsorted(csum, base + _CHUNK, side="right"))
        stop = max(stop, start + 1)
        c = counts[start:stop]
        ii = np.repeat(np.arange(start, stop), c)
        offs = np.arange(c.sum()) - np.repeat(np.cumsum(c) - c, c)
        kk = np.repeat(lo[start:stop], c) + offs
        jj = order[kk]
        keep = qmax[jj] >= pmin[ii]
        yield ii[keep], jj[keep]
        start = stop


def crossing_sum(P, Q, tol=1e-9):
    P = np.ascontiguousarray(P, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    over = under = ncross = 0
    degenerate = 0
    for i, j in _pairs(P, Q):
        p, r = P[i, :2], P[i + 1, :2] - P[i, :2]
        q, s = Q[j, :2], Q[j + 1, :2] - Q[j, :2]
        pymin = np.minimum(P[i, 1], P[i + 1, 1])
        pymax = np.maximum(P[i, 1], P[i + 1, 1])
        yoff = ((q[:, 1] > pymax) & (q[:, 1] + s[:, 1] > pymax)) | ((q[:, 1] < pymin) & (q[:, 1] + s[:, 1] < pymin))
        denom = r[:, 0] * s[:, 1] - r[:, 1] * s[:, 0]
        w = q - p
        rn = np.hypot(r[:, 0], r[:, 1])
        sn = np.hypot(s[:, 0], s[:, 1])
        wxr = w[:, 0] * r[:, 1] - w[:, 1] * r[:, 0]
        par = np.abs(denom) <= tol * rn * sn
        if np.any(~yoff & par & (np.abs(wxr) <= tol * rn * (rn + sn + 1.0))):
            degenerate = 1
        ok = ~yoff & ~par
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (w[:, 0] * s[:, 1] - w[:, 1] * s[:, 0]) / denom
            u = wxr / denom
        hit = ok & (t >= -tol) & (t <= 1 + tol) & (u >= -tol) & (u <= 1 + tol)
        edge = hit & ((t < tol) | (t > 1 - tol) | (u < tol) | (u > 1 - tol))
        if np.any(edge):
            degenerate = 1
        hit &= ~edge
        zp = P[i, 2] + t * (P[i + 1, 2] - P[i, 2])
        zq = Q[j, 2] + u * (Q[j + 1, 2] - Q[j, 2])
        tie = hit & (np.abs(zp - zq) <= tol)
        if np.any(tie):
            degenerate = 1
        hit &= ~tie
        sg = np.where(denom > 0, 1, -1)
        top = zp > zq
        over += int(np.sum(sg[hit & top]))
        under += int(-np.sum(sg[hit & ~top]))
        ncross += int(np.sum(hit))
    return over, under, ncross, degenerate


def gauss_sum(P, Q):
    P = np.ascontiguousarray(P, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    mp, dp = 0.5 * (P[1:] + P[:-1]), np.diff(P, axis=0)
    mq, dq = 0.5 * (Q[1:] + Q[:-1]), np.diff(Q, axis=0)
    acc = 0.0
    rows = max(1, _CHUNK // max(len(mq), 1))
    for s in range(0, len(mp), rows):
        d = mp[s:s + rows, None, :] - mq[None, :, :]
        c = np.cross(dp[s:s + rows, None, :], dq[None, :, :])
        r2 = np.einsum("ijk,ijk->ij", d, d)
        acc += float(np.sum(np.einsum("ijk,ijk->ij", d, c) / (r2 * np.sqrt(r2))))
    return acc / (4 * np.pi)
