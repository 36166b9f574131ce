"""Closed-form and brute-force reference values, kept independent of reeblab.

Nothing here imports the package. Split systems have a linear flow,
so most quantities have exact expressions; linking numbers get a plain
Gauss double sum on an independently built stereographic projection.
"""
import math

import numpy as np

SQRT2 = math.sqrt(2.0)
GOLDEN = (1 + math.sqrt(5.0)) / 2

# (a, b) pairs of the index table
CZ_SYSTEMS = {"sqrt2": (1.0, SQRT2), "golden": (1.0, GOLDEN), "sqrt5": (2.0, math.sqrt(5.0))}


def split_flow(a, b, z, t):
    """Exact Reeb flow of |z0|^2/a + |z1|^2/b."""
    z = np.asarray(z, float)
    w0 = (z[0] + 1j * z[1]) * np.exp(2j * t / a)
    w1 = (z[2] + 1j * z[3]) * np.exp(2j * t / b)
    return np.array([w0.real, w0.imag, w1.real, w1.imag])


def rotation_path_cz(theta):
    """Index of the path t -> rotation by t*theta, t in [0, 1]."""
    turns = theta / (2 * np.pi)
    if abs(turns - round(turns)) < 1e-12:
        return 2 * int(round(turns))
    return 2 * math.floor(turns) + 1


def split_axis_angle(a, b, axis, k, frame="global"):
    """Transverse angle swept by the k-fold axis orbit.

    On ``z1 = 0`` the normal coordinate z1 turns at rate 2/b for time k*pi*a.
    The global frame turns once backwards per period relative to the disk,
    which adds one turn.
    """
    if axis == 2:
        a, b = b, a
    theta = 2 * np.pi * k * a / b
    if frame == "global":
        theta += 2 * np.pi * k
    return theta


def split_cz(a, b, axis, k):
    return rotation_path_cz(split_axis_angle(a, b, axis, k))


def split_cz_formula(a, b, axis, k):
    """The textbook form 2k + 2 floor(k a/b) + 1 (a and b swapped for the second axis)."""
    if axis == 2:
        a, b = b, a
    return 2 * k + 2 * math.floor(k * a / b) + 1


def constant_rotation_spectrum(c, m_lo, m_hi):
    """Eigenvalues of -J d/ds - c on loops R/Z -> R^2: 2 pi m - c twice, winding m."""
    nus, winds = [], []
    for m in range(m_lo, m_hi + 1):
        nus += [2 * np.pi * m - c] * 2
        winds += [m, m]
    return np.array(nus), np.array(winds)


def hopf_fiber(p, n=800):
    """Closed Hopf fibre through p, sampled with n segments."""
    t = np.linspace(0.0, np.pi, n + 1)
    pts = np.array([split_flow(1.0, 1.0, p, s) for s in t])
    pts[-1] = pts[0]
    return pts


def split_axis_curve(a, b, axis, n=800):
    t = np.linspace(0.0, 2 * np.pi, n + 1)
    pts = np.zeros((n + 1, 4))
    if axis == 1:
        pts[:, 0], pts[:, 1] = math.sqrt(a) * np.cos(t), math.sqrt(a) * np.sin(t)
    else:
        pts[:, 2], pts[:, 3] = math.sqrt(b) * np.cos(t), math.sqrt(b) * np.sin(t)
    pts[-1] = pts[0]
    return pts


def _rotation_to_e4(q):
    """Orthogonal O with O q = e4 and det O = +1, by a Householder reflection and a sign flip."""
    q = q / np.linalg.norm(q)
    e4 = np.array([0.0, 0.0, 0.0, 1.0])
    v = q - e4
    if np.linalg.norm(v) < 1e-12:
        return np.eye(4)
    v /= np.linalg.norm(v)
    Hh = np.eye(4) - 2 * np.outer(v, v)
    return np.diag([-1.0, 1.0, 1.0, 1.0]) @ Hh


def gauss_linking(P, Q, pole=None):
    """Gauss linking integral of two closed polygons in S^3 (midpoint rule)."""
    P = np.asarray(P, float)
    Q = np.asarray(Q, float)
    P = P / np.linalg.norm(P, axis=1, keepdims=True)
    Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    if pole is None:
        rng = np.random.default_rng(1)
        cand = rng.standard_normal((256, 4))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        d = np.array([min(np.min(np.linalg.norm(P - c, axis=1)), np.min(np.linalg.norm(Q - c, axis=1)))
                      for c in cand])
        pole = cand[np.argmax(d)]
    O = _rotation_to_e4(np.asarray(pole, float))

    def proj(X):
        Y = X @ O.T
        return Y[:, :3] / (1 - Y[:, 3:4])

    A, B = proj(P), proj(Q)
    dA, dB = np.diff(A, axis=0), np.diff(B, axis=0)
    mA, mB = 0.5 * (A[1:] + A[:-1]), 0.5 * (B[1:] + B[:-1])
    total = 0.0
    for s in range(0, len(mA), 256):
        r = mA[s:s + 256, None, :] - mB[None, :, :]
        cr = np.cross(dA[s:s + 256, None, :], dB[None, :, :])
        total += np.sum(np.einsum("ijk,ijk->ij", r, cr) / np.linalg.norm(r, axis=2) ** 3)
    return total / (4 * np.pi)


def birkhoff_rate(a, b):
    """Page crossings per unit time for the link of both axis orbits."""
    return 1 / (np.pi * a) + 1 / (np.pi * b)


def split_return(a, b, rho, phi):
    """Return to the page of the first axis orbit: phase shift 2 pi b/a, time pi b."""
    return rho, (phi + 2 * np.pi * b / a) % (2 * np.pi), np.pi * b


def rotation_identity(a, b, axis):
    """2 pi rho of an axis orbit in the two-component link: one linking plus the disk slope."""
    if axis == 2:
        a, b = b, a
    return 1 + a / b


# Frozen from split_cz before any spectral code ran; k = 1..8 per (system, axis).
FROZEN_CZ = {
    ("sqrt2", 1): [3, 7, 11, 13, 17, 21, 23, 27],
    ("sqrt2", 2): [5, 9, 15, 19, 25, 29, 33, 39],
    ("golden", 1): [3, 7, 9, 13, 17, 19, 23, 25],
    ("golden", 2): [5, 11, 15, 21, 27, 31, 37, 41],
    ("sqrt5", 1): [3, 7, 11, 15, 19, 23, 27, 31],
    ("sqrt5", 2): [5, 9, 13, 17, 21, 25, 29, 33],
}
