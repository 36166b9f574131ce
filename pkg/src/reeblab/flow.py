"""Reeb flow integration and the transverse linearized flow.

The stepper is an explicit Dormand-Prince 8(5,3) pair with the state pulled
back onto the energy surface after every accepted step. Batched initial
conditions share one adaptive step sequence.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .errors import FlowError, GridTooCoarse, StepFailure
from .geometry import (
    StarShapedSystem,
    _frame_vectors,
    as_array,
    frame_coordinates_matrix,
    radial_project,
    reeb,
    reeb_jacobian,
)

TOL_STEP = 1e-10

_A = _dop.A[: _dop.N_STAGES, : _dop.N_STAGES]
_B = _dop.B
_C = _dop.C[: _dop.N_STAGES]
_E3 = _dop.E3
_E5 = _dop.E5
_NS = _dop.N_STAGES
# extra stages of the seventh-order continuous extension
_A_EXT = _dop.A
_NS_EXT = _dop.N_STAGES_EXTENDED
_D = _dop.D

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass
class RKResult:
    t: np.ndarray
    y: np.ndarray
    f: np.ndarray
    eval_index: np.ndarray | None = None
    n_rejected: int = 0
    coeffs: np.ndarray | None = None  # (steps, 7, *state) dense-output coefficients


def _error_norm(K, h, scale, batch_shape):
    # K: (stages+1, size) for a flattened state; norm per batch member, worst returned
    err5 = (_E5 @ K) / scale
    err3 = (_E3 @ K) / scale
    err5 = err5.reshape(batch_shape + (-1,))
    err3 = err3.reshape(batch_shape + (-1,))
    n = err5.shape[-1]
    e5 = np.sum(err5 * err5, axis=-1)
    e3 = np.sum(err3 * err3, axis=-1)
    denom = e5 + 0.01 * e3
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(denom > 0, abs(h) * e5 / np.sqrt(denom * n), 0.0)
    return float(np.max(norm))


def rk_integrate(rhs, y0, t_end, *, rtol=TOL_STEP, atol=TOL_STEP, project=None,
                 t_eval=None, max_step=np.inf, h0=None, max_steps=10_000_000, dense=False) -> RKResult:
    """Adaptive DOP853 integration of the autonomous system ``y' = rhs(y)`` on ``[0, t_end]``.

    ``y0`` may carry leading batch axes; steps are shared across the batch.
    With ``t_eval`` every requested time is hit exactly by a step endpoint.
    ``dense`` also stores the seventh-order interpolant of every step (three
    extra stages per step).
    """
    y = np.array(y0, dtype=float)
    if project is not None:
        y = project(y)
    shape = y.shape
    batch_shape = shape[:-1]

    def frhs(v):
        return rhs(v.reshape(shape)).ravel()

    t_end = float(t_end)
    if t_end < 0:
        raise FlowError("only forward integration is supported")
    targets = None
    if t_eval is not None:
        targets = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(targets) <= 0) or targets[0] < 0 or targets[-1] > t_end * (1 + 1e-14):
            raise FlowError("t_eval must be increasing inside [0, T]")
    y = y.ravel()
    f = frhs(y)
    ts, ys, fs = [0.0], [y], [f]
    eval_index = []
    ti = 0
    if targets is not None:
        while ti < len(targets) and targets[ti] <= 0.0:
            eval_index.append(0)
            ti += 1
    if t_end == 0.0:
        return RKResult(np.array(ts), np.array(ys).reshape((1,) + shape),
                        np.array(fs).reshape((1,) + shape),
                        np.zeros(len(targets), dtype=int) if targets is not None else None)
    if h0 is None:
        fn = np.max(np.abs(f))
        h = 0.01 * (1.0 + np.max(np.abs(y))) / max(fn, 1e-12)
        h = min(h, t_end, max_step)
    else:
        h = min(h0, t_end, max_step)
    t = 0.0
    K = np.empty((_NS + 1, y.size))
    K_ext = np.empty((_NS_EXT, y.size)) if dense else None
    Fs = []
    rejected = 0
    steps = 0
    while t < t_end:
        if steps > max_steps:
            raise StepFailure("step budget exhausted")
        hmin = 1e-14 * max(1.0, abs(t))
        if h < hmin:
            raise StepFailure(f"step size underflow at t={t:.6g}")
        stop = t_end
        if targets is not None and ti < len(targets):
            stop = min(stop, targets[ti])
        landing = t + h >= stop - 1e-13 * max(1.0, abs(stop))
        h_try = stop - t if landing else h
        K[0] = f
        for s in range(1, _NS):
            K[s] = frhs(y + h_try * (_A[s, :s] @ K[:s]))
        y_new = y + h_try * (_B @ K[:_NS])
        f_new = frhs(y_new)
        K[-1] = f_new
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        err = _error_norm(K, h_try, scale, batch_shape)
        if err <= 1.0 or h_try < hmin * 2:
            if not np.all(np.isfinite(y_new)):
                raise StepFailure(f"non-finite state at t={t:.6g}")
            if dense:
                K_ext[: _NS + 1] = K
                for s in range(_NS + 1, _NS_EXT):
                    K_ext[s] = frhs(y + h_try * (_A_EXT[s, :s] @ K_ext[:s]))
                F = np.empty((7, y.size))
                dy = y_new - y
                F[0] = dy
                F[1] = h_try * K[0] - dy
                F[2] = 2 * dy - h_try * (f_new + K[0])
                F[3:] = h_try * (_D @ K_ext)
                Fs.append(F)
            t = stop if landing else t + h_try
            if project is not None:
                y_new = project(y_new.reshape(shape)).ravel()
                f_new = frhs(y_new)
            y, f = y_new, f_new
            ts.append(t)
            ys.append(y)
            fs.append(f)
            if landing and targets is not None and ti < len(targets) and stop == targets[ti]:
                eval_index.append(len(ts) - 1)
                ti += 1
            fac = 10.0 if err == 0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            if landing and fac >= 1:
                h = min(max(h, h_try * fac), max_step)
            else:
                h = min(h_try * fac, max_step)
        else:
            rejected += 1
            h = h_try * max(0.2, 0.9 * err ** (-1.0 / 8.0))
        steps += 1
    while targets is not None and ti < len(targets):
        # remaining targets coincide with t_end within rounding
        eval_index.append(len(ts) - 1)
        ti += 1
    n = len(ts)
    coeffs = np.array(Fs).reshape((n - 1, 7) + shape) if dense else None
    return RKResult(np.array(ts), np.array(ys).reshape((n,) + shape), np.array(fs).reshape((n,) + shape),
                    np.array(eval_index, dtype=int) if targets is not None else None, rejected, coeffs)


def dense_eval(y0, F, x):
    """Evaluate DOP853 continuous extensions at step fractions ``x``.

    ``y0`` (m, n) are the step start states, ``F`` (m, 7, n) the coefficients
    and ``x`` (m,) the fractions in [0, 1].
    """
    x = np.asarray(x, dtype=float)[:, None]
    y = np.zeros_like(y0)
    for i in range(7):
        y += F[:, 6 - i]
        y *= x if i % 2 == 0 else 1 - x
    return y + y0


def hermite(t0, t1, y0, y1, f0, f1, s):
    """Cubic Hermite interpolant on ``[t0, t1]`` evaluated at times ``s``."""
    h = t1 - t0
    u = (np.asarray(s) - t0) / h
    u = u.reshape(u.shape + (1,) * (np.ndim(y0)))
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Accepted step endpoints of a Reeb trajectory.

    Between endpoints the state comes from the stepper's seventh-order
    continuous extension when ``coeffs`` is present, else from cubic Hermite.
    """

    sys: StarShapedSystem
    t_samples: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    max_residual: float
    coeffs: np.ndarray | None = None

    @property
    def interpolation_order(self) -> int:
        return 7 if self.coeffs is not None else 3

    @property
    def z0(self):
        return self.states[0]

    @property
    def T(self):
        return float(self.t_samples[-1])

    def at(self, t) -> np.ndarray:
        """Interpolated and re-projected state at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.searchsorted(self.t_samples, t, side="right") - 1, 0, len(self.t_samples) - 2)
        t0, t1 = self.t_samples[i], self.t_samples[i + 1]
        u = (t - t0) / (t1 - t0)
        if self.coeffs is not None:
            return radial_project(self.sys, dense_eval(self.states[i], self.coeffs[i], u))
        h = (t1 - t0)[..., None]
        u = u[..., None]
        out = ((2 * u**3 - 3 * u**2 + 1) * self.states[i] + (u**3 - 2 * u**2 + u) * h * self.derivs[i]
               + (-2 * u**3 + 3 * u**2) * self.states[i + 1] + (u**3 - u**2) * h * self.derivs[i + 1])
        return radial_project(self.sys, out)

    def exact_at(self, t: float) -> np.ndarray:
        """State at ``t`` by re-integrating from the preceding step endpoint."""
        i = int(np.clip(np.searchsorted(self.t_samples, t, side="right") - 1, 0, len(self.t_samples) - 1))
        s = float(t - self.t_samples[i])
        if s <= 0:
            return self.states[i].copy()
        return flow_map(self.sys, self.states[i], s)

    def dense(self, max_gap: float, t_max: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Times and points with consecutive gaps below ``max_gap`` on ``[0, t_max]``."""
        return densify(self.sys, self.t_samples, self.states, self.derivs, max_gap, t_max, self.coeffs)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x0", "y0", "x1", "y1"])
            for t, z in zip(self.t_samples, self.states):
                w.writerow([repr(float(t))] + [repr(float(c)) for c in z])


def densify(sys, ts, zs, fs, max_gap, t_max=None, coeffs=None):
    """Densify step data so that chords are at most ``max_gap``.

    Uses the continuous extension ``coeffs`` when given, else cubic Hermite.
    """
    if t_max is None:
        t_max = ts[-1]
    last = int(np.searchsorted(ts, t_max, side="left"))
    last = min(max(last, 1), len(ts) - 1)
    t0, t1 = ts[:last], ts[1:last + 1].copy()
    t1[-1] = min(t1[-1], t_max)
    # arc length bound per step from the speed at both ends
    speed = np.maximum(np.linalg.norm(fs[:last], axis=-1), np.linalg.norm(fs[1:last + 1], axis=-1))
    counts = np.maximum(1, np.ceil(1.25 * speed * (t1 - t0) / max_gap)).astype(int)
    idx = np.repeat(np.arange(last), counts)
    offs = np.arange(idx.size) - np.repeat(np.cumsum(counts) - counts, counts)
    frac = offs / np.repeat(counts, counts)
    tt = t0[idx] + frac * (t1[idx] - t0[idx])
    h = (ts[1:last + 1] - t0)[idx][:, None]
    u = ((tt - t0[idx]) / h[:, 0])[:, None]
    u_end = (t_max - ts[last - 1]) / (ts[last] - ts[last - 1])
    if coeffs is not None:
        pts = dense_eval(zs[idx], coeffs[idx], u[:, 0])
        tail = dense_eval(zs[last - 1][None], coeffs[last - 1][None], [u_end])
    else:
        pts = ((2 * u**3 - 3 * u**2 + 1) * zs[idx] + (u**3 - 2 * u**2 + u) * h * fs[idx]
               + (-2 * u**3 + 3 * u**2) * zs[idx + 1] + (u**3 - u**2) * h * fs[idx + 1])
        tail = hermite(ts[last - 1], ts[last], zs[last - 1], zs[last], fs[last - 1], fs[last], np.array([t_max]))
    if t_max == ts[last]:
        tail = zs[last][None]
    tt = np.concatenate([tt, [t_max]])
    pts = np.concatenate([pts, tail.reshape(1, -1)])
    return tt, radial_project(sys, pts)


def _flow_rhs(sys):
    return lambda z: reeb(sys, z)


def _projector(sys):
    return lambda z: radial_project(sys, z)


def integrate(sys: StarShapedSystem, z0, T: float, tol: float = TOL_STEP, t_eval=None,
              max_step: float = np.inf, dense: bool = True) -> Trajectory:
    """Integrate the Reeb flow from ``z0`` for time ``T``.

    States are radially re-projected after every step; with ``t_eval`` the
    requested times are step endpoints.
    """
    if not T > 0:
        raise FlowError(f"T must be positive, got {T}")
    z0 = as_array(z0)
    res = rk_integrate(_flow_rhs(sys), z0, T, rtol=tol, atol=tol, project=_projector(sys),
                       t_eval=t_eval, max_step=max_step, dense=dense)
    resid = float(np.max(np.abs(sys.hamiltonian(res.y) - 1.0)))
    traj = Trajectory(sys, res.t, res.y, res.f, resid, res.coeffs)
    traj.eval_index = res.eval_index
    return traj


def flow_map(sys: StarShapedSystem, z0, t: float, tol: float = TOL_STEP) -> np.ndarray:
    """``phi^t(z0)`` (batched over leading axes of ``z0``)."""
    z0 = as_array(z0)
    if t == 0:
        return radial_project(sys, z0)
    res = rk_integrate(_flow_rhs(sys), z0, t, rtol=tol, atol=tol, project=_projector(sys))
    return res.y[-1]


@dataclass
class BatchTrajectory:
    sys: StarShapedSystem
    t_samples: np.ndarray
    states: np.ndarray  # (n_steps, batch, 4)
    derivs: np.ndarray
    max_residual: float
    coeffs: np.ndarray | None = None  # (n_steps - 1, 7, batch, 4)

    def member(self, i: int) -> Trajectory:
        c = None if self.coeffs is None else self.coeffs[:, :, i]
        return Trajectory(self.sys, self.t_samples, self.states[:, i], self.derivs[:, i],
                          self.max_residual, c)


def integrate_batch(sys: StarShapedSystem, Z0, T: float, tol: float = TOL_STEP,
                    t_eval=None, dense: bool = True) -> BatchTrajectory:
    Z0 = np.asarray(Z0, dtype=float)
    res = rk_integrate(_flow_rhs(sys), Z0, T, rtol=tol, atol=tol, project=_projector(sys),
                       t_eval=t_eval, dense=dense)
    resid = float(np.max(np.abs(sys.hamiltonian(res.y) - 1.0)))
    return BatchTrajectory(sys, res.t, res.y, res.f, resid, res.coeffs)


# ---------------------------------------------------------------------------
# linearized transverse flow


@dataclass
class SymplecticPath:
    """Frame-coordinate linearized flow ``Phi(t)`` on a time grid.

    ``dmatrices`` holds ``dPhi/dt`` when available (needed by the asymptotic
    operator).
    """

    t_grid: np.ndarray
    matrices: np.ndarray
    T: float
    dmatrices: np.ndarray | None = None
    points: np.ndarray | None = None
    frame_tag: str = "global"
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.matrices[-1]

    def det_defect(self) -> float:
        return float(np.max(np.abs(np.linalg.det(self.matrices) - 1.0)))

    def twisted(self, turns: float, period: float, tag: str | None = None) -> "SymplecticPath":
        """Compose with a frame rotating ``turns`` times per ``period``.

        Coordinates become ``R(2 pi turns t / period) Phi(t)``.
        """
        w = 2 * np.pi * turns / period
        ang = w * self.t_grid
        c, s = np.cos(ang), np.sin(ang)
        R = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
        mats = R @ self.matrices
        dm = None
        if self.dmatrices is not None:
            dm = w * (J2 @ R) @ self.matrices + R @ self.dmatrices
        return SymplecticPath(self.t_grid, mats, self.T, dm, self.points,
                              tag or self.frame_tag, dict(self.meta, twist=turns))


def global_frame_fn(sys: StarShapedSystem):
    return lambda z: _frame_vectors(sys, z)


def _coords_matrix(frame_fn, z):
    e1, e2 = frame_fn(z)
    return frame_coordinates_matrix(e1, e2)


def transverse_linearized(sys: StarShapedSystem, z0, T: float, *, frame_fn=None,
                          n_samples: int | None = None, t_grid=None, tol: float = 1e-12,
                          frame_tag: str = "global") -> SymplecticPath:
    """Linearized Reeb flow on xi in frame coordinates.

    Integrates the full 4x4 variational equation and compresses it with the
    frame at both ends: ``Phi(t) = C(z(t)) M(t) E(z0)``.
    """
    if not T > 0:
        raise FlowError(f"T must be positive, got {T}")
    z0 = radial_project(sys, as_array(z0))
    if frame_fn is None:
        frame_fn = global_frame_fn(sys)
    if t_grid is None:
        n = n_samples or max(64, int(np.ceil(32 * T)))
        t_grid = np.linspace(0.0, T, n + 1)
    t_grid = np.asarray(t_grid, dtype=float)

    def rhs(y):
        z = y[:4]
        M = y[4:].reshape(4, 4)
        return np.concatenate([reeb(sys, z), (reeb_jacobian(sys, z) @ M).ravel()])

    def project(y):
        out = y.copy()
        out[:4] = radial_project(sys, y[:4])
        return out

    y0 = np.concatenate([z0, np.eye(4).ravel()])
    res = rk_integrate(rhs, y0, T, rtol=tol, atol=tol, project=project, t_eval=t_grid)
    Y = res.y[res.eval_index]
    Z = Y[:, :4]
    M = Y[:, 4:].reshape(-1, 4, 4)
    e1, e2 = frame_fn(z0)
    E0 = np.stack([e1, e2], axis=-1)  # 4x2
    C = _coords_matrix(frame_fn, Z)  # (n,2,4)
    X = reeb(sys, Z)
    hstep = 1e-5 / np.linalg.norm(X, axis=-1)[:, None]
    Cdot = (_coords_matrix(frame_fn, Z + hstep * X) - _coords_matrix(frame_fn, Z - hstep * X)) / (
        2 * hstep[:, :, None]
    )
    ME = M @ E0
    mats = C @ ME
    dmats = Cdot @ ME + C @ (reeb_jacobian(sys, Z) @ ME)
    return SymplecticPath(t_grid, mats, float(T), dmats, Z, frame_tag,
                          {"z0": z0, "steps": len(res.t), "rejected": res.n_rejected})


def polar_angle(path: SymplecticPath, u0) -> np.ndarray:
    """Continuous lift of ``arg(Phi(t) u0)`` on the path's grid."""
    u0 = np.asarray(u0, dtype=float)
    if not np.any(u0):
        raise FlowError("u0 must be nonzero")
    u = path.matrices @ u0
    raw = np.arctan2(u[:, 1], u[:, 0])
    inc = np.diff(raw)
    inc = (inc + np.pi) % (2 * np.pi) - np.pi
    if np.any(np.abs(inc) >= np.pi / 2):
        raise GridTooCoarse(f"angle increment {np.max(np.abs(inc)):.3f} >= pi/2; refine the grid")
    theta = np.empty_like(raw)
    theta[0] = np.arctan2(u0[1], u0[0])
    theta[1:] = theta[0] + np.cumsum(inc)
    return theta
