"""Periodic Reeb orbits: search, monodromy and nondegeneracy."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import argrelmin

from .errors import NewtonDivergence, OrbitError, StepFailure
from .flow import flow_map, integrate, rk_integrate, transverse_linearized
from .geometry import StarShapedSystem, as_array, radial_project, reeb, reeb_jacobian

log = logging.getLogger(__name__)

ORBIT_TOL = 1e-9
DEDUP_TOL = 1e-6
NDG_TOL = 1e-6


@dataclass(frozen=True)
class PeriodicOrbit:
    marked_point: np.ndarray
    T0: float
    k: int = 1
    monodromy: np.ndarray | None = None  # Phi(k T0) in the global frame
    closure_error: float = 0.0
    label: str = ""
    orientation: int = 1  # -1 marks a synthetic reversed-orientation copy

    @property
    def T(self) -> float:
        return self.k * self.T0

    def cover(self, k: int) -> "PeriodicOrbit":
        if k < 1:
            raise OrbitError("covering multiplicity must be >= 1")
        mono = None
        if self.monodromy is not None:
            prim = self.monodromy if self.k == 1 else None
            if prim is not None:
                mono = np.linalg.matrix_power(prim, k)
        return replace(self, k=int(k), monodromy=mono)

    def reversed(self) -> "PeriodicOrbit":
        """Same point set with the opposite orientation (a synthetic test knot)."""
        return replace(self, orientation=-self.orientation, label=self.label + "~")

    def to_record(self) -> dict:
        rec = {
            "label": self.label,
            "marked_point": [float(c) for c in self.marked_point],
            "T0": float(self.T0),
            "k": int(self.k),
            "closure_error": float(self.closure_error),
            "orientation": int(self.orientation),
        }
        if self.monodromy is not None:
            rec["monodromy"] = [[float(c) for c in row] for row in self.monodromy]
        return rec


@dataclass
class OrbitSet:
    """Result of an orbit search; iterable over the primitive orbits found."""

    orbits: list[PeriodicOrbit]
    action_cap: float
    degenerate: bool = False
    failures: list[tuple[int, str]] = field(default_factory=list)
    n_seeds: int = 0
    exhaustive: bool = False
    notes: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.orbits)

    def __len__(self):
        return len(self.orbits)

    def __getitem__(self, i):
        return self.orbits[i]


# ---------------------------------------------------------------------------
# shooting


def _flow_with_jacobian(sys, z, t, tol=1e-12):
    """``phi^t(z)`` together with ``D phi^t(z)``."""

    def rhs(y):
        zz = y[:4]
        M = y[4:].reshape(4, 4)
        return np.concatenate([reeb(sys, zz), (reeb_jacobian(sys, zz) @ M).ravel()])

    y0 = np.concatenate([z, np.eye(4).ravel()])
    res = rk_integrate(rhs, y0, t, rtol=tol, atol=tol)
    y = res.y[-1]
    return y[:4], y[4:].reshape(4, 4)


def shoot(sys: StarShapedSystem, seed, T_guess: float, segments: int | None = None,
          max_iter: int = 30, tol: float = ORBIT_TOL):
    """Multiple-shooting Gauss-Newton for a closed orbit of unknown period.

    Unknowns are the segment start points and the period. Besides matching
    conditions the system carries the phase condition
    ``<X(seed), x_0 - seed> = 0`` and the energy condition ``H(x_0) = 1``.
    Returns ``(marked_point, T)``.
    """
    seed = radial_project(sys, as_array(seed))
    if segments is None:
        segments = max(1, int(np.ceil(T_guess / 2.0)))
    m = segments
    xs = [seed]
    for _ in range(m - 1):
        xs.append(flow_map(sys, xs[-1], T_guess / m))
    x = np.concatenate(xs + [[T_guess]])
    Xs = reeb(sys, seed)
    prev = np.inf
    for it in range(max_iter):
        T = x[-1]
        if not (T > 0 and np.isfinite(T)):
            raise NewtonDivergence(f"period left the positive axis (T={T})")
        pts = x[:-1].reshape(m, 4)
        F = np.zeros(4 * m + 2)
        Jm = np.zeros((4 * m + 2, 4 * m + 1))
        for i in range(m):
            end, D = _flow_with_jacobian(sys, pts[i], T / m)
            j = (i + 1) % m
            F[4 * i:4 * i + 4] = end - pts[j]
            Jm[4 * i:4 * i + 4, 4 * i:4 * i + 4] += D
            Jm[4 * i:4 * i + 4, 4 * j:4 * j + 4] -= np.eye(4)
            Jm[4 * i:4 * i + 4, -1] = reeb(sys, end) / m
        F[-2] = Xs @ (pts[0] - seed)
        Jm[-2, :4] = Xs
        F[-1] = sys.hamiltonian(pts[0]) - 1.0
        Jm[-1, :4] = sys.gradient(pts[0])
        res = float(np.max(np.abs(F)))
        if res < tol * 0.1:
            break
        dx, *_ = np.linalg.lstsq(Jm, -F, rcond=None)
        x = x + dx
        x[:-1] = radial_project(sys, x[:-1].reshape(m, 4)).ravel()
        if res > 1e3 * min(prev, 1.0) and it > 3:
            raise NewtonDivergence(f"residual grew to {res:.3e}")
        prev = res
    else:
        if res > 1e-7:
            raise NewtonDivergence(f"no convergence, residual {res:.3e}")
    return x[:4].copy(), float(x[-1])


def _primitive(sys, z, T, tol=1e-5):
    """Earliest near-return of ``z`` before ``T``: the candidate primitive period."""
    traj = integrate(sys, z, T, max_step=T / 256)
    d = np.linalg.norm(traj.states - z, axis=1)
    t = traj.t_samples
    idx = argrelmin(d, order=1)[0]
    idx = idx[(t[idx] > 1e-3 * T) & (t[idx] < T * (1 - 1e-6))]
    for i in idx:
        lo, hi = t[i - 1], t[min(i + 1, len(t) - 1)]
        r = minimize_scalar(lambda s: np.linalg.norm(traj.exact_at(s) - z), bounds=(lo, hi),
                            method="bounded", options={"xatol": 1e-11})
        if r.fun < tol:
            return float(r.x)
    return T


def refine_orbit(sys: StarShapedSystem, point, T_guess: float, label: str = "",
                 with_monodromy: bool = True) -> PeriodicOrbit:
    """Converge a periodic orbit near ``point`` and reduce it to its primitive period."""
    z, T = shoot(sys, point, T_guess)
    T0 = _primitive(sys, z, T)
    if T0 != T:
        z, T0 = shoot(sys, z, T0)
    end = flow_map(sys, z, T0)
    err = float(np.linalg.norm(end - z))
    if err > ORBIT_TOL:
        # one polishing pass at tighter integration tolerance
        z, T0 = shoot(sys, z, T0, tol=ORBIT_TOL * 0.1)
        err = float(np.linalg.norm(flow_map(sys, z, T0, tol=1e-12) - z))
    mono = monodromy_matrix(sys, z, T0) if with_monodromy else None
    return PeriodicOrbit(z, T0, 1, mono, err, label)


def axis_orbit(sys: StarShapedSystem, which: int) -> PeriodicOrbit:
    """The axis circle ``{z1 = 0}`` (which=1) or ``{z0 = 0}`` (which=2) of a split system."""
    if not sys.is_split:
        raise OrbitError("axis orbits are defined for split systems only")
    a, b = sys.params["a"], sys.params["b"]
    if which == 1:
        z, T = np.array([np.sqrt(a), 0, 0, 0]), np.pi * a
    elif which == 2:
        z, T = np.array([0, 0, np.sqrt(b), 0]), np.pi * b
    else:
        raise OrbitError("which must be 1 or 2")
    err = float(np.linalg.norm(flow_map(sys, z, T) - z))
    return PeriodicOrbit(z, T, 1, monodromy_matrix(sys, z, T), err, f"gamma{which}")


def orbit_through(sys: StarShapedSystem, point, T_guess: float | None = None, label: str = "") -> PeriodicOrbit:
    """Periodic orbit through (approximately) ``point``; the period is scanned if not given."""
    p = radial_project(sys, as_array(point))
    if T_guess is None:
        guesses = _period_guesses(sys, p, 50.0)
        if not guesses:
            raise OrbitError("no near-return found within time 50")
        T_guess = guesses[0]
    return refine_orbit(sys, p, T_guess, label)


def monodromy_matrix(sys, z, T, frame_fn=None) -> np.ndarray:
    path = transverse_linearized(sys, z, T, frame_fn=frame_fn, n_samples=8)
    return path.final


def monodromy(sys: StarShapedSystem, orbit: PeriodicOrbit, k: int = 1, frame_fn=None,
              check_power: bool = True) -> np.ndarray:
    """``Phi(k T0)`` by direct integration; compared against the k-th power of ``Phi(T0)``."""
    if k < 1:
        raise OrbitError("k must be >= 1")
    Mk = monodromy_matrix(sys, orbit.marked_point, k * orbit.T0, frame_fn)
    if check_power and k > 1:
        M1 = monodromy_matrix(sys, orbit.marked_point, orbit.T0, frame_fn)
        dev = float(np.max(np.abs(np.linalg.matrix_power(M1, k) - Mk)))
        if dev > 1e-6:
            log.warning("monodromy k=%d deviates from power of primitive by %.2e", k, dev)
    return Mk


@dataclass
class NondegeneracyReport:
    per_k: dict[int, bool]
    eigenvalues: dict[int, list[complex]]
    verdict: bool


def nondegenerate_up_to(sys: StarShapedSystem, orbit: PeriodicOrbit, C: float,
                        ndg_tol: float = NDG_TOL) -> NondegeneracyReport:
    per_k, eigs = {}, {}
    k = 1
    while k * orbit.T0 <= C * (1 + 1e-12):
        M = monodromy(sys, orbit, k, check_power=False)
        ev = np.linalg.eigvals(M)
        eigs[k] = [complex(e) for e in ev]
        per_k[k] = bool(np.all(np.abs(ev - 1.0) > ndg_tol))
        k += 1
    return NondegeneracyReport(per_k, eigs, all(per_k.values()))


# ---------------------------------------------------------------------------
# search


def _period_guesses(sys, p, horizon, max_guesses=4):
    traj = integrate(sys, p, horizon, max_step=0.05)
    d = np.linalg.norm(traj.states - p, axis=1)
    scale = np.max(d)
    idx = argrelmin(d, order=2)[0]
    idx = idx[(traj.t_samples[idx] > 0.05)]
    if idx.size == 0:
        return []
    good = idx[d[idx] < 0.5 * scale]
    good = good[np.argsort(d[good])][:max_guesses]
    out = []
    for i in sorted(good, key=lambda j: traj.t_samples[j]):
        lo = traj.t_samples[max(i - 1, 0)]
        hi = traj.t_samples[min(i + 1, len(traj.t_samples) - 1)]
        r = minimize_scalar(lambda s: np.linalg.norm(traj.exact_at(s) - p), bounds=(lo, hi),
                            method="bounded", options={"xatol": 1e-10})
        out.append(float(r.x))
    return out


def _seed_grid(n_angle: int):
    chis = (np.arange(n_angle) + 0.5) * (np.pi / 2) / n_angle
    psis = np.arange(n_angle) * 2 * np.pi / n_angle
    seeds = []
    for chi in chis:
        for psi in psis:
            seeds.append(np.array([np.cos(chi), 0.0, np.sin(chi) * np.cos(psi), np.sin(chi) * np.sin(psi)]))
    return seeds


def _orbit_distance(sys, o1: PeriodicOrbit, o2: PeriodicOrbit) -> float:
    """Distance from ``o1``'s marked point to the trace of ``o2``."""
    traj = integrate(sys, o2.marked_point, o2.T0, max_step=o2.T0 / 64)
    d = np.linalg.norm(traj.states - o1.marked_point, axis=1)
    i = int(np.argmin(d))
    lo = traj.t_samples[max(i - 1, 0)]
    hi = traj.t_samples[min(i + 1, len(traj.t_samples) - 1)]
    r = minimize_scalar(lambda s: np.linalg.norm(traj.exact_at(s) - o1.marked_point),
                        bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(min(r.fun, d[i]))


def find_periodic_orbits(sys: StarShapedSystem, action_cap: float, n_angle: int = 4,
                         dedup_tol: float = DEDUP_TOL, degenerate_fraction: float = 0.9) -> OrbitSet:
    """Seed-grid orbit search up to action ``action_cap``.

    Seeds sit on a (latitude x relative phase) grid of the three-sphere; each
    one contributes period guesses from near-returns of its trajectory, which
    are polished by multiple shooting. The search is best effort for
    non-integrable systems.
    """
    if not action_cap > 0:
        raise OrbitError("action cap must be positive")
    seeds = _seed_grid(n_angle)
    found: list[PeriodicOrbit] = []
    failures = []
    identity_like = 0
    for si, seed in enumerate(seeds):
        p = radial_project(sys, seed)
        try:
            guesses = _period_guesses(sys, p, action_cap * 1.05 + 0.5)
        except StepFailure as exc:
            failures.append((si, f"scan: {exc}"))
            continue
        converged_any = False
        for Tg in guesses:
            try:
                orb = refine_orbit(sys, p, Tg, with_monodromy=True)
            except (NewtonDivergence, StepFailure, np.linalg.LinAlgError) as exc:
                failures.append((si, str(exc)))
                continue
            if orb.closure_error > ORBIT_TOL * 10 or orb.T0 > action_cap * (1 + 1e-12):
                continue
            if not converged_any and np.max(np.abs(orb.monodromy - np.eye(2))) < 1e-6:
                converged_any = True
                identity_like += 1
            if not any(abs(o.T0 - orb.T0) < 1e-6 * max(1.0, orb.T0)
                       and _orbit_distance(sys, orb, o) < dedup_tol for o in found):
                found.append(orb)
    degenerate = len(seeds) > 0 and identity_like >= degenerate_fraction * len(seeds)
    notes = ["seed-grid search: completeness is not guaranteed outside integrable models"]
    if degenerate:
        notes.append("degenerate family: most seeds close up with identity monodromy")
        found.sort(key=lambda o: (round(o.T0, 9), tuple(np.round(o.marked_point, 9))))
        found = found[:1]
    found.sort(key=lambda o: (round(o.T0, 9), tuple(np.round(o.marked_point, 9))))
    labelled = [replace(o, label=o.label or f"orbit{i}") for i, o in enumerate(found)]
    if sys.is_split and not degenerate:
        labelled = [_axis_label(sys, o) for o in labelled]
    return OrbitSet(labelled, action_cap, degenerate, failures, len(seeds), False, notes)


def _axis_label(sys, o):
    z = o.marked_point
    if np.hypot(z[2], z[3]) < 1e-6:
        return replace(o, label="gamma1")
    if np.hypot(z[0], z[1]) < 1e-6:
        return replace(o, label="gamma2")
    return o
