"""Linking numbers of closed curves in the three-sphere.

Curves are normalized to the unit sphere, sent to R^3 by an orientation
preserving stereographic projection from a pole far from both curves, and
their signed planar crossings are counted after a random rotation. The Gauss
linking integral is kept as an independent slow check.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from . import kernels
from .errors import (
    ComponentsIntersect,
    CurvesTooClose,
    DegenerateProjection,
    EpsilonInstability,
    KnotError,
)
from .flow import integrate
from .geometry import StarShapedSystem, _frame_vectors, radial_project
from .orbits import PeriodicOrbit

log = logging.getLogger(__name__)

CURVE_H = 1e-2
CLOSE_TOL = 1e-8
SL_EPS = 1e-3
N_POLES = 64
MAX_RETRIES = 10


@dataclass
class ClosedCurve:
    """Closed polygon in R^4; ``points[-1]`` repeats ``points[0]``."""

    points: np.ndarray
    label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 4 or len(pts) < 4:
            raise KnotError("a curve needs at least 4 samples in R^4")
        if np.linalg.norm(pts[0] - pts[-1]) > CLOSE_TOL:
            raise KnotError(f"curve not closed: |first - last| = {np.linalg.norm(pts[0] - pts[-1]):.2e}")
        pts = pts.copy()
        pts[-1] = pts[0]
        self.points = pts

    @property
    def max_gap(self) -> float:
        return float(np.max(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def reversed(self) -> "ClosedCurve":
        return ClosedCurve(self.points[::-1].copy(), self.label + "~")

    def on_sphere(self) -> np.ndarray:
        return self.points / np.linalg.norm(self.points, axis=1, keepdims=True)

    @classmethod
    def from_orbit(cls, sys: StarShapedSystem, orbit: PeriodicOrbit, h: float = CURVE_H) -> "ClosedCurve":
        """Sample the primitive orbit, oriented by the flow, with gaps below ``h``."""
        traj = integrate(sys, orbit.marked_point, orbit.T0)
        _, pts = traj.dense(h)
        pts = pts.copy()
        pts[-1] = pts[0]
        if orbit.orientation < 0:
            pts = pts[::-1].copy()
        return cls(pts, orbit.label)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.points, delimiter=",", header="x0,y0,x1,y1", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, label: str = "") -> "ClosedCurve":
        return cls(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2), label)


# ---------------------------------------------------------------------------
# projection


def _orientation_basis(q: np.ndarray) -> np.ndarray:
    """Rotation ``O`` of R^4 with ``O q = e4`` and ``det O = +1``."""
    A = np.eye(4)
    A[:, 0] = q
    Qm, _ = np.linalg.qr(A)
    if Qm[:, 0] @ q < 0:
        Qm[:, 0] *= -1
    # columns: q, b1, b2, b3 -> rows b1, b2, b3, q
    O = np.vstack([Qm[:, 1], Qm[:, 2], Qm[:, 3], Qm[:, 0]])
    if np.linalg.det(O) < 0:
        O[0] *= -1
    return O


def stereographic(points: np.ndarray, pole: np.ndarray) -> np.ndarray:
    """Orientation-preserving stereographic projection of unit vectors from ``pole``."""
    O = _orientation_basis(pole)
    x = points @ O.T
    return x[:, :3] / (1.0 - x[:, 3:4])


def _choose_pole(curves, rng) -> np.ndarray:
    cand = rng.standard_normal((N_POLES, 4))
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    pts = np.vstack([c[:: max(1, len(c) // 2000)] for c in curves])
    d, _ = cKDTree(pts).query(cand)
    return cand[int(np.argmax(d))]


@dataclass
class LinkResult:
    value: int
    over: int
    under: int
    crossings: int
    attempts: int
    gauss: float | None = None
    checks: list[int] = field(default_factory=list)


def _count(P3, Q3, rng):
    for attempt in range(1, MAX_RETRIES + 1):
        R = Rotation.random(random_state=rng).as_matrix()
        over, under, n, degen = kernels.crossing_sum(P3 @ R.T, Q3 @ R.T)
        if degen:
            continue
        if over != under:
            log.debug("over/under crossing sums disagree (%d vs %d); retrying", over, under)
            continue
        return over, n, attempt
    raise DegenerateProjection(f"no generic projection found in {MAX_RETRIES} attempts")


def linking_detail(c1: ClosedCurve, c2: ClosedCurve, *, seed: int = 0, curve_h: float | None = None,
                   gauss: bool = False) -> LinkResult:
    """Linking number with diagnostics; see ``linking_number``."""
    h = max(c1.max_gap, c2.max_gap) if curve_h is None else curve_h
    P, Q = c1.on_sphere(), c2.on_sphere()
    small, large = (P, Q) if len(P) <= len(Q) else (Q, P)
    dmin = float(cKDTree(small).query(large, distance_upper_bound=10 * h)[0].min())
    if dmin < 10 * h:
        raise CurvesTooClose(f"curves {dmin:.3e} apart, need >= 10 * curve_h = {10 * h:.3e}")
    rng = np.random.default_rng(seed)
    pole = _choose_pole([P, Q], rng)
    P3, Q3 = stereographic(P, pole), stereographic(Q, pole)
    v1, n1, a1 = _count(P3, Q3, rng)
    v2, _, a2 = _count(P3, Q3, rng)
    if v1 != v2:
        raise DegenerateProjection(f"two projections disagree: {v1} vs {v2}")
    g = float(kernels.gauss_sum(P3, Q3)) if gauss else None
    return LinkResult(int(v1), v1, v1, n1, a1 + a2, g, [v1, v2])


def linking_number(c1: ClosedCurve, c2: ClosedCurve, *, seed: int = 0, curve_h: float | None = None) -> int:
    """Linking number of two disjoint oriented closed curves in S^3.

    Parameters
    ----------
    c1, c2 : ClosedCurve
        Curves in R^4 minus the origin; they are scaled to the unit sphere.
    seed : int
        Seed for the pole candidates and projection directions.
    curve_h : float, optional
        Sampling scale; the curves must stay ``10 * curve_h`` apart.
        Defaults to the largest sample gap.
    """
    return linking_detail(c1, c2, seed=seed, curve_h=curve_h).value


def gauss_linking(c1: ClosedCurve, c2: ClosedCurve, seed: int = 0) -> float:
    """Gauss linking integral after the same stereographic projection (slow oracle)."""
    P, Q = c1.on_sphere(), c2.on_sphere()
    pole = _choose_pole([P, Q], np.random.default_rng(seed))
    return float(kernels.gauss_sum(stereographic(P, pole), stereographic(Q, pole)))


# ---------------------------------------------------------------------------
# self-linking


def pushoff_pair(sys: StarShapedSystem, orbit: PeriodicOrbit, eps: float):
    """The sampled orbit and its pushoff along ``eps * e1``, both on the surface."""
    traj = integrate(sys, orbit.marked_point, orbit.T0)
    e1_probe, _ = _frame_vectors(sys, traj.states)
    scale = float(np.min(np.linalg.norm(e1_probe, axis=1)))
    _, pts = traj.dense(eps * scale / 20)
    pts = pts.copy()
    pts[-1] = pts[0]
    e1, _ = _frame_vectors(sys, pts)
    push = radial_project(sys, pts + eps * e1)
    push[-1] = push[0]
    return ClosedCurve(pts, orbit.label), ClosedCurve(push, orbit.label + "_eps")


def self_linking(sys: StarShapedSystem, orbit: PeriodicOrbit, eps: float = SL_EPS, seed: int = 0) -> int:
    """Self-linking number from the global-frame pushoff, checked at ``eps`` and ``eps/2``."""
    if orbit.k != 1:
        raise KnotError("self-linking needs a primitive orbit")
    vals = []
    for e in (eps, eps / 2):
        c, ce = pushoff_pair(sys, orbit, e)
        vals.append(linking_number(c, ce, seed=seed))
    if vals[0] != vals[1]:
        raise EpsilonInstability(f"self-linking {vals[0]} at eps={eps:g} but {vals[1]} at eps={eps / 2:g}")
    return vals[0]


# ---------------------------------------------------------------------------
# linking class


@dataclass
class LinkingClass:
    """The class ``y = sum_i c_i y_i`` dual to a link of periodic orbits."""

    components: list[tuple[str, int, float]]
    curves: list[ClosedCurve]
    orbits: list[PeriodicOrbit] = field(default_factory=list)

    @property
    def description(self) -> str:
        terms = [f"{c}*y[{name}]" for name, c, _ in self.components]
        return " + ".join(terms) if terms else "0"

    @property
    def coefficients(self) -> list[int]:
        return [c for _, c, _ in self.components]

    def evaluate(self, loop: ClosedCurve, seed: int = 0, curve_h: float | None = None) -> int:
        """``<y, loop> = sum_i c_i lk(loop, gamma_i)``."""
        total = 0
        for (_, c, _), curve in zip(self.components, self.curves):
            if c:
                total += c * linking_number(loop, curve, seed=seed, curve_h=curve_h)
        return total

    def to_record(self) -> dict:
        return {
            "description": self.description,
            "components": [{"orbit": n, "coefficient": c, "period": {"value": T, "tol": 1e-9}}
                           for n, c, T in self.components],
        }


def linking_class(sys: StarShapedSystem, link, coefficients=None, h: float = CURVE_H) -> LinkingClass:
    """Linking class of a link of primitive orbits, one coefficient per component.

    ``link`` may mix ``PeriodicOrbit`` and ``ClosedCurve`` entries (the latter
    for synthetic test components).
    """
    link = list(link)
    coefficients = [1] * len(link) if coefficients is None else [int(c) for c in coefficients]
    if len(coefficients) != len(link):
        raise KnotError("one coefficient per component")
    curves, comps, orbits = [], [], []
    for i, item in enumerate(link):
        if isinstance(item, ClosedCurve):
            curve = item
            period = float("nan")
            name = item.label or f"curve{i}"
        else:
            curve = ClosedCurve.from_orbit(sys, item, h)
            period = item.T0
            name = item.label or f"orbit{i}"
            orbits.append(item)
        curves.append(curve)
        comps.append((name, coefficients[i], period))
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            d = float(cKDTree(curves[j].on_sphere()).query(curves[i].on_sphere())[0].min())
            if d < 10 * h:
                raise ComponentsIntersect(f"components {comps[i][0]} and {comps[j][0]} are {d:.2e} apart")
    return LinkingClass(comps, curves, orbits)
