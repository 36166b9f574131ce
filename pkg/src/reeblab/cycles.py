"""Asymptotic cycles: rotation numbers, intersection estimates, certification.

For a link ``L`` of periodic orbits and its linking class ``y``, the rotation
number of a component ``gamma_i`` and the intersection numbers of invariant
measures with ``y`` decide whether ``L`` binds a rational open book. Positive
rotation numbers and positive intersection numbers are checked here: the
former exactly from the linearized flow, the latter on trajectory samples.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.signal import argrelmin
from scipy.spatial import cKDTree

from ._parallel import pmap
from .errors import (
    ChordCrossesLink,
    CycleError,
    NonTransverseCrossing,
    NoRecurrence,
)
from .flow import Trajectory, integrate_batch
from .geometry import StarShapedSystem, radial_project
from .knots import ClosedCurve, LinkingClass, linking_class, linking_number, self_linking
from .orbits import PeriodicOrbit
from .spectral import axis_index, rotation_alpha

log = logging.getLogger(__name__)

TUBE_EXCL = 1e-2
RHO_TOL = 1e-4
MU_TOL = 1e-4
CROSS_TOL = 1e-9
LOOP_H = 1e-2
IMPLICATION_CHAIN = (
    "(iii) rho^y(gamma) > 0 for every component and mu.y > 0 for every invariant measure off the link"
    " => (ii) the link binds a rational open book whose pages are global surfaces of section"
    " => (i) the Reeb flow admits a global surface of section with boundary on the link"
)


# ---------------------------------------------------------------------------
# rotation numbers


@dataclass(frozen=True)
class RotationResult:
    rho: float
    linking_sum: int
    slope: float
    slope_error: float
    twist: int
    identity_residual: float

    @property
    def two_pi_rho(self) -> float:
        return 2 * np.pi * self.rho


def _curve_index(y: LinkingClass, orbit: PeriodicOrbit) -> int:
    p = orbit.marked_point / np.linalg.norm(orbit.marked_point)
    best, bi = np.inf, -1
    for i, c in enumerate(y.curves):
        d = float(cKDTree(c.on_sphere()).query(p)[0])
        if d < best:
            best, bi = d, i
    if best > 1e-2:
        raise CycleError(f"orbit {orbit.label!r} is not a component of the link")
    return bi


def rotation_number(sys: StarShapedSystem, orbit: PeriodicOrbit, y: LinkingClass, *, twist: int = 0,
                    self_link: int | None = None, periods: int = 64, seed: int = 0) -> RotationResult:
    """Rotation number ``rho^y`` of a link component.

    The transverse angle is measured in the disk-aligned tube frame (zero
    linking pushoff); ``twist`` turns it further by that many turns per
    period, which moves the same amount between the two terms of the sum
    and must leave ``rho`` unchanged.
    """
    i = _curve_index(y, orbit)
    coeffs = y.coefficients
    forward = orbit if orbit.orientation > 0 else orbit.reversed()
    own = ClosedCurve.from_orbit(sys, forward)
    lsum = 0
    for j, (c, curve) in enumerate(zip(coeffs, y.curves)):
        if j != i and c:
            lsum += c * linking_number(own, curve, seed=seed)
    if axis_index(sys, forward) is None and self_link is None:
        self_link = self_linking(sys, forward, seed=seed)
    ar = rotation_alpha(sys, forward, "disk_aligned", periods=periods, self_linking=self_link, twist=twist)
    ci = coeffs[i]
    # tube frame twisted by n turns: angle slope gains n, the pushoff term loses n
    p_term = lsum - ci * twist
    T = forward.T0
    lim = ar.alpha * 2 * np.pi / T  # lim theta / t
    rho = (T / (2 * np.pi)) * (p_term / T + ci * lim / (2 * np.pi))
    identity = p_term + ci * ar.alpha
    resid = abs(2 * np.pi * rho - identity)
    if resid > 1e-6:
        raise CycleError(f"rotation identity residual {resid:.2e}")
    rho *= orbit.orientation
    return RotationResult(float(rho), int(orbit.orientation * lsum), float(ar.alpha), float(ar.error), int(twist),
                          float(resid))


# ---------------------------------------------------------------------------
# page crossings


def crossing_times(traj: Trajectory, page, cross_tol: float = CROSS_TOL, t_max: float | None = None) -> np.ndarray:
    """Times where the trajectory crosses the open page, refined to 1e-9."""
    t_max = traj.T if t_max is None else float(t_max)
    m = traj.t_samples <= t_max
    ts, zs = traj.t_samples[m], traj.states[m]
    if ts[-1] < t_max:
        ts = np.append(ts, t_max)
        zs = np.vstack([zs, traj.at(t_max)])
    ang = page.angle(zs)
    lift = np.unwrap(ang)
    k = np.floor(lift / (2 * np.pi))
    out = []
    for i in np.nonzero(np.diff(k) != 0)[0]:
        if k[i + 1] < k[i]:
            raise NonTransverseCrossing(f"negative crossing near t={ts[i]:.6f}")
        target = 2 * np.pi * k[i + 1]

        def g(t, i=i, target=target):
            d = (page.angle(traj.at(t)[0]) - ang[i] + np.pi) % (2 * np.pi) - np.pi
            return lift[i] + d - target

        ga, gb = g(ts[i]), g(ts[i + 1])
        tc = brentq(g, ts[i], ts[i + 1], xtol=1e-12) if ga * gb < 0 else (ts[i] if ga == 0 else ts[i + 1])
        zc = traj.at(tc)[0]
        r = float(page.rate(zc))
        if r < cross_tol:
            raise NonTransverseCrossing(f"flow derivative {r:.3e} at t={tc:.6f}")
        out.append(tc)
    return np.array(out)


def crossing_count(traj: Trajectory, page, cross_tol: float = CROSS_TOL, t_max: float | None = None) -> int:
    """Number of positive transverse crossings of the open page."""
    return int(len(crossing_times(traj, page, cross_tol, t_max)))


# ---------------------------------------------------------------------------
# Birkhoff estimates of mu . y


@dataclass
class SampleEstimate:
    index: int
    start: np.ndarray
    T_n: float
    recurrence: float
    pairing: int
    estimate: float
    estimate_half: float | None = None
    T_half: float | None = None
    flagged: str = ""


@dataclass
class IntersectionStats:
    horizon: float
    samples: list[SampleEstimate]
    excluded: int
    rejected_starts: int

    @property
    def valid(self) -> list[SampleEstimate]:
        return [s for s in self.samples if not s.flagged]

    @property
    def values(self) -> np.ndarray:
        return np.array([s.estimate for s in self.valid])

    @property
    def min(self) -> float:
        return float(self.values.min()) if self.valid else float("nan")

    @property
    def mean(self) -> float:
        return float(self.values.mean()) if self.valid else float("nan")

    @property
    def cauchy_constant(self) -> float:
        """``max |e_T - e_{T/2}| * T`` over samples (estimator consistency)."""
        d = [abs(s.estimate - s.estimate_half) for s in self.valid if s.estimate_half is not None]
        return float(max(d) * self.horizon) if d else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "T_n", "estimate"])
            for s in self.valid:
                w.writerow([s.index, repr(s.T_n), repr(s.estimate)])


def _sample_starts(sys, link_pts, n, rng, tube_excl):
    tree = cKDTree(link_pts) if len(link_pts) else None
    out, rejected = [], 0
    while len(out) < n:
        g = rng.standard_normal(4)
        z = radial_project(sys, g)
        if tree is not None and tree.query(z)[0] < tube_excl:
            rejected += 1
            continue
        out.append(z)
    return np.array(out), rejected


def _recurrence_candidates(traj: Trajectory, t_lo: float, t_hi: float, z0: np.ndarray, n_best: int = 6):
    grid = np.arange(t_lo, t_hi, 0.02)
    d = np.linalg.norm(traj.at(grid) - z0, axis=1)
    mins = argrelmin(d, mode="wrap")[0]
    if mins.size == 0:
        mins = np.array([int(np.argmin(d))])
    mins = mins[np.argsort(d[mins])][:n_best]
    out = []
    for i in mins:
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(lambda t: float(np.linalg.norm(traj.at(t)[0] - z0)), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-12})
        out.append((float(res.x), float(res.fun)))
    out.sort(key=lambda p: p[1])
    return out


def _closed_loop(traj: Trajectory, T_n: float, h: float, link_tree, tube_excl):
    _, pts = traj.dense(h, T_n)
    end, start = pts[-1], pts[0]
    n = max(2, int(np.ceil(np.linalg.norm(end - start) / h)) + 1)
    s = np.linspace(0.0, 1.0, n)[1:-1, None]
    chord = radial_project(traj.sys, end + s * (start - end)) if len(s) else np.empty((0, 4))
    if len(chord) and link_tree is not None:
        if link_tree.query(chord / np.linalg.norm(chord, axis=1, keepdims=True))[0].min() < tube_excl:
            raise ChordCrossesLink("closing chord passes within tube_excl of the link")
    loop = np.vstack([pts, chord, start[None]])
    return ClosedCurve(loop)


def _pairing(y: LinkingClass, traj: Trajectory, T_n: float, link_tree, tube_excl, seed) -> int:
    # loop resolution must keep 10 gaps below the distance to the link
    probe = traj.at(np.linspace(0.0, T_n, 4096))
    dist = float(link_tree.query(probe / np.linalg.norm(probe, axis=1, keepdims=True))[0].min())
    h = min(LOOP_H, dist / 12)
    loop = _closed_loop(traj, T_n, h, link_tree, tube_excl)
    total = 0
    for (_, c, _), curve in zip(y.components, y.curves):
        if not c:
            continue
        ch = curve.max_gap
        if 10 * max(ch, h) > dist:
            curve = _refined(curve, dist / 12)
        total += c * linking_number(loop, curve, seed=seed)
    return total


_REFINE_CACHE: dict = {}


def _refined(curve: ClosedCurve, h: float) -> ClosedCurve:
    """Subdivide a polygon (re-projected to the sphere) so gaps stay below ``h``."""
    key = (id(curve), round(np.log2(h)))
    if key in _REFINE_CACHE:
        return _REFINE_CACHE[key]
    p = curve.points
    seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
    k = np.maximum(1, np.ceil(seg / h)).astype(int)
    idx = np.repeat(np.arange(len(seg)), k)
    frac = (np.arange(idx.size) - np.repeat(np.cumsum(k) - k, k)) / np.repeat(k, k)
    pts = p[idx] + frac[:, None] * (p[idx + 1] - p[idx])
    pts *= (np.linalg.norm(p[idx], axis=1) / np.linalg.norm(pts, axis=1))[:, None]
    out = ClosedCurve(np.vstack([pts, p[:1]]), curve.label)
    _REFINE_CACHE[key] = out
    return out


def birkhoff_intersection(sys: StarShapedSystem, y: LinkingClass, samples: int = 32, horizon: float = 2000.0,
                          seed: int = 0, tube_excl: float = TUBE_EXCL, half_check: bool = True) -> IntersectionStats:
    """Sampled estimates of ``mu . y`` from near-recurrent trajectory loops.

    Each start point (uniform direction, radially projected, kept off the
    link's tube) is flowed to ``horizon``; the best near-return in
    ``[T/2, T]`` is closed by a chord and paired with ``y``.
    """
    periods = [c[2] for c in y.components if np.isfinite(c[2])]
    if periods and horizon < 100 * max(periods):
        raise CycleError(f"horizon {horizon} is below 100 x the longest link period")
    if samples < 1:
        raise CycleError("need at least one sample")
    rng = np.random.default_rng(seed)
    link_pts = np.vstack([c.on_sphere() for c in y.curves]) if y.curves else np.empty((0, 4))
    link_tree = cKDTree(link_pts) if len(link_pts) else None
    Z0, rejected = _sample_starts(sys, link_pts, samples, rng, tube_excl)
    batch = integrate_batch(sys, Z0, horizon)
    seeds = rng.integers(0, 2**32, size=samples)

    def one(i):
        traj = batch.member(i)
        z0 = Z0[i]
        est = SampleEstimate(i, z0, float("nan"), float("nan"), 0, float("nan"))
        if not any(y.coefficients):
            est.T_n, est.estimate, est.estimate_half = horizon, 0.0, 0.0
            return est
        res = _estimate(traj, z0, horizon / 2, horizon, y, link_tree, tube_excl, int(seeds[i]))
        if res is None:
            est.flagged = "no-recurrence"
            return est
        est.T_n, est.recurrence, est.pairing = res
        est.estimate = est.pairing / est.T_n
        if half_check:
            r2 = _estimate(traj, z0, horizon / 4, horizon / 2, y, link_tree, tube_excl, int(seeds[i]))
            if r2 is not None:
                est.T_half = r2[0]
                est.estimate_half = r2[2] / r2[0]
        return est

    out = pmap(one, range(samples))
    excluded = sum(1 for s in out if s.flagged)
    if excluded:
        log.warning("%d of %d samples found no admissible recurrence", excluded, samples)
    return IntersectionStats(horizon, out, excluded, rejected)


def _estimate(traj, z0, t_lo, t_hi, y, link_tree, tube_excl, seed):
    for T_n, dist in _recurrence_candidates(traj, t_lo, t_hi, z0):
        try:
            return T_n, dist, _pairing(y, traj, T_n, link_tree, tube_excl, seed)
        except ChordCrossesLink:
            continue
    return None


# ---------------------------------------------------------------------------
# certification


@dataclass
class FriedConfig:
    samples: int = 32
    horizon: float = 2000.0
    seed: int = 0
    tube_excl: float = TUBE_EXCL
    rho_tol: float = RHO_TOL
    mu_tol: float = MU_TOL
    coefficients: list[int] | None = None
    half_check: bool = True

    @classmethod
    def from_mapping(cls, m: dict | None) -> "FriedConfig":
        m = dict(m or {})
        known = {k: m.pop(k) for k in list(m) if k in cls.__dataclass_fields__}
        if m:
            raise CycleError(f"unknown fried parameters: {sorted(m)}")
        return cls(**known)


@dataclass
class FriedReport:
    link: list[str]
    class_description: str
    rotation: list[RotationResult]
    stats: IntersectionStats
    verdict_rho: bool
    verdict_mu: bool
    config: FriedConfig
    page_bound: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> bool:
        return self.verdict_rho and self.verdict_mu

    def to_record(self) -> dict:
        st = self.stats
        T = st.horizon
        rec = {
            "link": self.link,
            "class": self.class_description,
            "rotation_numbers": [
                {"component": name, "rho": {"value": r.rho, "tol": max(r.slope_error, 1e-12) / (2 * np.pi),
                                            "identity_residual": r.identity_residual},
                 "linking_sum": r.linking_sum, "twist": r.twist}
                for name, r in zip(self.link, self.rotation)
            ],
            "intersection": {
                "horizon": T,
                "count": len(st.valid),
                "excluded": st.excluded,
                "min": {"value": st.min, "tol": 2.0 / T},
                "mean": {"value": st.mean, "tol": 2.0 / T},
                "cauchy_constant": {"value": st.cauchy_constant, "tol": None},
                "samples": [{"index": s.index, "T_n": {"value": s.T_n, "recurrence": s.recurrence},
                             "estimate": {"value": s.estimate, "tol": 2.0 / T}} for s in st.valid],
            },
            "verdict_iii_a": self.verdict_rho,
            "verdict_iii_b_sampled": self.verdict_mu,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }
        if self.page_bound is not None:
            rec["page_lower_bound"] = {"value": self.page_bound, "tol": 2.0 / T}
        return rec

    def to_text(self) -> str:
        st = self.stats
        lines = [f"link: {', '.join(self.link)}", f"class: {self.class_description}", "rotation numbers:"]
        for name, r in zip(self.link, self.rotation):
            lines.append(f"  {name:<10} rho = {r.rho:.10f}  (2 pi rho = {r.two_pi_rho:.10f}, "
                         f"linking sum {r.linking_sum}, error {r.slope_error:.1e})")
        lines.append(f"intersection estimates over {len(st.valid)} samples at horizon {st.horizon:g}:"
                     f" min {st.min:.8f}, mean {st.mean:.8f}")
        if self.page_bound is not None:
            lines.append(f"  page lower bound sum 1/sup tau - 2/T = {self.page_bound - 2 / st.horizon:.8f}")
        lines.append(f"(iii-a) all rho > {self.config.rho_tol:g}: {self.verdict_rho}")
        lines.append(f"(iii-b) sampled mu.y > {self.config.mu_tol:g}: {self.verdict_mu}")
        lines.append("note: (iii-b) is checked on sampled trajectory measures only; it is a"
                     " falsification-capable necessary check, not a proof over all invariant measures.")
        lines.append("implication chain: " + IMPLICATION_CHAIN)
        lines.append(f"verdict: {'CERTIFIED (sampled)' if self.verdict else 'NOT certified'}")
        return "\n".join(lines)


def _page_bound(sys, link) -> float | None:
    if not sys.is_split or any(axis_index(sys, o) is None for o in link) or len(link) != 2:
        return None
    from .sections import build_page, return_time_bounds

    total = 0.0
    for o in link:
        b = return_time_bounds(build_page(sys, axis_index(sys, o)), n_rho=4, n_phi=8)
        total += 1.0 / b.sup
    return total


def fried_check(sys: StarShapedSystem, link, config: FriedConfig | dict | None = None) -> FriedReport:
    """Rotation numbers and sampled intersection numbers for a link of orbits."""
    cfg = config if isinstance(config, FriedConfig) else FriedConfig.from_mapping(config)
    link = list(link)
    if not link:
        raise CycleError("empty link")
    y = linking_class(sys, link, cfg.coefficients)
    rots = [rotation_number(sys, o, y, seed=cfg.seed) for o in link]
    stats = birkhoff_intersection(sys, y, cfg.samples, cfg.horizon, cfg.seed, cfg.tube_excl, cfg.half_check)
    if not stats.valid:
        raise NoRecurrence("no sample produced an admissible recurrence")
    v_rho = all(r.rho > cfg.rho_tol for r in rots)
    v_mu = stats.min > cfg.mu_tol
    names = [o.label or f"orbit{i}" for i, o in enumerate(link)]
    bound = _page_bound(sys, link) if all(o.orientation > 0 for o in link) else None
    notes = []
    if stats.excluded:
        notes.append(f"{stats.excluded} samples excluded (no admissible recurrence)")
    if bound is not None and stats.min <= bound - 2 / cfg.horizon:
        notes.append("sampled minimum violates the page lower bound")
    return FriedReport(names, y.description, rots, stats, v_rho, v_mu, cfg, bound, notes)


__all__ = [
    "RotationResult", "rotation_number", "crossing_times", "crossing_count", "SampleEstimate",
    "IntersectionStats", "birkhoff_intersection", "FriedConfig", "FriedReport", "fried_check",
]
