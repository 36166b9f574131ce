"""Disk pages of the open book bound by an axis orbit of a split system.

For binding ``gamma1 = {z1 = 0}`` the page at angle ``theta0`` is
``{arg z1 = theta0}``, charted by ``(rho, phi)`` with

    z1 = rho exp(i (theta0 - tilt * phi)),   z0 = sqrt(a (1 - rho^2 / b)) exp(i phi),

``rho`` in ``(0, sqrt(b)]``. ``rho -> 0`` is the binding and ``rho = sqrt(b)``
is the point where the page meets the other axis orbit. The binding
``gamma2`` is handled by swapping the roles of ``z0`` and ``z1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import NotSplitSystem, SectionError, StokesMismatch
from .flow import TOL_STEP, rk_integrate
from .geometry import StarShapedSystem, omega, radial_project, reeb
from .orbits import PeriodicOrbit

TWO_PI = 2 * np.pi
STOKES_RTOL = 1e-5
NEAR_BINDING = (1e-2, 1e-3, 1e-4)


def _c(z, k):
    """Complex coordinate ``z_k`` of real 4-vectors."""
    return z[..., 2 * k] + 1j * z[..., 2 * k + 1]


@dataclass(frozen=True)
class SectionPage:
    sys: StarShapedSystem
    binding: int
    theta0: float
    tilt: float = 0.0

    @property
    def a(self) -> float:
        return self.sys.params["a"]

    @property
    def b(self) -> float:
        return self.sys.params["b"]

    @property
    def _idx(self):
        # (normal coordinate, binding coordinate)
        return (1, 0) if self.binding == 1 else (0, 1)

    @property
    def _scales(self):
        # (capacity of binding coordinate, capacity of normal coordinate)
        return (self.a, self.b) if self.binding == 1 else (self.b, self.a)

    @property
    def rho_max(self) -> float:
        return float(np.sqrt(self._scales[1]))

    @property
    def binding_period(self) -> float:
        return float(np.pi * self._scales[0])

    @property
    def expected_rate(self) -> float:
        """Flow derivative of the defining angle (constant on split systems)."""
        cb, cn = self._scales
        return 2.0 / cn + self.tilt * 2.0 / cb

    def chart(self, rho, phi) -> np.ndarray:
        rho, phi = np.broadcast_arrays(np.asarray(rho, float), np.asarray(phi, float))
        cb, cn = self._scales
        inner, outer = self._idx
        r = np.sqrt(np.maximum(cb * (1.0 - rho**2 / cn), 0.0))
        wn = rho * np.exp(1j * (self.theta0 - self.tilt * phi))
        wb = r * np.exp(1j * phi)
        z = np.empty(rho.shape + (4,))
        z[..., 2 * inner], z[..., 2 * inner + 1] = wn.real, wn.imag
        z[..., 2 * outer], z[..., 2 * outer + 1] = wb.real, wb.imag
        return z

    def chart_derivatives(self, rho, phi):
        """``(d/drho, d/dphi)`` of the chart, analytic."""
        rho, phi = np.broadcast_arrays(np.asarray(rho, float), np.asarray(phi, float))
        cb, cn = self._scales
        inner, outer = self._idx
        r = np.sqrt(np.maximum(cb * (1.0 - rho**2 / cn), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            dr = np.where(r > 0, -cb * rho / (cn * r), 0.0)
        en = np.exp(1j * (self.theta0 - self.tilt * phi))
        eb = np.exp(1j * phi)
        d_rho = np.zeros(rho.shape + (4,))
        d_phi = np.zeros(rho.shape + (4,))
        for arr, wn, wb in ((d_rho, en, dr * eb), (d_phi, -1j * self.tilt * rho * en, 1j * r * eb)):
            arr[..., 2 * inner], arr[..., 2 * inner + 1] = np.real(wn), np.imag(wn)
            arr[..., 2 * outer], arr[..., 2 * outer + 1] = np.real(wb), np.imag(wb)
        return d_rho, d_phi

    def coordinates(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Inverse chart ``z -> (rho, phi)`` for points on the page."""
        z = np.asarray(z, float)
        inner, outer = self._idx
        return np.abs(_c(z, inner)), np.angle(_c(z, outer))

    def angle(self, z) -> np.ndarray:
        """Defining angle; the page is its zero set modulo 2 pi."""
        z = np.asarray(z, float)
        inner, outer = self._idx
        ang = np.angle(_c(z, inner)) - self.theta0
        if self.tilt:
            ang = ang + self.tilt * np.angle(_c(z, outer))
        return ang

    def rate(self, z) -> np.ndarray:
        """Derivative of the defining angle along the Reeb flow."""
        z = np.asarray(z, float)
        X = reeb(self.sys, z)
        inner, outer = self._idx
        wn, dn = _c(z, inner), _c(X, inner)
        out = np.imag(np.conj(wn) * dn) / np.abs(wn) ** 2
        if self.tilt:
            wb, db = _c(z, outer), _c(X, outer)
            out = out + self.tilt * np.imag(np.conj(wb) * db) / np.abs(wb) ** 2
        return out

    def describe(self) -> dict:
        return {"system": self.sys.label, "binding": f"gamma{self.binding}", "theta0": self.theta0,
                "tilt": self.tilt, "rho_max": self.rho_max}


def build_page(sys: StarShapedSystem, binding=1, theta0: float = 0.0, tilt: float = 0.0) -> SectionPage:
    """Disk page with binding ``gamma1`` or ``gamma2`` of a split system."""
    if not sys.is_split:
        raise NotSplitSystem(f"explicit pages exist only for split systems, not {sys.label}")
    if isinstance(binding, PeriodicOrbit):
        binding = binding.label
    if isinstance(binding, str):
        binding = {"gamma1": 1, "gamma2": 2}.get(binding, binding)
    if binding not in (1, 2):
        raise SectionError(f"binding must be gamma1 or gamma2, got {binding!r}")
    return SectionPage(sys, int(binding), float(theta0) % TWO_PI, float(tilt))


# ---------------------------------------------------------------------------
# return map


def _scaled_flow(sys, Z0, times, tol=TOL_STEP):
    """Flow each row of ``Z0`` for its own time by integrating ``tau * X`` over ``[0, 1]``."""
    Z0 = np.atleast_2d(Z0)
    times = np.asarray(times, float).reshape(-1, 1)

    def rhs(y):
        return times * reeb(sys, y)

    res = rk_integrate(rhs, Z0, 1.0, rtol=tol, atol=tol, project=lambda y: radial_project(sys, y))
    return res.y[-1]


def _batch_steps(sys, Z0, T, tol=TOL_STEP):
    res = rk_integrate(lambda y: reeb(sys, y), Z0, T, rtol=tol, atol=tol,
                       project=lambda y: radial_project(sys, y))
    return res.t, res.y, res.f


def return_map(page: SectionPage, rho, phi, *, newton_steps: int = 3):
    """First return of chart points to the page.

    Returns ``(rho', phi', tau)`` arrays shaped like the input. The crossing
    is bracketed on the integrator steps, bisected on the Hermite
    interpolant and then polished by Newton iterations on exact flows.
    """
    rho, phi = np.broadcast_arrays(np.asarray(rho, float), np.asarray(phi, float))
    shape = rho.shape
    Z0 = page.chart(rho.ravel(), phi.ravel())
    n = len(Z0)
    rate0 = page.rate(Z0)
    if np.any(rate0 <= 0):
        raise SectionError("flow does not cross the page positively at a start point")
    T_end = 1.25 * TWO_PI / float(np.min(rate0))
    ts, ys, fs = _batch_steps(page.sys, Z0, T_end)
    lift = np.unwrap(page.angle(ys), axis=0)
    lift -= lift[0]
    crossed = lift >= TWO_PI
    if not np.all(crossed[-1]):
        raise SectionError("some points did not return within the integration window")
    j = np.argmax(crossed, axis=0)  # first step index past 2 pi
    i0 = j - 1
    cols = np.arange(n)
    t0, t1 = ts[i0], ts[j]
    lo = np.zeros(n)
    hi = np.ones(n)
    # vectorized bisection on the interpolant
    a0 = lift[i0, cols]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        z = _interp(t0, t1, ys[i0, cols], ys[j, cols], fs[i0, cols], fs[j, cols], mid)
        d = page.angle(z) - page.angle(ys[i0, cols])
        d = (d + np.pi) % TWO_PI - np.pi
        above = a0 + d >= TWO_PI
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    tau = t0 + 0.5 * (lo + hi) * (t1 - t0)
    for _ in range(newton_steps):
        Z = _scaled_flow(page.sys, Z0, tau)
        g = (page.angle(Z) + np.pi) % TWO_PI - np.pi
        tau = tau - g / page.rate(Z)
    Z = _scaled_flow(page.sys, Z0, tau)
    r2, p2 = page.coordinates(Z)
    return r2.reshape(shape), p2.reshape(shape), tau.reshape(shape)


def _interp(t0, t1, y0, y1, f0, f1, s):
    h = (t1 - t0)[:, None]
    u = s[:, None]
    return ((2 * u**3 - 3 * u**2 + 1) * y0 + (u**3 - 2 * u**2 + u) * h * f0
            + (-2 * u**3 + 3 * u**2) * y1 + (u**3 - u**2) * h * f1)


def return_orbit(page: SectionPage, rho: float, phi: float, n_iter: int) -> np.ndarray:
    """Iterates ``(rho_k, phi_k, tau_k)`` of the return map, starting row included."""
    out = np.empty((n_iter + 1, 3))
    out[0] = rho, phi, 0.0
    for k in range(n_iter):
        r, p, t = return_map(page, out[k, 0], out[k, 1])
        out[k + 1] = float(r), float(p), float(t)
    return out


def iterates_to_csv(iterates: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "rho", "phi", "tau"])
        for k, row in enumerate(iterates):
            w.writerow([k] + [repr(float(c)) for c in row])


def _grid(page: SectionPage, n_rho: int, n_phi: int, include_center: bool = True):
    rows = list(np.linspace(0.0, page.rho_max, n_rho + 1)[1:])
    if not include_center:
        rows = rows[:-1] + [page.rho_max * (1 - 1e-3)]
    rows = np.array(sorted(set(rows) | set(NEAR_BINDING)))
    phis = np.linspace(0.0, TWO_PI, n_phi, endpoint=False)
    return np.meshgrid(rows, phis, indexing="ij")


@dataclass
class ReturnTimeBounds:
    inf: float
    sup: float
    n_points: int
    rows: list[float] = field(default_factory=list)


def return_time_bounds(page: SectionPage, n_rho: int = 8, n_phi: int = 16) -> ReturnTimeBounds:
    """Extremes of the return time over a chart grid with near-binding rows."""
    R, P = _grid(page, n_rho, n_phi)
    _, _, tau = return_map(page, R, P)
    return ReturnTimeBounds(float(tau.min()), float(tau.max()), tau.size, [float(r) for r in R[:, 0]])


# ---------------------------------------------------------------------------
# areas


@dataclass
class PageArea:
    quadrature: float
    stokes: float
    binding_action: float

    @property
    def value(self) -> float:
        return self.quadrature

    @property
    def rel_diff(self) -> float:
        return abs(self.quadrature - self.stokes) / abs(self.stokes)


def page_area(page: SectionPage, n_rho: int = 64, n_phi: int = 64) -> PageArea:
    """``int_page d lambda`` by 2D quadrature and by Stokes on the binding.

    The page is oriented so that the flow crosses it positively; with that
    orientation the boundary at ``rho -> 0`` runs along the binding in the
    flow direction.
    """
    if page.tilt:
        raise SectionError("area is defined for untilted pages only")
    x, w = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * page.rho_max * (x + 1)
    wr = 0.5 * page.rho_max * w
    phi = np.linspace(0.0, TWO_PI, n_phi, endpoint=False)
    R, P = np.meshgrid(rho, phi, indexing="ij")
    d_rho, d_phi = page.chart_derivatives(R, P)
    dens = omega(d_phi, d_rho)
    quad = float(np.sum(wr[:, None] * dens) * TWO_PI / n_phi)
    # Stokes: lambda = 1/2 omega(z, .) on the binding circle rho = 0
    zb = page.chart(np.zeros_like(phi), phi)
    _, tb = page.chart_derivatives(np.zeros_like(phi), phi)
    stokes = float(np.sum(0.5 * omega(zb, tb)) * TWO_PI / n_phi)
    res = PageArea(quad, stokes, page.binding_period)
    if not (quad > 0 and res.rel_diff <= STOKES_RTOL):
        raise StokesMismatch(f"quadrature {quad:.10g} vs Stokes {stokes:.10g}")
    return res


def loop_action(points: np.ndarray) -> float:
    """``oint lambda`` over a closed polygon (midpoint rule)."""
    z = np.asarray(points, float)
    nxt = np.roll(z, -1, axis=0)
    return float(np.sum(0.5 * omega(0.5 * (z + nxt), nxt - z)))


def rectangle_boundary(rho_range, phi_range, n_side: int = 200):
    """Counter-clockwise boundary of a chart rectangle in (phi, rho) orientation."""
    r0, r1 = rho_range
    p0, p1 = phi_range
    s = np.linspace(0.0, 1.0, n_side, endpoint=False)
    rho = np.concatenate([np.full_like(s, r0), r0 + (r1 - r0) * s, np.full_like(s, r1), r1 - (r1 - r0) * s])
    phi = np.concatenate([p0 + (p1 - p0) * s, np.full_like(s, p1), p1 - (p1 - p0) * s, np.full_like(s, p0)])
    return rho, phi


@dataclass
class AreaCheck:
    rectangles: list[tuple[float, float, float, float]]
    before: np.ndarray
    after: np.ndarray

    @property
    def max_rel_error(self) -> float:
        return float(np.max(np.abs(self.after - self.before) / np.abs(self.before)))


def area_preservation(page: SectionPage, n_rect: int = 10, seed: int = 0, n_side: int = 200) -> AreaCheck:
    """d lambda-areas of random chart rectangles before and after the return map."""
    rng = np.random.default_rng(seed)
    rects, before, after = [], [], []
    rm = page.rho_max
    for _ in range(n_rect):
        r0 = rng.uniform(0.05, 0.6) * rm
        r1 = r0 + rng.uniform(0.1, 0.35) * rm
        p0 = rng.uniform(0, TWO_PI)
        p1 = p0 + rng.uniform(0.3, 2.0)
        rects.append((float(r0), float(r1), float(p0), float(p1)))
        rho, phi = rectangle_boundary((r0, r1), (p0, p1), n_side)
        before.append(loop_action(page.chart(rho, phi)))
        r2, p2, _ = return_map(page, rho, phi)
        after.append(loop_action(page.chart(r2, p2)))
    return AreaCheck(rects, np.array(before), np.array(after))


@dataclass
class TransversalityReport:
    minimum: float
    location: tuple[float, float]
    n_points: int

    @property
    def transverse(self) -> bool:
        return self.minimum > 0


def transversality_scan(page: SectionPage, n_rho: int = 16, n_phi: int = 32) -> TransversalityReport:
    """Minimum over a chart grid of the flow derivative of the defining angle."""
    R, P = _grid(page, n_rho, n_phi, include_center=not page.tilt)
    rates = page.rate(page.chart(R, P))
    k = int(np.argmin(rates))
    return TransversalityReport(float(rates.flat[k]), (float(R.flat[k]), float(P.flat[k])), rates.size)
