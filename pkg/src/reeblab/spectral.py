"""Asymptotic operators, their spectra, and Conley-Zehnder indices.

Along a periodic orbit of period ``T`` the linearized flow in a symplectic
frame is a path ``Psi(s) = Phi(T s)`` on the unit loop, generated by
``Psi' = J S(s) Psi``. The asymptotic operator is ``A = -J d/ds - S(s)`` acting
on loops in R^2. It is discretized by Fourier-Galerkin in the basis
``exp(2 pi i m s)``, ``|m| <= N/2 - 1``, where it is a banded Hermitian matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig_banded, eigh

from ._parallel import pmap
from .errors import (
    DegenerateSystem,
    GapStraddle,
    GridTooCoarse,
    NonSymmetricCoefficient,
    SlowConvergence,
    SpectrumNotConverged,
    WindingNotInteger,
    WindowTooNarrow,
    WindowUnresolved,
    SpectralError,
)
from .flow import J2, SymplecticPath, polar_angle, transverse_linearized
from .geometry import StarShapedSystem
from .orbits import OrbitSet, PeriodicOrbit, find_periodic_orbits

log = logging.getLogger(__name__)

SPEC_TOL = 1e-6
SYMMETRY_TOL = 1e-5
BAND_TOL = 1e-9
DENSE_BAND = 64  # banded eigenvalue solver up to this many superdiagonals
VECTOR_BAND = 4  # banded eigenvectors only for nearly diagonal operators
FRAME_TAGS = ("global", "disk_aligned")


# ---------------------------------------------------------------------------
# frames along an orbit


def axis_index(sys: StarShapedSystem, orbit: PeriodicOrbit) -> int | None:
    """1 or 2 if ``orbit`` is an axis circle of a split system, else None."""
    if not sys.is_split:
        return None
    z = orbit.marked_point
    if np.hypot(z[2], z[3]) < 1e-8:
        return 1
    if np.hypot(z[0], z[1]) < 1e-8:
        return 2
    return None


def _constant_frame(which: int):
    if which == 1:
        e1, e2 = np.array([0.0, 0, 1, 0]), np.array([0.0, 0, 0, 1])
    else:
        e1, e2 = np.array([1.0, 0, 0, 0]), np.array([0.0, 1, 0, 0])

    def fn(z):
        shape = np.shape(z)
        return np.broadcast_to(e1, shape), np.broadcast_to(e2, shape)

    return fn


def orbit_path(sys: StarShapedSystem, orbit: PeriodicOrbit, T: float, frame_tag: str = "global",
               n_samples: int = 512, self_linking: int | None = None) -> SymplecticPath:
    """Linearized flow along ``orbit`` over ``[0, T]`` in the requested frame.

    ``disk_aligned`` uses the constant axis frame of split systems. For other
    orbits it twists the global frame by the self-linking number, which the
    caller may pass to avoid recomputing it.
    """
    if frame_tag not in FRAME_TAGS:
        raise SpectralError(f"unknown frame {frame_tag!r}")
    grid = np.linspace(0.0, T, n_samples + 1)
    if frame_tag == "global":
        return transverse_linearized(sys, orbit.marked_point, T, t_grid=grid, frame_tag="global")
    which = axis_index(sys, orbit)
    if which is not None:
        return transverse_linearized(sys, orbit.marked_point, T, t_grid=grid,
                                     frame_fn=_constant_frame(which), frame_tag="disk_aligned")
    if self_linking is None:
        from .knots import self_linking as _sl

        self_linking = _sl(sys, orbit)
    path = transverse_linearized(sys, orbit.marked_point, T, t_grid=grid, frame_tag="global")
    # global frame turns sl times relative to the page-aligned frame per period
    return path.twisted(self_linking, orbit.T0, tag="disk_aligned")


# ---------------------------------------------------------------------------
# operator


@dataclass
class AsymptoticOperator:
    """Sampled coefficient ``S(s_j)`` at ``s_j = j/N`` and its Galerkin matrix."""

    orbit: PeriodicOrbit
    frame_tag: str
    N: int
    T: float
    k: int
    S: np.ndarray
    symmetry_defect: float

    @property
    def M(self) -> int:
        return self.N // 2 - 1

    @property
    def size(self) -> int:
        return 2 * (2 * self.M + 1)

    def fourier(self) -> np.ndarray:
        """Fourier coefficients ``S_hat[l mod N]`` of the coefficient matrix."""
        return np.fft.fft(self.S, axis=0) / self.N

    def _entry(self, i, j, Sh):
        M = self.M
        m, c = i // 2 - M, i % 2
        n, cp = j // 2 - M, j % 2
        lag = m - n
        val = -Sh[lag % self.N, c, cp]
        diag = (-2j * np.pi * m) * J2[c, cp]
        return np.where(lag == 0, val + diag, val)

    def dense(self) -> np.ndarray:
        """The full Hermitian Galerkin matrix (for inspection and tests)."""
        Sh = self.fourier()
        idx = np.arange(self.size)
        return self._entry(idx[:, None], idx[None, :], Sh)

    def bandwidth(self, drop_tol: float = BAND_TOL) -> int:
        """Superdiagonal count after dropping the highest Fourier lags.

        Lags are dropped while the summed spectral norm of the dropped blocks
        stays below ``drop_tol``; by Weyl's inequality no eigenvalue moves by
        more than that.
        """
        Sh = self.fourier()
        norms = np.linalg.norm(Sh, ord=2, axis=(1, 2))
        half = self.N // 2
        per_lag = np.zeros(half + 1)
        for l in range(half + 1):
            per_lag[l] = norms[l] + (norms[-l] if 0 < l < self.N - l else 0.0)
        # block Toeplitz with lags +-l: norm bounded by sum over dropped l
        tail = np.cumsum(per_lag[::-1])[::-1]
        L = 0
        for l in range(half, 0, -1):
            if tail[l] > drop_tol:
                L = l
                break
        return min(2 * L + 1, self.size - 1)

    def banded(self) -> np.ndarray:
        """Upper band storage for ``scipy.linalg.eig_banded``."""
        u = self.bandwidth()
        Sh = self.fourier()
        n = self.size
        ab = np.zeros((u + 1, n), dtype=complex)
        for d in range(u + 1):
            j = np.arange(d, n)
            ab[u - d, d:] = self._entry(j - d, j, Sh)
        return ab

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Apply the Galerkin matrix to a coefficient vector (dense, small N only)."""
        return self.dense() @ coeffs


def _check_N(N):
    if N < 128 or (N & (N - 1)) != 0:
        raise SpectralError(f"N must be a power of two >= 128, got {N}")


def operator_from_path(orbit, path: SymplecticPath, k: int, N: int, stride: int = 1) -> AsymptoticOperator:
    Phi = path.matrices[:-1:stride][:N]
    dPhi = path.dmatrices[:-1:stride][:N]
    T = path.T
    S = -J2 @ (T * dPhi) @ np.linalg.inv(Phi)
    defect = float(np.max(np.abs(S - np.swapaxes(S, -1, -2))))
    if defect > SYMMETRY_TOL:
        raise NonSymmetricCoefficient(f"symmetry defect {defect:.3e} of S exceeds {SYMMETRY_TOL:.0e}")
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    return AsymptoticOperator(orbit, path.frame_tag, N, T, k, S, defect)


def build_operator(sys: StarShapedSystem, orbit: PeriodicOrbit, frame_tag: str = "global",
                   N: int = 512, k: int | None = None, self_linking: int | None = None) -> AsymptoticOperator:
    """Discretized asymptotic operator of ``orbit`` covered ``k`` times."""
    _check_N(N)
    k = orbit.k if k is None else int(k)
    T = k * orbit.T0
    path = orbit_path(sys, orbit, T, frame_tag, N, self_linking)
    return operator_from_path(orbit, path, k, N)


def build_operator_pair(sys, orbit, frame_tag="global", N=512, k=None, self_linking=None):
    """Operators at ``N`` and ``2N`` from a single integration."""
    _check_N(N)
    k = orbit.k if k is None else int(k)
    T = k * orbit.T0
    path = orbit_path(sys, orbit, T, frame_tag, 2 * N, self_linking)
    return operator_from_path(orbit, path, k, N, stride=2), operator_from_path(orbit, path, k, 2 * N)


# ---------------------------------------------------------------------------
# spectrum


@dataclass
class SpectrumEntry:
    nu: float
    wind: int
    section: np.ndarray
    residual: float
    min_norm: float


@dataclass
class AsymptoticSpectrum:
    orbit_ref: str
    frame_tag: str
    N: int
    k: int
    T: float
    entries: list[SpectrumEntry]
    resolved_window: tuple[float, float]
    notes: list[str] = field(default_factory=list)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([e.nu for e in self.entries])

    @property
    def windings(self) -> np.ndarray:
        return np.array([e.wind for e in self.entries], dtype=int)

    def structure_defects(self) -> list[str]:
        """Violations of the two-per-winding and monotonicity properties."""
        out = []
        w = self.windings
        if np.any(np.diff(w) < 0):
            out.append("winding not monotone in nu")
        vals, counts = np.unique(w, return_counts=True)
        for v, c in zip(vals, counts):
            if c != 2:
                out.append(f"winding {v} appears {c} times")
        if len(vals) and np.any(np.diff(vals) != 1):
            out.append("winding values skip an integer")
        return out

    def to_record(self) -> dict:
        return {
            "orbit": self.orbit_ref,
            "frame": self.frame_tag,
            "N": self.N,
            "k": self.k,
            "window": list(self.resolved_window),
            "entries": [
                {"nu": {"value": e.nu, "richardson_residual": e.residual},
                 "wind": {"value": e.wind, "min_section_norm": e.min_norm}}
                for e in self.entries
            ],
        }


def _winding(coeffs: np.ndarray, M: int, G: int):
    """Real eigensection on a G-point grid and its winding number."""
    c = coeffs.reshape(2 * M + 1, 2)
    while True:
        grid = np.zeros((G, 2), dtype=complex)
        m = np.arange(-M, M + 1)
        grid[m % G] = c
        eta = np.fft.ifft(grid, axis=0) * G
        re, im = eta.real, eta.imag
        sec = re if np.min(np.linalg.norm(re, axis=1)) >= np.min(np.linalg.norm(im, axis=1)) else im
        ang = np.arctan2(sec[:, 1], sec[:, 0])
        inc = np.diff(np.concatenate([ang, ang[:1]]))
        inc = (inc + np.pi) % (2 * np.pi) - np.pi
        if np.max(np.abs(inc)) < np.pi / 2:
            break
        if G > 1 << 16:
            raise GridTooCoarse("eigensection angle increments stay above pi/2")
        G *= 2
    total = float(np.sum(inc)) / (2 * np.pi)
    w = int(round(total))
    if abs(total - w) > 0.01:
        raise WindingNotInteger(f"angle lift closes at {total:.4f} turns")
    return sec, w, float(np.min(np.linalg.norm(sec, axis=1)))


def _eig_window(op: AsymptoticOperator, lo: float, hi: float, vectors: bool = True):
    # the banded back-transformation of eigenvectors costs O(band * n^2); dense wins early
    bw = op.bandwidth()
    if vectors:
        if bw > VECTOR_BAND:
            return eigh(op.dense(), subset_by_value=(lo, hi))
        return eig_banded(op.banded(), lower=False, select="v", select_range=(lo, hi))
    if bw > DENSE_BAND:
        return eigh(op.dense(), eigvals_only=True, subset_by_value=(lo, hi)), None
    return eig_banded(op.banded(), lower=False, eigvals_only=True, select="v", select_range=(lo, hi)), None


def spectrum(op: AsymptoticOperator, window: tuple[float, float] | None = None, *,
             center: float = 0.0, half_width_turns: int = 5, reference: AsymptoticOperator | None = None,
             spec_tol: float = SPEC_TOL) -> AsymptoticSpectrum:
    """Eigenpairs of ``op`` inside ``window`` with eigensection winding numbers.

    Partial winding classes at the window edges are trimmed, so the resolved
    window contains complete pairs only. With a ``reference`` operator at twice
    the resolution every kept eigenvalue is matched against it (Richardson
    check) and its residual recorded.
    """
    if window is None:
        window = (center - 2 * np.pi * half_width_turns, center + 2 * np.pi * half_width_turns)
    lo, hi = float(window[0]), float(window[1])
    limit = 2 * np.pi * op.M / 4
    if max(abs(lo), abs(hi)) > limit:
        raise WindowUnresolved(f"window {window} reaches into the truncated spectrum (|nu| > {limit:.1f})")
    w, v = _eig_window(op, lo, hi)
    entries = []
    for i in range(len(w)):
        sec, wind, mn = _winding(v[:, i], op.M, op.N)
        entries.append(SpectrumEntry(float(w[i]), wind, sec, 0.0, mn))
    entries.sort(key=lambda e: e.nu)
    # trim incomplete winding classes at the edges
    while entries and sum(e.wind == entries[0].wind for e in entries) < 2:
        entries.pop(0)
    while entries and sum(e.wind == entries[-1].wind for e in entries) < 2:
        entries.pop()
    notes = []
    if reference is not None and entries:
        rlo = entries[0].nu - 1.0
        rhi = entries[-1].nu + 1.0
        wr, _ = _eig_window(reference, rlo, rhi, vectors=False)
        for e in entries:
            e.residual = float(np.min(np.abs(wr - e.nu))) if wr.size else np.inf
        worst = max(e.residual for e in entries)
        if worst > spec_tol:
            raise SpectrumNotConverged(f"eigenvalues move by {worst:.3e} between N={op.N} and N={reference.N}")
        notes.append(f"richardson N={op.N} vs {reference.N}: max shift {worst:.3e}")
    for e in entries:
        if e.min_norm <= 0:
            raise SpectralError("eigensection vanishes on the grid")
    resolved = (entries[0].nu, entries[-1].nu) if entries else (lo, hi)
    orbit = op.orbit
    return AsymptoticSpectrum(orbit.label, op.frame_tag, op.N, op.k, op.T, entries, resolved, notes)


def asymptotic_spectrum(sys: StarShapedSystem, orbit: PeriodicOrbit, frame_tag: str = "global",
                        N: int = 512, k: int | None = None, delta: float = 0.0,
                        richardson: bool = True, half_width_turns: int = 5,
                        self_linking: int | None = None) -> AsymptoticSpectrum:
    """Operator assembly plus spectrum around ``delta`` in one call."""
    if richardson:
        op, ref = build_operator_pair(sys, orbit, frame_tag, N, k, self_linking)
    else:
        op, ref = build_operator(sys, orbit, frame_tag, N, k, self_linking), None
    return spectrum(op, center=delta, half_width_turns=half_width_turns, reference=ref)


@dataclass(frozen=True)
class CZResult:
    cz: int
    alpha_lt: int
    alpha_geq: int
    p: int
    gap: float  # distance from delta to the nearest eigenvalue


def cz_index(spec: AsymptoticSpectrum, delta: float = 0.0, spec_tol: float = SPEC_TOL) -> CZResult:
    """Constrained index ``2 alpha^{<delta} + p^delta`` from a winding table.

    Eigenvalues within ``spec_tol`` of ``delta`` are counted as ``>= delta``
    and logged.
    """
    nus = spec.eigenvalues
    winds = spec.windings
    if nus.size == 0:
        raise WindowTooNarrow("empty spectrum")
    near = np.abs(nus - delta) <= spec_tol
    if np.any(near):
        log.warning("eigenvalue within %.1e of delta=%g; treated as >= delta", spec_tol, delta)
    below = (nus < delta) & ~near
    above = ~below
    if not below.any() or not above.any():
        raise WindowTooNarrow(f"window {spec.resolved_window} does not straddle delta={delta}")
    a_lt = int(winds[below].max())
    a_geq = int(winds[above].min())
    p = a_geq - a_lt
    if p not in (0, 1):
        raise GapStraddle(f"p = {p} from alpha_lt={a_lt}, alpha_geq={a_geq}")
    return CZResult(2 * a_lt + p, a_lt, a_geq, p, float(np.min(np.abs(nus - delta))))


# ---------------------------------------------------------------------------
# rotation number of the linearized flow


def _bump(s):
    out = np.zeros_like(s)
    m = (s > 0) & (s < 1)
    out[m] = np.exp(-1.0 / (s[m] * (1 - s[m])))
    return out


def _bump_prime(s):
    out = np.zeros_like(s)
    m = (s > 0) & (s < 1)
    x = s[m]
    out[m] = np.exp(-1.0 / (x * (1 - x))) * (1 - 2 * x) / (x * (1 - x)) ** 2
    return out


def weighted_slope(t: np.ndarray, theta: np.ndarray, t_max: float) -> float:
    """Bump-weighted average of ``theta'`` over ``[0, t_max]`` (integrated by parts)."""
    m = t <= t_max + 1e-12
    tt, th = t[m], theta[m]
    s = tt / t_max
    num = -np.trapezoid(_bump_prime(s) * th, tt) / t_max
    den = np.trapezoid(_bump(s), tt)
    return float(num / den)


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    alpha_half: float
    frame_tag: str
    periods: int

    @property
    def error(self) -> float:
        return abs(self.alpha - self.alpha_half)


def rotation_alpha(sys: StarShapedSystem, orbit: PeriodicOrbit, frame_tag: str = "global",
                   periods: int = 64, samples_per_period: int = 64, u0=(1.0, 0.0),
                   self_linking: int | None = None, twist: int = 0,
                   conv_tol: float = 1e-4) -> AlphaResult:
    """Asymptotic turns per primitive period of the linearized flow.

    The slope of the angle lift is averaged with a smooth bump weight over
    ``periods`` periods; the same estimate over the first half horizon serves
    as the convergence check.
    """
    T0 = orbit.T0
    n = samples_per_period
    for _ in range(4):
        try:
            path = orbit_path(sys, orbit, periods * T0, frame_tag, periods * n, self_linking)
            if twist:
                path = path.twisted(twist, T0)
            theta = polar_angle(path, u0)
            break
        except GridTooCoarse:
            n *= 2
    else:
        raise GridTooCoarse("could not resolve the transverse rotation")
    T = periods * T0
    full = weighted_slope(path.t_grid, theta, T) * T0 / (2 * np.pi)
    half = weighted_slope(path.t_grid, theta, T / 2) * T0 / (2 * np.pi)
    if abs(full - half) > conv_tol:
        raise SlowConvergence(f"rotation estimates {half:.8f} (T/2) vs {full:.8f} (T)")
    return AlphaResult(full, half, path.frame_tag, periods)


# ---------------------------------------------------------------------------
# dynamical convexity


@dataclass
class ConvexityReport:
    action_cap: float
    rows: list[dict]
    verdict: bool
    degenerate_flag: bool
    caveats: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "action_cap": self.action_cap,
            "verdict": self.verdict,
            "degenerate": self.degenerate_flag,
            "caveats": list(self.caveats),
            "rows": self.rows,
        }

    def to_table(self) -> str:
        head = f"{'orbit':<10}{'k':>4}{'action':>14}{'CZ0':>6}{'a<0':>6}{'a>=0':>6}{'p':>4}{'gap':>12}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r['orbit']:<10}{r['k']:>4}{r['action']:>14.8f}{r['cz']:>6}"
                f"{r['alpha_lt']:>6}{r['alpha_geq']:>6}{r['p']:>4}{r['gap']:>12.3e}"
            )
        lines.append(f"verdict: {'dynamically convex' if self.verdict else 'NOT dynamically convex'}"
                     f" up to action {self.action_cap:g}" + (" [degenerate family]" if self.degenerate_flag else ""))
        return "\n".join(lines)


def convexity_check(sys: StarShapedSystem, action_cap: float, orbit_set: OrbitSet | None = None,
                    N: int = 512, strict: bool = False, richardson: bool = False) -> ConvexityReport:
    """CZ^0 in the global frame for every found orbit iterate of action <= cap."""
    if not action_cap > 0:
        raise SpectralError("action cap must be positive")
    if orbit_set is None:
        orbit_set = find_periodic_orbits(sys, action_cap)
    jobs = []
    for orb in orbit_set:
        k = 1
        while k * orb.T0 <= action_cap * (1 + 1e-12):
            jobs.append((orb, k))
            k += 1

    def run(job):
        orb, k = job
        spec = asymptotic_spectrum(sys, orb, "global", N, k, 0.0, richardson=richardson)
        res = cz_index(spec, 0.0)
        return {
            "orbit": orb.label,
            "k": k,
            "action": k * orb.T0,
            "cz": res.cz,
            "alpha_lt": res.alpha_lt,
            "alpha_geq": res.alpha_geq,
            "p": res.p,
            "gap": res.gap,
        }

    rows = pmap(run, jobs)
    caveats = list(orbit_set.notes)
    if orbit_set.degenerate:
        on_zero = [r for r in rows if r["gap"] <= SPEC_TOL]
        if on_zero:
            msg = "degenerate family with eigenvalue 0; CZ^0 taken with 0 counted as >= delta"
            if strict:
                raise DegenerateSystem(msg)
            caveats.append(msg)
    verdict = all(r["cz"] >= 3 for r in rows)
    return ConvexityReport(action_cap, rows, verdict, orbit_set.degenerate, caveats)
