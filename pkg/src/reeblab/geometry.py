"""Star-shaped hypersurfaces in C^2, their Reeb fields and contact frames.

Coordinates on R^4 = C^2 are ordered ``(x0, y0, x1, y1)`` with
``z_j = x_j + i y_j``. Every function here accepts batched input: arrays whose
last axis has length 4.

The energy surface is ``Sigma = {H = 1}`` for a positively 2-homogeneous
Hamiltonian ``H``. The contact form is the restriction of the standard
Liouville form ``alpha0 = 1/2 sum(x dy - y dx)``; its differential is the
standard symplectic form ``omega0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    ConfigError,
    DegenerateGradient,
    FrameDegenerate,
    GeometryError,
    NotTangent,
    ReebCheckFailed,
)

SURFACE_TOL = 1e-10
FRAME_TOL = 1e-9

# Standard complex structure (x_j, y_j) -> (-y_j, x_j); omega0(u, v) = <J0 u, v>.
J0 = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)
# Left multiplication by the quaternions j and k on x0 + y0 i + x1 j + y1 k.
QJ = np.array(
    [
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
    ]
)
QK = np.array(
    [
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]
)


@dataclass(frozen=True)
class StarShapedSystem:
    """A degree-2 homogeneous Hamiltonian with its derivatives.

    ``kind`` is ``"split"`` for ``H = |z0|^2/a + |z1|^2/b`` (then ``params``
    holds ``a`` and ``b``) and ``"custom"`` otherwise.
    """

    hamiltonian: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    label: str
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def is_split(self) -> bool:
        return self.kind == "split"

    def H(self, z):
        return self.hamiltonian(np.asarray(z, dtype=float))

    def describe(self) -> dict:
        return {"label": self.label, "kind": self.kind, **self.params}


def split(a: float, b: float) -> StarShapedSystem:
    """Ellipsoid-type system ``|z0|^2/a + |z1|^2/b``; orbits on the axes have periods pi*a, pi*b."""
    if not (a > 0 and b > 0):
        raise GeometryError(f"split system needs a, b > 0, got {a}, {b}")
    a = float(a)
    b = float(b)
    w = np.array([1.0 / a, 1.0 / a, 1.0 / b, 1.0 / b])
    hess = np.diag(2.0 * w)

    def hamiltonian(z):
        return np.sum(w * z * z, axis=-1)

    def gradient(z):
        return 2.0 * w * z

    def hessian(z):
        return np.broadcast_to(hess, np.shape(z)[:-1] + (4, 4))

    return StarShapedSystem(
        hamiltonian, gradient, hessian, label=f"split({a:.12g},{b:.12g})",
        kind="split", params={"a": a, "b": b},
    )


def hopf() -> StarShapedSystem:
    return split(1.0, 1.0)


# ---------------------------------------------------------------------------
# custom Hamiltonians


_HU = np.array(  # Hessian of u = x0 x1 + y0 y1
    [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float
)
_HV = np.array(  # Hessian of v = y0 x1 - x0 y1
    [[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=float
)


def perturbed_split(a: float, b: float, eps: float) -> StarShapedSystem:
    """``split(a, b) + eps * Re(z0^2 conj(z1)^2) / |z|^2``.

    The quartic term is divided by ``|z|^2`` to keep degree-2 homogeneity.
    Positivity requires roughly ``|eps| < min(1/a, 1/b)``.
    """
    base = split(a, b)
    eps = float(eps)

    def parts(z):
        x0, y0, x1, y1 = np.moveaxis(z, -1, 0)
        u = x0 * x1 + y0 * y1
        v = y0 * x1 - x0 * y1
        gu = np.stack([x1, y1, x0, y0], axis=-1)
        gv = np.stack([-y1, x1, y0, -x0], axis=-1)
        r2 = np.sum(z * z, axis=-1)
        return u, v, gu, gv, r2

    def hamiltonian(z):
        u, v, _, _, r2 = parts(z)
        return base.hamiltonian(z) + eps * (u * u - v * v) / r2

    def gradient(z):
        u, v, gu, gv, r2 = parts(z)
        q = u * u - v * v
        gq = 2.0 * u[..., None] * gu - 2.0 * v[..., None] * gv
        gp = gq / r2[..., None] - 2.0 * (q / r2**2)[..., None] * z
        return base.gradient(z) + eps * gp

    def hessian(z):
        u, v, gu, gv, r2 = parts(z)
        q = u * u - v * v
        gq = 2.0 * u[..., None] * gu - 2.0 * v[..., None] * gv
        outer = lambda p, s: p[..., :, None] * s[..., None, :]  # noqa: E731
        hq = 2.0 * (
            outer(gu, gu) + u[..., None, None] * _HU
            - outer(gv, gv) - v[..., None, None] * _HV
        )
        r2e = r2[..., None, None]
        qe = q[..., None, None]
        hp = (
            hq / r2e
            - 2.0 / r2e**2 * (outer(gq, z) + outer(z, gq))
            - 2.0 * qe / r2e**2 * np.eye(4)
            + 8.0 * qe / r2e**3 * outer(z, z)
        )
        return base.hessian(z) + eps * hp

    return StarShapedSystem(
        hamiltonian, gradient, hessian,
        label=f"perturbed_split({a:.12g},{b:.12g},{eps:.12g})",
        kind="custom", params={"a": float(a), "b": float(b), "eps": eps},
    )


REGISTRY: dict[str, Callable[..., StarShapedSystem]] = {
    "perturbed_split": perturbed_split,
}


def system_from_config(cfg: dict) -> StarShapedSystem:
    """Build a system from ``{kind: split, a, b}`` or ``{kind: custom, name, ...}``."""
    if not isinstance(cfg, dict):
        raise ConfigError("system: expected a mapping")
    kind = cfg.get("kind")
    try:
        if kind == "split":
            return split(float(cfg["a"]), float(cfg["b"]))
        if kind == "hopf":
            return hopf()
        if kind == "custom":
            name = cfg.get("name")
            if name not in REGISTRY:
                raise ConfigError(f"system.name: unknown Hamiltonian {name!r}; known: {sorted(REGISTRY)}")
            kwargs = {k: float(v) for k, v in cfg.items() if k not in ("kind", "name")}
            return REGISTRY[name](**kwargs)
    except KeyError as exc:
        raise ConfigError(f"system: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"system: {exc}") from None
    except GeometryError as exc:
        raise ConfigError(f"system: {exc}") from None
    raise ConfigError(f"system.kind: expected split|hopf|custom, got {kind!r}")


# ---------------------------------------------------------------------------
# points and forms


@dataclass(frozen=True)
class SurfacePoint:
    z: np.ndarray
    residual: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.z, dtype=dtype)


def as_array(z) -> np.ndarray:
    if isinstance(z, SurfacePoint):
        return z.z
    return np.asarray(z, dtype=float)


def radial_project(sys: StarShapedSystem, z) -> np.ndarray:
    """Rescale ``z`` onto ``H = 1``; exact thanks to homogeneity."""
    z = as_array(z)
    h = sys.hamiltonian(z)
    return z / np.sqrt(h)[..., None]


def surface_point(sys: StarShapedSystem, z, tol: float = SURFACE_TOL) -> SurfacePoint:
    """Radially project ``z`` onto the surface and record the residual."""
    z = as_array(z)
    if z.shape != (4,) or not np.all(np.isfinite(z)) or not np.any(z):
        raise GeometryError(f"expected a nonzero finite 4-vector, got {z!r}")
    p = radial_project(sys, z)
    res = float(abs(sys.hamiltonian(p) - 1.0))
    if res > tol:
        raise GeometryError(f"surface residual {res:.3e} exceeds {tol:.1e}")
    return SurfacePoint(p, res)


def omega(u, v) -> np.ndarray:
    """Standard symplectic form, batched."""
    return np.sum((as_array(u) @ J0.T) * as_array(v), axis=-1)


def contact_eval(z, v) -> np.ndarray:
    """Liouville form ``alpha0(z)(v) = 1/2 (x0 v_y0 - y0 v_x0 + x1 v_y1 - y1 v_x1)``."""
    return 0.5 * omega(z, v)


def reeb(sys: StarShapedSystem, z) -> np.ndarray:
    """``J0 grad H`` without postcondition checks (hot-path helper)."""
    return sys.gradient(z) @ J0.T


def reeb_jacobian(sys: StarShapedSystem, z) -> np.ndarray:
    """Derivative of the Reeb field, ``J0 Hess H``."""
    return J0 @ sys.hessian(z)


def reeb_field(sys: StarShapedSystem, z, tol: float = FRAME_TOL) -> np.ndarray:
    """Reeb vector field at a surface point, with the defining equations re-verified."""
    z = as_array(z)
    g = sys.gradient(z)
    if np.any(np.linalg.norm(g, axis=-1) < 1e-12):
        raise DegenerateGradient("|grad H| < 1e-12")
    x = g @ J0.T
    lam = contact_eval(z, x)
    e1, e2 = _frame_vectors(sys, z)
    if np.any(np.abs(lam - 1.0) > tol):
        raise ReebCheckFailed(f"lambda(X) = {np.max(np.abs(lam - 1.0)):.3e} away from 1")
    defect = np.maximum(np.abs(omega(x, e1)), np.abs(omega(x, e2)))
    if np.any(defect > tol):
        raise ReebCheckFailed(f"i_X dlambda does not vanish on xi (defect {np.max(defect):.3e})")
    return x


# ---------------------------------------------------------------------------
# global frame


@dataclass(frozen=True)
class ContactFrame:
    e1: np.ndarray
    e2: np.ndarray


def _frame_vectors(sys: StarShapedSystem, z):
    z = as_array(z)
    g = sys.gradient(z)
    gz = np.sum(g * z, axis=-1)[..., None]
    v1 = z @ QJ.T
    v2 = z @ QK.T
    # project along the radial direction (which lies in ker alpha0) into T Sigma
    v1 = v1 - (np.sum(g * v1, axis=-1)[..., None] / gz) * z
    v2 = v2 - (np.sum(g * v2, axis=-1)[..., None] / gz) * z
    s = omega(v1, v2)
    if np.any(s < 1e-8):
        raise FrameDegenerate(f"projected quaternionic pair has dlambda = {np.min(s):.3e}")
    scale = 1.0 / np.sqrt(s)[..., None]
    return v1 * scale, v2 * scale


def global_frame(sys: StarShapedSystem, z) -> ContactFrame:
    """dlambda-symplectic frame of xi from the quaternionic fields jz, kz."""
    e1, e2 = _frame_vectors(sys, z)
    return ContactFrame(e1, e2)


def frame_coordinates_matrix(e1, e2) -> np.ndarray:
    """The 2x4 map ``v -> (omega(v, e2), omega(e1, v))``.

    On tangent vectors it equals frame coordinates of the projection along the
    Reeb field; it also kills the radial direction.
    """
    e1 = as_array(e1)
    e2 = as_array(e2)
    row1 = -(e2 @ J0.T)
    row2 = e1 @ J0.T
    return np.stack([row1, row2], axis=-2)


def project_xi(sys: StarShapedSystem, z, v, frame: ContactFrame | None = None, tol: float = 1e-8):
    """Frame coordinates of ``v - lambda(v) X(z)``."""
    z = as_array(z)
    v = as_array(v)
    dh = np.sum(sys.gradient(z) * v, axis=-1)
    if np.any(np.abs(dh) > tol):
        raise NotTangent(f"dH(v) = {np.max(np.abs(dh)):.3e}")
    if frame is None:
        frame = global_frame(sys, z)
    return np.stack([omega(v, frame.e2), omega(frame.e1, v)], axis=-1)
