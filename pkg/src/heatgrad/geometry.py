"""Built-in manifold models, geodesic-ball domains and curvature bounds.

Every built-in model is presented in a single conformally flat chart
``g_ij(x) = lam(x)^2 delta_ij`` (plus a modular wrap for the torus):

* ``euclidean(n)``   -- the identity chart on R^n, ``lam = 1``.
* ``sphere(a)``      -- stereographic chart of the radius-``a`` sphere,
  projected from the south pole, so the chart origin is the north pole;
  ``lam(x) = 2a / (1 + |x|^2)``.  The chart covers everything except the
  south pole itself.
* ``flat_torus(P)``  -- covering chart of R^n / (P_1 Z x ... x P_n Z),
  ``lam = 1``; positions are wrapped into [0, P_a) per axis.
* ``hyperbolic(k)``  -- Poincare disk of curvature ``-k``,
  ``lam(x) = (2 / sqrt(k)) / (1 - |x|^2)`` on ``|x| < 1``.

Conformal charts make the Levi-Civita data closed-form: with
``f = log lam``,

    Gamma^k_ij = d_j f delta_ik + d_i f delta_jk - d_k f delta_ij,

and since all four models have constant sectional curvature ``kappa``,

    R^l_ijk = kappa (delta_lj g_ik - delta_lk g_ij),   Ric = (n-1) kappa g.

All evaluators are vectorized over a leading batch axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "ManifoldModel",
    "DomainSpec",
    "CurvatureBounds",
    "euclidean",
    "sphere",
    "flat_torus",
    "hyperbolic",
    "christoffel",
    "ricci_quadratic",
    "exp_map",
    "distance",
    "domain_bounds",
    "validate_domain",
    "gram_schmidt",
]


class GeometryError(ValueError):
    """A point or domain violates the chart the model is defined on."""


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifoldModel:
    """Chart-based geometry provider for one of the built-in model spaces.

    Attributes
    ----------
    kind:
        One of ``"euclidean"``, ``"sphere"``, ``"flat_torus"``,
        ``"hyperbolic"``.
    dim:
        Chart dimension ``n >= 1``.
    radius:
        Sphere radius ``a`` (ignored otherwise).
    curvature:
        Curvature magnitude ``k > 0`` of the hyperbolic model (ignored
        otherwise).
    periods:
        Torus periods per axis (ignored otherwise).
    """

    kind: str
    dim: int
    radius: float = 1.0
    curvature: float = 1.0
    periods: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.dim < 1:
            raise GeometryError(f"dimension must be >= 1, got {self.dim}")
        if self.kind not in ("euclidean", "sphere", "flat_torus", "hyperbolic"):
            raise GeometryError(f"unknown manifold kind {self.kind!r}")
        if self.kind == "sphere" and self.radius <= 0:
            raise GeometryError("sphere radius must be positive")
        if self.kind == "hyperbolic" and self.curvature <= 0:
            raise GeometryError("hyperbolic curvature magnitude must be positive")
        if self.kind == "flat_torus":
            if len(self.periods) != self.dim or any(p <= 0 for p in self.periods):
                raise GeometryError("flat torus needs one positive period per axis")

    # -- basic chart data ---------------------------------------------------

    @property
    def sectional_curvature(self) -> float:
        if self.kind == "sphere":
            return 1.0 / self.radius**2
        if self.kind == "hyperbolic":
            return -self.curvature
        return 0.0

    @property
    def length_scale(self) -> float:
        """Characteristic length used to size geodesic integrator steps."""
        if self.kind == "sphere":
            return self.radius
        if self.kind == "hyperbolic":
            return 1.0 / math.sqrt(self.curvature)
        if self.kind == "flat_torus":
            return min(self.periods)
        return 1.0

    @property
    def is_flat(self) -> bool:
        return self.kind in ("euclidean", "flat_torus")

    @property
    def is_compact(self) -> bool:
        return self.kind in ("sphere", "flat_torus")

    def check_points(self, x: np.ndarray) -> None:
        """Raise :class:`GeometryError` if any chart point is invalid."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise GeometryError(
                f"points have dimension {x.shape[-1]}, model has {self.dim}"
            )
        if not np.all(np.isfinite(x)):
            raise GeometryError("non-finite chart point")
        if self.kind == "hyperbolic":
            if np.any(np.sum(x * x, axis=-1) >= 1.0):
                raise GeometryError("hyperbolic chart point outside the unit disk")

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce torus points to the fundamental cell; identity elsewhere."""
        if self.kind != "flat_torus":
            return x
        return np.mod(x, np.asarray(self.periods))

    def conformal_factor(self, x: np.ndarray) -> np.ndarray:
        """``lam(x)`` with ``g = lam^2 * delta``."""
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        if self.kind == "sphere":
            return 2.0 * self.radius / (1.0 + r2)
        if self.kind == "hyperbolic":
            return (2.0 / math.sqrt(self.curvature)) / (1.0 - r2)
        return np.ones_like(r2)

    def log_factor_grad(self, x: np.ndarray) -> np.ndarray:
        """Euclidean gradient of ``f = log lam``; zero for the flat models."""
        x = np.asarray(x, dtype=float)
        if self.kind == "sphere":
            r2 = np.sum(x * x, axis=-1, keepdims=True)
            return -2.0 * x / (1.0 + r2)
        if self.kind == "hyperbolic":
            r2 = np.sum(x * x, axis=-1, keepdims=True)
            return 2.0 * x / (1.0 - r2)
        return np.zeros_like(x)

    def metric(self, x: np.ndarray) -> np.ndarray:
        """Metric matrix ``g_ij(x)``, shape ``(..., n, n)``."""
        self.check_points(x)
        lam2 = self.conformal_factor(x) ** 2
        eye = np.eye(self.dim)
        return lam2[..., None, None] * eye

    def metric_inverse(self, x: np.ndarray) -> np.ndarray:
        self.check_points(x)
        lam2 = self.conformal_factor(x) ** 2
        eye = np.eye(self.dim)
        return eye / lam2[..., None, None]

    def christoffel(self, x: np.ndarray) -> np.ndarray:
        """Levi-Civita symbols ``Gamma^k_ij``, indexed ``[..., k, i, j]``."""
        self.check_points(x)
        x = np.asarray(x, dtype=float)
        n = self.dim
        df = self.log_factor_grad(x)  # (..., n)
        eye = np.eye(n)
        # delta_ik d_j f + delta_jk d_i f - delta_ij d_k f
        gam = (
            eye[..., :, :, None] * df[..., None, None, :]
            + eye[..., :, None, :] * df[..., None, :, None]
            - df[..., :, None, None] * eye[..., None, :, :]
        )
        return gam

    def riemann(self, x: np.ndarray) -> np.ndarray:
        """Curvature tensor ``R^l_ijk``, indexed ``[..., l, i, j, k]``.

        Convention: ``R^l_ijk = d_j Gamma^l_ik - d_k Gamma^l_ij + ...`` so
        that ``Ric_ik = R^l_ilk``.
        """
        self.check_points(x)
        kap = self.sectional_curvature
        g = self.metric(x)
        eye = np.eye(self.dim)
        # kappa * (delta^l_j g_ik - delta^l_k g_ij)
        term1 = eye[..., :, None, :, None] * g[..., None, :, None, :]
        term2 = eye[..., :, None, None, :] * g[..., None, :, :, None]
        return kap * (term1 - term2)

    def ricci(self, x: np.ndarray) -> np.ndarray:
        """Ricci tensor ``Ric_ij = (n - 1) kappa g_ij``."""
        return (self.dim - 1) * self.sectional_curvature * self.metric(x)

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return distance(self, x, y)

    def chart_validity_radius(self, center: np.ndarray) -> float:
        """Largest geodesic-ball radius around ``center`` the chart supports.

        Sphere: the chart misses the south pole, so balls must stay inside
        ``pi a - rho(center, north pole)``.  Torus: metric balls are honest
        balls only up to half the smallest period.  Flat and hyperbolic
        charts are global.
        """
        center = np.asarray(center, dtype=float)
        self.check_points(center)
        if self.kind == "sphere":
            rho_to_origin = float(self.distance(center, np.zeros(self.dim)))
            return math.pi * self.radius - rho_to_origin
        if self.kind == "flat_torus":
            return min(self.periods) / 2.0
        return math.inf

    def chart_radius_of_geodesic(self, rho) -> np.ndarray:
        """Chart radius |x| of the point at geodesic distance ``rho`` from
        the chart origin (closed form, constant curvature)."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == "sphere":
            return np.tan(rho / (2.0 * self.radius))
        if self.kind == "hyperbolic":
            return np.tanh(math.sqrt(self.curvature) * rho / 2.0)
        return rho


def euclidean(dim: int) -> ManifoldModel:
    return ManifoldModel(kind="euclidean", dim=dim)


def sphere(dim: int = 2, radius: float = 1.0) -> ManifoldModel:
    return ManifoldModel(kind="sphere", dim=dim, radius=radius)


def flat_torus(periods) -> ManifoldModel:
    periods = tuple(float(p) for p in periods)
    return ManifoldModel(kind="flat_torus", dim=len(periods), periods=periods)


def hyperbolic(dim: int = 2, curvature: float = 1.0) -> ManifoldModel:
    return ManifoldModel(kind="hyperbolic", dim=dim, curvature=curvature)


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSpec:
    """Concentric geodesic balls ``D0 = B(x0, R0) inside D = B(x0, R)``.

    ``r0 = R - R0`` is the separation between D0 and the boundary of D.
    ``inner_radius`` may be zero, meaning D0 degenerates to the center
    point.
    """

    center: tuple[float, ...]
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if self.inner_radius < 0:
            raise GeometryError("inner radius must be >= 0")
        if not self.outer_radius > self.inner_radius:
            raise GeometryError("outer radius must exceed inner radius")

    @property
    def r0(self) -> float:
        return self.outer_radius - self.inner_radius

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def as_dict(self) -> dict:
        return {
            "center": list(self.center),
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
        }


def validate_domain(model: ManifoldModel, dom: DomainSpec) -> None:
    """Check a domain against the model's chart validity region."""
    center = dom.center_array
    if center.shape != (model.dim,):
        raise GeometryError(
            f"domain center has dimension {center.shape}, model has {model.dim}"
        )
    model.check_points(center)
    validity = model.chart_validity_radius(center)
    if not dom.outer_radius < validity:
        raise GeometryError(
            f"outer radius {dom.outer_radius} exceeds chart validity "
            f"radius {validity:.6g} at the given center"
        )


@dataclass(frozen=True)
class CurvatureBounds:
    """Negative parts of the curvature infima over a domain, plus sup|Z|.

    ``K0_minus  = max(0, -inf Ric(v,v))`` over g-unit v in TD,
    ``KZ_minus  = max(0, -inf (Ric - 2 grad Z)(v,v))``,
    ``supZ      = sup_D |Z|_g``.
    """

    K0_minus: float
    KZ_minus: float
    supZ: float

    def __post_init__(self):
        if self.K0_minus < 0 or self.KZ_minus < 0 or self.supZ < 0:
            raise GeometryError("curvature bound fields must be non-negative")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def christoffel(model: ManifoldModel, x: np.ndarray) -> np.ndarray:
    """Christoffel symbols ``Gamma^k_ij`` at chart point(s) ``x``."""
    return model.christoffel(x)


def ricci_quadratic(model: ManifoldModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``Ric(v, v)`` at ``x`` for a chart tangent vector ``v``."""
    model.check_points(x)
    ric = model.ricci(x)
    v = np.asarray(v, dtype=float)
    return np.einsum("...ij,...i,...j->...", ric, v, v)


def distance(model: ManifoldModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Riemannian distance ``rho(x, y)``; closed form per model."""
    model.check_points(x)
    model.check_points(y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if model.kind == "euclidean":
        return np.linalg.norm(x - y, axis=-1)
    if model.kind == "flat_torus":
        per = np.asarray(model.periods)
        d = np.abs(x - y) % per
        d = np.minimum(d, per - d)
        return np.linalg.norm(d, axis=-1)
    if model.kind == "sphere":
        # chord formula 2 arcsin(|ex - ey|/2): stable where arccos is not
        ex = _sphere_embed(x)
        ey = _sphere_embed(y)
        chord = np.linalg.norm(ex - ey, axis=-1)
        return 2.0 * model.radius * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
    # hyperbolic Poincare disk
    x2 = np.sum(x * x, axis=-1)
    y2 = np.sum(y * y, axis=-1)
    d2 = np.sum((x - y) ** 2, axis=-1)
    arg = 1.0 + 2.0 * d2 / ((1.0 - x2) * (1.0 - y2))
    return np.arccosh(np.maximum(arg, 1.0)) / math.sqrt(model.curvature)


def _sphere_embed(x: np.ndarray) -> np.ndarray:
    """Unit-sphere embedding of the stereographic chart (origin -> north)."""
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    return np.concatenate([2.0 * x, 1.0 - r2], axis=-1) / (1.0 + r2)


def gram_schmidt(frame: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Orthonormalize frame columns w.r.t. the conformal metric ``lam^2 dot``.

    ``frame[..., i, a]`` is component ``i`` of frame vector ``a``.  For a
    conformal metric, g-orthonormal is Euclidean-orthonormal divided by
    ``lam``, so this is a plain modified Gram-Schmidt followed by a scale.
    """
    f = np.array(frame, dtype=float, copy=True)
    n = f.shape[-1]
    for a in range(n):
        for b in range(a):
            proj = np.sum(f[..., :, a] * f[..., :, b], axis=-1, keepdims=True)
            f[..., :, a] -= proj * f[..., :, b]
        norm = np.sqrt(np.sum(f[..., :, a] ** 2, axis=-1, keepdims=True))
        f[..., :, a] /= norm
    return f / np.asarray(lam)[..., None, None]


def _geodesic_rhs(model: ManifoldModel, x, v, frame):
    """Right-hand side of the joint geodesic + frame-transport ODE."""
    df = model.log_factor_grad(x)
    if model.is_flat:
        acc = np.zeros_like(v)
        dframe = np.zeros_like(frame) if frame is not None else None
        return v, acc, dframe
    vdotf = np.sum(v * df, axis=-1, keepdims=True)
    v2 = np.sum(v * v, axis=-1, keepdims=True)
    acc = -(2.0 * vdotf * v - v2 * df)
    dframe = None
    if frame is not None:
        # dE^k/ds = -Gamma^k_ij v^i E^j for each frame column:
        #   -[ v^k (df . E) + E^k (df . v) - (v . E) df^k ]
        edotf = np.einsum("...ia,...i->...a", frame, df)
        edotv = np.einsum("...ia,...i->...a", frame, v)
        dframe = -(
            v[..., :, None] * edotf[..., None, :]
            + vdotf[..., None] * frame
            - edotv[..., None, :] * df[..., :, None]
        )
    return v, acc, dframe


def _rk4_geodesic(model: ManifoldModel, x, v, frame, n_steps: int):
    """Fixed-step RK4 on the geodesic ODE over unit parameter time."""
    h = 1.0 / n_steps
    for _ in range(n_steps):
        k1 = _geodesic_rhs(model, x, v, frame)
        x2 = x + 0.5 * h * k1[0]
        v2 = v + 0.5 * h * k1[1]
        f2 = frame + 0.5 * h * k1[2] if frame is not None else None
        k2 = _geodesic_rhs(model, x2, v2, f2)
        x3 = x + 0.5 * h * k2[0]
        v3 = v + 0.5 * h * k2[1]
        f3 = frame + 0.5 * h * k2[2] if frame is not None else None
        k3 = _geodesic_rhs(model, x3, v3, f3)
        x4 = x + h * k3[0]
        v4 = v + h * k3[1]
        f4 = frame + h * k3[2] if frame is not None else None
        k4 = _geodesic_rhs(model, x4, v4, f4)
        x = x + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if frame is not None:
            frame = frame + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            frame = gram_schmidt(frame, model.conformal_factor(x))
    return x, v, frame


def exp_map(
    model: ManifoldModel,
    x: np.ndarray,
    v: np.ndarray,
    frame: np.ndarray | None = None,
    step_scale: float = 1e-3,
):
    """Geodesic exponential ``exp_x(v)``, optionally transporting a frame.

    Integrates the geodesic ODE with a fixed-step RK4 scheme whose arc-length
    step is at most ``step_scale * model.length_scale``; the transported frame
    is re-orthonormalized (Gram-Schmidt in the metric) after every step.

    Returns ``(endpoint, transported_frame)``; the frame slot is None when no
    frame was supplied.  Flat models short-circuit to ``x + v``.
    """
    model.check_points(x)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if model.is_flat:
        end = model.wrap(x + v)
        return end, (None if frame is None else np.array(frame, copy=True))

    lam = model.conformal_factor(x)
    speed = float(np.max(np.sqrt(np.sum(v * v, axis=-1)) * lam))
    if speed == 0.0:
        return x.copy(), (None if frame is None else np.array(frame, copy=True))
    n_steps = max(1, math.ceil(speed / (step_scale * model.length_scale)))
    fr = None if frame is None else np.array(frame, dtype=float, copy=True)
    end, _, fr = _rk4_geodesic(model, x, v, fr, n_steps)
    model.check_points(end)
    return end, fr


def ball_grid(
    model: ManifoldModel,
    center: np.ndarray,
    radius: float,
    points_per_unit: float = 40.0,
    min_radial: int = 10,
) -> tuple[np.ndarray, float]:
    """Geodesic polar grid covering the ball ``B(center, radius)``.

    Returns ``(points, spacing)`` where ``spacing`` is the geodesic grid
    pitch (used for Lipschitz slack).  Requires the center to be the chart
    origin for the curved models, where radial chart coordinates of geodesic
    spheres have closed form; the torus/Euclidean grid translates freely.
    """
    center = np.asarray(center, dtype=float)
    model.check_points(center)
    if radius >= model.chart_validity_radius(center):
        raise GeometryError("grid radius exceeds chart validity")
    if not model.is_flat and np.any(center != 0.0):
        raise GeometryError("curved-model grids require the chart origin as center")

    n_r = max(int(math.ceil(points_per_unit * radius)), min_radial)
    radii = np.linspace(0.0, radius, n_r + 1)[1:]
    if model.dim == 1:
        offsets = np.concatenate([-radii[::-1], [0.0], radii])[:, None]
        pts = model.wrap(center + offsets)
        return pts, radius / n_r
    n_ang = max(int(math.ceil(points_per_unit * 2 * math.pi * radius)), 16)
    if model.dim == 2:
        ang = np.linspace(0.0, 2 * math.pi, n_ang, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    else:
        rng = np.random.default_rng(0)
        dirs = rng.standard_normal((n_ang * model.dim, model.dim))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    chart_r = model.chart_radius_of_geodesic(radii)
    pts = chart_r[:, None, None] * dirs[None, :, :]
    pts = pts.reshape(-1, model.dim)
    pts = np.concatenate([np.zeros((1, model.dim)), pts], axis=0)
    if model.is_flat:
        pts = model.wrap(pts + center)
    spacing = max(radius / n_r, 2 * math.pi * radius / n_ang)
    return pts, spacing


def direction_samples(model: ManifoldModel, x: np.ndarray, count: int = 64) -> np.ndarray:
    """g-unit tangent directions at each of the points ``x``, shape
    ``(len(x), count, n)``."""
    x = np.asarray(x, dtype=float)
    n = model.dim
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        ang = np.linspace(0.0, 2 * math.pi, count, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    else:
        rng = np.random.default_rng(1)
        dirs = rng.standard_normal((count, n))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    lam = model.conformal_factor(x)
    return dirs[None, :, :] / lam[:, None, None]


def domain_bounds(
    model: ManifoldModel,
    dom: DomainSpec,
    Z=None,
    points_per_unit: float = 12.0,
    directions: int = 16,
) -> CurvatureBounds:
    """Curvature deficiency bounds over ``D``: ``K0^-``, ``K_Z^-``, ``sup|Z|``.

    For the built-in constant-curvature models the Ricci part is closed form.
    With a drift, ``inf (Ric - 2 grad Z)(v, v)`` is taken over a sampled grid
    of (point, direction) pairs; the sampling is a numeric surrogate for the
    exact infimum and only conservative in the resolution limit.
    """
    validate_domain(model, dom)
    n = model.dim
    ric_unit = (n - 1) * model.sectional_curvature  # Ric(v,v) for unit v
    k0_minus = max(0.0, -ric_unit)
    if Z is None:
        return CurvatureBounds(K0_minus=k0_minus, KZ_minus=k0_minus, supZ=0.0)

    pts, _ = ball_grid(model, dom.center_array, dom.outer_radius, points_per_unit)
    g = model.metric(pts)
    zval = Z.value(pts)
    supz = float(np.sqrt(np.max(np.einsum("bi,bij,bj->b", zval, g, zval))))

    dirs = direction_samples(model, pts, directions)  # (B, m, n)
    dz = Z.covariant_deriv(pts)  # (B, n, n) endomorphism [k, j]
    # (grad_v Z)^k = dz[k, j] v^j ; quadratic form g(grad_v Z, v)
    w = np.einsum("bkj,bmj->bmk", dz, dirs)
    quad_dz = np.einsum("bmk,bkl,bml->bm", w, g, dirs)
    ricz = ric_unit - 2.0 * quad_dz  # dirs are g-unit
    kz_minus = max(0.0, -float(np.min(ricz)))
    return CurvatureBounds(K0_minus=k0_minus, KZ_minus=kz_minus, supZ=supz)
