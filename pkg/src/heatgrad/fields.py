"""Catalog of test functions, drift fields and 1-forms with exact derivatives.

Each entry carries closed-form chart evaluators for the value, the
differential (chart partials), the second partials and the Laplace-Beltrami
value, so every Monte Carlo or grid check in the package has an analytic
reference.  Entries are validated against finite differences at construction
(``self_check=False`` opts out).

Catalog names are referenced by string from config files; unknown names
raise :class:`CatalogError` listing what exists.

Sup-norms over domains are grid scans (see :func:`scan_domain`): the grids
are geodesic polar grids with a configurable resolution, and callers get the
grid spacing back so they can budget a Lipschitz slack term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import DomainSpec, GeometryError, ManifoldModel, ball_grid, direction_samples

__all__ = [
    "CatalogError",
    "TestField",
    "DriftField",
    "OneFormField",
    "builtin_function",
    "builtin_drift",
    "builtin_oneform",
    "function_names",
    "oneform_names",
    "drift_names",
    "scan_domain",
]


class CatalogError(KeyError):
    """Requested (model, name) pair is not in the catalog."""


Array = np.ndarray
Evaluator = Callable[[Array], Array]


# ---------------------------------------------------------------------------
# Field types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestField:
    """Scalar test function with analytic value, differential and Laplacian.

    ``differential`` returns chart partial derivatives (covector components);
    ``second_partials`` the raw coordinate Hessian, from which the covariant
    Hessian is assembled with the model's Christoffel symbols.  If
    ``eigenvalue`` is set, the convention is ``Lap u = -eigenvalue * u``.
    """

    name: str
    model: ManifoldModel
    value: Evaluator
    differential: Evaluator
    second_partials: Evaluator
    laplacian: Evaluator
    eigenvalue: Optional[float] = None

    def hessian(self, x: Array) -> Array:
        """Covariant Hessian ``Hess_ij = d_i d_j u - Gamma^k_ij d_k u``."""
        d2 = self.second_partials(x)
        if self.model.is_flat:
            return d2
        gam = self.model.christoffel(x)
        du = self.differential(x)
        return d2 - np.einsum("...kij,...k->...ij", gam, du)

    def differential_norm(self, x: Array) -> Array:
        """Metric norm ``|du|_g``; for conformal charts ``|du|_euc / lam``."""
        du = self.differential(x)
        lam = self.model.conformal_factor(x)
        return np.linalg.norm(du, axis=-1) / lam

    def hessian_quadratic(self, x: Array, v: Array) -> Array:
        """``Hess u (v, v)`` for chart tangent vectors ``v``."""
        h = self.hessian(x)
        return np.einsum("...ij,...i,...j->...", h, v, v)

    def hessian_op_norm(self, x: Array, directions: int = 64) -> Array:
        """Operator-norm estimate: max of |Hess(v,v)| over sampled g-unit v."""
        dirs = direction_samples(self.model, np.atleast_2d(x), directions)
        h = self.hessian(np.atleast_2d(x))
        quad = np.einsum("bij,bmi,bmj->bm", h, dirs, dirs)
        out = np.max(np.abs(quad), axis=-1)
        return out if np.ndim(x) > 1 else out[0]

    def two_Lu(self, x: Array, Z: "DriftField | None" = None) -> Array:
        """``2 L u = Lap u + 2 du(Z)`` for the generator ``L = Lap/2 + Z``."""
        out = self.laplacian(x)
        if Z is not None:
            out = out + 2.0 * np.einsum("...i,...i->...", self.differential(x), Z.value(x))
        return out


@dataclass(frozen=True)
class DriftField:
    """Vector field ``Z`` with analytic covariant derivative.

    ``chart_deriv`` returns the coordinate Jacobian ``d_j Z^k`` indexed
    ``[..., k, j]``; the covariant derivative adds ``Gamma^k_ji Z^i``.
    """

    name: str
    model: ManifoldModel
    value: Evaluator
    chart_deriv: Evaluator

    def covariant_deriv(self, x: Array) -> Array:
        dz = self.chart_deriv(x)
        if self.model.is_flat:
            return dz
        gam = self.model.christoffel(x)
        z = self.value(x)
        return dz + np.einsum("...kji,...i->...kj", gam, z)


@dataclass(frozen=True)
class OneFormField:
    """1-form on a flat 2-torus with analytic exterior calculus.

    ``value`` returns covector components; ``exterior`` the single
    ``dx1 ^ dx2`` coefficient of ``d alpha``; ``codifferential`` the scalar
    ``delta alpha``; ``hodge_laplacian`` componentwise ``Delta alpha`` with
    the sign convention ``Delta = -(d delta + delta d)``.
    """

    name: str
    model: ManifoldModel
    value: Evaluator
    exterior: Evaluator
    codifferential: Evaluator
    hodge_laplacian: Evaluator
    eigenvalue: Optional[float] = None

    def norm(self, x: Array) -> Array:
        return np.linalg.norm(self.value(x), axis=-1)


# ---------------------------------------------------------------------------
# Scalar function catalog
# ---------------------------------------------------------------------------


def _euclidean_entries(model: ManifoldModel) -> dict:
    n = model.dim
    entries = {
        "const1": dict(
            value=lambda x: np.ones(np.shape(x)[:-1]),
            differential=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            second_partials=lambda x: np.zeros(np.shape(x)[:-1] + (n, n)),
            laplacian=lambda x: np.zeros(np.shape(x)[:-1]),
        ),
        "x1": dict(
            value=lambda x: np.asarray(x, dtype=float)[..., 0],
            differential=lambda x: _const_covector(x, 0),
            second_partials=lambda x: np.zeros(np.shape(x)[:-1] + (n, n)),
            laplacian=lambda x: np.zeros(np.shape(x)[:-1]),
        ),
        "normsq": dict(
            value=lambda x: np.sum(np.asarray(x, dtype=float) ** 2, axis=-1),
            differential=lambda x: 2.0 * np.asarray(x, dtype=float),
            second_partials=lambda x: 2.0 * _stacked_eye(x, n),
            laplacian=lambda x: np.full(np.shape(x)[:-1], 2.0 * n),
        ),
    }
    if n >= 2:
        entries["x1x2"] = dict(
            value=lambda x: np.asarray(x)[..., 0] * np.asarray(x)[..., 1],
            differential=_x1x2_diff,
            second_partials=lambda x: _x1x2_hess(x, n),
            laplacian=lambda x: np.zeros(np.shape(x)[:-1]),
        )
        entries["x1sq_minus_x2sq"] = dict(
            value=lambda x: np.asarray(x)[..., 0] ** 2 - np.asarray(x)[..., 1] ** 2,
            differential=_saddle_diff,
            second_partials=lambda x: _saddle_hess(x, n),
            laplacian=lambda x: np.zeros(np.shape(x)[:-1]),
        )
    return entries


def _const_covector(x, index):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[..., index] = 1.0
    return out


def _stacked_eye(x, n):
    return np.broadcast_to(np.eye(n), np.shape(x)[:-1] + (n, n)).copy()


def _x1x2_diff(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[..., 0] = x[..., 1]
    out[..., 1] = x[..., 0]
    return out


def _x1x2_hess(x, n):
    h = np.zeros(np.shape(x)[:-1] + (n, n))
    h[..., 0, 1] = 1.0
    h[..., 1, 0] = 1.0
    return h


def _saddle_diff(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[..., 0] = 2.0 * x[..., 0]
    out[..., 1] = -2.0 * x[..., 1]
    return out


def _saddle_hess(x, n):
    h = np.zeros(np.shape(x)[:-1] + (n, n))
    h[..., 0, 0] = 2.0
    h[..., 1, 1] = -2.0
    return h


def _cos_theta_parts(x):
    """w = cos(theta) = (1 - r^2)/(1 + r^2) in the stereographic chart,
    with its chart gradient and second partials."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    q = 1.0 + r2
    w = (1.0 - r2) / q
    dw = -4.0 * x / q[..., None] ** 2
    eye = np.eye(x.shape[-1])
    d2w = (
        -4.0 * eye / q[..., None, None] ** 2
        + 16.0 * x[..., :, None] * x[..., None, :] / q[..., None, None] ** 3
    )
    return w, dw, d2w


def _sphere_entries(model: ManifoldModel) -> dict:
    if model.dim != 2:
        return {}
    a2 = model.radius**2

    def cos_theta(x):
        return _cos_theta_parts(x)[0]

    def cos_theta_d(x):
        return _cos_theta_parts(x)[1]

    def cos_theta_d2(x):
        return _cos_theta_parts(x)[2]

    def zonal2(x):
        w = _cos_theta_parts(x)[0]
        return 0.5 * (3.0 * w**2 - 1.0)

    def zonal2_d(x):
        w, dw, _ = _cos_theta_parts(x)
        return 3.0 * w[..., None] * dw

    def zonal2_d2(x):
        w, dw, d2w = _cos_theta_parts(x)
        return 3.0 * (dw[..., :, None] * dw[..., None, :] + w[..., None, None] * d2w)

    # degree-1 harmonic along the e1 chart axis: u = 2 x1 / (1 + r^2),
    # i.e. sin(theta) cos(phi); its maximum sits on the equator at (1, 0)
    def equatorial(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return 2.0 * x[..., 0] / (1.0 + r2)

    def equatorial_d(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        s = 1.0 / (1.0 + r2)
        out = -4.0 * x[..., 0:1] * x * s[..., None] ** 2
        out[..., 0] += 2.0 * s
        return out

    def equatorial_d2(x):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        r2 = np.sum(x * x, axis=-1)
        s = 1.0 / (1.0 + r2)
        eye = np.eye(n)
        e1x = eye[0][..., :, None] * x[..., None, :]
        out = (
            -4.0 * (e1x + np.swapaxes(e1x, -1, -2) + x[..., 0:1, None] * eye)
            * s[..., None, None] ** 2
            + 16.0
            * x[..., 0:1, None]
            * x[..., :, None]
            * x[..., None, :]
            * s[..., None, None] ** 3
        )
        return out

    return {
        "sin_theta_cos_phi": dict(
            value=equatorial,
            differential=equatorial_d,
            second_partials=equatorial_d2,
            laplacian=lambda x: -(2.0 / a2) * equatorial(x),
            eigenvalue=2.0 / a2,
        ),
        "cos_theta": dict(
            value=cos_theta,
            differential=cos_theta_d,
            second_partials=cos_theta_d2,
            laplacian=lambda x: -(2.0 / a2) * cos_theta(x),
            eigenvalue=2.0 / a2,
        ),
        "zonal2": dict(
            value=zonal2,
            differential=zonal2_d,
            second_partials=zonal2_d2,
            laplacian=lambda x: -(6.0 / a2) * zonal2(x),
            eigenvalue=6.0 / a2,
        ),
    }


def _fourier_entry(k, phase):
    """u = sin(k . x + phase) on a flat torus; eigenvalue |k|^2."""
    k = np.asarray(k, dtype=float)

    def value(x):
        return np.sin(np.asarray(x, dtype=float) @ k + phase)

    def diff(x):
        c = np.cos(np.asarray(x, dtype=float) @ k + phase)
        return c[..., None] * k

    def d2(x):
        s = np.sin(np.asarray(x, dtype=float) @ k + phase)
        return -s[..., None, None] * (k[:, None] * k[None, :])

    lam = float(k @ k)
    return dict(
        value=value,
        differential=diff,
        second_partials=d2,
        laplacian=lambda x: -lam * value(x),
        eigenvalue=lam,
    )


def _torus_entries(model: ManifoldModel) -> dict:
    entries = {}
    modes = {
        "sin_x1": (np.eye(model.dim)[0], 0.0),
        "cos_x2": (np.eye(model.dim)[1], math.pi / 2) if model.dim >= 2 else None,
        "sin_x1_plus_x2": (np.eye(model.dim)[0] + np.eye(model.dim)[1], 0.0)
        if model.dim >= 2
        else None,
    }
    for name, mode in modes.items():
        if mode is None:
            continue
        k, phase = mode
        # the mode must be periodic on the given cell
        per = np.asarray(model.periods)
        if not np.allclose(np.mod(k * per, 2 * math.pi), 0.0, atol=1e-12):
            continue
        entries[name] = _fourier_entry(k, phase)
    return entries


def _hyperbolic_entries(model: ManifoldModel) -> dict:
    if model.dim != 2:
        return {}
    kap = model.curvature

    def cosh_r(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return (1.0 + r2) / (1.0 - r2)

    def cosh_r_d(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return 4.0 * x / (1.0 - r2) ** 2

    def cosh_r_d2(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        q = 1.0 - r2
        eye = np.eye(x.shape[-1])
        return (
            4.0 * eye / q[..., None, None] ** 2
            + 16.0 * x[..., :, None] * x[..., None, :] / q[..., None, None] ** 3
        )

    def sech_r(x):
        w, _, _ = _cos_theta_parts(x)  # same rational chart formula
        return w

    return {
        # u = cosh(sqrt(k) rho): Lap u = 2 k u
        "cosh_r": dict(
            value=cosh_r,
            differential=cosh_r_d,
            second_partials=cosh_r_d2,
            laplacian=lambda x: 2.0 * kap * cosh_r(x),
        ),
        # u = sech(sqrt(k) rho): Lap u = -2 k u^3
        "sech_r": dict(
            value=sech_r,
            differential=lambda x: _cos_theta_parts(x)[1],
            second_partials=lambda x: _cos_theta_parts(x)[2],
            laplacian=lambda x: -2.0 * kap * sech_r(x) ** 3,
        ),
    }


def _catalog_for(model: ManifoldModel) -> dict:
    if model.kind == "euclidean":
        return _euclidean_entries(model)
    if model.kind == "sphere":
        return _sphere_entries(model)
    if model.kind == "flat_torus":
        return _torus_entries(model)
    return _hyperbolic_entries(model)


def function_names(model: ManifoldModel) -> list[str]:
    return sorted(_catalog_for(model))


def builtin_function(model: ManifoldModel, name: str, self_check: bool = True) -> TestField:
    """Look up a scalar catalog entry for ``model``.

    Runs the finite-difference self-check at 200 random chart points unless
    ``self_check`` is disabled.
    """
    entries = _catalog_for(model)
    if name not in entries:
        raise CatalogError(
            f"no function {name!r} for model {model.kind!r}; "
            f"available: {sorted(entries)}"
        )
    spec = entries[name]
    field = TestField(
        name=name,
        model=model,
        value=spec["value"],
        differential=spec["differential"],
        second_partials=spec["second_partials"],
        laplacian=spec["laplacian"],
        eigenvalue=spec.get("eigenvalue"),
    )
    if self_check:
        _self_check_function(field)
    return field


def default_sample_points(model: ManifoldModel, count: int, seed: int = 0) -> Array:
    """Random chart points inside each model's comfortable validity region."""
    rng = np.random.default_rng(seed)
    n = model.dim
    if model.kind == "euclidean":
        return rng.uniform(-2.0, 2.0, size=(count, n))
    if model.kind == "flat_torus":
        return rng.uniform(0.0, min(model.periods), size=(count, n))
    if model.kind == "sphere":
        return rng.uniform(-1.5, 1.5, size=(count, n))
    return rng.uniform(-0.55, 0.55, size=(count, n))


def _self_check_function(field: TestField, count: int = 200, seed: int = 1234) -> None:
    model = field.model
    pts = default_sample_points(model, count, seed)
    h = 1e-5
    n = model.dim
    du = field.differential(pts)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (field.value(pts + e) - field.value(pts - e)) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(du[..., i]))))
        if np.max(np.abs(fd - du[..., i])) > 1e-6 * scale:
            raise CatalogError(
                f"catalog entry {field.name!r}: differential fails the "
                f"finite-difference check in axis {i}"
            )
    # Laplacian against the metric trace of an FD coordinate Hessian
    hh = 3e-4
    d2 = np.zeros(pts.shape[:-1] + (n, n))
    f0 = field.value(pts)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = hh
        d2[..., i, i] = (field.value(pts + ei) - 2 * f0 + field.value(pts - ei)) / hh**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = hh
            mixed = (
                field.value(pts + ei + ej)
                - field.value(pts + ei - ej)
                - field.value(pts - ei + ej)
                + field.value(pts - ei - ej)
            ) / (4 * hh**2)
            d2[..., i, j] = mixed
            d2[..., j, i] = mixed
    gam = model.christoffel(pts)
    ginv = model.metric_inverse(pts)
    cov = d2 - np.einsum("...kij,...k->...ij", gam, field.differential(pts))
    lap_fd = np.einsum("...ij,...ij->...", ginv, cov)
    lap = field.laplacian(pts)
    scale = max(1.0, float(np.max(np.abs(lap))))
    if np.max(np.abs(lap_fd - lap)) > 1e-4 * scale:
        raise CatalogError(
            f"catalog entry {field.name!r}: Laplacian fails the "
            f"finite-difference trace check"
        )
    if field.eigenvalue is not None:
        resid = np.max(np.abs(lap + field.eigenvalue * f0))
        if resid > 1e-10 * scale:
            raise CatalogError(
                f"catalog entry {field.name!r}: eigen relation violated "
                f"(residual {resid:.2e})"
            )


# ---------------------------------------------------------------------------
# Drift catalog
# ---------------------------------------------------------------------------


def _drift_catalog(model: ManifoldModel) -> dict:
    if model.kind != "euclidean":
        return {"zero": _zero_drift_spec(model)}
    n = model.dim

    def ou_value(x):
        return -np.asarray(x, dtype=float)

    def ou_deriv(x):
        return -_stacked_eye(x, n)

    entries = {"zero": _zero_drift_spec(model), "ou": dict(value=ou_value, chart_deriv=ou_deriv)}
    if n == 2:

        def rot_value(x):
            x = np.asarray(x, dtype=float)
            return np.stack([-x[..., 1], x[..., 0]], axis=-1)

        def rot_deriv(x):
            out = np.zeros(np.shape(x)[:-1] + (2, 2))
            out[..., 0, 1] = -1.0
            out[..., 1, 0] = 1.0
            return out

        entries["rotation"] = dict(value=rot_value, chart_deriv=rot_deriv)
    return entries


def _zero_drift_spec(model: ManifoldModel) -> dict:
    n = model.dim
    return dict(
        value=lambda x: np.zeros(np.shape(x)[:-1] + (n,)),
        chart_deriv=lambda x: np.zeros(np.shape(x)[:-1] + (n, n)),
    )


def drift_names(model: ManifoldModel) -> list[str]:
    return sorted(_drift_catalog(model))


def builtin_drift(model: ManifoldModel, name: str, self_check: bool = True) -> DriftField:
    entries = _drift_catalog(model)
    if name not in entries:
        raise CatalogError(
            f"no drift {name!r} for model {model.kind!r}; available: {sorted(entries)}"
        )
    spec = entries[name]
    drift = DriftField(
        name=name, model=model, value=spec["value"], chart_deriv=spec["chart_deriv"]
    )
    if self_check:
        _self_check_drift(drift)
    return drift


def _self_check_drift(drift: DriftField, count: int = 50, seed: int = 99) -> None:
    pts = default_sample_points(drift.model, count, seed)
    n = drift.model.dim
    dz = drift.chart_deriv(pts)
    h = 1e-5
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fd = (drift.value(pts + e) - drift.value(pts - e)) / (2 * h)
        if np.max(np.abs(fd - dz[..., :, j])) > 1e-5 * max(1.0, float(np.max(np.abs(dz)))):
            raise CatalogError(f"drift {drift.name!r}: Jacobian fails finite differences")


# ---------------------------------------------------------------------------
# 1-form catalog (flat 2-torus)
# ---------------------------------------------------------------------------


def _oneform_catalog() -> dict:
    def mk(components, exterior, codiff, lap, lam):
        return dict(
            value=components, exterior=exterior, codifferential=codiff,
            hodge_laplacian=lap, eigenvalue=lam,
        )

    def sinx1_dx2(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 1] = np.sin(x[..., 0])
        return out

    def cosx2_dx1(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = np.cos(x[..., 1])
        return out

    def dx1(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., 0] = 1.0
        return out

    zero_scalar = lambda x: np.zeros(np.shape(x)[:-1])
    return {
        "sinx1_dx2": mk(
            sinx1_dx2,
            lambda x: np.cos(np.asarray(x)[..., 0]),
            zero_scalar,
            lambda x: -sinx1_dx2(x),
            1.0,
        ),
        "cosx2_dx1": mk(
            cosx2_dx1,
            lambda x: np.sin(np.asarray(x)[..., 1]),
            zero_scalar,
            lambda x: -cosx2_dx1(x),
            1.0,
        ),
        "dx1": mk(dx1, zero_scalar, zero_scalar, lambda x: np.zeros(np.shape(x)), None),
    }


def oneform_names(model: ManifoldModel) -> list[str]:
    if model.kind != "flat_torus" or model.dim != 2:
        return []
    return sorted(_oneform_catalog())


def builtin_oneform(model: ManifoldModel, name: str, self_check: bool = True) -> OneFormField:
    if model.kind != "flat_torus" or model.dim != 2:
        raise CatalogError("1-form catalog requires a 2-dimensional flat torus")
    entries = _oneform_catalog()
    if name not in entries:
        raise CatalogError(f"no 1-form {name!r}; available: {sorted(entries)}")
    spec = entries[name]
    form = OneFormField(
        name=name,
        model=model,
        value=spec["value"],
        exterior=spec["exterior"],
        codifferential=spec["codifferential"],
        hodge_laplacian=spec["hodge_laplacian"],
        eigenvalue=spec["eigenvalue"],
    )
    if self_check:
        _self_check_oneform(form)
    return form


def _self_check_oneform(form: OneFormField, count: int = 200, seed: int = 5) -> None:
    pts = default_sample_points(form.model, count, seed)
    h = 1e-5

    def partial(fn, j, component=None):
        e = np.zeros(form.model.dim)
        e[j] = h
        hi, lo = fn(pts + e), fn(pts - e)
        if component is not None:
            hi, lo = hi[..., component], lo[..., component]
        return (hi - lo) / (2 * h)

    d_fd = partial(form.value, 0, 1) - partial(form.value, 1, 0)
    if np.max(np.abs(d_fd - form.exterior(pts))) > 1e-6:
        raise CatalogError(f"1-form {form.name!r}: exterior derivative fails FD check")
    delta_fd = -(partial(form.value, 0, 0) + partial(form.value, 1, 1))
    if np.max(np.abs(delta_fd - form.codifferential(pts))) > 1e-6:
        raise CatalogError(f"1-form {form.name!r}: codifferential fails FD check")
    if form.eigenvalue is not None:
        resid = form.hodge_laplacian(pts) + form.eigenvalue * form.value(pts)
        if np.max(np.abs(resid)) > 1e-10:
            raise CatalogError(f"1-form {form.name!r}: eigen relation violated")


# ---------------------------------------------------------------------------
# Domain scans
# ---------------------------------------------------------------------------


def scan_domain(
    model: ManifoldModel,
    dom: DomainSpec,
    fn: Evaluator,
    outer: bool = True,
    points_per_unit: float = 40.0,
):
    """Max of ``|fn|`` over a geodesic grid on D (``outer``) or D0.

    Returns ``(max_value, spacing, lipschitz_estimate)`` where the Lipschitz
    number is the largest |difference| / spacing between consecutive grid
    values, a cheap surrogate used for slack accounting.
    """
    radius = dom.outer_radius if outer else dom.inner_radius
    if radius == 0.0:
        val = float(np.max(np.abs(fn(dom.center_array[None, :]))))
        return val, 0.0, 0.0
    pts, spacing = ball_grid(model, dom.center_array, radius, points_per_unit)
    vals = np.abs(np.asarray(fn(pts), dtype=float))
    vmax = float(np.max(vals))
    # Lipschitz surrogate: value change per unit distance between
    # consecutive grid points (mostly angular neighbours on one ring)
    from .geometry import distance as _dist

    seps = _dist(model, pts[:-1], pts[1:])
    mask = seps > 1e-12
    lip = float(np.max(np.abs(np.diff(vals))[mask] / seps[mask])) if np.any(mask) else 0.0
    return vmax, spacing, lip
