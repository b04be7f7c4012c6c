"""Catalog entries against finite differences and closed-form sup-norms."""

import math

import numpy as np
import pytest

from heatgrad import fields, geometry as geo
from oracles import fd_gradient, fd_hessian

EU = geo.euclidean(2)
SP = geo.sphere(dim=2, radius=1.0)
TO = geo.flat_torus((2 * math.pi, 2 * math.pi))
HY = geo.hyperbolic(dim=2, curvature=1.0)


ALL_FUNCTIONS = [
    (EU, name) for name in ("const1", "x1", "x1x2", "x1sq_minus_x2sq", "normsq")
] + [
    (SP, "cos_theta"),
    (SP, "zonal2"),
    (TO, "sin_x1"),
    (TO, "cos_x2"),
    (TO, "sin_x1_plus_x2"),
    (HY, "cosh_r"),
    (HY, "sech_r"),
]


@pytest.mark.parametrize("model,name", ALL_FUNCTIONS, ids=lambda p: getattr(p, "kind", p))
def test_builtin_functions_construct_with_self_check(model, name):
    """Construction runs the 200-point FD self-check; no exception means pass."""
    field = fields.builtin_function(model, name, self_check=True)
    assert field.name == name


def test_unknown_name_raises_catalog_error():
    with pytest.raises(fields.CatalogError):
        fields.builtin_function(EU, "does_not_exist")
    with pytest.raises(fields.CatalogError):
        fields.builtin_oneform(TO, "does_not_exist")
    with pytest.raises(fields.CatalogError):
        fields.builtin_oneform(EU, "sinx1_dx2")  # wrong model
    with pytest.raises(fields.CatalogError):
        fields.builtin_drift(EU, "does_not_exist")


def test_differential_against_fd_at_random_points():
    rng = np.random.default_rng(21)
    for model, name in ALL_FUNCTIONS:
        field = fields.builtin_function(model, name, self_check=False)
        pts = fields.default_sample_points(model, 20, seed=2)
        for x in pts[:5]:
            fd = fd_gradient(lambda p: float(field.value(p[None, :])[0]), x)
            assert np.max(np.abs(fd - field.differential(x[None, :])[0])) < 1e-6 * max(
                1.0, np.max(np.abs(fd))
            )


def test_hessian_against_fd_second_partials():
    for model, name in [(SP, "cos_theta"), (HY, "cosh_r"), (EU, "normsq")]:
        field = fields.builtin_function(model, name, self_check=False)
        x = fields.default_sample_points(model, 1, seed=3)[0]
        d2_fd = fd_hessian(lambda p: float(field.value(p[None, :])[0]), x)
        assert np.max(np.abs(d2_fd - field.second_partials(x[None, :])[0])) < 1e-5 * max(
            1.0, np.max(np.abs(d2_fd))
        )


def test_eigen_relation_pointwise():
    """Lap u = -lambda u to 1e-10 wherever an eigenvalue is declared."""
    for model, name in ALL_FUNCTIONS:
        field = fields.builtin_function(model, name, self_check=False)
        if field.eigenvalue is None:
            continue
        pts = fields.default_sample_points(model, 50, seed=4)
        resid = field.laplacian(pts) + field.eigenvalue * field.value(pts)
        assert np.max(np.abs(resid)) < 1e-10


def test_trivial_field_values():
    x1 = fields.builtin_function(EU, "x1", self_check=False)
    pts = np.array([[0.3, -0.7]])
    assert x1.value(pts)[0] == 0.3
    assert np.allclose(x1.differential(pts), [[1.0, 0.0]])
    assert np.allclose(x1.hessian(pts), 0.0)
    assert x1.laplacian(pts)[0] == 0.0

    ct = fields.builtin_function(SP, "cos_theta", self_check=False)
    assert abs(ct.value(np.zeros((1, 2)))[0] - 1.0) < 1e-15  # north pole
    assert abs(ct.value(np.array([[1.0, 0.0]]))[0]) < 1e-15  # equator
    assert abs(ct.laplacian(np.zeros((1, 2)))[0] + 2.0) < 1e-14

    sx = fields.builtin_function(TO, "sin_x1", self_check=False)
    assert abs(sx.value(np.array([[math.pi / 2, 0.0]]))[0] - 1.0) < 1e-15
    assert sx.eigenvalue == 1.0


def test_differential_norm_uses_metric():
    """|d cos_theta|_g = sin(theta) on the unit sphere."""
    ct = fields.builtin_function(SP, "cos_theta", self_check=False)
    for chart_r, theta in [(0.5, 2 * math.atan(0.5)), (1.0, math.pi / 2)]:
        x = np.array([[chart_r, 0.0]])
        assert abs(ct.differential_norm(x)[0] - math.sin(theta)) < 1e-12


def test_hessian_op_norm_euclidean_saddle():
    """Hess(x1^2 - x2^2) = diag(2, -2): operator norm 2 everywhere."""
    f = fields.builtin_function(EU, "x1sq_minus_x2sq", self_check=False)
    x = np.array([[0.4, 1.3]])
    assert abs(f.hessian_op_norm(x, directions=64)[0] - 2.0) < 1e-10


def test_two_Lu_with_drift():
    """2Lu = Lap u + 2 du(Z); for u = x1 and Z = -x: 2Lu = -2 x1."""
    f = fields.builtin_function(EU, "x1", self_check=False)
    Z = fields.builtin_drift(EU, "ou")
    pts = np.array([[0.7, -0.2], [0.0, 0.0]])
    out = f.two_Lu(pts, Z)
    assert np.allclose(out, [-1.4, 0.0])


def test_drift_catalog():
    Z = fields.builtin_drift(EU, "ou")
    x = np.array([[1.0, 2.0]])
    assert np.allclose(Z.value(x), [[-1.0, -2.0]])
    assert np.allclose(Z.covariant_deriv(x)[0], -np.eye(2))
    R = fields.builtin_drift(EU, "rotation")
    assert np.allclose(R.value(x), [[-2.0, 1.0]])


def test_oneform_catalog_flat_torus():
    a = fields.builtin_oneform(TO, "sinx1_dx2")
    x = np.array([[math.pi / 2, 0.3]])
    assert np.allclose(a.value(x), [[0.0, 1.0]])
    assert abs(a.exterior(x)[0] - math.cos(math.pi / 2)) < 1e-15
    assert a.codifferential(x)[0] == 0.0
    assert np.allclose(a.hodge_laplacian(x), -a.value(x))
    assert a.eigenvalue == 1.0

    h = fields.builtin_oneform(TO, "dx1")
    assert np.allclose(h.exterior(x), 0.0)
    assert np.allclose(h.codifferential(x), 0.0)
    assert np.allclose(h.hodge_laplacian(x), 0.0)

    c = fields.builtin_oneform(TO, "cosx2_dx1")
    assert abs(np.max(np.abs(c.value(fields.default_sample_points(TO, 400)))) - 1.0) < 1e-2


def test_sup_norm_grid_vs_closed_form():
    """Grid sup-norms agree with closed forms within the grid spacing error."""
    dom = geo.DomainSpec(center=(0.0, 0.0), inner_radius=0.25, outer_radius=1.0)

    # torus sin(x1) over a ball of radius 1 at 0: sup = sin(1)
    f = fields.builtin_function(TO, "sin_x1", self_check=False)
    val, spacing, lip = fields.scan_domain(TO, dom, f.value, outer=True)
    assert abs(val - math.sin(1.0)) < lip * spacing + 1e-9
    assert spacing <= 1.0 / 39.0

    # sphere cos(theta) over a ball at the north pole: sup = 1 at the center
    g = fields.builtin_function(SP, "cos_theta", self_check=False)
    val, spacing, lip = fields.scan_domain(SP, dom, g.value, outer=True)
    assert abs(val - 1.0) < 1e-12

    # |du| of cos_theta over D0 of radius 0.25: sup = sin(0.25)
    val, spacing, lip = fields.scan_domain(SP, dom, g.differential_norm, outer=False)
    assert abs(val - math.sin(0.25)) < lip * spacing + 1e-9


def test_catalog_listings():
    assert "cos_theta" in fields.function_names(SP)
    assert "sin_x1" in fields.function_names(TO)
    assert fields.oneform_names(TO) == ["cosx2_dx1", "dx1", "sinx1_dx2"]
    assert fields.oneform_names(EU) == []
    assert "ou" in fields.drift_names(EU)
