import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shrinkerlab import catalog
from shrinkerlab.charts import rescaled_chart
from shrinkerlab.errors import GridMismatch, NonpositiveScale, NotCritical
from shrinkerlab.functional import (VariationData, apply_L_perp, evaluate_F,
                                    fd_variation, first_variation,
                                    lperp_pairing_weak,
                                    second_variation_at_critical,
                                    second_variation_general, weighted_inner)
from shrinkerlab.geometry import (NormalField, compute_geometry,
                                  constant_vector_projection_field,
                                  mean_curvature_field,
                                  normal_covariant_derivative,
                                  random_normal_field, shrinker_residual)


def test_golden_values(sphere1, sphere2, plane2):
    # closed forms: (4 pi)^{-1/2} * 2 pi sqrt(2) * e^{-1/2} = sqrt(2 pi / e),
    # (4 pi)^{-1} * 16 pi * e^{-1} = 4/e, and the plane normalizes to 1
    assert abs(evaluate_F(sphere1).value - math.sqrt(2 * math.pi / math.e)) < 1e-8
    assert abs(evaluate_F(sphere2).value - 4 / math.e) < 1e-8
    fe = evaluate_F(plane2)
    assert abs(fe.value - 1.0) <= 1e-10 + fe.truncation_bound


def test_scale_and_translation_invariance(sphere2, cylinder):
    rng = np.random.default_rng(5)
    for shr in (sphere2, cylinder):
        for _ in range(4):
            x = 0.5 * rng.standard_normal(shr.m)
            t = rng.uniform(0.5, 2.0)
            direct = evaluate_F(shr, x=x, t=t, estimate_order=False).value
            moved = rescaled_chart(shr.chart, x, t)
            geom = compute_geometry(moved, shr.grid)
            ref = evaluate_F(geom, estimate_order=False).value
            assert abs(direct - ref) < 1e-10


def test_nonpositive_scale_raises(sphere1):
    with pytest.raises(NonpositiveScale):
        evaluate_F(sphere1, t=0.0)
    with pytest.raises(NonpositiveScale):
        first_variation(sphere1, VariationData(V=None), t0=-1.0)


def test_grid_order_estimate_is_small(sphere2):
    fe = evaluate_F(sphere2)
    assert fe.grid_order_estimate < 1e-10


def test_weighted_inner_oracles(sphere1):
    geom = sphere1.geom
    H = mean_curvature_field(geom)
    # |H|^2 = 1/2 on S^1(sqrt 2), weighted length = 2 pi sqrt(2) e^{-1/2}
    expected = 0.5 * 2 * math.pi * math.sqrt(2.0) * math.exp(-0.5)
    assert abs(weighted_inner(geom, H, H) - expected) < 1e-10
    zero = NormalField(values=np.zeros_like(H.values))
    assert weighted_inner(geom, H, zero) == 0.0


@pytest.mark.parametrize("fixture", ["sphere1", "sphere2", "torus",
                                     "anciaux_circle", "anciaux_shot"])
def test_mean_curvature_translation_orthogonality(fixture, request):
    # <H, y^perp>_e = 0 on closed shrinkers for every constant y
    shr = request.getfixturevalue(fixture)
    rng = np.random.default_rng(9)
    H = shr.geom.mean_curvature
    for _ in range(4):
        y = rng.standard_normal(shr.m)
        yf = constant_vector_projection_field(shr.geom, y)
        assert abs(weighted_inner(shr.geom, H, yf)) < 1e-8


def test_weighted_inner_grid_mismatch(sphere1, sphere2):
    H1 = mean_curvature_field(sphere1.geom)
    with pytest.raises(GridMismatch):
        weighted_inner(sphere2.geom, H1, H1)


@pytest.mark.parametrize("fixture", ["sphere1", "sphere2", "plane2",
                                     "cylinder", "torus", "anciaux_circle"])
def test_first_variation_vanishes_on_shrinkers(fixture, request):
    shr = request.getfixturevalue(fixture)
    rng = np.random.default_rng(17)
    for _ in range(5):
        fld = random_normal_field(shr.geom, rng)
        var = VariationData(V=fld.sample(shr.geom),
                            y=rng.standard_normal(shr.m),
                            tau=float(rng.standard_normal()))
        assert abs(first_variation(shr, var)) < 1e-7


def test_first_variation_detects_non_shrinker(unit_circle):
    res = shrinker_residual(unit_circle.geom)
    var = VariationData(V=NormalField(values=res))
    value = first_variation(unit_circle, var)
    # the integrand is -|residual|^2 against a positive weight
    assert value < -1e-3


def test_first_variation_matches_finite_differences(unit_circle):
    rng = np.random.default_rng(23)
    geom = unit_circle.geom
    fld = random_normal_field(geom, rng, scale=0.4)
    var = VariationData(V=fld.sample(geom), y=rng.standard_normal(2) * 0.4,
                        tau=0.3)
    fd, _ = fd_variation(geom, fld, fld.d1, var, order=1)
    assert abs(first_variation(geom, var) - fd) < 1e-5


# ----------------------------------------------------------------------
# the pointwise operator
# ----------------------------------------------------------------------

def test_operator_eigenfields_on_circle(sphere1):
    geom = sphere1.geom
    H = mean_curvature_field(geom)
    LH = apply_L_perp(geom, H)
    assert np.linalg.norm(LH.values - H.values, axis=1).max() < 1e-10
    yf = constant_vector_projection_field(geom, np.array([0.4, 1.1]))
    Ly = apply_L_perp(geom, yf)
    h = geom.grid.spacing[0]
    assert np.linalg.norm(Ly.values - 0.5 * yf.values, axis=1).max() < h ** 2
    zero = np.zeros((geom.node_count, 2))
    assert np.abs(apply_L_perp(geom, zero).values).max() == 0.0


def test_operator_eigenfields_on_sphere(sphere2):
    geom = sphere2.geom
    yf = constant_vector_projection_field(geom, np.array([0.3, -1.2, 0.7]))
    Ly = apply_L_perp(geom, yf)
    err = np.linalg.norm(Ly.values - 0.5 * yf.values, axis=1).max()
    assert err < 1e-2  # pointwise, interior-dominated at default resolution


def test_weak_equals_strong(sphere1, torus, anciaux_circle, sphere2):
    rng = np.random.default_rng(31)
    for shr in (sphere1, torus, anciaux_circle, sphere2):
        h_sq = max(np.diff(nodes).max() ** 2
                   for ax, nodes in zip(shr.chart.axes, shr.grid.axis_nodes)
                   if not (ax.periodic and ax.spectral))
        for _ in range(4):
            fld = random_normal_field(shr.geom, rng)
            vals = fld(shr.geom.grid.nodes)          # samples only: FD path
            nf = normal_covariant_derivative(shr.geom, vals)
            lhs = weighted_inner(shr.geom, nf, apply_L_perp(shr.geom, nf))
            rhs = -lperp_pairing_weak(shr.geom, nf, nf)
            scale = abs(rhs) + weighted_inner(shr.geom, nf, nf)
            assert abs(lhs - rhs) <= 0.5 * h_sq * scale


def test_operator_self_adjointness_sample(torus):
    geom = torus.geom
    rng = np.random.default_rng(37)
    h_sq = geom.grid.spacing[0] ** 2
    for _ in range(3):
        f1 = random_normal_field(geom, rng).sample(geom)
        f2 = random_normal_field(geom, rng).sample(geom)
        a = weighted_inner(geom, f1, apply_L_perp(geom, f2))
        b = weighted_inner(geom, apply_L_perp(geom, f1), f2)
        norm = math.sqrt(weighted_inner(geom, f1, f1)
                         * weighted_inner(geom, f2, f2))
        assert abs(a - b) <= 0.5 * h_sq * norm


# ----------------------------------------------------------------------
# weighted integral identities
# ----------------------------------------------------------------------

@pytest.mark.parametrize("fixture", ["sphere1", "sphere2", "torus",
                                     "anciaux_circle", "anciaux_shot"])
def test_weighted_moment_identities(fixture, request):
    shr = request.getfixturevalue(fixture)
    geom = shr.geom
    X = geom.position
    xsq = np.einsum("ac,ac->a", X, X)
    scale = max(1.0, geom.weighted_area)
    assert np.linalg.norm(geom.integrate_weighted(X)) < 1e-7 * scale
    assert np.linalg.norm(geom.integrate_weighted(X * xsq[:, None])) \
        < 1e-6 * scale
    assert abs(geom.integrate_weighted(xsq - 2 * shr.n)) < 1e-7 * scale
    rng = np.random.default_rng(41)
    for _ in range(3):
        W = rng.standard_normal(shr.m)
        xw = X @ W
        wt = np.einsum("aic,c->ai", geom.tangent_basis, W)
        wtop = np.einsum("aij,ai,aj->a", geom.inverse_metric, wt, wt)
        assert abs(geom.integrate_weighted(xw ** 2 - 2 * wtop)) \
            < 1e-6 * scale * (W @ W)


# ----------------------------------------------------------------------
# second variation
# ----------------------------------------------------------------------

def test_second_variation_center_only(sphere1):
    # V = 0, tau = 0: the value is -(4 pi)^{-1/2} |y^perp|_e^2 / 2 < 0
    geom = sphere1.geom
    y = np.array([0.8, -0.3])
    var = VariationData(V=None, y=y)
    yf = constant_vector_projection_field(geom, y)
    expected = -(4 * math.pi) ** -0.5 * 0.5 * weighted_inner(geom, yf, yf)
    assert abs(second_variation_at_critical(sphere1, var) - expected) < 1e-12
    assert expected < 0


def test_second_variation_h_direction_is_null(sphere1):
    # V = H with tau = -1 is the scale-compensated dilation direction:
    # Q(H) = -|H|_e^2 makes the bracket (-1 + 2 - 1)|H|_e^2 = 0.  Confirmed
    # by the finite-difference oracle along X + sH with t_s = 1 - s.
    geom = sphere1.geom
    H = mean_curvature_field(geom)
    var = VariationData(V=H, tau=-1.0)
    assert abs(second_variation_at_critical(sphere1, var)) < 1e-10

    def h_field(u):
        return -0.5 * sphere1.chart.position(u)

    def h_d1(u):
        return -0.5 * sphere1.chart.jacobian(u)

    fd, _ = fd_variation(geom, h_field, h_d1, var, order=2)
    assert abs(fd) < 1e-6


def test_second_variation_matches_finite_differences(sphere1, anciaux_circle):
    rng = np.random.default_rng(43)
    for shr in (sphere1, anciaux_circle):
        for _ in range(3):
            fld = random_normal_field(shr.geom, rng, scale=0.5)
            var = VariationData(V=fld.sample(shr.geom),
                                y=0.5 * rng.standard_normal(shr.m),
                                tau=0.4 * float(rng.standard_normal()))
            d2 = second_variation_at_critical(shr, var)
            fd, _ = fd_variation(shr.geom, fld, fld.d1, var, order=2)
            assert abs(d2 - fd) <= 1e-3 * abs(fd)


def test_general_second_variation_reduces_at_critical(sphere1):
    rng = np.random.default_rng(47)
    fld = random_normal_field(sphere1.geom, rng, scale=0.5)
    var = VariationData(V=fld.sample(sphere1.geom),
                        y=rng.standard_normal(2), tau=0.3)
    a = second_variation_at_critical(sphere1, var)
    b = second_variation_general(sphere1, var)
    assert abs(a - b) < 1e-6 * max(1.0, abs(a))


def test_general_second_variation_center_scale_only(unit_circle):
    # V = 0 exercises the pure (y, tau, y2, tau2) terms away from x0=0, t0=1
    var = VariationData(V=None, y=np.array([0.2, -0.1]), tau=0.15,
                        y2=np.array([0.05, 0.3]), tau2=-0.2)
    x0 = np.array([0.1, 0.2])
    d2 = second_variation_general(unit_circle, var, x0=x0, t0=1.3)
    fd, _ = fd_variation(unit_circle.geom, None, None, var, order=2,
                         x0=x0, t0=1.3)
    assert abs(d2 - fd) < 1e-5 * max(1.0, abs(fd))


def test_general_second_variation_non_critical(unit_circle):
    rng = np.random.default_rng(53)
    for _ in range(2):
        fld = random_normal_field(unit_circle.geom, rng, scale=0.3)
        var = VariationData(V=fld.sample(unit_circle.geom),
                            y=0.3 * rng.standard_normal(2),
                            tau=0.2 * float(rng.standard_normal()))
        d2 = second_variation_general(unit_circle, var)
        fd, _ = fd_variation(unit_circle.geom, fld, fld.d1, var, order=2)
        assert abs(d2 - fd) <= 1e-3 * abs(fd)


def test_not_critical_guard(unit_circle):
    var = VariationData(V=None, y=np.array([1.0, 0.0]))
    with pytest.raises(NotCritical):
        second_variation_at_critical(unit_circle, var)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_weighted_inner_is_bilinear_in_constant_fields(a, b, c):
    geom = _BILINEAR_CACHE["geom"]
    y1 = np.array([a, b])
    y2 = np.array([c, 1.0 - a])
    f1 = constant_vector_projection_field(geom, y1)
    f2 = constant_vector_projection_field(geom, y2)
    combo = constant_vector_projection_field(geom, 2.0 * y1 + 3.0 * y2)
    lhs = weighted_inner(geom, combo, f2)
    rhs = 2 * weighted_inner(geom, f1, f2) + 3 * weighted_inner(geom, f2, f2)
    assert abs(lhs - rhs) < 1e-9 * (1 + abs(lhs) + abs(rhs))


_BILINEAR_CACHE = {"geom": catalog.build("sphere1", resolution=32).geom}
