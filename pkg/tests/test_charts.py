import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shrinkerlab.catalog import circle_chart, minimal_legendrian, sphere_chart
from shrinkerlab.charts import (AffineChart, AxisSpec, Chart, ProductChart,
                                TrigChart, perturbed_chart, rescaled_chart)

RNG = np.random.default_rng(0)


def fd_jacobian(chart, u, h=1e-6):
    out = np.empty((u.shape[0], chart.dim_domain, chart.dim_ambient))
    for i in range(chart.dim_domain):
        e = np.zeros(chart.dim_domain)
        e[i] = h
        out[:, i] = (chart.position(u + e) - chart.position(u - e)) / (2 * h)
    return out


@pytest.mark.parametrize("chart", [
    circle_chart(np.sqrt(2.0)),
    sphere_chart(2),
    sphere_chart(3),
    minimal_legendrian(2),
    minimal_legendrian(3),
])
def test_trig_chart_jets_match_finite_differences(chart):
    u = np.column_stack([RNG.uniform(ax.lo + 0.2, ax.hi - 0.2, 20)
                         for ax in chart.axes])
    jac = chart.jacobian(u)
    assert np.allclose(jac, fd_jacobian(chart, u), atol=1e-8)
    h = 1e-4
    hess = chart.hessian(u)
    for i in range(chart.dim_domain):
        e = np.zeros(chart.dim_domain)
        e[i] = h
        fd = (chart.jacobian(u + e) - chart.jacobian(u - e)) / (2 * h)
        assert np.allclose(hess[:, i], fd, atol=1e-6)
    third = chart.third(u)
    for i in range(chart.dim_domain):
        e = np.zeros(chart.dim_domain)
        e[i] = h
        fd = (chart.hessian(u + e) - chart.hessian(u - e)) / (2 * h)
        assert np.allclose(third[:, i], fd, atol=1e-5)


def test_periodic_axes_wrap_exactly():
    for chart in (circle_chart(np.sqrt(2.0)), sphere_chart(2),
                  minimal_legendrian(3)):
        u = np.column_stack([RNG.uniform(ax.lo, ax.hi, 10)
                             for ax in chart.axes])
        for k, ax in enumerate(chart.axes):
            if not ax.periodic:
                continue
            shifted = u.copy()
            shifted[:, k] += ax.extent
            assert np.abs(chart.position(shifted)
                          - chart.position(u)).max() < 1e-12


def test_finite_difference_jets_without_analytic_derivatives():
    R = np.sqrt(2.0)
    raw = Chart(lambda u: R * np.column_stack([np.cos(u[:, 0]),
                                               np.sin(u[:, 0])]),
                axes=[AxisSpec(0.0, 2 * np.pi, periodic=True)], dim_ambient=2)
    assert raw.jet_mode == "finite_difference"
    analytic = circle_chart(R)
    u = RNG.uniform(0, 2 * np.pi, (30, 1))
    assert np.allclose(raw.jacobian(u), analytic.jacobian(u), atol=1e-7)
    assert np.allclose(raw.hessian(u), analytic.hessian(u), atol=1e-4)


def test_product_chart_blocks():
    c1 = circle_chart(1.0)
    c2 = sphere_chart(2)
    prod = ProductChart([c1, c2])
    assert prod.dim_domain == 3 and prod.dim_ambient == 5
    u = np.column_stack([RNG.uniform(0.3, 2.8, 8) for _ in range(3)])
    X = prod.position(u)
    assert np.allclose(X[:, :2], c1.position(u[:, :1]))
    assert np.allclose(X[:, 2:], c2.position(u[:, 1:]))
    hess = prod.hessian(u)
    # cross-factor second derivatives vanish
    assert np.abs(hess[:, 0, 1:, :]).max() == 0.0
    assert np.abs(hess[:, 1:, 0, :]).max() == 0.0


def test_affine_chart_exact_jets():
    basis = RNG.standard_normal((2, 4))
    chart = AffineChart(basis, RNG.standard_normal(4),
                        [AxisSpec(-1, 1), AxisSpec(-1, 1)])
    u = RNG.uniform(-1, 1, (5, 2))
    assert np.allclose(chart.jacobian(u),
                       np.broadcast_to(basis, (5, 2, 4)))
    assert np.abs(chart.hessian(u)).max() == 0.0


def test_rescaled_chart_matches_direct_map():
    chart = sphere_chart(2)
    x = np.array([0.2, -0.4, 1.0])
    t = 1.7
    rc = rescaled_chart(chart, x, t)
    u = np.column_stack([RNG.uniform(0.4, 2.6, 6), RNG.uniform(0, 6, 6)])
    assert np.allclose(rc.position(u), (chart.position(u) - x) / np.sqrt(t))
    assert np.allclose(rc.jacobian(u), chart.jacobian(u) / np.sqrt(t))


def test_perturbed_chart_moves_along_field():
    chart = circle_chart(np.sqrt(2.0))

    def field(u):
        return 0.5 * chart.position(u)

    def field_d1(u):
        return 0.5 * chart.jacobian(u)

    pc = perturbed_chart(chart, field, s=0.1, field_d1=field_d1)
    u = RNG.uniform(0, 2 * np.pi, (7, 1))
    assert np.allclose(pc.position(u), 1.05 * chart.position(u))
    assert np.allclose(pc.jacobian(u), 1.05 * chart.jacobian(u))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 4.0), st.floats(0.0, 2 * np.pi))
def test_circle_chart_radius_property(radius, angle):
    chart = circle_chart(radius)
    X = chart.position(np.array([[angle]]))
    assert abs(np.linalg.norm(X[0]) - radius) < 1e-12
