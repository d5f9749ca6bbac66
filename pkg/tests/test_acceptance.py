"""Acceptance suite.

Each test prints a single PASS line with the measured values once its
assertions hold, so a verbose run gives one line per criterion.
"""

import math
import time

import numpy as np

from shrinkerlab import catalog, stability
from shrinkerlab import profile_curves as pc
from shrinkerlab.functional import (VariationData, apply_L_perp, evaluate_F,
                                    fd_variation, first_variation,
                                    lperp_pairing_weak,
                                    second_variation_at_critical,
                                    weighted_inner)
from shrinkerlab.geometry import (NormalField, compute_geometry,
                                  constant_vector_projection_field,
                                  mean_curvature_field,
                                  normal_covariant_derivative,
                                  random_normal_field, shrinker_residual)
from shrinkerlab.quadrature import build_grid
from shrinkerlab.symplectic import J_apply, complex_scale


def test_criterion_1_golden_f_values(sphere1, sphere2, plane2, announce):
    targets = [
        (plane2, 1.0, 1e-10, "plane"),
        (sphere1, math.sqrt(2 * math.pi / math.e), 1e-8, "S1(sqrt2)"),
        (sphere2, 4 / math.e, 1e-8, "S2(2)"),
    ]
    msgs = []
    for shr, golden, tol, label in targets:
        t0 = time.perf_counter()
        fe = evaluate_F(shr)
        elapsed = time.perf_counter() - t0
        err = abs(fe.value - golden)
        assert err <= tol + fe.truncation_bound, label
        assert elapsed < 1.0, f"{label} took {elapsed:.2f}s"
        msgs.append(f"{label} err={err:.1e} ({elapsed * 1e3:.0f}ms)")
    announce("ACCEPTANCE 1 PASS golden F values: " + ", ".join(msgs))


def test_criterion_2_criticality(sphere1, sphere2, plane2, cylinder, torus,
                                 anciaux_circle, unit_circle, announce):
    rng = np.random.default_rng(0)
    worst = 0.0
    for shr in (sphere1, sphere2, plane2, cylinder, torus, anciaux_circle):
        for _ in range(20):
            fld = random_normal_field(shr.geom, rng)
            var = VariationData(V=fld.sample(shr.geom),
                                y=rng.standard_normal(shr.m),
                                tau=float(rng.standard_normal()))
            worst = max(worst, abs(first_variation(shr, var)))
    assert worst <= 1e-7
    res = shrinker_residual(unit_circle.geom)
    off = first_variation(unit_circle,
                          VariationData(V=NormalField(values=res)))
    assert abs(off) > 1e-3
    announce(f"ACCEPTANCE 2 PASS criticality: max |dF| = {worst:.1e} over "
             f"120 variations; unit circle dF = {off:+.3f}")


def _lperp_identity_errors(chart, res, y):
    geom = compute_geometry(chart, build_grid(chart, res))
    nfy = constant_vector_projection_field(geom, y)
    err_y = np.linalg.norm(apply_L_perp(geom, nfy).values
                           - 0.5 * nfy.values, axis=1).max()
    nfh = mean_curvature_field(geom)
    err_h = np.linalg.norm(apply_L_perp(geom, nfh).values
                           - nfh.values, axis=1).max()
    return err_y, err_h


def _check_order(errs, floor=1e-7):
    errs = np.asarray(errs)
    if errs[-1] <= floor:
        return True, float("nan")
    orders = np.log2(errs[:-1] / errs[1:])
    return bool(orders.min() >= 1.9), float(orders.min())


def test_criterion_3_eigen_identity_convergence(announce):
    # S^1(sqrt 2): nested central differences on the periodic chart.
    chart1 = catalog.circle_chart(math.sqrt(2.0))
    y1 = np.array([0.4, 1.1])
    ladder1 = [256, 512, 1024, 2048]
    errs1 = []
    for res in ladder1:
        geom = compute_geometry(chart1, build_grid(chart1, res))
        vals = np.einsum("acd,d->ac", geom.normal_projector, y1)
        nfy = normal_covariant_derivative(geom, vals)
        err_y = np.linalg.norm(apply_L_perp(geom, nfy).values
                               - 0.5 * nfy.values, axis=1).max()
        err_h = np.linalg.norm(apply_L_perp(geom, geom.mean_curvature).values
                               - geom.mean_curvature, axis=1).max()
        errs1.append((err_y, err_h))
    ok_y1, ord_y1 = _check_order([e[0] for e in errs1])
    ok_h1, _ = _check_order([e[1] for e in errs1])
    assert ok_y1 and ok_h1
    assert errs1[-1][0] <= 1e-5 and errs1[-1][1] <= 1e-5

    # S^2(2): uniform midpoint polar rule (pole-reflection ghosts), fields
    # carrying analytic first derivatives, spectral azimuth.
    chart2 = catalog.sphere_chart(2, polar_rule="midpoint")
    y2 = np.array([0.3, -1.2, 0.7])
    ladder2 = [(64, 32), (128, 64), (256, 128), (512, 256)]
    errs2 = [_lperp_identity_errors(chart2, res, y2) for res in ladder2]
    ok_y2, ord_y2 = _check_order([e[0] for e in errs2])
    ok_h2, _ = _check_order([e[1] for e in errs2])
    assert ok_y2 and ok_h2
    assert errs2[-1][0] <= 1e-5 and errs2[-1][1] <= 1e-5
    announce(
        f"ACCEPTANCE 3 PASS eigen identities: S1 order {ord_y1:.2f} "
        f"finest {errs1[-1][0]:.1e}; S2 order {ord_y2:.2f} "
        f"finest {errs2[-1][0]:.1e} (H at roundoff floor)")


def test_criterion_4_weak_equals_strong(sphere1, sphere2, torus,
                                        anciaux_circle, announce):
    rng = np.random.default_rng(1)
    worst = 0.0
    for shr in (sphere1, sphere2, torus, anciaux_circle):
        h_sq = max(np.diff(nodes).max() ** 2
                   for ax, nodes in zip(shr.chart.axes, shr.grid.axis_nodes)
                   if not (ax.periodic and ax.spectral))
        for _ in range(10):
            fld = random_normal_field(shr.geom, rng)
            nf = normal_covariant_derivative(shr.geom,
                                             fld(shr.geom.grid.nodes))
            lhs = weighted_inner(shr.geom, nf, apply_L_perp(shr.geom, nf))
            rhs = -lperp_pairing_weak(shr.geom, nf, nf)
            scale = abs(rhs) + weighted_inner(shr.geom, nf, nf)
            ratio = abs(lhs - rhs) / (h_sq * scale)
            worst = max(worst, ratio)
            assert abs(lhs - rhs) <= 0.5 * h_sq * scale
    announce(f"ACCEPTANCE 4 PASS weak form = strong form: "
             f"max |diff| / (h^2 scale) = {worst:.3f} <= 0.5")


def test_criterion_5_second_variation_vs_fd(sphere1, anciaux_circle, announce):
    rng = np.random.default_rng(2)
    worst = 0.0
    for shr in (sphere1, anciaux_circle):
        for _ in range(5):
            fld = random_normal_field(shr.geom, rng, scale=0.5)
            var = VariationData(V=fld.sample(shr.geom),
                                y=0.5 * rng.standard_normal(shr.m),
                                tau=0.4 * float(rng.standard_normal()))
            d2 = second_variation_at_critical(shr, var)
            fd, _ = fd_variation(shr.geom, fld, fld.d1, var, order=2)
            rel = abs(d2 - fd) / abs(fd)
            worst = max(worst, rel)
            assert rel <= 1e-3
    announce(f"ACCEPTANCE 5 PASS second variation vs d2F/ds2: "
             f"max relative mismatch {worst:.1e} <= 1e-3")


def test_criterion_6_integral_identity_suite(sphere1, sphere2, torus,
                                             anciaux_circle, anciaux_shot,
                                             announce):
    rng = np.random.default_rng(3)
    worst = 0.0
    for shr in (sphere1, sphere2, torus, anciaux_circle, anciaux_shot):
        geom = shr.geom
        scale = max(1.0, geom.weighted_area)
        X = geom.position
        xsq = np.einsum("ac,ac->a", X, X)
        vals = [np.linalg.norm(geom.integrate_weighted(X)) / scale,
                np.linalg.norm(geom.integrate_weighted(
                    X * xsq[:, None])) / scale,
                abs(geom.integrate_weighted(xsq - 2 * shr.n)) / scale,
                np.linalg.norm(geom.integrate_weighted(
                    geom.mean_curvature)) / scale]
        W = rng.standard_normal(shr.m)
        xw = X @ W
        wt = np.einsum("aic,c->ai", geom.tangent_basis, W)
        wtop = np.einsum("aij,ai,aj->a", geom.inverse_metric, wt, wt)
        vals.append(abs(geom.integrate_weighted(xw ** 2 - 2 * wtop))
                    / (scale * (W @ W)))
        if hasattr(shr, "curve"):
            vals.append(abs(pc.radial_balance_residual(shr.curve)))
            vals.append(abs(pc.inverse_square_balance_residual(shr.curve)))
        worst = max(worst, max(vals))
        assert max(vals) <= 1e-6, shr.name
    announce(f"ACCEPTANCE 6 PASS integral identities: max residual "
             f"{worst:.1e} <= 1e-6 across 5 closed shrinkers")


def test_criterion_7_ode_contract(anciaux_shot, announce):
    n = 2
    E = 0.9 * pc.e_max(n)
    cur = pc.integrate((pc._outer_radius(E, n), math.pi / 2, 0.0), n, 50.0)
    drift = cur.conservation_residual()
    assert drift <= 1e-10

    r0 = math.sqrt(2 * n)
    fixed = pc.integrate((r0, math.pi / 2, 0.0), n, 30.0)
    stationary = max(np.abs(fixed.y[:, 0] - r0).max(),
                     np.abs(fixed.y[:, 1] - math.pi / 2).max())
    assert stationary <= 1e-12

    assert anciaux_shot.curve.closure_gap <= 1e-6
    try:
        pc.shoot_closed(2, 1, 5, (0.1, 0.5))
        raised = False
    except pc.NoRoot as exc:
        raised = exc.values is not None and exc.bracket == (0.1, 0.5)
    assert raised
    announce(f"ACCEPTANCE 7 PASS ODE: drift {drift:.1e} <= 1e-10 over 50 "
             f"units, fixed point stationary to {stationary:.1e}, closure "
             f"gap {anciaux_shot.curve.closure_gap:.1e}, NoRoot diagnostic "
             f"carries endpoints")


def test_criterion_8_closed_form_vs_generic_q(anciaux_shot, announce):
    rels = {}
    for mode, family in (("general", "N0"), ("lagrangian", "N1")):
        rep = stability.certify_anciaux_instability(anciaux_shot, mode=mode)
        rel = abs(rep.Q_value - rep.extras["Q_closed_form"]) / abs(rep.Q_value)
        assert rel <= 1e-4
        rels[family] = rel
    announce(f"ACCEPTANCE 8 PASS closed-form vs generic Q: relative "
             f"difference N0 {rels['N0']:.1e}, N1 {rels['N1']:.1e} <= 1e-4")


def test_criterion_9_instability_certificates(torus, anciaux_shot, announce):
    rep_p = stability.certify_product_instability(*torus.factors, prod=torus)
    err = abs(rep_p.Q_value + 8 * math.pi ** 2 / math.e)
    assert err <= 1e-3
    assert rep_p.residuals.admissible

    qs = {}
    for mode in ("general", "lagrangian"):
        rep = stability.certify_anciaux_instability(anciaux_shot, mode=mode)
        assert rep.Q_value < -1e-6
        assert rep.residuals.admissible
        qs[mode] = rep.Q_value

    # Lagrangian sign condition on synthetic curves for n >= 7: integrated
    # pieces and random angle profiles
    for n in (7, 9):
        piece = pc.integrate(
            (pc._outer_radius(0.5 * pc.e_max(n), n), math.pi / 2, 0.0), n, 8.0)
        f = pc.lagrangian_sign_profile(n, piece.y[:, 1])
        assert f.min() >= -1e-12 and f.max() > 0.0
        f_rand = pc.lagrangian_sign_profile(
            n, np.random.default_rng(4).uniform(0.01, np.pi - 0.01, 4096))
        assert f_rand.min() >= -1e-12 and f_rand.max() > 0.0
    announce(
        f"ACCEPTANCE 9 PASS certificates: product Q = {rep_p.Q_value:.4f} "
        f"(err {err:.1e}), Lagrangian example Q = {qs['general']:.2f} / "
        f"{qs['lagrangian']:.2f}, sign profile nonnegative for n = 7, 9")


def test_criterion_10_sphere_trial_space_stability(sphere1, sphere2, announce):
    mins = []
    for shr, deg in ((sphere1, 5), (sphere2, 3)):
        basis = stability.sphere_trial_basis(shr, max_degree=deg)
        assert len(basis) >= 20
        rep = stability.stability_verdict_on_trial_space(shr, basis)
        assert rep.Q_value >= -1e-6
        assert rep.verdict == "stable_on_trial_space"
        mins.append(rep.Q_value)
    announce(f"ACCEPTANCE 10 PASS sphere trial spaces: min Rayleigh "
             f"S1 {mins[0]:.6f}, S2 {mins[1]:.6f} >= -1e-6")


def test_criterion_11_lagrangian_variation_test(anciaux_circle, anciaux_shot,
                                                announce):
    # Every N1 field passes the closedness test.
    n1_defects = []
    for shr in (anciaux_circle, anciaux_shot):
        w = pc.unit_tangent_field(shr.psi, resolution=shr.grid.shape[1])
        V1 = pc.variation_field(shr, w, "N1")
        D1 = pc.lagrangian_variation_defect(shr.geom, V1)
        n1_defects.append(np.abs(D1).max())
        assert n1_defects[-1] <= 1e-6

    # N0 on the noncircular curve fails, and the defect matches the
    # cos(delta)-weighted pairing with the tangent field.
    shr = anciaux_shot
    st = shr.curve_states
    r, delta = st[:, 0], st[:, 1]
    w = pc.unit_tangent_field(shr.psi, resolution=shr.grid.shape[1])
    V0 = pc.variation_field(shr, w, "N0")
    D0 = pc.lagrangian_variation_defect(shr.geom, V0)
    ns, nsig = shr.grid.shape
    wvals = np.broadcast_to(w.values[None], (ns, nsig, 4)).reshape(-1, 4)
    g0 = shr.curve.gamma_jets(shr.grid.nodes[:, 0])[0]
    uj = shr.geom.tangent_basis[:, 1, :]
    w_ej = np.einsum("ac,ac->a", complex_scale(g0, wvals), uj) / r ** 2
    predicted = 2.0 * r * np.cos(delta) * w_ej
    mismatch = np.abs(D0[:, 0, 1] - predicted).max()
    assert np.abs(D0).max() > 0.1
    assert mismatch <= 1e-4 * np.abs(predicted).max()
    # the N1 pairing itself carries the -cos(delta)/r structure
    M1 = np.einsum("aic,ajc->aij",
                   pc.variation_field(shr, w, "N1").cov,
                   J_apply(shr.geom.tangent_basis))
    pairing_err = np.abs(M1[:, 0, 1] + np.cos(delta) / r * w_ej).max()
    assert pairing_err <= 1e-6
    announce(
        f"ACCEPTANCE 11 PASS Lagrangian variation test: N1 defects "
        f"{max(n1_defects):.1e} <= 1e-6; N0 defect detected "
        f"(max {np.abs(D0).max():.2f}) matching the cos-weighted pairing "
        f"to {mismatch:.1e}")
