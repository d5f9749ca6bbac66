"""Chart-level differential geometry on quadrature grids.

Everything here is batched over nodes: the induced metric, second
fundamental form, mean curvature vector, normal projector, Christoffel
symbols, covariant derivatives of scalar and normal fields, and the drift
operator  L f = Lap f - <X, grad f>/2.

Normal projection goes through a QR factorization of the tangent basis so
arbitrary codimension works without a normal frame.  Field derivatives on
the grid use central differences (with ghost layers through chart pole
reflections and optional FFT differentiation on periodic axes flagged as
spectral); fields that carry analytic parameter derivatives use those
instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .charts import Chart
from .errors import DegenerateMetric, GridTooCoarse
from .quadrature import QuadratureGrid


@dataclass
class PointGeometry:
    """Per-node geometry caches.  All arrays are batched over nodes."""

    position: np.ndarray          # (N, m)
    tangent_basis: np.ndarray     # (N, n, m), rows dX/du^i
    metric: np.ndarray            # (N, n, n)
    inverse_metric: np.ndarray    # (N, n, n)
    det_metric: np.ndarray        # (N,)
    sqrt_det: np.ndarray          # (N,)
    second_form: np.ndarray       # (N, n, n, m), normal-valued A_ij
    mean_curvature: np.ndarray    # (N, m)
    normal_projector: np.ndarray  # (N, m, m)
    christoffel: np.ndarray       # (N, n, n, n), Gamma[a, i, j, k] = Gamma^k_ij

    @property
    def node_count(self) -> int:
        return self.position.shape[0]


@dataclass
class GridGeometry(PointGeometry):
    """PointGeometry over a full grid plus quadrature data."""

    chart: Chart = None
    grid: QuadratureGrid = None
    area_weights: np.ndarray = None   # grid weights * sqrt(det g)
    gauss_density: np.ndarray = None  # exp(-|X|^2 / 4)

    @property
    def dim(self) -> int:
        return self.chart.dim_domain

    @property
    def ambient_dim(self) -> int:
        return self.chart.dim_ambient

    def integrate(self, node_values: np.ndarray) -> np.ndarray:
        """Surface integral of per-node values (extra trailing dims allowed)."""
        w = self.area_weights
        return np.tensordot(w, node_values, axes=(0, 0))

    def integrate_weighted(self, node_values: np.ndarray) -> np.ndarray:
        """Gaussian-weighted surface integral against exp(-|X|^2/4)."""
        w = self.area_weights * self.gauss_density
        return np.tensordot(w, node_values, axes=(0, 0))

    @property
    def weighted_area(self) -> float:
        return float(np.sum(self.area_weights * self.gauss_density))


def _geometry_arrays(chart: Chart, u: np.ndarray, rank_tol=None):
    rank_tol = chart.rank_tol if rank_tol is None else rank_tol
    X = chart.position(u)
    tan = chart.jacobian(u)
    hess = chart.hessian(u)
    m = chart.dim_ambient

    sv = np.linalg.svd(tan, compute_uv=False)
    if np.any(sv[:, -1] <= rank_tol * sv[:, 0]):
        bad = int(np.argmin(sv[:, -1] / sv[:, 0]))
        raise DegenerateMetric(
            f"chart is not immersed near node {bad}: "
            f"singular values {sv[bad]}")

    g = np.einsum("aic,ajc->aij", tan, tan)
    ginv = np.linalg.inv(g)
    det = np.linalg.det(g)

    q, _ = np.linalg.qr(tan.transpose(0, 2, 1))
    Pperp = np.eye(m) - np.einsum("aik,ajk->aij", q, q)

    A = np.einsum("acd,aijd->aijc", Pperp, hess)
    H = np.einsum("aij,aijc->ac", ginv, A)

    hess_tan = np.einsum("aijc,akc->aijk", hess, tan)
    gamma = np.einsum("aijl,alk->aijk", hess_tan, ginv)

    return X, tan, g, ginv, det, A, H, Pperp, gamma


def point_geometry(chart: Chart, u) -> PointGeometry:
    """Geometry at arbitrary parameter points (batched)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    X, tan, g, ginv, det, A, H, Pperp, gamma = _geometry_arrays(chart, u)
    return PointGeometry(position=X, tangent_basis=tan, metric=g,
                         inverse_metric=ginv, det_metric=det,
                         sqrt_det=np.sqrt(det), second_form=A,
                         mean_curvature=H, normal_projector=Pperp,
                         christoffel=gamma)


def compute_geometry(chart: Chart, grid: QuadratureGrid) -> GridGeometry:
    """Geometry caches at every grid node."""
    X, tan, g, ginv, det, A, H, Pperp, gamma = _geometry_arrays(chart, grid.nodes)
    sqrt_det = np.sqrt(det)
    return GridGeometry(
        position=X, tangent_basis=tan, metric=g, inverse_metric=ginv,
        det_metric=det, sqrt_det=sqrt_det, second_form=A, mean_curvature=H,
        normal_projector=Pperp, christoffel=gamma, chart=chart, grid=grid,
        area_weights=grid.weights * sqrt_det,
        gauss_density=np.exp(-0.25 * np.einsum("ac,ac->a", X, X)))


def shrinker_residual(geom_or_chart, u=None) -> np.ndarray:
    """H + (1/2) X^perp per node; zero iff the self-shrinker equation holds."""
    if isinstance(geom_or_chart, Chart):
        geom = point_geometry(geom_or_chart, u)
    else:
        geom = geom_or_chart
    Xperp = np.einsum("acd,ad->ac", geom.normal_projector, geom.position)
    return geom.mean_curvature + 0.5 * Xperp


# ----------------------------------------------------------------------
# Differentiation of node-sampled fields on structured grids
# ----------------------------------------------------------------------

def _check_stencil_support(grid: QuadratureGrid):
    for count in grid.shape:
        if count < 4:
            raise GridTooCoarse(
                f"grid shape {grid.shape} too coarse for stencils")


def _partial_axis(chart: Chart, grid: QuadratureGrid, full: np.ndarray,
                  axis: int, coord_dims=()) -> np.ndarray:
    """Derivative of a grid-shaped array along one parameter axis.

    ``coord_dims`` lists positions (within the trailing dims) that index
    coordinate directions.  They matter only at chart pole reflections: the
    reflection has parameter Jacobian -1 on the reflected axis, so ghost
    values of those components change sign.
    """
    ax = chart.axes[axis]
    h = grid.spacing[axis]
    ngrid = len(grid.shape)
    if ax.periodic:
        if ax.spectral:
            count = grid.shape[axis]
            k = 2.0 * np.pi * np.fft.fftfreq(count, d=h)
            if count % 2 == 0:
                k[count // 2] = 0.0
            shape = [1] * full.ndim
            shape[axis] = count
            fhat = np.fft.fft(full, axis=axis)
            dfull = np.fft.ifft(1j * k.reshape(shape) * fhat, axis=axis)
            return np.real(dfull)
        return (np.roll(full, -1, axis=axis) - np.roll(full, 1, axis=axis)) / (2 * h)
    if axis in chart.pole_reflections:
        partner = chart.pole_reflections[axis]
        p_count = grid.shape[partner]
        if p_count % 2 != 0:
            raise GridTooCoarse(
                "pole reflection needs an even node count on the partner axis")
        lo = np.take(full, [0], axis=axis)
        hi = np.take(full, [-1], axis=axis)
        lo = np.roll(lo, p_count // 2, axis=partner)
        hi = np.roll(hi, p_count // 2, axis=partner)
        for dim in coord_dims:
            sel = [slice(None)] * full.ndim
            sel[ngrid + dim] = axis
            lo[tuple(sel)] *= -1.0
            hi[tuple(sel)] *= -1.0
        padded = np.concatenate([lo, full, hi], axis=axis)
        fwd = np.take(padded, range(2, padded.shape[axis]), axis=axis)
        bwd = np.take(padded, range(0, padded.shape[axis] - 2), axis=axis)
        return (fwd - bwd) / (2 * h)
    coords = grid.axis_nodes[axis]
    return np.gradient(full, coords, axis=axis, edge_order=2)


def grid_partials(chart: Chart, grid: QuadratureGrid, values: np.ndarray,
                  coord_dims=()) -> np.ndarray:
    """All parameter derivatives of node values: (N, ...) -> (N, n, ...).

    ``coord_dims`` flags trailing dims of ``values`` that index coordinate
    directions (0 is the first dim after the node dim); see _partial_axis.
    """
    _check_stencil_support(grid)
    trailing = values.shape[1:]
    full = values.reshape(grid.shape + trailing)
    n = len(grid.shape)
    out = np.empty((values.shape[0], n) + trailing)
    for axis in range(n):
        out[:, axis] = _partial_axis(chart, grid, full, axis, coord_dims).reshape(
            (values.shape[0],) + trailing)
    return out


# ----------------------------------------------------------------------
# Normal fields
# ----------------------------------------------------------------------

@dataclass
class NormalField:
    """A normal-bundle section sampled per grid node.

    ``cov`` holds the normal covariant derivative per node and coordinate
    direction.  ``d_values`` is the raw ambient parameter derivative when the
    field carries an analytic one.
    """

    values: np.ndarray              # (N, m)
    cov: np.ndarray | None = None   # (N, n, m)
    d_values: np.ndarray | None = None

    def check_normal(self, geom: GridGeometry, rel=1e-8, absolute=1e-12):
        tang = self.values - np.einsum("acd,ad->ac",
                                       geom.normal_projector, self.values)
        bad = np.linalg.norm(tang, axis=1) > \
            rel * np.linalg.norm(self.values, axis=1) + absolute
        if np.any(bad):
            raise ValueError(
                f"field has tangential components at {int(bad.sum())} nodes")
        return self


def normal_covariant_derivative(geom: GridGeometry, field) -> NormalField:
    """Fill in the normal covariant derivative of a sampled normal field.

    Uses the field's analytic parameter derivative when it carries one,
    otherwise central differences on the grid.
    """
    if isinstance(field, NormalField):
        values, dvals = field.values, field.d_values
    else:
        values, dvals = np.asarray(field, dtype=float), None
    if dvals is None:
        dvals = grid_partials(geom.chart, geom.grid, values)
    cov = np.einsum("acd,aid->aic", geom.normal_projector, dvals)
    return NormalField(values=values, cov=cov, d_values=dvals)


def gradient_norm_sq(geom: GridGeometry, cov: np.ndarray) -> np.ndarray:
    """|grad^perp V|^2 = g^{ij} <cov_i, cov_j> per node."""
    return np.einsum("aij,aic,ajc->a", geom.inverse_metric, cov, cov)


def second_form_pairing_sq(geom: GridGeometry, values: np.ndarray) -> np.ndarray:
    """|<A, V>|^2 = <A_ij,V><A_kl,V> g^{ik} g^{jl} per node."""
    S = np.einsum("aijc,ac->aij", geom.second_form, values)
    return np.einsum("aij,akl,aik,ajl->a", S, S,
                     geom.inverse_metric, geom.inverse_metric)


def connection_laplacian(geom: GridGeometry, field) -> np.ndarray:
    """Connection Laplacian on the normal bundle by nested covariant
    differences: project after each ambient difference, correct with the
    base Christoffel symbols, trace with the inverse metric."""
    nf = field if isinstance(field, NormalField) and field.cov is not None \
        else normal_covariant_derivative(geom, field)
    W = nf.cov                                            # (N, n, m)
    dW = grid_partials(geom.chart, geom.grid, W,
                       coord_dims=(0,))                   # (N, i, j, m)
    Z = np.einsum("acd,aijd->aijc", geom.normal_projector, dW)
    corr = np.einsum("aijk,akc->aijc", geom.christoffel, W)
    return np.einsum("aij,aijc->ac", geom.inverse_metric, Z - corr)


def tangential_position_components(geom: GridGeometry) -> np.ndarray:
    """(X^top)^i = g^{ij} <X, u_j> per node."""
    Xt = np.einsum("ac,ajc->aj", geom.position, geom.tangent_basis)
    return np.einsum("aij,aj->ai", geom.inverse_metric, Xt)


def scalar_script_L(geom: GridGeometry, f: np.ndarray, df=None) -> np.ndarray:
    """L f = Lap f - <X, grad f>/2 on node-sampled scalars.

    ``df`` may supply analytic first parameter derivatives (N, n).
    """
    f = np.asarray(f, dtype=float)
    if df is None:
        df = grid_partials(geom.chart, geom.grid, f)
    ddf = grid_partials(geom.chart, geom.grid, df,
                        coord_dims=(0,))                  # (N, i, j)
    ddf = 0.5 * (ddf + ddf.transpose(0, 2, 1))
    lap = np.einsum("aij,aij->a", geom.inverse_metric,
                    ddf - np.einsum("aijk,ak->aij", geom.christoffel, df))
    xtop = tangential_position_components(geom)
    return lap - 0.5 * np.einsum("ai,ai->a", xtop, df)


# ----------------------------------------------------------------------
# Analytic jets of derived objects
# ----------------------------------------------------------------------

def projector_jets(chart: Chart, u):
    """Normal projector and its parameter derivative at arbitrary points.

    Returns (P, dP) with shapes (N, m, m) and (N, n, m, m); requires second
    jets of the chart (analytic or finite-difference).
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    tan = chart.jacobian(u)
    hess = chart.hessian(u)
    m = chart.dim_ambient
    g = np.einsum("aic,ajc->aij", tan, tan)
    ginv = np.linalg.inv(g)
    P = np.eye(m) - np.einsum("aic,aij,ajd->acd", tan, ginv, tan)
    dg = np.einsum("akic,ajc->akij", hess, tan) \
        + np.einsum("aic,akjc->akij", tan, hess)
    dginv = -np.einsum("aip,akpq,aqj->akij", ginv, dg, ginv)
    dP = -(np.einsum("akic,aij,ajd->akcd", hess, ginv, tan)
           + np.einsum("aic,akij,ajd->akcd", tan, dginv, tan)
           + np.einsum("aic,aij,akjd->akcd", tan, ginv, hess))
    return P, dP


def mean_curvature_jets(chart: Chart, u):
    """Mean curvature vector and its ambient parameter derivative.

    Needs third jets of the chart; returns (H, dH) with shapes (N, m) and
    (N, n, m), or (H, None) when third jets are unavailable.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    tan = chart.jacobian(u)
    hess = chart.hessian(u)
    g = np.einsum("aic,ajc->aij", tan, tan)
    ginv = np.linalg.inv(g)
    P, dP = projector_jets(chart, u)
    Hraw = np.einsum("aij,aijc->ac", ginv, hess)
    H = np.einsum("acd,ad->ac", P, Hraw)
    third = chart.third(u)
    if third is None:
        return H, None
    dg = np.einsum("akic,ajc->akij", hess, tan) \
        + np.einsum("aic,akjc->akij", tan, hess)
    dginv = -np.einsum("aip,akpq,aqj->akij", ginv, dg, ginv)
    dHraw = np.einsum("akij,aijc->akc", dginv, hess) \
        + np.einsum("aij,akijc->akc", ginv, third)
    dH = np.einsum("akcd,ad->akc", dP, Hraw) \
        + np.einsum("acd,akd->akc", P, dHraw)
    return H, dH


def mean_curvature_field(geom: GridGeometry, analytic_jets=True) -> NormalField:
    """The mean curvature vector as a NormalField on the grid."""
    if analytic_jets:
        H, dH = mean_curvature_jets(geom.chart, geom.grid.nodes)
        if dH is not None:
            return normal_covariant_derivative(
                geom, NormalField(values=H, d_values=dH))
    return normal_covariant_derivative(geom, geom.mean_curvature)


def constant_vector_projection_field(geom: GridGeometry, y) -> NormalField:
    """y^perp for a constant ambient vector y, with analytic derivatives."""
    y = np.asarray(y, dtype=float)
    P, dP = projector_jets(geom.chart, geom.grid.nodes)
    values = np.einsum("acd,d->ac", P, y)
    dvals = np.einsum("akcd,d->akc", dP, y)
    return normal_covariant_derivative(
        geom, NormalField(values=values, d_values=dvals))


class ProjectedAmbientField:
    """V(u) = P_perp(u) W(X(u)) for a quadratic ambient polynomial W.

    Callable at arbitrary parameter points, with analytic first derivatives,
    so it can drive finite-difference variation families as well as grid
    sampling.  W(X) = a + B X + C : (X, X) with C symmetric in its last two
    indices.
    """

    def __init__(self, chart: Chart, a, B=None, C=None):
        self.chart = chart
        m = chart.dim_ambient
        self.a = np.asarray(a, dtype=float)
        self.B = np.zeros((m, m)) if B is None else np.asarray(B, dtype=float)
        if C is None:
            self.C = np.zeros((m, m, m))
        else:
            C = np.asarray(C, dtype=float)
            self.C = 0.5 * (C + C.transpose(0, 2, 1))

    def ambient(self, X):
        return self.a + X @ self.B.T + np.einsum("cde,ad,ae->ac", self.C, X, X)

    def ambient_derivative(self, X, tan):
        dW = np.einsum("cd,aid->aic", self.B, tan)
        dW += 2.0 * np.einsum("cde,aid,ae->aic", self.C, tan, X)
        return dW

    def __call__(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        X = self.chart.position(u)
        P, _ = projector_jets(self.chart, u)
        return np.einsum("acd,ad->ac", P, self.ambient(X))

    def d1(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        X = self.chart.position(u)
        tan = self.chart.jacobian(u)
        P, dP = projector_jets(self.chart, u)
        W = self.ambient(X)
        dW = self.ambient_derivative(X, tan)
        return np.einsum("akcd,ad->akc", dP, W) \
            + np.einsum("acd,akd->akc", P, dW)

    def sample(self, geom: GridGeometry) -> NormalField:
        values = self(geom.grid.nodes)
        dvals = self.d1(geom.grid.nodes)
        return normal_covariant_derivative(
            geom, NormalField(values=values, d_values=dvals))


def random_normal_field(geom: GridGeometry, rng, degree=2,
                        scale=1.0) -> ProjectedAmbientField:
    """Random smooth normal field: projected ambient polynomial of the
    given degree with standard normal coefficients."""
    m = geom.ambient_dim
    a = scale * rng.standard_normal(m)
    B = scale * rng.standard_normal((m, m)) if degree >= 1 else None
    C = scale * rng.standard_normal((m, m, m)) if degree >= 2 else None
    return ProjectedAmbientField(geom.chart, a, B, C)
