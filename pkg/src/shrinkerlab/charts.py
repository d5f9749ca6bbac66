"""Parametric charts with analytic or finite-difference jets.

A chart is a smooth map from a rectangular parameter box into Euclidean
space.  Geometry routines consume positions together with first and second
(occasionally third) parameter derivatives; charts may supply those
analytically or fall back to central differences of the map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AxisSpec:
    """One parameter axis of a chart domain.

    ``spectral`` marks axes on which sampled fields should be differentiated
    by FFT rather than finite differences (used by sphere charts, where the
    inverse metric amplifies azimuthal stencil error near the poles).
    """

    lo: float
    hi: float
    periodic: bool = False
    rule: str = "auto"
    spectral: bool = False

    @property
    def extent(self) -> float:
        return self.hi - self.lo


class Chart:
    """A parametric patch u -> X(u) in R^m.

    Parameters
    ----------
    map_fn : callable
        Vectorized map, shape (N, n) -> (N, m).
    axes : sequence of AxisSpec
        Domain box with per-axis periodicity.
    dim_ambient : int
        Ambient dimension m.
    d1, d2, d3 : callables, optional
        Analytic jets with shapes (N, n, m), (N, n, n, m), (N, n, n, n, m).
        Missing jets are computed by central differences (step ``fd_step``,
        default 1e-4 of the axis extent).
    pole_reflections : dict, optional
        axis -> partner periodic axis.  Marks chart boundaries where the
        surface continues smoothly through a coordinate degeneracy:
        X(reflected u_axis) == X(u_axis, u_partner + half period).  Grid
        differentiation uses this to build ghost layers.
    """

    def __init__(self, map_fn, axes, dim_ambient, d1=None, d2=None, d3=None,
                 fd_step=None, rank_tol=1e-8, pole_reflections=None, name=""):
        self._map = map_fn
        self.axes = tuple(axes)
        self.dim_domain = len(self.axes)
        self.dim_ambient = int(dim_ambient)
        self._d1 = d1
        self._d2 = d2
        self._d3 = d3
        self.fd_step = fd_step
        self.rank_tol = rank_tol
        self.pole_reflections = dict(pole_reflections or {})
        self.name = name

    # ------------------------------------------------------------------
    @property
    def jet_mode(self) -> str:
        return "analytic" if self._d1 is not None and self._d2 is not None \
            else "finite_difference"

    def _steps(self) -> np.ndarray:
        if self.fd_step is not None:
            return np.full(self.dim_domain, float(self.fd_step))
        return np.array([1e-4 * max(ax.extent, 1.0) for ax in self.axes])

    def position(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.asarray(self._map(u), dtype=float)

    def jacobian(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self._d1 is not None:
            return np.asarray(self._d1(u), dtype=float)
        h = self._steps()
        out = np.empty((u.shape[0], self.dim_domain, self.dim_ambient))
        for i in range(self.dim_domain):
            e = np.zeros(self.dim_domain)
            e[i] = h[i]
            out[:, i, :] = (self.position(u + e) - self.position(u - e)) / (2 * h[i])
        return out

    def hessian(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self._d2 is not None:
            return np.asarray(self._d2(u), dtype=float)
        h = self._steps()
        n, m = self.dim_domain, self.dim_ambient
        out = np.empty((u.shape[0], n, n, m))
        if self._d1 is not None:
            for i in range(n):
                e = np.zeros(n)
                e[i] = h[i]
                block = (self.jacobian(u + e) - self.jacobian(u - e)) / (2 * h[i])
                out[:, i, :, :] = block
            out = 0.5 * (out + out.transpose(0, 2, 1, 3))
            return out
        x0 = self.position(u)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h[i]
            out[:, i, i, :] = (self.position(u + ei) - 2 * x0
                               + self.position(u - ei)) / h[i] ** 2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = h[j]
                mixed = (self.position(u + ei + ej) - self.position(u + ei - ej)
                         - self.position(u - ei + ej) + self.position(u - ei - ej))
                out[:, i, j, :] = mixed / (4 * h[i] * h[j])
                out[:, j, i, :] = out[:, i, j, :]
        return out

    def third(self, u):
        """Third jets, or None when neither analytic d3 nor d2 is available."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self._d3 is not None:
            return np.asarray(self._d3(u), dtype=float)
        if self._d2 is None:
            return None
        h = self._steps()
        n, m = self.dim_domain, self.dim_ambient
        out = np.empty((u.shape[0], n, n, n, m))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h[i]
            out[:, i, :, :, :] = (self.hessian(u + e) - self.hessian(u - e)) / (2 * h[i])
        # Symmetrize over the first index against the (already symmetric) pair.
        out = (out + out.transpose(0, 2, 1, 3, 4) + out.transpose(0, 3, 2, 1, 4)) / 3.0
        return out


# ----------------------------------------------------------------------
# Trigonometric product charts: every ambient coordinate is
# scale * prod_k cos(c_k . u + p_k), which has closed-form jets of every
# order (each derivative bumps an offset by pi/2 and multiplies by a
# coefficient).  Covers circles, round spheres in hyperspherical angles,
# and flat Legendrian tori.
# ----------------------------------------------------------------------

class TrigChart(Chart):
    def __init__(self, coords, axes, fd_step=None, rank_tol=1e-8,
                 pole_reflections=None, name=""):
        """coords: list over ambient coordinates of (scale, factors) where
        factors is a list of (coeff_vector, offset)."""
        self._coords = [(float(s), [(np.asarray(c, dtype=float), float(p))
                                    for c, p in fs]) for s, fs in coords]
        super().__init__(self._map_impl, axes, len(self._coords),
                         d1=self._d1_impl, d2=self._d2_impl, d3=self._d3_impl,
                         fd_step=fd_step, rank_tol=rank_tol,
                         pole_reflections=pole_reflections, name=name)

    def _coord_partial(self, u, c_index, deriv_axes):
        """d^k X_c / du_{a1}..du_{ak} for one ambient coordinate, all nodes."""
        scale, factors = self._coords[c_index]
        K = len(factors)
        if K == 0:
            return np.zeros(u.shape[0]) if deriv_axes else np.full(u.shape[0], scale)
        # Leibniz: sum over assignments of derivative slots to factors.
        args = [u @ c + p for c, p in factors]
        total = np.zeros(u.shape[0])
        order = len(deriv_axes)
        if order == 0:
            prod = np.full(u.shape[0], scale)
            for a in args:
                prod = prod * np.cos(a)
            return prod
        for assign in np.ndindex(*([K] * order)):
            bumps = [0] * K
            coeff = 1.0
            ok = True
            for slot, k in enumerate(assign):
                axis = deriv_axes[slot]
                cvec = factors[k][0]
                if cvec[axis] == 0.0:
                    ok = False
                    break
                coeff *= cvec[axis]
                bumps[k] += 1
            if not ok:
                continue
            prod = np.full(u.shape[0], scale * coeff)
            for k in range(K):
                prod = prod * np.cos(args[k] + bumps[k] * (np.pi / 2.0))
            total = total + prod
        return total

    def _map_impl(self, u):
        out = np.empty((u.shape[0], self.dim_ambient))
        for c in range(self.dim_ambient):
            out[:, c] = self._coord_partial(u, c, ())
        return out

    def _d1_impl(self, u):
        n = self.dim_domain
        out = np.empty((u.shape[0], n, self.dim_ambient))
        for c in range(self.dim_ambient):
            for a in range(n):
                out[:, a, c] = self._coord_partial(u, c, (a,))
        return out

    def _d2_impl(self, u):
        n = self.dim_domain
        out = np.empty((u.shape[0], n, n, self.dim_ambient))
        for c in range(self.dim_ambient):
            for a in range(n):
                for b in range(a, n):
                    val = self._coord_partial(u, c, (a, b))
                    out[:, a, b, c] = val
                    out[:, b, a, c] = val
        return out

    def _d3_impl(self, u):
        n = self.dim_domain
        out = np.empty((u.shape[0], n, n, n, self.dim_ambient))
        for c in range(self.dim_ambient):
            for a in range(n):
                for b in range(a, n):
                    for e in range(b, n):
                        val = self._coord_partial(u, c, (a, b, e))
                        for idx in {(a, b, e), (a, e, b), (b, a, e),
                                    (b, e, a), (e, a, b), (e, b, a)}:
                            out[:, idx[0], idx[1], idx[2], c] = val
        return out


class AffineChart(Chart):
    """u -> offset + u @ basis, with exact jets (hessian zero)."""

    def __init__(self, basis, offset, axes, name=""):
        basis = np.asarray(basis, dtype=float)
        offset = np.asarray(offset, dtype=float)
        n, m = basis.shape

        def map_fn(u):
            return offset + u @ basis

        def d1(u):
            return np.broadcast_to(basis, (u.shape[0], n, m)).copy()

        def d2(u):
            return np.zeros((u.shape[0], n, n, m))

        def d3(u):
            return np.zeros((u.shape[0], n, n, n, m))

        super().__init__(map_fn, axes, m, d1=d1, d2=d2, d3=d3, name=name)
        self.basis = basis
        self.offset = offset


class ProductChart(Chart):
    """Cartesian product of charts: (u1, u2) -> (X1(u1), X2(u2))."""

    def __init__(self, factors, name=""):
        self.factors = list(factors)
        axes = tuple(ax for f in self.factors for ax in f.axes)
        m = sum(f.dim_ambient for f in self.factors)
        self._dom_slices = []
        self._amb_slices = []
        i = j = 0
        for f in self.factors:
            self._dom_slices.append(slice(i, i + f.dim_domain))
            self._amb_slices.append(slice(j, j + f.dim_ambient))
            i += f.dim_domain
            j += f.dim_ambient
        reflections = {}
        for f, ds in zip(self.factors, self._dom_slices):
            for ax, partner in f.pole_reflections.items():
                reflections[ds.start + ax] = ds.start + partner
        analytic = all(f.jet_mode == "analytic" for f in self.factors)
        super().__init__(self._map_impl, axes, m,
                         d1=self._d1_impl if analytic else None,
                         d2=self._d2_impl if analytic else None,
                         d3=self._d3_impl if analytic else None,
                         pole_reflections=reflections, name=name)

    def _map_impl(self, u):
        out = np.empty((u.shape[0], self.dim_ambient))
        for f, ds, asl in zip(self.factors, self._dom_slices, self._amb_slices):
            out[:, asl] = f.position(u[:, ds])
        return out

    def _d1_impl(self, u):
        out = np.zeros((u.shape[0], self.dim_domain, self.dim_ambient))
        for f, ds, asl in zip(self.factors, self._dom_slices, self._amb_slices):
            out[:, ds, asl] = f.jacobian(u[:, ds])
        return out

    def _d2_impl(self, u):
        out = np.zeros((u.shape[0], self.dim_domain, self.dim_domain,
                        self.dim_ambient))
        for f, ds, asl in zip(self.factors, self._dom_slices, self._amb_slices):
            out[:, ds, ds, asl] = f.hessian(u[:, ds])
        return out

    def _d3_impl(self, u):
        out = np.zeros((u.shape[0], self.dim_domain, self.dim_domain,
                        self.dim_domain, self.dim_ambient))
        for f, ds, asl in zip(self.factors, self._dom_slices, self._amb_slices):
            t = f.third(u[:, ds])
            if t is None:
                return None
            out[:, ds, ds, ds, asl] = t
        return out


def rescaled_chart(chart: Chart, x, t: float) -> Chart:
    """The chart u -> (X(u) - x) / sqrt(t)."""
    x = np.asarray(x, dtype=float)
    s = 1.0 / np.sqrt(float(t))

    def map_fn(u):
        return (chart.position(u) - x) * s

    def scale_jet(fn):
        def jet(u):
            val = fn(u)
            return None if val is None else val * s
        return jet

    return Chart(map_fn, chart.axes, chart.dim_ambient,
                 d1=scale_jet(chart.jacobian),
                 d2=scale_jet(chart.hessian),
                 d3=scale_jet(chart.third) if chart.jet_mode == "analytic" else None,
                 fd_step=chart.fd_step, rank_tol=chart.rank_tol,
                 pole_reflections=chart.pole_reflections,
                 name=chart.name + "_rescaled")


def perturbed_chart(chart: Chart, field_fn, s: float, field_d1=None) -> Chart:
    """The straight-line family member u -> X(u) + s * V(u).

    ``field_d1`` supplies the analytic parameter derivative of V when known;
    otherwise first jets fall back to finite differences of the map.
    """
    s = float(s)

    def map_fn(u):
        return chart.position(u) + s * field_fn(u)

    d1 = None
    if field_d1 is not None:
        def d1(u):
            return chart.jacobian(u) + s * field_d1(u)

    return Chart(map_fn, chart.axes, chart.dim_ambient, d1=d1,
                 fd_step=chart.fd_step, rank_tol=chart.rank_tol,
                 pole_reflections=chart.pole_reflections,
                 name=chart.name + "_perturbed")
