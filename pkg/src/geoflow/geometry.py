"""Discrete differential geometry of immersed structured grids.

An immersion is a structured grid of ambient positions F mapping an n-dim
parameter domain (n = 1 or 2) into flat ambient space, either Euclidean R^N
or a flat torus R^N modulo a period lattice. This module computes the induced
metric, tangent/normal projections, the ambient-valued second fundamental
form, and the mean curvature vector with centered finite differences.

Stencils are second order by default; fourth order is available on fully
periodic grids. Immersions that wind around the parameter torus (planes,
graph sheets, torus maps) carry a per-axis ambient offset so that wrapped
stencils see a smooth field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetricError

EUCLIDEAN = "euclidean"
FLAT_TORUS = "flat_torus"

# det(g) at or below this means the discrete map stopped being an immersion.
DET_G_FLOOR = 1e-14

TAU = 2.0 * math.pi


@dataclass(frozen=True)
class ParamGrid:
    """Structured parameter grid: per-axis point count, spacing, periodicity.

    Periodic axes cover [origin, origin + dims*spacing) without a duplicated
    endpoint; non-periodic axes include both endpoints and carry Dirichlet
    data in graph mode.
    """

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    periodic: tuple[bool, ...]
    origin: tuple[float, ...] = ()

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(h) for h in self.spacing)
        periodic = tuple(bool(p) for p in self.periodic)
        origin = tuple(float(o) for o in self.origin) if self.origin else (0.0,) * len(dims)
        if not 1 <= len(dims) <= 2:
            raise ValueError("parameter dimension must be 1 or 2")
        if any(d < 8 for d in dims):
            raise ValueError("every grid axis needs at least 8 points")
        if len(spacing) != len(dims) or len(periodic) != len(dims) or len(origin) != len(dims):
            raise ValueError("spacing/periodic/origin must match the number of axes")
        if any(h <= 0.0 for h in spacing):
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "periodic", periodic)
        object.__setattr__(self, "origin", origin)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def cell_volume(self) -> float:
        v = 1.0
        for h in self.spacing:
            v *= h
        return v

    def axis_period(self, axis: int) -> float:
        """Parameter period (periodic axis) or total extent (Dirichlet axis)."""
        m = self.dims[axis]
        return m * self.spacing[axis] if self.periodic[axis] else (m - 1) * self.spacing[axis]

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    def coord_grids(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.axis_coords(a) for a in range(self.n)], indexing="ij"))

    @classmethod
    def periodic_1d(cls, m: int, period: float = TAU, origin: float = 0.0) -> "ParamGrid":
        return cls((m,), (period / m,), (True,), (origin,))

    @classmethod
    def periodic_2d(cls, dims, periods=(TAU, TAU), origins=(0.0, 0.0)) -> "ParamGrid":
        m1, m2 = dims
        p1, p2 = periods
        return cls((m1, m2), (p1 / m1, p2 / m2), (True, True), tuple(origins))

    @classmethod
    def line(cls, m: int, lo: float, hi: float) -> "ParamGrid":
        """Non-periodic 1-d grid including both endpoints."""
        return cls((m,), ((hi - lo) / (m - 1),), (False,), (lo,))


@dataclass
class Immersion:
    """Grid of ambient positions F: parameter grid -> R^N (or flat torus).

    Positions are always stored unwrapped. ``winding[a]`` is the constant
    ambient offset picked up when the parameter wraps once around periodic
    axis ``a``; zero/None for closed immersions like circles and product tori.
    """

    grid: ParamGrid
    positions: np.ndarray
    ambient: str = EUCLIDEAN
    ambient_periods: tuple[float, ...] | None = None
    winding: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.shape[: self.grid.n] != self.grid.dims or pos.ndim != self.grid.n + 1:
            raise ValueError(f"positions shape {pos.shape} does not match grid {self.grid.dims}")
        if pos.shape[-1] < self.grid.n + 1:
            raise ValueError("ambient dimension must be at least n+1")
        if self.ambient not in (EUCLIDEAN, FLAT_TORUS):
            raise ValueError(f"unknown ambient kind {self.ambient!r}")
        if self.ambient == FLAT_TORUS:
            if self.ambient_periods is None or len(self.ambient_periods) != pos.shape[-1]:
                raise ValueError("flat torus ambient needs one period per ambient coordinate")
        if self.winding is not None:
            w = np.asarray(self.winding, dtype=np.float64)
            if w.shape != (self.grid.n, pos.shape[-1]):
                raise ValueError("winding must have shape (n, N)")
            object.__setattr__(self, "winding", w)
        object.__setattr__(self, "positions", pos)

    @property
    def ambient_dim(self) -> int:
        return self.positions.shape[-1]

    def winding_row(self, axis: int) -> np.ndarray | None:
        if self.winding is None:
            return None
        row = self.winding[axis]
        return row if np.any(row) else None

    def with_positions(self, positions: np.ndarray) -> "Immersion":
        return Immersion(self.grid, positions, self.ambient, self.ambient_periods, self.winding)


# ---------------------------------------------------------------------------
# Finite-difference stencils
# ---------------------------------------------------------------------------

def _shifted(arr: np.ndarray, axis: int, k: int, winding) -> np.ndarray:
    """arr sampled at index+k along a periodic axis, winding-corrected."""
    out = np.roll(arr, -k, axis=axis)
    if winding is not None and k != 0:
        sl = [slice(None)] * out.ndim
        sl[axis] = slice(out.shape[axis] - k, None) if k > 0 else slice(None, -k)
        out[tuple(sl)] = out[tuple(sl)] + (winding if k > 0 else -winding)
    return out


def deriv1(arr, axis, h, *, periodic=True, winding=None, order=2):
    """Centered first derivative along one grid axis."""
    if periodic:
        if order == 2:
            return (_shifted(arr, axis, 1, winding) - _shifted(arr, axis, -1, winding)) / (2.0 * h)
        if order == 4:
            return (
                -_shifted(arr, axis, 2, winding)
                + 8.0 * _shifted(arr, axis, 1, winding)
                - 8.0 * _shifted(arr, axis, -1, winding)
                + _shifted(arr, axis, -2, winding)
            ) / (12.0 * h)
        raise ValueError(f"unsupported stencil order {order}")
    if order != 2:
        raise ValueError("non-periodic axes support order 2 only")
    return np.gradient(arr, h, axis=axis, edge_order=2)


def deriv2(arr, axis, h, *, periodic=True, winding=None, order=2):
    """Centered second derivative along one grid axis."""
    h2 = h * h
    if periodic:
        if order == 2:
            return (_shifted(arr, axis, 1, winding) - 2.0 * arr + _shifted(arr, axis, -1, winding)) / h2
        if order == 4:
            return (
                -_shifted(arr, axis, 2, winding)
                + 16.0 * _shifted(arr, axis, 1, winding)
                - 30.0 * arr
                + 16.0 * _shifted(arr, axis, -1, winding)
                - _shifted(arr, axis, -2, winding)
            ) / (12.0 * h2)
        raise ValueError(f"unsupported stencil order {order}")
    if order != 2:
        raise ValueError("non-periodic axes support order 2 only")
    out = np.empty_like(arr)
    a = np.moveaxis(arr, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / h2
    o[0] = (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / h2
    o[-1] = (2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]) / h2
    return out


def deriv2_mixed(arr, axes, spacings, *, periodic, windings, order=2):
    """Mixed second derivative d^2/dx_a dx_b as composed first derivatives.

    The inner derivative of a winding-periodic field is plain periodic, so the
    outer stencil needs no winding correction.
    """
    a, b = axes
    inner = deriv1(arr, b, spacings[1], periodic=periodic[1], winding=windings[1], order=order)
    return deriv1(inner, a, spacings[0], periodic=periodic[0], winding=None, order=order)


def immersion_deriv1(imm: Immersion, axis: int, order=2) -> np.ndarray:
    g = imm.grid
    return deriv1(
        imm.positions, axis, g.spacing[axis],
        periodic=g.periodic[axis], winding=imm.winding_row(axis), order=order,
    )


def immersion_deriv2(imm: Immersion, axes: tuple[int, int], order=2) -> np.ndarray:
    g = imm.grid
    a, b = axes
    if a == b:
        return deriv2(
            imm.positions, a, g.spacing[a],
            periodic=g.periodic[a], winding=imm.winding_row(a), order=order,
        )
    return deriv2_mixed(
        imm.positions, (a, b), (g.spacing[a], g.spacing[b]),
        periodic=(g.periodic[a], g.periodic[b]),
        windings=(imm.winding_row(a), imm.winding_row(b)), order=order,
    )


# ---------------------------------------------------------------------------
# Metric and curvature fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryFields:
    """Per-point geometric data of an immersion.

    ``second_form`` is ambient-valued with shape dims + (n, n, N), symmetric
    in the two parameter slots and pointwise normal to the tangent space.
    ``mean_curvature`` is its metric trace, so H = g^{ij} II_ij holds exactly.
    """

    tangents: np.ndarray       # dims + (n, N)
    metric: np.ndarray         # dims + (n, n)
    metric_inv: np.ndarray     # dims + (n, n)
    sqrt_det_g: np.ndarray     # dims
    second_form: np.ndarray    # dims + (n, n, N)
    mean_curvature: np.ndarray  # dims + (N,)
    norm2_ii: np.ndarray       # dims
    norm2_h: np.ndarray        # dims


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...A,...A->...", a, b)


def _check_det(det: np.ndarray) -> None:
    if not np.all(np.isfinite(det)):
        raise DegenerateMetricError("non-finite metric determinant")
    dmin = float(det.min())
    if dmin <= DET_G_FLOOR:
        raise DegenerateMetricError(f"det g = {dmin:.3e} at or below floor {DET_G_FLOOR:.0e}")


def _metric_1d(t0):
    g = _dot(t0, t0)
    _check_det(g)
    return g


def _metric_2d(t0, t1):
    g11 = _dot(t0, t0)
    g12 = _dot(t0, t1)
    g22 = _dot(t1, t1)
    det = g11 * g22 - g12 * g12
    _check_det(det)
    return g11, g12, g22, det


def induced_metric(imm: Immersion, order: int = 2):
    """Per-point induced metric, inverse, and area element.

    Returns arrays of shape dims+(n,n), dims+(n,n), dims.
    """
    n = imm.grid.n
    if n == 1:
        t0 = immersion_deriv1(imm, 0, order)
        g = _metric_1d(t0)
        metric = g[..., None, None]
        inv = (1.0 / g)[..., None, None]
        return metric, inv, np.sqrt(g)
    t0 = immersion_deriv1(imm, 0, order)
    t1 = immersion_deriv1(imm, 1, order)
    g11, g12, g22, det = _metric_2d(t0, t1)
    metric = np.stack(
        [np.stack([g11, g12], axis=-1), np.stack([g12, g22], axis=-1)], axis=-2
    )
    inv = np.stack(
        [np.stack([g22, -g12], axis=-1), np.stack([-g12, g11], axis=-1)], axis=-2
    ) / det[..., None, None]
    return metric, inv, np.sqrt(det)


def volume(imm: Immersion, order: int = 2) -> float:
    """Quadrature volume: sum of sqrt(det g) times the parameter cell volume."""
    _, _, sqrt_det = induced_metric(imm, order)
    return float(sqrt_det.sum() * imm.grid.cell_volume)


def normal_project(imm: Immersion, index, vector, order: int = 2) -> np.ndarray:
    """Project an ambient vector onto the normal space at one grid point."""
    v = np.asarray(vector, dtype=np.float64)
    idx = (index,) if np.isscalar(index) else tuple(index)
    n = imm.grid.n
    if n == 1:
        t0 = immersion_deriv1(imm, 0, order)[idx]
        g = float(t0 @ t0)
        if g <= DET_G_FLOOR:
            raise DegenerateMetricError("degenerate tangent at the requested point")
        return v - (v @ t0) / g * t0
    t0 = immersion_deriv1(imm, 0, order)[idx]
    t1 = immersion_deriv1(imm, 1, order)[idx]
    g11, g12, g22 = float(t0 @ t0), float(t0 @ t1), float(t1 @ t1)
    det = g11 * g22 - g12 * g12
    if det <= DET_G_FLOOR:
        raise DegenerateMetricError("degenerate metric at the requested point")
    c0, c1 = float(v @ t0), float(v @ t1)
    a0 = (g22 * c0 - g12 * c1) / det
    a1 = (-g12 * c0 + g11 * c1) / det
    return v - a0 * t0 - a1 * t1


def mean_curvature_velocity(imm: Immersion, order: int = 2, project: bool = True) -> np.ndarray:
    """g^{ij} d2F/dx^i dx^j, normal-projected when ``project`` is set.

    With projection this is the mean curvature vector H; without it, the
    coordinate Laplacian used by the torus map-graph flow.
    """
    n = imm.grid.n
    if n == 1:
        t0 = immersion_deriv1(imm, 0, order)
        g = _metric_1d(t0)
        w = immersion_deriv2(imm, (0, 0), order) / g[..., None]
        if project:
            w = w - (_dot(w, t0) / g)[..., None] * t0
        return w
    t0 = immersion_deriv1(imm, 0, order)
    t1 = immersion_deriv1(imm, 1, order)
    g11, g12, g22, det = _metric_2d(t0, t1)
    i11 = g22 / det
    i12 = -g12 / det
    i22 = g11 / det
    d00 = immersion_deriv2(imm, (0, 0), order)
    d11 = immersion_deriv2(imm, (1, 1), order)
    d01 = immersion_deriv2(imm, (0, 1), order)
    w = i11[..., None] * d00 + 2.0 * i12[..., None] * d01 + i22[..., None] * d11
    if project:
        c0 = _dot(w, t0)
        c1 = _dot(w, t1)
        a0 = i11 * c0 + i12 * c1
        a1 = i12 * c0 + i22 * c1
        w = w - a0[..., None] * t0 - a1[..., None] * t1
    return w


def geometry_fields(imm: Immersion, order: int = 2) -> GeometryFields:
    """Full curvature data: metric, second fundamental form, H, |II|^2, |H|^2."""
    n = imm.grid.n
    if n == 1:
        t0 = immersion_deriv1(imm, 0, order)
        g = _metric_1d(t0)
        d00 = immersion_deriv2(imm, (0, 0), order)
        ii = d00 - (_dot(d00, t0) / g)[..., None] * t0
        h = ii / g[..., None]
        norm2_ii = _dot(ii, ii) / (g * g)
        norm2_h = _dot(h, h)
        return GeometryFields(
            tangents=t0[..., None, :],
            metric=g[..., None, None],
            metric_inv=(1.0 / g)[..., None, None],
            sqrt_det_g=np.sqrt(g),
            second_form=ii[..., None, None, :],
            mean_curvature=h,
            norm2_ii=norm2_ii,
            norm2_h=norm2_h,
        )

    t0 = immersion_deriv1(imm, 0, order)
    t1 = immersion_deriv1(imm, 1, order)
    g11, g12, g22, det = _metric_2d(t0, t1)
    i11 = g22 / det
    i12 = -g12 / det
    i22 = g11 / det
    d00 = immersion_deriv2(imm, (0, 0), order)
    d11 = immersion_deriv2(imm, (1, 1), order)
    d01 = immersion_deriv2(imm, (0, 1), order)

    def proj_normal(v):
        c0 = _dot(v, t0)
        c1 = _dot(v, t1)
        a0 = i11 * c0 + i12 * c1
        a1 = i12 * c0 + i22 * c1
        return v - a0[..., None] * t0 - a1[..., None] * t1

    ii00 = proj_normal(d00)
    ii11 = proj_normal(d11)
    ii01 = proj_normal(d01)
    h = i11[..., None] * ii00 + 2.0 * i12[..., None] * ii01 + i22[..., None] * ii11

    a0000 = _dot(ii00, ii00)
    a1111 = _dot(ii11, ii11)
    a0101 = _dot(ii01, ii01)
    a0011 = _dot(ii00, ii11)
    a0001 = _dot(ii00, ii01)
    a0111 = _dot(ii11, ii01)
    norm2_ii = (
        i11 * i11 * a0000
        + i22 * i22 * a1111
        + 2.0 * i11 * i22 * a0101
        + 2.0 * i12 * i12 * (a0011 + a0101)
        + 4.0 * i12 * (i11 * a0001 + i22 * a0111)
    )
    norm2_h = _dot(h, h)

    metric = np.stack(
        [np.stack([g11, g12], axis=-1), np.stack([g12, g22], axis=-1)], axis=-2
    )
    inv = np.stack(
        [np.stack([i11, i12], axis=-1), np.stack([i12, i22], axis=-1)], axis=-2
    )
    second = np.stack(
        [np.stack([ii00, ii01], axis=-2), np.stack([ii01, ii11], axis=-2)], axis=-3
    )
    return GeometryFields(
        tangents=np.stack([t0, t1], axis=-2),
        metric=metric,
        metric_inv=inv,
        sqrt_det_g=np.sqrt(det),
        second_form=second,
        mean_curvature=h,
        norm2_ii=norm2_ii,
        norm2_h=norm2_h,
    )


def integral(imm: Immersion, density: np.ndarray, sqrt_det_g: np.ndarray) -> float:
    """Surface integral of a per-point density against the area element."""
    return float((density * sqrt_det_g).sum() * imm.grid.cell_volume)


def laplace_beltrami(phi: np.ndarray, imm: Immersion, order: int = 2,
                     metric_inv: np.ndarray | None = None,
                     sqrt_det_g: np.ndarray | None = None) -> np.ndarray:
    """Laplace-Beltrami of a scalar grid field in conservative form."""
    g = imm.grid
    if metric_inv is None or sqrt_det_g is None:
        _, metric_inv, sqrt_det_g = induced_metric(imm, order)
    grads = [
        deriv1(phi, a, g.spacing[a], periodic=g.periodic[a], winding=None, order=order)
        for a in range(g.n)
    ]
    out = np.zeros_like(phi)
    for a in range(g.n):
        flux = sqrt_det_g * sum(metric_inv[..., a, b] * grads[b] for b in range(g.n))
        out += deriv1(flux, a, g.spacing[a], periodic=g.periodic[a], winding=None, order=order)
    return out / sqrt_det_g
