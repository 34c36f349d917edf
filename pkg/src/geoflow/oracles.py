"""Closed-form solutions used as ground truth, plus initial-data factories.

Covers the shrinking sphere/circle family, the product-of-circles torus in
R^4 (factor-wise circle law), the translating grim reaper graph, and the
self-shrinker relation H = F^perp / (2s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PastExtinctionError
from .geometry import (
    EUCLIDEAN,
    TAU,
    Immersion,
    ParamGrid,
    geometry_fields,
    normal_project,
)
from .track import SpaceTimeTrack


@dataclass(frozen=True)
class ShrinkingSphereParams:
    """Round S^n of initial radius r0 shrinking in R^N."""

    r0: float
    n: int = 1
    ambient_dim: int = 2

    def __post_init__(self):
        if self.r0 <= 0:
            raise ValueError("initial radius must be positive")
        if self.n < 1 or self.ambient_dim <= self.n:
            raise ValueError("need ambient_dim > n >= 1")

    @property
    def extinction_time(self) -> float:
        return self.r0 * self.r0 / (2.0 * self.n)


def shrinking_radius(params: ShrinkingSphereParams, t: float) -> float:
    """Radius sqrt(r0^2 - 2nt) of the round shrinking solution."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    t0 = params.extinction_time
    if t >= t0:
        raise PastExtinctionError(f"t = {t} is at or past extinction t0 = {t0}")
    return math.sqrt(params.r0 * params.r0 - 2.0 * params.n * t)


# ---------------------------------------------------------------------------
# Initial-data factories
# ---------------------------------------------------------------------------

def circle_immersion(r: float, m: int, ambient_dim: int = 2, center=None) -> Immersion:
    """Round circle of radius r in the first two coordinates of R^N."""
    grid = ParamGrid.periodic_1d(m)
    theta = grid.axis_coords(0)
    pos = np.zeros((m, ambient_dim))
    pos[:, 0] = r * np.cos(theta)
    pos[:, 1] = r * np.sin(theta)
    if center is not None:
        pos += np.asarray(center, dtype=np.float64)
    return Immersion(grid, pos)


def ellipse_immersion(a: float, b: float, m: int, ambient_dim: int = 2) -> Immersion:
    grid = ParamGrid.periodic_1d(m)
    theta = grid.axis_coords(0)
    pos = np.zeros((m, ambient_dim))
    pos[:, 0] = a * np.cos(theta)
    pos[:, 1] = b * np.sin(theta)
    return Immersion(grid, pos)


def product_torus_immersion(r1: float, r2: float, dims) -> Immersion:
    """F = (r1 cos x, r1 sin x, r2 cos y, r2 sin y) in R^4."""
    grid = ParamGrid.periodic_2d(dims)
    x, y = grid.coord_grids()
    pos = np.stack([r1 * np.cos(x), r1 * np.sin(x), r2 * np.cos(y), r2 * np.sin(y)], axis=-1)
    return Immersion(grid, pos)


def plane_patch_immersion(side: float, dims, ambient_dim: int = 3,
                          height: float = 0.0) -> Immersion:
    """Flat square sheet z = height, centered at the origin, grid-periodic.

    The parameter grid is periodic with an ambient winding of one side length
    per wrap, so stencils see the unbounded plane.
    """
    grid = ParamGrid.periodic_2d(dims, periods=(side, side), origins=(-side / 2, -side / 2))
    x, y = grid.coord_grids()
    pos = np.zeros(grid.dims + (ambient_dim,))
    pos[..., 0] = x
    pos[..., 1] = y
    pos[..., 2] = height
    winding = np.zeros((2, ambient_dim))
    winding[0, 0] = side
    winding[1, 1] = side
    return Immersion(grid, pos, winding=winding)


def curve_graph_immersion(f: np.ndarray, grid: ParamGrid, ambient_dim: int = 2) -> Immersion:
    """1-d graph curve (x, f(x)); periodic axes get an x-winding."""
    x = grid.axis_coords(0)
    pos = np.zeros((grid.dims[0], ambient_dim))
    pos[:, 0] = x
    pos[:, 1] = np.asarray(f, dtype=np.float64)
    winding = None
    if grid.periodic[0]:
        winding = np.zeros((1, ambient_dim))
        winding[0, 0] = grid.axis_period(0)
    return Immersion(grid, pos, winding=winding)


# ---------------------------------------------------------------------------
# Exact tracks
# ---------------------------------------------------------------------------

def _cadence_times(cadence: float, horizon: float) -> np.ndarray:
    if cadence <= 0 or horizon <= 0:
        raise ValueError("cadence and horizon must be positive")
    count = int(math.floor(horizon / cadence + 1e-12)) + 1
    return np.minimum(cadence * np.arange(count), horizon)


def exact_circle_track(r0: float, ambient_dim: int, m: int, cadence: float,
                       horizon: float, times=None) -> SpaceTimeTrack:
    """Analytic shrinking circle: machine-exact radii sqrt(r0^2 - 2t)."""
    params = ShrinkingSphereParams(r0, 1, ambient_dim)
    tlist = np.asarray(times, dtype=np.float64) if times is not None else _cadence_times(cadence, horizon)
    if tlist[-1] >= params.extinction_time:
        raise PastExtinctionError("horizon reaches the extinction time")
    base = circle_immersion(1.0, m, ambient_dim)
    track = SpaceTimeTrack()
    for t in tlist:
        rho = shrinking_radius(params, float(t))
        track.append(float(t), base.with_positions(rho * base.positions))
    track.stop_reason = "horizon"
    return track


def exact_product_torus_track(r1: float, r2: float, dims, cadence: float,
                              horizon: float, times=None) -> SpaceTimeTrack:
    """Analytic product-torus flow: each factor follows the circle law."""
    t_ext = min(r1 * r1, r2 * r2) / 2.0
    tlist = np.asarray(times, dtype=np.float64) if times is not None else _cadence_times(cadence, horizon)
    if tlist[-1] >= t_ext:
        raise PastExtinctionError("horizon reaches the smaller factor's extinction")
    track = SpaceTimeTrack()
    for t in tlist:
        rho1 = math.sqrt(r1 * r1 - 2.0 * t)
        rho2 = math.sqrt(r2 * r2 - 2.0 * t)
        track.append(float(t), product_torus_immersion(rho1, rho2, dims))
    track.stop_reason = "horizon"
    return track


def grim_reaper(x, t):
    """Translating graph soliton f(x, t) = t - log cos x on (-pi/2, pi/2)."""
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x_arr) >= math.pi / 2):
        raise DomainError("grim reaper profile needs |x| < pi/2")
    return t - np.log(np.cos(x_arr))


def self_shrinker_residual(imm: Immersion, s: float, order: int = 2) -> float:
    """sup over points of |H - F^perp / (2s)| for a rescaled-time slice s < 0."""
    if s >= 0:
        raise ValueError("self-shrinker parameter s must be negative")
    fields = geometry_fields(imm, order)
    pos = imm.positions
    n = imm.grid.n
    tang = fields.tangents
    inv = fields.metric_inv
    c = np.einsum("...A,...kA->...k", pos, tang)
    a = np.einsum("...kl,...k->...l", inv, c)
    f_perp = pos - np.einsum("...l,...lA->...A", a, tang)
    resid = fields.mean_curvature - f_perp / (2.0 * s)
    return float(np.sqrt((resid * resid).sum(axis=-1)).max())


__all__ = [
    "ShrinkingSphereParams",
    "shrinking_radius",
    "circle_immersion",
    "ellipse_immersion",
    "product_torus_immersion",
    "plane_patch_immersion",
    "curve_graph_immersion",
    "exact_circle_track",
    "exact_product_torus_track",
    "grim_reaper",
    "self_shrinker_residual",
]
