"""Explicit time integration of the mean curvature flow.

Three modes share one RK4 core:

* parametric: dF/dt = H for a general immersion in any codimension,
* graph: the quasi-linear scalar equation f_t = sqrt(1+|Df|^2) div(Df/sqrt(...)),
* map-graph: a torus map x -> x + u(x) flowed so that its graph in the flat
  4-torus moves with normal velocity H (tangential motion absorbed by keeping
  the first factor parametrized).

Steps are CFL-limited: dt = cfl * min_i h_i^2 / (2n (1 + sup|II|^2 * scale)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import (
    DegenerateMetricError,
    GraphConditionError,
    StepRejectedError,
)
from .geometry import (
    FLAT_TORUS,
    GeometryFields,
    Immersion,
    ParamGrid,
    deriv1,
    deriv2,
    deriv2_mixed,
    geometry_fields,
    mean_curvature_velocity,
)
from .track import SpaceTimeTrack

STOP_HORIZON = "horizon"
STOP_SINGULARITY = "singularity_ceiling"
STOP_VOLUME = "volume_floor"
STOP_ENERGY = "energy_floor"
STOP_MAX_STEPS = "max_steps"
STOP_STEP_FAILED = "step_failed"
STOP_GRAPH = "graph_condition"


@dataclass(frozen=True)
class SolverConfig:
    """Explicit-stepping policy: CFL constant, dt bounds, stop conditions."""

    cfl: float = 0.2
    dt_floor: float = 1e-12
    dt_ceiling: float = 1e-2
    max_steps: int = 500_000
    stop_time: float | None = None
    sup_ii_ceiling: float = 1e6
    volume_floor_frac: float = 1e-8
    energy_floor: float | None = None
    snapshot_every: int = 100
    order: int = 2
    curvature_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must lie in (0, 1]")
        if self.dt_floor <= 0 or self.dt_floor >= self.dt_ceiling:
            raise ValueError("need 0 < dt_floor < dt_ceiling")
        if self.snapshot_every < 1 or self.max_steps < 1:
            raise ValueError("snapshot_every and max_steps must be >= 1")
        if self.order not in (2, 4):
            raise ValueError("stencil order must be 2 or 4")


@dataclass
class FlowState:
    """One accepted point of a flow: immersion, time, step counter."""

    imm: Immersion
    time: float = 0.0
    step: int = 0
    last_dt: float | None = None


def adaptive_dt(geom: GeometryFields | float, grid: ParamGrid, config: SolverConfig) -> float:
    """CFL step from the current curvature level, clamped to config bounds."""
    sup_ii = float(geom.norm2_ii.max()) if isinstance(geom, GeometryFields) else float(geom)
    h2 = min(h * h for h in grid.spacing)
    dt = config.cfl * h2 / (2.0 * grid.n * (1.0 + sup_ii * config.curvature_scale))
    return min(max(dt, config.dt_floor), config.dt_ceiling)


def _rk4_positions(pos: np.ndarray, dt: float, rhs: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    k1 = rhs(pos)
    k2 = rhs(pos + (0.5 * dt) * k1)
    k3 = rhs(pos + (0.5 * dt) * k2)
    k4 = rhs(pos + dt * k3)
    new = pos + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise StepRejectedError("non-finite positions after RK4 step")
    return new


def mcf_step_parametric(state: FlowState, dt: float, *, order: int = 2,
                        project: bool = True) -> FlowState:
    """One RK4 step of dF/dt = H (normal velocity by construction)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    imm = state.imm

    def rhs(pos):
        return mean_curvature_velocity(imm.with_positions(pos), order=order, project=project)

    new_pos = _rk4_positions(imm.positions, dt, rhs)
    return FlowState(imm.with_positions(new_pos), state.time + dt, state.step + 1, dt)


def run_flow(initial: FlowState, config: SolverConfig, *,
             velocity: Callable[[Immersion], np.ndarray] | None = None,
             graph_check: Callable[[Immersion], None] | None = None) -> SpaceTimeTrack:
    """March the flow, recording snapshots at the configured cadence.

    Stops on: time horizon, sup|II|^2 ceiling, volume floor, the optional
    integral |H|^2 energy floor, max steps, a failed step, or a failed graph
    condition. Step failures are recorded as the stop reason, never raised.
    """
    track = SpaceTimeTrack()
    state = initial
    vol0 = None
    stop = None
    cell = state.imm.grid.cell_volume

    while True:
        try:
            fields = geometry_fields(state.imm, order=config.order)
            if graph_check is not None:
                graph_check(state.imm)
        except (DegenerateMetricError, GraphConditionError) as exc:
            stop = (STOP_GRAPH if isinstance(exc, GraphConditionError)
                    else f"{STOP_STEP_FAILED}:{exc.__class__.__name__}")
            break

        sup_ii = float(fields.norm2_ii.max())
        vol = float(fields.sqrt_det_g.sum() * cell)
        energy = float((fields.norm2_h * fields.sqrt_det_g).sum() * cell)
        if vol0 is None:
            vol0 = vol

        if state.step % config.snapshot_every == 0:
            track.append(state.time, state.imm, state.step)

        if sup_ii >= config.sup_ii_ceiling:
            stop = STOP_SINGULARITY
            break
        if vol <= config.volume_floor_frac * vol0:
            stop = STOP_VOLUME
            break
        if config.energy_floor is not None and energy < config.energy_floor:
            stop = STOP_ENERGY
            break
        if config.stop_time is not None and state.time >= config.stop_time * (1.0 - 1e-14):
            stop = STOP_HORIZON
            break
        if state.step >= config.max_steps:
            stop = STOP_MAX_STEPS
            break

        dt = adaptive_dt(sup_ii, state.imm.grid, config)
        if config.stop_time is not None:
            dt = min(dt, config.stop_time - state.time)
        try:
            if velocity is None:
                state = mcf_step_parametric(state, dt, order=config.order)
            else:
                imm = state.imm

                def rhs(pos):
                    return velocity(imm.with_positions(pos))

                new_pos = _rk4_positions(imm.positions, dt, rhs)
                state = FlowState(imm.with_positions(new_pos), state.time + dt,
                                  state.step + 1, dt)
        except (StepRejectedError, DegenerateMetricError) as exc:
            stop = f"{STOP_STEP_FAILED}:{exc.__class__.__name__}"
            break

    if not track.steps or track.steps[-1] != state.step:
        track.append(state.time, state.imm, state.step)
    track.stop_reason = stop
    return track


# ---------------------------------------------------------------------------
# Scalar graph mode
# ---------------------------------------------------------------------------

@dataclass
class DirichletBoundary:
    """Time-dependent Dirichlet data for the non-periodic axes of a graph.

    ``value_fn(t, coords)`` receives the coordinate arrays of one boundary
    slice and returns the imposed values there.
    """

    value_fn: Callable

    def impose(self, f: np.ndarray, grid: ParamGrid, t: float) -> np.ndarray:
        for axis in range(grid.n):
            if grid.periodic[axis]:
                continue
            for edge in (0, -1):
                sl = [slice(None)] * grid.n
                sl[axis] = edge
                coords = tuple(c[tuple(sl)] for c in _coord_cache(grid))
                f[tuple(sl)] = self.value_fn(t, *coords)
        return f


_COORDS: dict[tuple, tuple[np.ndarray, ...]] = {}


def _coord_cache(grid: ParamGrid):
    key = (grid.dims, grid.spacing, grid.origin)
    if key not in _COORDS:
        _COORDS[key] = grid.coord_grids()
    return _COORDS[key]


def graph_rhs(f: np.ndarray, grid: ParamGrid, order: int = 2) -> np.ndarray:
    """g^{ij} f_ij, the graph-flow velocity sqrt(1+|Df|^2) div(Df/sqrt(...))."""
    if grid.n == 1:
        fx = deriv1(f, 0, grid.spacing[0], periodic=grid.periodic[0], order=order)
        fxx = deriv2(f, 0, grid.spacing[0], periodic=grid.periodic[0], order=order)
        return fxx / (1.0 + fx * fx)
    hx, hy = grid.spacing
    px, py = grid.periodic
    fx = deriv1(f, 0, hx, periodic=px, order=order)
    fy = deriv1(f, 1, hy, periodic=py, order=order)
    fxx = deriv2(f, 0, hx, periodic=px, order=order)
    fyy = deriv2(f, 1, hy, periodic=py, order=order)
    fxy = deriv2_mixed(f, (0, 1), (hx, hy), periodic=(px, py), windings=(None, None), order=order)
    w2 = 1.0 + fx * fx + fy * fy
    return ((1.0 + fy * fy) * fxx - 2.0 * fx * fy * fxy + (1.0 + fx * fx) * fyy) / w2


def graph_sup_ii(f: np.ndarray, grid: ParamGrid, order: int = 2) -> float:
    """sup |II|^2 of the graph of f (used for the CFL bound)."""
    if grid.n == 1:
        fx = deriv1(f, 0, grid.spacing[0], periodic=grid.periodic[0], order=order)
        fxx = deriv2(f, 0, grid.spacing[0], periodic=grid.periodic[0], order=order)
        k = fxx / (1.0 + fx * fx) ** 1.5
        return float((k * k).max())
    hx, hy = grid.spacing
    px, py = grid.periodic
    fx = deriv1(f, 0, hx, periodic=px, order=order)
    fy = deriv1(f, 1, hy, periodic=py, order=order)
    fxx = deriv2(f, 0, hx, periodic=px, order=order)
    fyy = deriv2(f, 1, hy, periodic=py, order=order)
    fxy = deriv2_mixed(f, (0, 1), (hx, hy), periodic=(px, py), windings=(None, None), order=order)
    w2 = 1.0 + fx * fx + fy * fy
    i11 = (1.0 + fy * fy) / w2
    i12 = -fx * fy / w2
    i22 = (1.0 + fx * fx) / w2
    # |II|^2 = g^{ik} g^{jl} f_ij f_kl / W^2 for graphs (unit normal component)
    norm2 = (
        i11 * i11 * fxx * fxx
        + i22 * i22 * fyy * fyy
        + 2.0 * i11 * i22 * fxy * fxy
        + 2.0 * i12 * i12 * (fxx * fyy + fxy * fxy)
        + 4.0 * i12 * (i11 * fxx * fxy + i22 * fyy * fxy)
    ) / w2
    return float(norm2.max())


def graph_mcf_step(f: np.ndarray, grid: ParamGrid, dt: float, t: float = 0.0,
                   boundary: DirichletBoundary | None = None, order: int = 2) -> np.ndarray:
    """One RK4 step of the scalar graph equation with Dirichlet data.

    Boundary values are re-imposed at each stage time and at t + dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")

    def stage(fs, ts):
        if boundary is not None:
            boundary.impose(fs, grid, ts)
        return graph_rhs(fs, grid, order)

    f0 = np.array(f, dtype=np.float64)
    k1 = stage(f0, t)
    k2 = stage(f0 + (0.5 * dt) * k1, t + 0.5 * dt)
    k3 = stage(f0 + (0.5 * dt) * k2, t + 0.5 * dt)
    k4 = stage(f0 + dt * k3, t + dt)
    new = f0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if boundary is not None:
        boundary.impose(new, grid, t + dt)
    if not np.all(np.isfinite(new)):
        raise StepRejectedError("non-finite graph values after RK4 step")
    return new


@dataclass
class GraphTrack:
    grid: ParamGrid
    times: list[float] = field(default_factory=list)
    frames: list[np.ndarray] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    stop_reason: str | None = None


def run_graph_flow(f0: np.ndarray, grid: ParamGrid, config: SolverConfig,
                   boundary: DirichletBoundary | None = None) -> GraphTrack:
    f = np.array(f0, dtype=np.float64)
    if boundary is not None:
        boundary.impose(f, grid, 0.0)
    t = 0.0
    step = 0
    track = GraphTrack(grid)
    stop = None
    while True:
        sup_ii = graph_sup_ii(f, grid, config.order)
        if step % config.snapshot_every == 0:
            track.times.append(t)
            track.frames.append(f.copy())
            track.steps.append(step)
        if sup_ii >= config.sup_ii_ceiling:
            stop = STOP_SINGULARITY
            break
        if config.stop_time is not None and t >= config.stop_time * (1.0 - 1e-14):
            stop = STOP_HORIZON
            break
        if step >= config.max_steps:
            stop = STOP_MAX_STEPS
            break
        dt = adaptive_dt(sup_ii, grid, config)
        if config.stop_time is not None:
            dt = min(dt, config.stop_time - t)
        try:
            f = graph_mcf_step(f, grid, dt, t, boundary, config.order)
        except StepRejectedError:
            stop = f"{STOP_STEP_FAILED}:StepRejectedError"
            break
        t += dt
        step += 1
    if not track.steps or track.steps[-1] != step:
        track.times.append(t)
        track.frames.append(f.copy())
        track.steps.append(step)
    track.stop_reason = stop
    return track


# ---------------------------------------------------------------------------
# Torus map-graph mode
# ---------------------------------------------------------------------------

def torus_map_graph_immersion(u: np.ndarray, grid: ParamGrid,
                              displacement_winding: np.ndarray | None = None) -> Immersion:
    """Graph of x -> x + u(x) in the flat 4-torus T^2 x T^2.

    ``displacement_winding[a]`` is how u shifts per wrap of parameter axis a
    (zero for honest doubly periodic displacements).
    """
    if grid.n != 2 or not all(grid.periodic):
        raise ValueError("map-graph mode needs a fully periodic 2-d grid")
    x, y = _coord_cache(grid)
    u = np.asarray(u, dtype=np.float64)
    pos = np.stack([x, y, x + u[..., 0], y + u[..., 1]], axis=-1)
    p0, p1 = grid.axis_period(0), grid.axis_period(1)
    dw = np.zeros((2, 2)) if displacement_winding is None else np.asarray(displacement_winding, float)
    winding = np.array([
        [p0, 0.0, p0 + dw[0, 0], dw[0, 1]],
        [0.0, p1, dw[1, 0], p1 + dw[1, 1]],
    ])
    return Immersion(grid, pos, FLAT_TORUS, (p0, p1, p0, p1), winding)


def map_displacement(imm: Immersion) -> np.ndarray:
    """Recover u from a map-graph immersion (second factor minus first)."""
    return imm.positions[..., 2:] - imm.positions[..., :2]


def map_graph_velocity(imm: Immersion, order: int = 4) -> np.ndarray:
    """Velocity (0, 0, g^{ij} d_ij f): moves the graph with normal speed H.

    The first-factor components are analytically zero for graph immersions
    and are pinned to zero to keep the parametrization exactly graphical.
    """
    w = mean_curvature_velocity(imm, order=order, project=False)
    w[..., :2] = 0.0
    return w


def map_graph_jacobian_det(imm: Immersion, order: int = 4) -> np.ndarray:
    """det Df of the underlying torus map f = second factor of the graph."""
    g = imm.grid
    f = imm.positions[..., 2:]
    w0 = imm.winding_row(0)
    w1 = imm.winding_row(1)
    d0 = deriv1(f, 0, g.spacing[0], periodic=True, winding=None if w0 is None else w0[2:], order=order)
    d1 = deriv1(f, 1, g.spacing[1], periodic=True, winding=None if w1 is None else w1[2:], order=order)
    return d0[..., 0] * d1[..., 1] - d0[..., 1] * d1[..., 0]


def _graph_condition(imm: Immersion, order: int) -> None:
    det = map_graph_jacobian_det(imm, order)
    if float(det.min()) <= 1e-10:
        raise GraphConditionError("torus-map Jacobian determinant reached zero")


def map_graph_mcf_step(u: np.ndarray, grid: ParamGrid, dt: float, *,
                       displacement_winding: np.ndarray | None = None,
                       order: int = 4) -> np.ndarray:
    """One RK4 step of the torus map-graph flow, in displacement form."""
    imm = torus_map_graph_immersion(u, grid, displacement_winding)

    def rhs(pos):
        return map_graph_velocity(imm.with_positions(pos), order=order)

    new_pos = _rk4_positions(imm.positions, dt, rhs)
    return map_displacement(imm.with_positions(new_pos))


def run_map_graph_flow(u0: np.ndarray, grid: ParamGrid, config: SolverConfig,
                       displacement_winding: np.ndarray | None = None) -> SpaceTimeTrack:
    """Flow a torus map and return the track of its graph immersions."""
    imm0 = torus_map_graph_immersion(u0, grid, displacement_winding)
    return run_flow(
        FlowState(imm0),
        config,
        velocity=lambda imm: map_graph_velocity(imm, order=config.order),
        graph_check=lambda imm: _graph_condition(imm, config.order),
    )
