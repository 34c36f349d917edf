"""Space-time tracks and their binary on-disk format.

A track is an ordered sequence of (time, immersion) snapshots sharing one
grid and ambient. The file format (magic ``MCFT``, little-endian throughout)
is self-describing enough to rebuild the immersions:

    magic      4 bytes  b"MCFT"
    version    u32      currently 1
    n          u32      parameter dimension
    N          u32      ambient dimension
    grid       n*u32 dims, n*f64 spacing, n*f64 origin, n*u8 periodic flags
    ambient    u32 kind (0 Euclidean, 1 flat torus), N*f64 periods
               (zeros for Euclidean), n*N*f64 winding
    count      u64      snapshot count
    snapshots  per snapshot: f64 time, then row-major point positions (f64)

Write -> read -> write is byte-identical.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptTrackError
from .geometry import EUCLIDEAN, FLAT_TORUS, Immersion, ParamGrid

MAGIC = b"MCFT"
VERSION = 1

_AMBIENT_CODE = {EUCLIDEAN: 0, FLAT_TORUS: 1}
_AMBIENT_NAME = {0: EUCLIDEAN, 1: FLAT_TORUS}


@dataclass
class SpaceTimeTrack:
    """Ordered (time, immersion) snapshots of one flow."""

    times: list[float] = field(default_factory=list)
    immersions: list[Immersion] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    stop_reason: str | None = None

    def append(self, t: float, imm: Immersion, step: int = -1) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("snapshot times must be strictly increasing")
        if self.immersions:
            first = self.immersions[0]
            if imm.grid.dims != first.grid.dims or imm.ambient != first.ambient:
                raise ValueError("all snapshots must share grid topology and ambient")
        self.times.append(float(t))
        self.immersions.append(imm)
        self.steps.append(int(step))

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.immersions))

    @property
    def grid(self) -> ParamGrid:
        return self.immersions[0].grid

    def step_gaps(self) -> list[int]:
        """Accepted-step counts between consecutive snapshots (1 if unknown)."""
        gaps = []
        for a, b in zip(self.steps, self.steps[1:]):
            gaps.append(b - a if a >= 0 and b > a else 1)
        return gaps


def _pack(fmt: str, *vals) -> bytes:
    return struct.pack("<" + fmt, *vals)


def track_bytes(track: SpaceTimeTrack) -> bytes:
    if not track.immersions:
        raise ValueError("cannot serialize an empty track")
    imm0 = track.immersions[0]
    grid = imm0.grid
    n = grid.n
    ambient_dim = imm0.ambient_dim
    parts = [MAGIC, _pack("III", VERSION, n, ambient_dim)]
    parts.append(_pack(f"{n}I", *grid.dims))
    parts.append(_pack(f"{n}d", *grid.spacing))
    parts.append(_pack(f"{n}d", *grid.origin))
    parts.append(_pack(f"{n}B", *[1 if p else 0 for p in grid.periodic]))
    parts.append(_pack("I", _AMBIENT_CODE[imm0.ambient]))
    periods = imm0.ambient_periods or (0.0,) * ambient_dim
    parts.append(_pack(f"{ambient_dim}d", *periods))
    winding = imm0.winding if imm0.winding is not None else np.zeros((n, ambient_dim))
    parts.append(np.ascontiguousarray(winding, dtype="<f8").tobytes())
    parts.append(_pack("Q", len(track)))
    for t, imm in track:
        parts.append(_pack("d", t))
        parts.append(np.ascontiguousarray(imm.positions, dtype="<f8").tobytes())
    return b"".join(parts)


def write_track(track: SpaceTimeTrack, path) -> None:
    """Atomic write: temp file in the same directory, then rename."""
    data = track_bytes(track)
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, os.fspath(path))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.off = 0

    def take(self, fmt: str):
        size = struct.calcsize("<" + fmt)
        if self.off + size > len(self.data):
            raise CorruptTrackError("truncated track file")
        vals = struct.unpack_from("<" + fmt, self.data, self.off)
        self.off += size
        return vals

    def take_array(self, count: int) -> np.ndarray:
        size = 8 * count
        if self.off + size > len(self.data):
            raise CorruptTrackError("truncated track file")
        arr = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.off)
        self.off += size
        return arr.astype(np.float64)


def read_track(path) -> SpaceTimeTrack:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise CorruptTrackError("bad magic bytes")
    r = _Reader(data)
    r.off = 4
    version, n, ambient_dim = r.take("III")
    if version != VERSION:
        raise CorruptTrackError(f"unsupported track version {version}")
    if not 1 <= n <= 2 or ambient_dim < n + 1:
        raise CorruptTrackError("implausible dimensions in header")
    dims = r.take(f"{n}I")
    spacing = r.take(f"{n}d")
    origin = r.take(f"{n}d")
    periodic = tuple(bool(b) for b in r.take(f"{n}B"))
    (ambient_code,) = r.take("I")
    if ambient_code not in _AMBIENT_NAME:
        raise CorruptTrackError(f"unknown ambient kind {ambient_code}")
    periods = r.take(f"{ambient_dim}d")
    winding = r.take_array(n * ambient_dim).reshape(n, ambient_dim)
    (count,) = r.take("Q")
    try:
        grid = ParamGrid(dims, spacing, periodic, origin)
    except ValueError as exc:
        raise CorruptTrackError(f"invalid grid header: {exc}") from exc
    ambient = _AMBIENT_NAME[ambient_code]
    ambient_periods = tuple(periods) if ambient == FLAT_TORUS else None
    use_winding = winding if np.any(winding) else None
    npoints = int(np.prod(dims))
    track = SpaceTimeTrack()
    for _ in range(count):
        (t,) = r.take("d")
        pos = r.take_array(npoints * ambient_dim).reshape(dims + (ambient_dim,))
        track.append(t, Immersion(grid, pos, ambient, ambient_periods, use_winding))
    if r.off != len(data):
        raise CorruptTrackError("trailing bytes after declared snapshots")
    return track
