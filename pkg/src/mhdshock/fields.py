"""Structured rectangular grids and node-sampled fields.

Both coordinate charts used by the solver are rectangles: the Lagrangian
chart ``y`` covering the whole nozzle (or the upstream part) and the
shock-aligned fixed chart ``z`` covering the subsonic part.  Axis 0 of
every array is the streamwise direction (y1 / z1), axis 1 is the
stream-function direction (y2 / z2 in [0, 1]).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

COORD_Y = "lagrangian-y"
COORD_Z = "fixed-z"


@dataclass(frozen=True)
class Grid:
    """Uniform node-centred grid; nodes include all four boundaries."""

    n1: int
    n2: int
    y1_min: float
    y1_max: float

    def __post_init__(self):
        if self.n1 < 8 or self.n2 < 8:
            raise ValueError(f"grid needs at least 8 cells per direction, got {self.n1}x{self.n2}")
        if not self.y1_max > self.y1_min:
            raise ValueError("empty y1 range")

    @property
    def h1(self) -> float:
        return (self.y1_max - self.y1_min) / self.n1

    @property
    def h2(self) -> float:
        return 1.0 / self.n2

    @property
    def y1(self) -> np.ndarray:
        return self.y1_min + self.h1 * np.arange(self.n1 + 1)

    @property
    def y2(self) -> np.ndarray:
        return self.h2 * np.arange(self.n2 + 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n1 + 1, self.n2 + 1)


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Field:
    """Named components sampled on the nodes of one grid.

    Components are read-only arrays of shape ``grid.shape``; the
    coordinate tag records which chart the samples live in.
    """

    grid: Grid
    coord: str
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.coord not in (COORD_Y, COORD_Z):
            raise ValueError(f"unknown coordinate tag {self.coord!r}")
        frozen = {}
        for name, arr in self.data.items():
            arr = _freeze(arr)
            if arr.shape != self.grid.shape:
                raise ValueError(f"component {name!r} has shape {arr.shape}, grid wants {self.grid.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"component {name!r} contains non-finite values")
            frozen[name] = arr
        object.__setattr__(self, "data", frozen)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def components(self) -> tuple:
        return tuple(self.data)

    def with_components(self, **extra) -> "Field":
        merged = dict(self.data)
        merged.update(extra)
        return Field(self.grid, self.coord, merged)


def d1(arr: np.ndarray, h1: float) -> np.ndarray:
    """Streamwise derivative: central interior, one-sided 2nd order at ends."""
    return np.gradient(arr, h1, axis=0, edge_order=2)


def d2(arr: np.ndarray, h2: float) -> np.ndarray:
    """Cross-stream derivative, same stencil policy as :func:`d1`."""
    return np.gradient(arr, h2, axis=1, edge_order=2)


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights for n cells (n even, nodes n+1)."""
    if n % 2 != 0 or n < 2:
        raise ValueError(f"Simpson rule needs an even cell count >= 2, got {n}")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2.0
    return w


def cumulative_trapezoid(values: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Running trapezoid integral starting at 0, same length as input."""
    values = np.asarray(values, dtype=float)
    mid = 0.5 * h * (np.take(values, range(1, values.shape[axis]), axis=axis)
                     + np.take(values, range(0, values.shape[axis] - 1), axis=axis))
    out = np.cumsum(mid, axis=axis)
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 0)
    return np.pad(out, pad)
