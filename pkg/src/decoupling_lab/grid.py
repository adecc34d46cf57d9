"""Sampling lattice used to discretize integrals over R^n."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, InvalidScaleError
from .geometry import SpatialCube


@dataclass(frozen=True)
class SpatialGrid:
    """Midpoint lattice of spacing ``spacing`` covering the padded cube ``padding * B``.

    The lattice is symmetric about the center of B.  When ``padding * side / (2 * spacing)``
    is an integer the cells tile the padded cube exactly; otherwise the box is
    rounded up to the next whole cell.
    """

    cube: SpatialCube
    padding: float = 4.0
    spacing: float = 0.5

    def __post_init__(self):
        if self.padding < 1:
            raise DomainError(f"padding must be >= 1, got {self.padding}")
        if not 0 < self.spacing <= 0.5:
            raise InvalidScaleError(f"grid spacing must lie in (0, 1/2], got {self.spacing}")

    @property
    def dim(self) -> int:
        return self.cube.dim

    @cached_property
    def half_count(self) -> int:
        k = self.padding * self.cube.side / (2.0 * self.spacing)
        r = round(k)
        return int(r) if abs(k - r) < 1e-9 * max(1.0, k) else int(math.ceil(k))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        k = self.half_count
        offs = (np.arange(-k, k) + 0.5) * self.spacing
        return tuple(c + offs for c in self.cube.center)

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.half_count,) * self.dim

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def distance(self, center=None) -> np.ndarray:
        """|x - center| on the grid (center defaults to the cube center)."""
        center = self.cube.center if center is None else center
        r2 = np.zeros(self.shape)
        for k, (ax, c) in enumerate(zip(self.axes, center)):
            shape = [1] * self.dim
            shape[k] = -1
            r2 = r2 + ((ax - c) ** 2).reshape(shape)
        return np.sqrt(r2)

    def sup_distance(self, center=None) -> np.ndarray:
        center = self.cube.center if center is None else center
        out = np.zeros(self.shape)
        for k, (ax, c) in enumerate(zip(self.axes, center)):
            shape = [1] * self.dim
            shape[k] = -1
            out = np.maximum(out, np.abs(ax - c).reshape(shape))
        return out

    def window(self, cube: SpatialCube, padding: float) -> tuple[slice, ...]:
        """Index slices of the grid points inside ``padding * cube`` (clipped to the grid)."""
        half = padding * cube.side / 2.0
        out = []
        for ax, c in zip(self.axes, cube.center):
            lo = int(np.searchsorted(ax, c - half - 1e-9 * self.spacing, side="left"))
            hi = int(np.searchsorted(ax, c + half + 1e-9 * self.spacing, side="right"))
            out.append(slice(lo, hi))
        return tuple(out)

    def sub_axes(self, window: tuple[slice, ...]) -> tuple[np.ndarray, ...]:
        return tuple(ax[s] for ax, s in zip(self.axes, window))
