"""Polynomial weights w_{B,E}, weighted Riemann-sum norms and the weight-calculus checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, InvalidExponentError, InvalidScaleError
from .fields import GridEvaluator, GridFunction
from .geometry import SpatialCube
from .grid import SpatialGrid

__all__ = [
    "WeightSpec", "SpatialGrid", "weight_value", "weight_on_grid", "weighted_norm",
    "weight_integral", "tail_fraction", "weight_cover_bounds", "reverse_holder_check",
    "partition_sums",
]


@dataclass(frozen=True)
class WeightSpec:
    """w_{B,E}(x) = (1 + |x - c_B| / R)^(-E).  ``exponent=inf`` is the indicator of B."""

    cube: SpatialCube
    exponent: float | None = None

    def __post_init__(self):
        E = 100.0 * self.cube.dim if self.exponent is None else float(self.exponent)
        if not E >= 1:
            raise InvalidExponentError(f"weight exponent must be >= 1, got {E}")
        object.__setattr__(self, "exponent", E)

    @property
    def indicator(self) -> bool:
        return math.isinf(self.exponent)


def _decay(dist, R, E):
    with np.errstate(under="ignore"):
        return np.power(1.0 + np.asarray(dist, dtype=float) / R, -E)


def weight_value(w: WeightSpec, x) -> np.ndarray | float:
    """The weight at one point (shape (n,)) or a stack of points (shape (..., n))."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(w.cube.center)
    if w.indicator:
        inside = np.max(np.abs(x - c), axis=-1) <= w.cube.side / 2
        out = inside.astype(float)
    else:
        out = _decay(np.linalg.norm(x - c, axis=-1), w.cube.side, w.exponent)
    return float(out) if np.ndim(out) == 0 else out


def weight_on_grid(w: WeightSpec, grid: SpatialGrid) -> np.ndarray:
    if w.indicator:
        return (grid.sup_distance(w.cube.center) <= w.cube.side / 2).astype(float)
    return _decay(grid.distance(w.cube.center), w.cube.side, w.exponent)


def weighted_norm(values, grid: SpatialGrid, p: float, w: WeightSpec,
                  normalized: bool = False) -> float:
    """(sum |f|^p w dx^n)^(1/p), divided by |B| inside the root when ``normalized``."""
    if p < 1:
        raise InvalidExponentError(f"p must be >= 1, got {p}")
    vals = np.asarray(values)
    if vals.size != grid.size:
        raise DomainError(f"{vals.size} samples do not fit a grid of {grid.size} points")
    a = np.abs(vals).reshape(grid.shape)
    total = float(np.sum(a ** p * weight_on_grid(w, grid))) * grid.cell_volume
    if normalized:
        total /= w.cube.volume
    return total ** (1.0 / p)


def _half_width(padding: float, side: float, spacing: float) -> int:
    k = padding * side / (2.0 * spacing)
    r = round(k)
    return int(r) if abs(k - r) < 1e-9 * max(1.0, k) else int(math.ceil(k))


@lru_cache(maxsize=8)
def _window_kernel(n: int, W: int, spacing: float, side: float, E: float) -> np.ndarray:
    offs = (np.arange(-W, W) + 0.5) * spacing
    mesh = np.meshgrid(*([offs] * n), indexing="ij")
    if math.isinf(E):
        kernel = (np.max(np.abs(np.stack(mesh)), axis=0) <= side / 2).astype(float)
    else:
        kernel = _decay(np.sqrt(sum(m * m for m in mesh)), side, E)
    kernel.setflags(write=False)
    return kernel


def whole_window_kernel(grid: SpatialGrid, B: SpatialCube, E: float,
                        padding: float | None = None) -> np.ndarray | None:
    """w_{B,E} on the whole grid when the window ``padding * B`` is exactly the grid, else None."""
    padding = grid.padding if padding is None else padding
    W = _half_width(padding, B.side, grid.spacing)
    if grid.cube != B or 2 * W != grid.shape[0]:
        return None
    return _window_kernel(grid.dim, W, grid.spacing, float(B.side), float(E))


def partition_sums(values, grid: SpatialGrid, B: SpatialCube, sub_side: float, E: float,
                   padding: float | None = None) -> np.ndarray:
    """sum_x values(x) w_{Delta,E}(x) for every Delta in D_{sub_side}(B), shape (k,)*n.

    Each sum runs over the grid points inside ``padding * Delta`` (default: the
    grid's own padding); the cell volume is not included.  Sub-cubes must sit on
    the grid lattice, i.e. their centers fall at the same offsets as B's center.
    """
    vals = np.asarray(values, dtype=float).reshape(grid.shape)
    n, s = grid.dim, grid.spacing
    ratio = B.side / sub_side
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise InvalidScaleError(f"sub side {sub_side} does not divide side {B.side}")
    padding = grid.padding if padding is None else padding
    W = _half_width(padding, sub_side, s)
    offs = (np.arange(-W, W) + 0.5) * s
    kernel = _window_kernel(n, W, s, float(sub_side), float(E))
    L = sub_side / s
    starts = []
    for a in range(n):
        first = B.center[a] - B.side / 2 + sub_side / 2 + offs[0]
        i0 = (first - grid.axes[a][0]) / s
        if abs(i0 - round(i0)) > 1e-6 or abs(L - round(L)) > 1e-9:
            raise DomainError("sub-cubes are not aligned with the sampling grid")
        starts.append(int(round(i0)))
    L = int(round(L))
    N = grid.shape[0]
    lo = max(0, -min(starts))
    hi = max(0, max(starts) + (k - 1) * L + 2 * W - N)
    if lo or hi:
        vals = np.pad(vals, [(lo, hi)] * n)
    starts = [st + lo for st in starts]
    out = np.zeros((k,) * n)
    if k < 2 * W:
        for j in np.ndindex(*out.shape):
            block = tuple(slice(st + jj * L, st + jj * L + 2 * W) for st, jj in zip(starts, j))
            out[j] = float(np.sum(vals[block] * kernel))
    else:
        for t in np.ndindex(*kernel.shape):
            block = tuple(slice(st + tt, st + tt + L * (k - 1) + 1, L) for st, tt in zip(starts, t))
            out += kernel[t] * vals[block]
    return out


def _radial_moment(n: int, E: float, R: float, a: float) -> float:
    """int_{|x| > a} (1 + |x|/R)^(-E) dx in R^n, exact for E > n."""
    # u = 1 + r/R turns the radial integral into a sum of power integrals
    U = 1.0 + a / R
    acc = 0.0
    for k in range(n):
        acc += math.comb(n - 1, k) * (-1) ** (n - 1 - k) * U ** (k - E + 1) / (E - k - 1)
    sphere = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    return sphere * R ** n * acc


def weight_integral(w: WeightSpec) -> float:
    """int_{R^n} w_{B,E}."""
    n, E = w.cube.dim, w.exponent
    if w.indicator:
        return w.cube.volume
    if E <= n:
        return math.inf
    return _radial_moment(n, E, w.cube.side, 0.0)


def tail_fraction(w: WeightSpec, padding: float) -> float:
    """Upper bound on the share of int w_{B,E} lying outside the padded cube ``padding * B``."""
    n, E = w.cube.dim, w.exponent
    if w.indicator:
        return 0.0
    if E <= n:
        return 1.0
    # the padded cube contains the ball of radius padding*R/2
    return _radial_moment(n, E, w.cube.side, padding * w.cube.side / 2) / weight_integral(w)


def _cover_sums(cubes, pts, E):
    acc = np.zeros(len(pts))
    for D in cubes:
        acc += _decay(np.linalg.norm(pts - np.asarray(D.center), axis=1), D.side, E)
    return acc


def _lattice(cube: SpatialCube, half: float, step: float) -> np.ndarray:
    # symmetric about the center, so corners and sub-cube centers land on it when step divides them
    k = int(math.floor(half / step + 1e-9))
    ticks = [c + step * np.arange(-k, k + 1) for c in cube.center]
    mesh = np.meshgrid(*ticks, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def weight_cover_bounds(B: SpatialCube, sub_side: float, E: float, padding: float = 4.0,
                        samples_per_sub: int = 4) -> tuple[float, float]:
    """Measured constants in 1_B <~ sum_{Delta} w_{Delta,E} <~ w_{B,E}, Delta in D_{R'}(B).

    Both are sampled on one lattice of step R'/samples_per_sub centered on B:
    c_low is the minimum of the sum over the points of B (corners included),
    c_high the maximum of sum / w_B over the points of ``padding * B``.
    """
    if sub_side > B.side:
        raise InvalidScaleError(f"sub side {sub_side} exceeds the cube side {B.side}")
    cubes = B.partition(sub_side)
    step = sub_side / samples_per_sub
    inner = _lattice(B, B.side / 2, step)
    c_low = float(np.min(_cover_sums(cubes, inner, E)))
    outer = _lattice(B, padding * B.side / 2, step)
    wB = _decay(np.linalg.norm(outer - np.asarray(B.center), axis=1), B.side, E)
    c_high = float(np.max(_cover_sums(cubes, outer, E) / wB))
    return c_low, c_high


def reverse_holder_check(g: GridFunction, B: SpatialCube, p: float, q: float, E: float,
                         padding: float = 4.0, spacing: float = 0.5) -> float:
    """||E g||_{L^q#(w_{B,E})} / ||E g||_{L^p#(w_{B,Ep/q})} for g on a cap of side 1/side(B)."""
    if p < 1:
        raise InvalidExponentError(f"p must be >= 1, got {p}")
    if q < p:
        raise InvalidExponentError(f"need q >= p, got p={p}, q={q}")
    if abs(float(g.cube.side) * B.side - 1.0) > 1e-12:
        raise InvalidScaleError(f"cap side {g.cube.side} times cube side {B.side} must be 1")
    grid = SpatialGrid(B, padding, spacing)
    field = GridEvaluator(g.frequencies(), grid).total_field(g.coefficients())
    lhs = weighted_norm(field, grid, q, WeightSpec(B, E), normalized=True)
    rhs = weighted_norm(field, grid, p, WeightSpec(B, E * p / q), normalized=True)
    if rhs == 0:
        return 0.0
    return lhs / rhs
