"""Test functions g on frequency cubes and evaluation of the extension operator.

    E_Q g(x) = int_Q g(xi) e(xi . x_bar + |xi|^2 x_n) dxi,   e(z) = exp(2 pi i z)

A :class:`GridFunction` is piecewise constant on an M^d cell grid over its cube.
In the ``continuum`` model the integral is the midpoint rule with cell weight
(side/M)^d.  In the ``lattice`` model the nodes sit on h Z^d (h = side/M) and
carry unit weight, so E_Q g is an exact exponential sum.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, ResolutionError
from .geometry import FrequencyCube, parabolic_rescale_maps
from .grid import SpatialGrid

MODELS = ("continuum", "lattice")
TEST_FUNCTION_KINDS = ("constant", "cap-indicator", "random-gaussian", "point-mass-lattice")


def phase(t) -> np.ndarray:
    """e(t) = exp(2 pi i t), with t reduced mod 1 first to keep large arguments accurate."""
    t = np.asarray(t, dtype=float)
    return np.exp(2j * np.pi * (t - np.floor(t)))


@dataclass(frozen=True, eq=False)
class GridFunction:
    cube: FrequencyCube
    M: int
    values: np.ndarray
    model: str = "continuum"

    def __post_init__(self):
        if self.M < 1:
            raise DomainError("M must be at least 1")
        if self.model not in MODELS:
            raise DomainError(f"unknown model {self.model!r}")
        vals = np.array(self.values, dtype=complex).reshape((self.M,) * self.cube.dim)
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.cube.dim

    @property
    def step(self) -> Fraction:
        return self.cube.side / self.M

    @property
    def cell_weight(self) -> float:
        return float(self.step) ** self.dim if self.model == "continuum" else 1.0

    def axis_nodes(self) -> np.ndarray:
        """Node coordinates along one axis, relative to the cube corner."""
        k = np.arange(self.M, dtype=float)
        if self.model == "continuum":
            k = k + 0.5
        return k * float(self.step)

    def nodes(self) -> np.ndarray:
        """Frequency nodes, shape (M^d, d), in lexicographic (C) order."""
        rel = self.axis_nodes()
        ticks = [float(c) + rel for c in self.cube.corner]
        mesh = np.meshgrid(*ticks, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def frequencies(self) -> np.ndarray:
        """Points (xi, |xi|^2) on the paraboloid, shape (M^d, d+1)."""
        xi = self.nodes()
        return np.concatenate([xi, np.sum(xi * xi, axis=1, keepdims=True)], axis=1)

    def coefficients(self) -> np.ndarray:
        return self.values.ravel() * self.cell_weight

    def cell_block(self, q: FrequencyCube) -> tuple[slice, ...]:
        """Index block of the cells lying in the sub-cube q."""
        if not self.cube.contains_cube(q):
            raise DomainError(f"{q} is not inside {self.cube}")
        length = q.side / self.step
        if length.denominator != 1:
            raise ResolutionError(
                f"cap side {q.side} is finer than the frequency cell {self.step}; need M >= {self.cube.side / q.side}")
        out = []
        for a, b in zip(self.cube.corner, q.corner):
            start = (b - a) / self.step
            out.append(slice(int(start), int(start + length)))
        return tuple(out)

    def cell_indices(self, q: FrequencyCube) -> np.ndarray:
        idx = np.arange(self.M ** self.dim).reshape(self.values.shape)
        return idx[self.cell_block(q)].ravel()

    def restrict(self, q: FrequencyCube) -> "GridFunction":
        """g restricted to q, as a grid function on q with the same cell size."""
        block = self.cell_block(q)
        return GridFunction(q, int(q.side / self.step), self.values[block], self.model)

    def masked(self, q: FrequencyCube) -> "GridFunction":
        """g times the indicator of q, still defined on the full cube."""
        vals = np.zeros_like(self.values)
        block = self.cell_block(q)
        vals[block] = self.values[block]
        return self.with_values(vals)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.cube, self.M, values, self.model)

    def to_json(self) -> dict:
        flat = self.values.ravel()
        return {
            "cube": self.cube.to_json(),
            "M": self.M,
            "model": self.model,
            "values": [[float(z.real), float(z.imag)] for z in flat],
        }

    @classmethod
    def from_json(cls, obj) -> "GridFunction":
        if isinstance(obj, str):
            obj = json.loads(obj)
        cube = FrequencyCube.from_json(obj["cube"])
        vals = np.array([complex(re, im) for re, im in obj["values"]])
        return cls(cube, int(obj["M"]), vals, obj["model"])


def make_test_function(kind: str, Q: FrequencyCube, M: int, seed: int | None = None,
                       cap: FrequencyCube | None = None, model: str | None = None) -> GridFunction:
    """Build one of the standard test functions on Q with M cells per axis.

    ``random-gaussian`` draws independent standard complex Gaussians per cell;
    ``point-mass-lattice`` is a lattice-model function with a single nonzero cell
    (a random cell with a random unimodular value).
    """
    shape = (M,) * Q.dim
    if kind == "constant":
        return GridFunction(Q, M, np.ones(shape), model or "continuum")
    if kind == "cap-indicator":
        if cap is None:
            raise DomainError("cap-indicator needs a cap")
        base = GridFunction(Q, M, np.zeros(shape), model or "continuum")
        centers = base.nodes()
        lo = np.array([float(c) for c in cap.corner])
        hi = lo + float(cap.side)
        inside = np.all((centers >= lo) & (centers < hi), axis=1)
        return base.with_values(inside.astype(complex).reshape(shape))
    if kind == "random-gaussian":
        if seed is None:
            raise DomainError("random-gaussian needs a seed")
        rng = np.random.default_rng(seed)
        z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        return GridFunction(Q, M, z, model or "continuum")
    if kind == "point-mass-lattice":
        if seed is None:
            raise DomainError("point-mass-lattice needs a seed")
        rng = np.random.default_rng(seed)
        vals = np.zeros(M ** Q.dim, dtype=complex)
        vals[rng.integers(M ** Q.dim)] = np.exp(2j * np.pi * rng.random())
        return GridFunction(Q, M, vals, "lattice")
    raise DomainError(f"unknown test function kind {kind!r}")


@dataclass(frozen=True)
class SpatialPointSet:
    points: np.ndarray
    provenance: str = "explicit"

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size and not np.all(np.isfinite(pts)):
            raise DomainError("spatial points must be finite")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_grid(cls, grid: SpatialGrid) -> "SpatialPointSet":
        return cls(grid.points(), "lattice-of-cube")

    def __len__(self):
        return len(self.points) if self.points.size else 0


def _as_points(points) -> np.ndarray:
    if isinstance(points, SpatialPointSet):
        return points.points
    return np.atleast_2d(np.asarray(points, dtype=float))


def evaluate_extension(g: GridFunction, points, method: str = "separable",
                       chunk: int = 4096) -> np.ndarray:
    """E g at each point.  ``direct`` sums cell by cell in lexicographic order and
    serves as the reference; ``separable`` factors the phase into per-axis tables.
    """
    pts = _as_points(points)
    if pts.size == 0:
        return np.zeros(0, dtype=complex)
    if pts.shape[1] != g.dim + 1:
        raise DomainError(f"points must have {g.dim + 1} coordinates")
    coeffs = g.coefficients()
    out = np.empty(len(pts), dtype=complex)
    if method == "direct":
        freqs = g.frequencies()
        for start in range(0, len(pts), chunk):
            x = pts[start:start + chunk]
            acc = np.zeros(len(x), dtype=complex)
            for c in range(len(freqs)):
                if coeffs[c] != 0:
                    acc += coeffs[c] * phase(x @ freqs[c])
            out[start:start + chunk] = acc
        return out
    if method != "separable":
        raise ValueError(f"unknown method {method!r}")
    rel = g.axis_nodes()
    nodes = g.nodes()
    sq = np.sum(nodes * nodes, axis=1)
    idx = np.indices(g.values.shape).reshape(g.dim, -1)
    for start in range(0, len(pts), chunk):
        x = pts[start:start + chunk]
        table = phase(np.outer(x[:, -1], sq))
        for k in range(g.dim):
            axis_tab = phase(np.outer(x[:, k], float(g.cube.corner[k]) + rel))
            table *= axis_tab[:, idx[k]]
        out[start:start + chunk] = table @ coeffs
    return out


class GridEvaluator:
    """Separable evaluation of exponential sums sum_c a_c e(omega_c . x) on a SpatialGrid.

    Frequencies are split into groups (caps); each group's field is
    ``row_table[:, group] @ rest[group]`` where the row table carries the first
    spatial axis and ``rest`` the tensor product of all remaining axes.
    """

    def __init__(self, freqs: np.ndarray, grid: SpatialGrid,
                 groups: Sequence[np.ndarray] | None = None, block_rows: int = 32):
        freqs = np.asarray(freqs, dtype=float)
        if freqs.shape[1] != grid.dim:
            raise DomainError("frequency and grid dimensions differ")
        if groups is None:
            groups = [np.arange(len(freqs))]
        self.grid = grid
        self.groups = [np.asarray(gr, dtype=np.int64) for gr in groups]
        self.order = np.concatenate(self.groups) if self.groups else np.zeros(0, np.int64)
        self.bounds = np.concatenate([[0], np.cumsum([len(gr) for gr in self.groups])])
        f = freqs[self.order]
        axes = grid.axes
        self.row_table = phase(np.outer(axes[0], f[:, 0]))
        rest = np.ones((len(f), 1), dtype=complex)
        for k in range(1, grid.dim):
            tab = phase(np.outer(f[:, k], axes[k]))
            rest = (rest[:, :, None] * tab[:, None, :]).reshape(len(f), -1)
        self.rest = rest
        self.block_rows = block_rows

    @classmethod
    def for_caps(cls, g: GridFunction, caps: Sequence[FrequencyCube], grid: SpatialGrid,
                 **kw) -> "GridEvaluator":
        return cls(g.frequencies(), grid, [g.cell_indices(q) for q in caps], **kw)

    def _ordered(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs, dtype=complex)[self.order]

    def fields(self, coeffs) -> Iterator[tuple[int, np.ndarray]]:
        c = self._ordered(coeffs)
        for gi in range(len(self.groups)):
            sl = slice(self.bounds[gi], self.bounds[gi + 1])
            F = (self.row_table[:, sl] * c[sl]) @ self.rest[sl]
            yield gi, F.reshape(self.grid.shape)

    def total_field(self, coeffs) -> np.ndarray:
        c = self._ordered(coeffs)
        return ((self.row_table * c) @ self.rest).reshape(self.grid.shape)

    def power_sums(self, coeffs, ps, weight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Weighted sums of |field|^p: returns (sums for the total field, sums per group).

        Shapes are (len(ps),) and (n_groups, len(ps)).  Grid-cell volume is not included.
        """
        ps = np.atleast_1d(np.asarray(ps, dtype=float))
        halves = _kernels.half_powers(ps)
        c = self._ordered(coeffs)
        n0 = self.row_table.shape[0]
        w = np.ascontiguousarray(weight).reshape(n0, -1)
        ngroups = len(self.groups)
        group_sums = np.zeros((ngroups, len(ps)))
        total = np.zeros(len(ps))
        live = [gi for gi in range(ngroups)
                if np.any(c[self.bounds[gi]:self.bounds[gi + 1]] != 0)]
        scaled = self.row_table * c
        for r0 in range(0, n0, self.block_rows):
            rows = slice(r0, min(n0, r0 + self.block_rows))
            tot = np.zeros((rows.stop - rows.start, self.rest.shape[1]), dtype=complex)
            wb = w[rows]
            for gi in live:
                sl = slice(self.bounds[gi], self.bounds[gi + 1])
                F = scaled[rows, sl] @ self.rest[sl]
                _kernels.accumulate_powers(F, wb, tot, ps, halves, group_sums[gi])
            _kernels.power_sums(tot, wb, ps, halves, total)
        return total, group_sums


def evaluate_on_grid(g: GridFunction, grid: SpatialGrid) -> np.ndarray:
    """E g on every point of ``grid`` via the separable path, shaped like the grid."""
    ev = GridEvaluator(g.frequencies(), grid)
    return ev.total_field(g.coefficients())


def rescaling_covariance_check(g: GridFunction, Q: FrequencyCube, x) -> tuple[float, float, float]:
    """Both sides of |E_{Q~} g(x)| = sigma^{(n-1)/2} |E_{L(Q~)} g_L(T_Q x)|, Q~ = g.cube ⊆ Q.

    Returns (lhs, rhs, relative error).  In the lattice model the cell weights are
    1 on both sides, so the sigma factor drops out.
    """
    if not Q.contains_cube(g.cube):
        raise DomainError(f"{g.cube} is not inside {Q}")
    maps = parabolic_rescale_maps(Q)
    s = maps.scale
    corner = maps.freq_map(g.cube.corner)
    g_L = GridFunction(FrequencyCube(corner, g.cube.side / s), g.M, g.values, g.model)
    x = np.asarray(x, dtype=float)
    lhs = float(np.abs(evaluate_extension(g, x[None, :], method="direct"))[0])
    factor = float(s) ** g.dim if g.model == "continuum" else 1.0
    rhs = factor * float(np.abs(evaluate_extension(g_L, maps.space_map(x)[None, :], method="direct"))[0])
    scale = max(abs(lhs), abs(rhs))
    rel = abs(lhs - rhs) / scale if scale > 0 else 0.0
    return lhs, rhs, rel
