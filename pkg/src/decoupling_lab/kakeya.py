"""Multilinear Kakeya on explicit tiles: rasterize F_j = sum_P c_P 1_P over B_{4R}
and compare the average of prod_j F_j^(1/(n-1)) with prod_j (average F_j)^(1/(n-1))."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, DomainError, TransversalityError

KAKEYA_COLUMNS = ("schema_version", "R", "nu", "tiles_per_family", "lhs", "rhs", "ratio", "grid_spacing")


@dataclass(frozen=True)
class Tile:
    """A box with one side of length ``long_side`` along ``direction`` and n-1 sides ``short_side``."""

    center: tuple[float, ...]
    direction: tuple[float, ...]
    short_side: float
    long_side: float
    amplitude: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.direction, dtype=float)
        norm = float(np.linalg.norm(v))
        if len(v) != len(self.center) or norm == 0:
            raise DomainError("tile direction must be a nonzero vector of the tile's dimension")
        object.__setattr__(self, "direction", tuple(float(x) for x in v / norm))
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))
        if not (self.short_side > 0 and self.long_side > 0):
            raise DomainError("tile sides must be positive")
        if self.amplitude < 0:
            raise DomainError("tile amplitude must be nonnegative")

    @classmethod
    def for_scale(cls, center, direction, R: float, amplitude: float = 1.0) -> "Tile":
        return cls(tuple(center), tuple(direction), math.sqrt(R), float(R), amplitude)

    @property
    def dim(self) -> int:
        return len(self.center)

    def frame(self) -> np.ndarray:
        """Orthonormal rows: the direction first, then a fixed basis of its complement."""
        v = np.asarray(self.direction)
        basis, _ = np.linalg.qr(np.column_stack([v, np.eye(self.dim)]))
        basis = basis[:, :self.dim].T
        basis[0] = v
        return basis

    def half_extent(self) -> np.ndarray:
        """Half widths of the axis-parallel bounding box."""
        fr = np.abs(self.frame())
        return 0.5 * self.long_side * fr[0] + 0.5 * self.short_side * fr[1:].sum(axis=0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        rel = pts - np.asarray(self.center)
        coords = rel @ self.frame().T
        ok = np.abs(coords[:, 0]) <= self.long_side / 2
        return ok & np.all(np.abs(coords[:, 1:]) <= self.short_side / 2, axis=1)


@dataclass
class KakeyaResult:
    lhs: float
    rhs: float
    ratio: float
    R: float
    nu: float
    tiles_per_family: int
    grid_spacing: float

    def row(self) -> dict:
        return {"schema_version": 1, "R": self.R, "nu": self.nu, "tiles_per_family": self.tiles_per_family,
                "lhs": repr(self.lhs), "rhs": repr(self.rhs), "ratio": repr(self.ratio),
                "grid_spacing": self.grid_spacing}


def check_transversality(families: Sequence[Sequence[Tile]], nu: float) -> float:
    """Smallest |det(v_1, ..., v_n)| over one tile per family; raises if it is below nu."""
    dirs = [np.array([t.direction for t in fam]) for fam in families]
    sizes = [len(d) for d in dirs]
    idx = np.indices(sizes).reshape(len(sizes), -1)
    mats = np.stack([dirs[j][idx[j]] for j in range(len(dirs))], axis=1)
    dets = np.abs(np.linalg.det(mats))
    worst = int(np.argmin(dets))
    if dets[worst] < nu:
        tup = tuple((j, int(idx[j, worst])) for j in range(len(dirs)))
        raise TransversalityError(
            f"tiles {tup} (family, index) span volume {dets[worst]:.6g} < nu={nu}", offending=tup)
    return float(dets[worst])


def kakeya_check(families: Sequence[Sequence[Tile]], R: float, nu: float,
                 spacing: float | None = None) -> KakeyaResult:
    n = len(families)
    if n < 2 or any(len(fam) == 0 for fam in families):
        raise DegenerateInputError("need n >= 2 nonempty tile families")
    if any(t.dim != n for fam in families for t in fam):
        raise DomainError(f"every tile must live in R^{n}")
    for fam in families:
        for t in fam:
            if abs(t.long_side - R) > 1e-9 * R or abs(t.short_side - math.sqrt(R)) > 1e-9 * R:
                raise DomainError("tiles must have one side R and n-1 sides R^(1/2)")
            if np.any(np.abs(t.center) + t.half_extent() > 2 * R + 1e-9):
                raise DomainError(f"tile at {t.center} leaves the cube B_4R")
    check_transversality(families, nu)
    h = math.sqrt(R) / 4 if spacing is None else float(spacing)
    count = int(round(4 * R / h))
    axis = (np.arange(count) + 0.5) * h - 2 * R
    F = [np.zeros((count,) * n, dtype=np.float32) for _ in range(n)]
    for j, fam in enumerate(families):
        for t in fam:
            ext = t.half_extent()
            lo = [int(np.searchsorted(axis, c - e, side="left")) for c, e in zip(t.center, ext)]
            hi = [int(np.searchsorted(axis, c + e, side="right")) for c, e in zip(t.center, ext)]
            sub = [axis[a:b] for a, b in zip(lo, hi)]
            if any(len(s) == 0 for s in sub):
                continue
            mesh = np.meshgrid(*sub, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=-1)
            inside = t.contains(pts).reshape(mesh[0].shape)
            block = tuple(slice(a, b) for a, b in zip(lo, hi))
            F[j][block] += np.float32(t.amplitude) * inside
    expo = 1.0 / (n - 1)
    total = 0.0
    for i in range(count):
        prod = np.ones(F[0].shape[1:])
        for Fj in F:
            prod = prod * Fj[i].astype(float)
        total += float(np.sum(prod ** expo))
    size = count ** n
    lhs = total / size
    rhs = math.prod(float(np.sum(Fj, dtype=float)) / size for Fj in F) ** expo
    ratio = lhs / rhs if rhs > 0 else 0.0
    return KakeyaResult(lhs, rhs, ratio, float(R), float(nu), max(len(f) for f in families), h)


def random_tile_families(n: int, R: float, per_family: int, seed: int, tilt: float = 0.1,
                         spread: float = 0.5) -> list[list[Tile]]:
    """Family j: tiles along e_j tilted by up to ``tilt`` in the other coordinates.

    Centers are uniform in ``spread`` times the room left inside B_4R, so small
    ``spread`` packs the families together and makes them overlap.
    """
    rng = np.random.default_rng(seed)
    families = []
    for j in range(n):
        fam = []
        for _ in range(per_family):
            v = rng.uniform(-tilt, tilt, n)
            v[j] = 1.0
            probe = Tile((0.0,) * n, tuple(v), math.sqrt(R), float(R))
            ext = probe.half_extent()
            center = spread * rng.uniform(-2 * R + ext, 2 * R - ext)
            fam.append(Tile.for_scale(center, probe.direction, R))
        families.append(fam)
    return families


def perpendicular_tiles(R: float) -> list[list[Tile]]:
    """One horizontal and one vertical unit-amplitude tile through the origin (n = 2)."""
    return [[Tile.for_scale((0.0, 0.0), (1.0, 0.0), R)], [Tile.for_scale((0.0, 0.0), (0.0, 1.0), R)]]
