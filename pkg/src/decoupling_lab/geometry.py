"""Cube geometry on the frequency and spatial sides.

Frequency cubes live in [0,1]^d (d = n-1) and have dyadic side lengths, so
corners and sides are stored as exact :class:`fractions.Fraction` values and
every partition is exact.  Spatial cubes are plain float boxes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidScaleError


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x))


def is_dyadic(x) -> bool:
    """True if ``x`` is a positive integer power of two (2^k, k in Z)."""
    x = as_fraction(x)
    if x <= 0:
        return False
    num, den = x.numerator, x.denominator
    return (num & (num - 1)) == 0 and (den & (den - 1)) == 0 and (num == 1 or den == 1)


def dyadic_exponent(x) -> int:
    """Return k with x = 2^k; raises if x is not a power of two."""
    x = as_fraction(x)
    if not is_dyadic(x):
        raise InvalidScaleError(f"{x} is not a power of two")
    if x.denominator == 1:
        return x.numerator.bit_length() - 1
    return -(x.denominator.bit_length() - 1)


def dyadic(k: int) -> Fraction:
    return Fraction(2) ** k


@dataclass(frozen=True)
class FrequencyCube:
    """Axis-parallel dyadic cube ``corner + [0, side]^dim`` inside [0,1]^dim."""

    corner: tuple[Fraction, ...]
    side: Fraction

    def __post_init__(self):
        corner = tuple(as_fraction(c) for c in self.corner)
        side = as_fraction(self.side)
        object.__setattr__(self, "corner", corner)
        object.__setattr__(self, "side", side)
        if not corner:
            raise DomainError("frequency cube needs at least one axis")
        if not is_dyadic(side) or side > 1:
            raise InvalidScaleError(f"side {side} is not in 2^-N")
        for c in corner:
            if c % side != 0:
                raise InvalidScaleError(f"corner {c} is not a multiple of side {side}")
            if c < 0 or c + side > 1:
                raise DomainError(f"cube with corner {corner} and side {side} leaves [0,1]^{len(corner)}")

    @classmethod
    def unit(cls, dim: int) -> "FrequencyCube":
        return cls((Fraction(0),) * dim, Fraction(1))

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def center(self) -> np.ndarray:
        return np.array([float(c + self.side / 2) for c in self.corner])

    @property
    def upper(self) -> tuple[Fraction, ...]:
        return tuple(c + self.side for c in self.corner)

    def measure(self) -> Fraction:
        return self.side ** self.dim

    def contains_cube(self, other: "FrequencyCube") -> bool:
        return other.dim == self.dim and all(
            a <= b and b + other.side <= a + self.side for a, b in zip(self.corner, other.corner)
        )

    def corners(self) -> list[tuple[Fraction, ...]]:
        return [tuple(c + s * self.side for c, s in zip(self.corner, bits))
                for bits in itertools.product((0, 1), repeat=self.dim)]

    def to_json(self) -> dict:
        return {"corner": [str(c) for c in self.corner], "side": str(self.side)}

    @classmethod
    def from_json(cls, obj: dict) -> "FrequencyCube":
        return cls(tuple(Fraction(c) for c in obj["corner"]), Fraction(obj["side"]))

    def __str__(self):
        parts = " x ".join(f"[{c},{c + self.side}]" for c in self.corner)
        return parts


@dataclass(frozen=True)
class SpatialCube:
    """Cube ``B(c, R)`` in R^n with center c and side length R."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0:
            raise DomainError(f"spatial cube side must be positive, got {self.side}")

    @classmethod
    def centered(cls, n: int, side: float) -> "SpatialCube":
        return cls((0.0,) * n, side)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    def partition(self, sub_side: float) -> list["SpatialCube"]:
        """The partition D_{sub_side}(B) in lexicographic center order."""
        ratio = self.side / sub_side
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
            raise InvalidScaleError(f"sub side {sub_side} does not divide side {self.side}")
        offsets = (np.arange(k) + 0.5) * sub_side - self.side / 2
        return [SpatialCube(tuple(c + o for c, o in zip(self.center, offs)), sub_side)
                for offs in itertools.product(offsets, repeat=self.dim)]


def dyadic_partition(Q: FrequencyCube, alpha) -> list[FrequencyCube]:
    """The partition D_alpha(Q) into cubes of side ``alpha``, lexicographic in the corners."""
    alpha = as_fraction(alpha)
    if not is_dyadic(alpha):
        raise InvalidScaleError(f"scale {alpha} is not dyadic")
    if alpha > Q.side:
        raise InvalidScaleError(f"scale {alpha} exceeds the cube side {Q.side}")
    k = int(Q.side / alpha)
    axes = [[c + j * alpha for j in range(k)] for c in Q.corner]
    return [FrequencyCube(corner, alpha) for corner in itertools.product(*axes)]


def paraboloid_normal(xi) -> np.ndarray:
    """Downward unit normal (2 xi, -1)/sqrt(1 + 4|xi|^2) to the graph of |xi|^2.

    Accepts a single point of shape (d,) or a stack of shape (..., d).
    """
    xi = np.asarray(xi, dtype=float)
    v = np.concatenate([2.0 * xi, -np.ones(xi.shape[:-1] + (1,))], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True)
class TransversalityCertificate:
    cubes: tuple[FrequencyCube, ...]
    nu_lower: float
    sample_density: int

    def refine(self) -> "TransversalityCertificate":
        """Re-certify on the nested lattice with twice the resolution."""
        return transversality(self.cubes, 2 * self.sample_density - 1)


def _sample_lattice(Q: FrequencyCube, density: int) -> np.ndarray:
    ticks = [np.linspace(float(c), float(c + Q.side), density) for c in Q.corner]
    mesh = np.meshgrid(*ticks, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def transversality(cubes: Sequence[FrequencyCube], sample_density: int = 4,
                   chunk: int = 1 << 18) -> TransversalityCertificate:
    """Sampled lower bound for |det(n(P_1), ..., n(P_n))| over P_i above cube i.

    Each cube is sampled on a lattice with ``sample_density`` points per axis,
    endpoints included.  The minimum over all n-tuples of samples is returned;
    it is an estimate of the true infimum, not a proof.
    """
    cubes = tuple(cubes)
    n = len(cubes)
    if any(Q.dim != n - 1 for Q in cubes):
        raise DomainError(f"need {n} cubes of dimension {n - 1}")
    if sample_density < 2:
        raise InvalidScaleError("sample_density must be at least 2")
    normals = [paraboloid_normal(_sample_lattice(Q, sample_density)) for Q in cubes]
    sizes = [len(a) for a in normals]
    total = math.prod(sizes)
    best = math.inf
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(total, start + chunk)), sizes)
        mats = np.stack([normals[i][idx[i]] for i in range(n)], axis=1)
        best = min(best, float(np.min(np.abs(np.linalg.det(mats)))))
    return TransversalityCertificate(cubes, best, sample_density)


@dataclass(frozen=True)
class RescaleMaps:
    """The affine pair (L_Q, T_Q) stretching Q = a + [0, sigma^(1/2)]^d to [0,1]^d."""

    offset: tuple[Fraction, ...]
    sigma: Fraction

    @property
    def scale(self) -> Fraction:
        # l(Q) = sigma^(1/2) is the cube side, so it is exact
        return _exact_sqrt(self.sigma)

    def freq_map(self, xi):
        """L_Q(xi) = (xi - a) / sigma^(1/2).  Exact for Fraction input."""
        s = self.scale
        if isinstance(xi, (tuple, list)) and all(isinstance(x, Fraction) for x in xi):
            return tuple((x - a) / s for x, a in zip(xi, self.offset))
        xi = np.asarray(xi, dtype=float)
        a = np.array([float(c) for c in self.offset])
        return (xi - a) / float(s)

    def freq_map_inverse(self, eta):
        eta = np.asarray(eta, dtype=float)
        a = np.array([float(c) for c in self.offset])
        return a + float(self.scale) * eta

    def space_map(self, x) -> np.ndarray:
        """T_Q(x_bar, x_n) = ((x_bar + 2 a x_n) sigma^(1/2), x_n sigma)."""
        x = np.asarray(x, dtype=float)
        a = np.array([float(c) for c in self.offset])
        s = float(self.scale)
        xbar, xn = x[..., :-1], x[..., -1:]
        return np.concatenate([(xbar + 2.0 * a * xn) * s, xn * float(self.sigma)], axis=-1)

    def space_map_inverse(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        a = np.array([float(c) for c in self.offset])
        s = float(self.scale)
        xn = y[..., -1:] / float(self.sigma)
        xbar = y[..., :-1] / s - 2.0 * a * xn
        return np.concatenate([xbar, xn], axis=-1)

    def space_matrix(self) -> np.ndarray:
        d = len(self.offset)
        s = float(self.scale)
        mat = np.zeros((d + 1, d + 1))
        for i, a in enumerate(self.offset):
            mat[i, i] = s
            mat[i, d] = 2.0 * float(a) * s
        mat[d, d] = float(self.sigma)
        return mat

    def space_determinant(self) -> Fraction:
        # upper triangular: s^d * sigma = sigma^((n+1)/2)
        return self.scale ** len(self.offset) * self.sigma


def _exact_sqrt(x: Fraction) -> Fraction:
    num, den = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if num * num != x.numerator or den * den != x.denominator:
        raise InvalidScaleError(f"{x} has no rational square root")
    return Fraction(num, den)


def parabolic_rescale_maps(Q: FrequencyCube) -> RescaleMaps:
    if any(c < 0 or c + Q.side > 1 for c in Q.corner):
        raise DomainError(f"{Q} is not inside the unit cube")
    return RescaleMaps(Q.corner, Q.side ** 2)
