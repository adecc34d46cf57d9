"""Transverse (multilinear) quantities: kappa_p, D_t and A_p, ball inflation,
the multiscale ledger, the broad/narrow trichotomy and the bootstrap arithmetic.

Notation: Q_1..Q_n are transverse frequency cubes, delta is the base scale,
level q means caps of side delta^q and B^r a spatial cube of side delta^-r.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .decoupling import SCHEMA_VERSION, DecouplingInstance, RatioEngine, estimate_constant, fit_eta
from .errors import (DegenerateInputError, DomainError, InsufficientDataError, InvalidExponentError,
                     InvalidScaleError, ResolutionError, TransversalityError)
from .fields import GridEvaluator, GridFunction
from .geometry import (FrequencyCube, SpatialCube, as_fraction, dyadic_exponent, dyadic_partition,
                       is_dyadic, transversality)
from .grid import SpatialGrid
from .parallel import ordered_map
from .weights import partition_sums, weight_on_grid, whole_window_kernel

__all__ = [
    "kappa", "critical_exponent", "TransverseConfig", "multilinear_D", "multilinear_A",
    "ball_inflation_check", "IterationLedger", "multiscale_inequality_check", "bootstrap_bound",
    "bootstrap_rhs", "cap_constants", "broad_narrow_classify", "Classification",
    "linear_vs_multilinear_report",
]


def kappa(p, n: int, exact: bool = False):
    """kappa_p = (pn - p - 2n) / ((p - 2)(n - 1)), and 0 for 2 <= p <= 2n/(n-1)."""
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    P = as_fraction(p)
    if P < 2:
        raise InvalidExponentError(f"p must be >= 2, got {p}")
    if P <= Fraction(2 * n, n - 1):
        val = Fraction(0)
    else:
        val = (P * n - P - 2 * n) / ((P - 2) * (n - 1))
    return val if exact else float(val)


def critical_exponent(n: int) -> Fraction:
    """2(n+1)/(n-1), the endpoint of the subcritical range."""
    return Fraction(2 * (n + 1), n - 1)


@dataclass(frozen=True)
class TransverseConfig:
    """n frequency cubes of equal side mu with mu >= delta^(2^-m), certified nu > 0."""

    cubes: tuple[FrequencyCube, ...]
    delta: Fraction
    m: int = 1
    nu: float | None = None
    sample_density: int = 4

    def __post_init__(self):
        cubes = tuple(self.cubes)
        object.__setattr__(self, "cubes", cubes)
        delta = as_fraction(self.delta)
        object.__setattr__(self, "delta", delta)
        n = len(cubes)
        if n < 2 or any(Q.dim != n - 1 for Q in cubes):
            raise DomainError(f"need n >= 2 cubes of dimension n-1, got {n}")
        if len({Q.side for Q in cubes}) != 1:
            raise InvalidScaleError("transverse cubes must have equal side lengths")
        if not is_dyadic(delta) or delta >= 1:
            raise InvalidScaleError(f"delta={delta} is not a dyadic scale below 1")
        if self.m < 1:
            raise DomainError(f"m must be >= 1, got {self.m}")
        # mu >= delta^(2^-m)  <=>  mu^(2^m) >= delta
        if self.mu ** (2 ** self.m) < delta:
            raise InvalidScaleError(
                f"side {self.mu} is below delta^(2^-{self.m}) for delta={delta}")
        cert = transversality(cubes, self.sample_density)
        object.__setattr__(self, "certificate", cert)
        if self.nu is None:
            object.__setattr__(self, "nu", cert.nu_lower)
        if not self.nu > 0:
            raise TransversalityError("cubes are not transverse (sampled determinant is 0)",
                                      offending=tuple(str(Q) for Q in cubes))
        if cert.nu_lower < self.nu:
            raise TransversalityError(
                f"sampled transversality {cert.nu_lower:.6g} is below the declared nu={self.nu}",
                offending=tuple(str(Q) for Q in cubes))

    @property
    def n(self) -> int:
        return len(self.cubes)

    @property
    def mu(self) -> Fraction:
        return self.cubes[0].side

    def to_json(self) -> dict:
        return {"cubes": [Q.to_json() for Q in self.cubes], "delta": str(self.delta),
                "m": self.m, "nu": self.nu, "sample_density": self.sample_density}


def _level_side(delta: Fraction, level: int) -> Fraction:
    return delta ** level


def _cube_level(B: SpatialCube, delta: Fraction) -> int:
    """r with side(B) = delta^-r."""
    side = as_fraction(B.side)
    e_side, e_delta = dyadic_exponent(side), dyadic_exponent(delta)
    if e_side % e_delta:
        raise InvalidScaleError(f"cube side {B.side} is not a power of 1/delta = {1 / delta}")
    return -e_side // e_delta


def _caps(Q: FrequencyCube, side: Fraction) -> list[FrequencyCube]:
    if side > Q.side:
        raise InvalidScaleError(f"cap side {side} exceeds the cube side {Q.side}")
    return dyadic_partition(Q, side)


def _cap_partition_sums(g: GridFunction, caps: Sequence[FrequencyCube], grid: SpatialGrid,
                        B: SpatialCube, requests: Sequence[tuple[float, float, float]],
                        padding: float | None = None) -> list[np.ndarray]:
    """For each request (t, sub_side, E): array (n_caps, k^n) of #-norms^t of E_q g on D_{sub_side}(B)."""
    ev = GridEvaluator.for_caps(g, caps, grid)
    out = [np.zeros((len(caps), round(B.side / sub) ** grid.dim)) for _, sub, _ in requests]
    coeffs = g.coefficients()
    shape2 = grid.shape[0:1] + (grid.size // grid.shape[0],)
    buf = np.empty(shape2)
    whole = [whole_window_kernel(grid, B, E, padding) if sub == B.side else None
             for _, sub, E in requests]
    for ci, F in ev.fields(coeffs):
        F2 = F.reshape(shape2)
        for ri, (t, sub, E) in enumerate(requests):
            ps = np.array([float(t)])
            if whole[ri] is not None:
                acc = np.zeros(1)
                _kernels.power_sums(F2, whole[ri].reshape(shape2), ps, _kernels.half_powers(ps), acc)
                sums = acc
            else:
                _kernels.abs_power(F2, float(t), int(_kernels.half_powers(ps)[0]), buf)
                sums = partition_sums(buf, grid, B, sub, E, padding)
            out[ri][ci] = sums.ravel() * grid.cell_volume / sub ** grid.dim
    return out


def _geometric_l2(per_cube: Sequence[np.ndarray], t: float) -> np.ndarray:
    """[prod_i (sum_q ||E_q g||_t^2)^(1/2)]^(1/n), from per-cube arrays of norms^t."""
    n = len(per_cube)
    prod = np.ones(per_cube[0].shape[1])
    for sums in per_cube:
        prod = prod * np.sqrt(np.sum(sums ** (2.0 / t), axis=0))
    return prod ** (1.0 / n)


def _grid(B: SpatialCube, padding: float, spacing: float) -> SpatialGrid:
    return SpatialGrid(B, padding, spacing)


def multilinear_D(t: float, q: int, B: SpatialCube, g: GridFunction, cfg: TransverseConfig,
                  delta=None, E: float = 8.0, padding: float = 4.0, spacing: float = 0.5) -> float:
    """D_t(q, B, g) with caps of side delta^q inside each Q_i and #-norms against w_{B,E}."""
    delta = cfg.delta if delta is None else as_fraction(delta)
    grid = _grid(B, padding, spacing)
    per_cube = [_cap_partition_sums(g, _caps(Q, _level_side(delta, q)), grid, B,
                                    [(t, B.side, E)])[0] for Q in cfg.cubes]
    return float(_geometric_l2(per_cube, t)[0])


def _average(values: np.ndarray, p: float) -> float:
    if len(values) == 1:
        return float(values[0])
    return float(np.mean(values ** p)) ** (1.0 / p)


def multilinear_A(p: float, q: int, B: SpatialCube, s: int, g: GridFunction, cfg: TransverseConfig,
                  delta=None, E: float = 8.0, padding: float = 4.0, spacing: float = 0.5) -> float:
    """A_p(q, B^r, s, g): the l^p average of D_2(q, B^s, g) over B^s in D_{delta^-s}(B^r)."""
    delta = cfg.delta if delta is None else as_fraction(delta)
    r = _cube_level(B, delta)
    if not 1 <= q <= s <= r:
        raise InvalidScaleError(f"need 1 <= q <= s <= r, got q={q}, s={s}, r={r}")
    grid = _grid(B, padding, spacing)
    sub = float(delta ** -s)
    per_cube = [_cap_partition_sums(g, _caps(Q, _level_side(delta, q)), grid, B,
                                    [(2.0, sub, E)])[0] for Q in cfg.cubes]
    return _average(_geometric_l2(per_cube, 2.0), p)


def ball_inflation_check(g: GridFunction, delta, p: float, cfg: TransverseConfig,
                         B: SpatialCube | None = None, E: float = 8.0, padding: float = 4.0,
                         spacing: float = 0.5) -> tuple[float, float, float]:
    """Average over Delta in D_{1/delta}(B) of prod_i (sum_q ||E_q g||^2_{L^t#(w_Delta)})^(p/2n)
    against the same product with w_B, t = p(n-1)/n and caps of side delta."""
    delta = as_fraction(delta)
    n = cfg.n
    if p < 2 * n / (n - 1):
        raise InvalidExponentError(f"p={p} is below 2n/(n-1) = {2 * n / (n - 1)}")
    B = SpatialCube.centered(n, float(delta ** -2)) if B is None else B
    if abs(B.side - float(delta ** -2)) > 1e-9 * B.side:
        raise InvalidScaleError(f"B must have side delta^-2 = {float(delta ** -2)}")
    t = p * (n - 1) / n
    grid = _grid(B, padding, spacing)
    small, big = [], []
    for Q in cfg.cubes:
        a, b = _cap_partition_sums(g, _caps(Q, delta), grid, B,
                                   [(t, float(1 / delta), E), (t, B.side, E)])
        small.append(a)
        big.append(b)
    lhs = float(np.mean(_geometric_l2(small, t) ** p))
    rhs = float(_geometric_l2(big, t)[0] ** p)
    return lhs, rhs, (lhs / rhs if rhs > 0 else 0.0)


@dataclass
class IterationLedger:
    """Every term of the m-step multiscale inequality on one cube B^(2^m)."""

    kappa: float
    m: int
    p: float
    delta: str
    A: list[float]
    D: list[float]
    lhs: float
    rhs: float
    implied_constant: float
    chained_rhs: float
    step_constants: list[float]
    printed_rhs: float
    hoelder_ratio: float
    notes: list[str] = field(default_factory=list)

    def levels(self) -> list[dict]:
        out = []
        for l, a in enumerate(self.A):
            out.append({"l": l, "A": a, "D": self.D[l] if l < len(self.D) else None})
        return out

    def to_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "kappa": self.kappa, "m": self.m, "p": self.p,
                "delta": self.delta, "levels": self.levels(), "lhs": self.lhs, "rhs": self.rhs,
                "implied_constant": self.implied_constant, "chained_rhs": self.chained_rhs,
                "step_constants": self.step_constants, "printed_rhs": self.printed_rhs,
                "hoelder_ratio": self.hoelder_ratio, "notes": self.notes}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


MAX_M = 2


def multiscale_inequality_check(g: GridFunction, delta, p: float, m: int, cfg: TransverseConfig,
                                E: float = 8.0, padding: float = 4.0, spacing: float = 0.5,
                                allow_large_m: bool = False) -> IterationLedger:
    """Both sides of the m-step iteration on B = B^(2^m):

        A_p(1,B,1) <~ A_p(2^m,B,2^m)^((1-k)^m) prod_{l<m} D_p(2^l,B)^(k(1-k)^l),

    which for m = 1 is the one-step inequality A_p(1,B^2,1) <~ A_p(2,B^2,2)^(1-k) D_p(1,B^2)^k.
    A_l = A_p(2^l,B,2^l) and D_l = D_p(2^l,B) are recorded for every level.
    """
    delta = as_fraction(delta)
    notes = []
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    if m > MAX_M and not allow_large_m:
        raise InvalidScaleError(
            f"m={m} exceeds {MAX_M}: caps of side delta^(2^m) and cubes of side delta^-(2^m) "
            "are not resolvable at desk scale")
    if min(Q.side for Q in cfg.cubes) < delta:
        raise InvalidScaleError(f"transverse cubes must have side >= delta = {delta}")
    finest = delta ** (2 ** m)
    if g.step > finest:
        raise ResolutionError(f"caps of side {finest} need M >= {int(g.cube.side / finest)} "
                              f"cells per axis, got M={g.M}")
    k = kappa(p, cfg.n)
    B = SpatialCube.centered(cfg.n, float(delta ** -(2 ** m)))
    grid = _grid(B, padding, spacing)
    A, D = [], []
    for l in range(m + 1):
        q = 2 ** l
        requests = [(2.0, float(delta ** -q), E)]
        if l < m:
            requests.append((p, B.side, E))
        per_cube = [_cap_partition_sums(g, _caps(Q, delta ** q), grid, B, requests) for Q in cfg.cubes]
        A.append(_average(_geometric_l2([pc[0] for pc in per_cube], 2.0), p))
        if l < m:
            D.append(float(_geometric_l2([pc[1] for pc in per_cube], p)[0]))
    rhs = A[m] ** ((1 - k) ** m)
    for l in range(m):
        rhs *= D[l] ** (k * (1 - k) ** l)
    chained = A[m]
    for l in reversed(range(m)):
        chained = chained ** (1 - k) * D[l] ** k
    steps = []
    for l in range(m):
        denom = A[l + 1] ** (1 - k) * D[l] ** k
        steps.append(A[l] / denom if denom > 0 else math.inf)
    printed = A[m - 1] ** ((1 - k) ** (m - 1))
    for l in range(m - 1):
        printed *= D[l] ** (k * (1 - k) ** l)
    if m == 1:
        notes.append("printed m-1 form is A_p(1,B^2,1) on both sides for m=1; "
                     "the ledger uses the m-step chain ending at level 2^m")
    lhs = A[0]
    if lhs == 0 and rhs == 0:
        raise DegenerateInputError("g vanishes on every transverse cube")
    hoelder = A[m - 1] / D[m - 1] if D[m - 1] > 0 else math.inf
    return IterationLedger(kappa=k, m=m, p=float(p), delta=str(delta), A=A, D=D, lhs=lhs, rhs=rhs,
                           implied_constant=lhs / rhs if rhs > 0 else math.inf, chained_rhs=chained,
                           step_constants=steps, printed_rhs=printed, hoelder_ratio=hoelder,
                           notes=notes)


def bootstrap_rhs(eta, m: int, kap):
    """eta([2(1-k)]^m - 2k)/(1-2k), continued by eta(m+1) at k = 1/2."""
    exact = isinstance(eta, Fraction) and isinstance(kap, Fraction)
    half = Fraction(1, 2) if exact else 0.5
    if kap == half:
        return eta * (m + 1)
    return eta * ((2 * (1 - kap)) ** m - 2 * kap) / (1 - 2 * kap)


def bootstrap_bound(eta, m: int, p, n: int, exact: bool = False):
    """Right side of (n-1)/2 >= eta([2(1-k_p)]^m - 2k_p)/(1-2k_p) for p up to 2(n+1)/(n-1)."""
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    if as_fraction(p) > critical_exponent(n):
        raise InvalidExponentError(f"p={p} is above the critical exponent {critical_exponent(n)}")
    if exact:
        return bootstrap_rhs(as_fraction(eta), m, kappa(p, n, exact=True))
    return float(bootstrap_rhs(float(eta), m, kappa(p, n)))


# --- broad / narrow ---------------------------------------------------------

@dataclass
class CapConstants:
    values: dict
    K: int
    E: float
    weight_exponent: float
    p: float


def cap_constants(g: GridFunction, K: int, B: SpatialCube, p: float, E: float = 8.0,
                  padding: float = 4.0, spacing: float = 0.5) -> CapConstants:
    """c_alpha(B_K) = (|B_K|^-1 int |E_alpha g|^p w_{B_K,10E})^(1/p) for alpha in D_{1/K}([0,1]^{n-1})."""
    if not is_dyadic(K) or K < 1:
        raise InvalidScaleError(f"K={K} is not a power of two")
    caps = dyadic_partition(FrequencyCube.unit(g.dim), Fraction(1, int(K)))
    grid = _grid(B, padding, spacing)
    sums = _cap_partition_sums(g, caps, grid, B, [(p, B.side, 10.0 * E)])[0]
    vals = {q: float(v) ** (1.0 / p) for q, v in zip(caps, sums[:, 0])}
    return CapConstants(vals, int(K), float(E), 10.0 * E, float(p))


@dataclass
class Classification:
    scenario: int
    alpha_star: FrequencyCube
    s_big: list[FrequencyCube]
    witness: tuple[FrequencyCube, ...] | None = None
    witness_area: float | None = None
    nu_lower: float | None = None
    line: tuple[np.ndarray, np.ndarray] | None = None
    strip_width: float | None = None
    strip_contains_all: bool | None = None

    def to_json(self) -> dict:
        out = {"scenario": self.scenario, "alpha_star": self.alpha_star.to_json(),
               "s_big": [q.to_json() for q in self.s_big]}
        if self.witness is not None:
            out.update(witness=[q.to_json() for q in self.witness], witness_area=self.witness_area,
                       nu_lower=self.nu_lower)
        if self.line is not None:
            out.update(line={"point": self.line[0].tolist(), "direction": self.line[1].tolist()},
                       strip_width=self.strip_width, strip_contains_all=self.strip_contains_all)
        return out


def _max_area_triple(centers: np.ndarray) -> tuple[tuple[int, int, int], float]:
    best, arg = -1.0, (0, 1, 2)
    m = len(centers)
    for i in range(m - 2):
        a = centers[i]
        rest = centers[i + 1:]
        j, k = np.triu_indices(len(rest), 1)
        u, v = rest[j] - a, rest[k] - a
        area = 0.5 * np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        if len(area):
            idx = int(np.argmax(area))
            if area[idx] > best:
                best, arg = float(area[idx]), (i, i + 1 + int(j[idx]), i + 1 + int(k[idx]))
    return arg, best


def broad_narrow_classify(constants: Mapping[FrequencyCube, float] | CapConstants, K: int,
                          C: float = 4.0, sample_density: int = 4) -> Classification:
    """Sort one B_K into the three scenarios, tested in order.

    1. no member of S_big at distance >= 10/K from the dominant cap alpha*;
    2. some triple of S_big caps is K^-2 transverse (the max-area triple, certified
       by sampled normals);
    3. otherwise: the line L through the two furthest-apart S_big centers, with
       the strip of width C/K around it.
    """
    if isinstance(constants, CapConstants):
        constants = constants.values
    caps = list(constants)
    if not caps:
        raise DegenerateInputError("no cap constants given")
    if any(q.dim != 2 for q in caps):
        raise DomainError("the trichotomy is stated for caps in [0,1]^2")
    vals = np.array([float(constants[q]) for q in caps])
    star = int(np.argmax(vals))
    if vals[star] <= 0:
        raise DegenerateInputError("all cap constants vanish")
    thresh = float(K) ** (-C) * vals[star]
    big = [i for i in range(len(caps)) if vals[i] >= thresh]
    s_big = [caps[i] for i in big]
    centers = np.array([caps[i].center for i in big])
    c_star = caps[star].center
    far = np.linalg.norm(centers - c_star, axis=1) >= 10.0 / K - 1e-12
    if not np.any(far):
        return Classification(1, caps[star], s_big)
    if len(big) >= 3:
        (a, b, c), area = _max_area_triple(centers)
        triple = (s_big[a], s_big[b], s_big[c])
        cert = transversality(triple, sample_density)
        if cert.nu_lower >= float(K) ** -2:
            return Classification(2, caps[star], s_big, triple, area, cert.nu_lower)
    d = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    i, j = min(i, j), max(i, j)
    direction = (centers[j] - centers[i]) / d[i, j]
    rel = centers - centers[i]
    dist = np.abs(rel[:, 0] * direction[1] - rel[:, 1] * direction[0])
    width = C / K
    return Classification(3, caps[star], s_big, line=(centers[i], direction), strip_width=width,
                          strip_contains_all=bool(np.all(dist <= width / 2 + 1e-12)))


# --- linear versus multilinear ----------------------------------------------

class MultilinearEngine:
    """Both sides of the transverse inequality for the trial family of the linear search."""

    def __init__(self, inst: DecouplingInstance, cfg: TransverseConfig):
        self.inst, self.cfg = inst, cfg
        self.linear = RatioEngine(inst)
        self.grid = inst.grid()
        template = self.linear.template
        groups = [[template.cell_indices(q) for q in dyadic_partition(Q, inst.cap_scale)]
                  for Q in cfg.cubes]
        self.sizes = [len(grs) for grs in groups]
        self.evaluator = GridEvaluator(template.frequencies(), self.grid,
                                       [gr for grs in groups for gr in grs])
        self.weight_B = weight_on_grid(inst.weight(), self.grid)

    def ratio(self, values) -> float:
        inst, cfg, grid = self.inst, self.cfg, self.grid
        g = self.linear.template.with_values(values)
        n, p = cfg.n, inst.p
        B = inst.cube
        mu_inv = float(1 / cfg.mu)
        fields = self.evaluator.fields(g.coefficients())
        cube_sums, rhs_terms = [], []
        ps = np.array([p])
        halves = _kernels.half_powers(ps)
        for size in self.sizes:
            total = np.zeros(grid.shape, dtype=complex)
            cap_sq = 0.0
            for _ in range(size):
                _, F = next(fields)
                total += F
                acc = np.zeros(1)
                F2 = F.reshape(grid.shape[0], -1)
                _kernels.power_sums(F2, self.weight_B.reshape(F2.shape), ps, halves, acc)
                cap_sq += (acc[0] * grid.cell_volume) ** (2.0 / p)
            rhs_terms.append(cap_sq)
            buf = np.empty(total.shape[0:1] + (grid.size // grid.shape[0],))
            _kernels.abs_power(total.reshape(buf.shape), p, int(halves[0]), buf)
            cube_sums.append(partition_sums(buf, grid, B, mu_inv, 10.0 * inst.E) * grid.cell_volume)
        prod = np.ones_like(cube_sums[0])
        for s in cube_sums:
            prod = prod * s
        lhs = float(np.sum(prod ** (1.0 / n))) ** (1.0 / p)
        rhs = math.prod(rhs_terms) ** (1.0 / (2 * n))
        if rhs == 0:
            return 0.0
        return lhs / rhs


def _ml_setup(inst, cfg):
    return MultilinearEngine(inst, cfg)


def _ml_trial(engine: MultilinearEngine, job):
    seed, index = job
    kind, vals = engine.linear.trial(seed, index)
    return kind, engine.ratio(vals)


@dataclass
class CompareRow:
    delta_exponent: int
    linear: float
    multilinear: float
    linear_kind: str
    multilinear_kind: str
    nu: float
    mu: str
    m: int
    admissible: bool


def linear_vs_multilinear_report(n: int, p: float, delta_exponents: Sequence[int],
                                 cubes: Sequence[FrequencyCube], m: int, E: float, trials: int,
                                 seed: int, M: int = 8, padding: float = 4.0, spacing: float = 0.5,
                                 workers: int | None = 1) -> dict:
    """Per delta: the linear search estimate and the transverse ratio maximized over the same trials.

    Scales at which mu >= delta^(2^-m) fails are reported with NaN multilinear entries.
    """
    rows = []
    for k in delta_exponents:
        inst = DecouplingInstance.from_exponent(n, p, E, k, M=M, padding=padding, spacing=spacing)
        lin = estimate_constant(inst, trials, seed, workers=workers)
        try:
            cfg = TransverseConfig(tuple(cubes), inst.delta, m)
        except InvalidScaleError:
            cert = transversality(tuple(cubes))
            rows.append(CompareRow(int(k), lin.best_ratio, math.nan, lin.argmax["kind"], "",
                                   cert.nu_lower, str(cubes[0].side), m, False))
            continue
        if cfg.mu < inst.cap_scale:
            raise InvalidScaleError(f"cube side {cfg.mu} is below the cap scale {inst.cap_scale}")
        res = ordered_map(_ml_trial, [(seed, i) for i in range(trials)], _ml_setup, (inst, cfg), workers)
        ratios = [r for _, r in res]
        best = int(np.argmax(ratios))
        rows.append(CompareRow(int(k), lin.best_ratio, float(ratios[best]), lin.argmax["kind"], res[best][0],
                               cfg.nu, str(cfg.mu), m, True))
    out = {"schema_version": SCHEMA_VERSION, "n": n, "p": float(p), "E": float(E), "m": m,
           "trials": trials, "seed": seed, "lower_bound": True,
           "rows": [row.__dict__ for row in rows]}
    good = [r for r in rows if r.admissible]
    try:
        out["linear_slope"] = fit_eta([(4.0 ** -r.delta_exponent, r.linear) for r in rows])[0]
    except InsufficientDataError:
        out["linear_slope"] = None
    try:
        out["multilinear_slope"] = fit_eta([(4.0 ** -r.delta_exponent, r.multilinear) for r in good])[0]
    except (InsufficientDataError, DegenerateInputError):
        out["multilinear_slope"] = None
    return out
