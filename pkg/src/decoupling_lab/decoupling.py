"""The linear decoupling functional and the empirical search for its constant.

For a cube B of side 1/delta and caps Q in D_{delta^(1/2)}([0,1]^{n-1}) the ratio

    ||E g||_{L^p(w_B)} / (sum_Q ||E_Q g||^2_{L^p(w_B)})^(1/2)

is evaluated on one shared SpatialGrid.  Maximizing it over a finite trial
family gives a lower bound for the decoupling constant, never an upper bound.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DegenerateInputError, DomainError, InsufficientDataError, InvalidExponentError, InvalidScaleError
from .fields import GridEvaluator, GridFunction, SpatialPointSet, evaluate_extension
from .geometry import FrequencyCube, SpatialCube, as_fraction, dyadic_exponent, dyadic_partition, is_dyadic
from .grid import SpatialGrid
from .parallel import ordered_map
from .weights import WeightSpec, weight_on_grid

SCHEMA_VERSION = 1
TRIAL_KINDS = ("constant", "single-cap", "random-phase", "random-gaussian")
SWEEP_COLUMNS = ("schema_version", "n", "p", "E", "delta_exponent", "trials", "seed",
                 "best_ratio", "argmax_kind")


def delta_from_exponent(k: int) -> Fraction:
    return Fraction(1, 4 ** int(k))


def delta_exponent(delta) -> int:
    """k with delta = 4^-k, k >= 1."""
    delta = as_fraction(delta)
    if not is_dyadic(delta) or delta >= 1:
        raise InvalidScaleError(f"delta={delta} is not in 4^-N")
    e = dyadic_exponent(delta)
    if e % 2:
        raise InvalidScaleError(f"delta={delta} is a power of 2 but not of 4")
    return -e // 2


@dataclass(frozen=True)
class DecouplingInstance:
    n: int
    p: float
    E: float
    delta: Fraction
    cap_scale: Fraction | None = None
    M: int = 8
    padding: float = 4.0
    spacing: float = 0.5
    model: str = "continuum"

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        if self.p < 2:
            raise InvalidExponentError(f"p must be >= 2, got {self.p}")
        delta = as_fraction(self.delta)
        k = delta_exponent(delta)
        object.__setattr__(self, "delta", delta)
        cap = Fraction(1, 2 ** k) if self.cap_scale is None else as_fraction(self.cap_scale)
        if not is_dyadic(cap) or cap > 1:
            raise InvalidScaleError(f"cap scale {cap} is not in 2^-N")
        object.__setattr__(self, "cap_scale", cap)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "E", float(self.E))

    @classmethod
    def from_exponent(cls, n: int, p: float, E: float, k: int, **kw) -> "DecouplingInstance":
        return cls(n, p, E, delta_from_exponent(k), **kw)

    @property
    def delta_exponent(self) -> int:
        return delta_exponent(self.delta)

    @property
    def dim(self) -> int:
        return self.n - 1

    @property
    def cube(self) -> SpatialCube:
        return SpatialCube.centered(self.n, float(1 / self.delta))

    @property
    def frequency_cube(self) -> FrequencyCube:
        return FrequencyCube.unit(self.dim)

    @property
    def cells_per_axis(self) -> int:
        return int(self.M / self.cap_scale)

    def caps(self) -> list[FrequencyCube]:
        return dyadic_partition(self.frequency_cube, self.cap_scale)

    def grid(self) -> SpatialGrid:
        return SpatialGrid(self.cube, self.padding, self.spacing)

    def weight(self) -> WeightSpec:
        return WeightSpec(self.cube, self.E)

    def to_json(self) -> dict:
        return {"n": self.n, "p": self.p, "E": self.E, "delta": str(self.delta),
                "cap_scale": str(self.cap_scale), "M": self.M, "padding": self.padding,
                "spacing": self.spacing, "model": self.model}


def _ratio_from_sums(total: np.ndarray, groups: np.ndarray, p: float) -> float:
    rhs = math.sqrt(float(np.sum(groups[:, 0] ** (2.0 / p))))
    if rhs == 0:
        raise DegenerateInputError("g vanishes on every cap")
    return float(total[0]) ** (1.0 / p) / rhs


class RatioEngine:
    """Precomputed phase tables for repeated ratio evaluations on one instance."""

    def __init__(self, inst: DecouplingInstance):
        self.inst = inst
        self.caps = inst.caps()
        self.template = GridFunction(inst.frequency_cube, inst.cells_per_axis,
                                     np.zeros((inst.cells_per_axis,) * inst.dim), inst.model)
        grid = inst.grid()
        self.evaluator = GridEvaluator.for_caps(self.template, self.caps, grid)
        self.weight = weight_on_grid(inst.weight(), grid)
        cap_index = np.empty(self.template.values.shape, dtype=np.int64)
        for i, q in enumerate(self.caps):
            cap_index[self.template.cell_block(q)] = i
        self.cap_index = cap_index

    def ratio(self, values: np.ndarray) -> float:
        g = self.template.with_values(values)
        total, groups = self.evaluator.power_sums(g.coefficients(), [self.inst.p], self.weight)
        return _ratio_from_sums(total, groups, self.inst.p)

    def trial(self, seed: int, index: int, force: str | None = None) -> tuple[str, np.ndarray]:
        """The test function for trial ``index``; the family cycles through TRIAL_KINDS."""
        rng = np.random.default_rng([seed, index])
        shape = self.template.values.shape
        kind = force or (TRIAL_KINDS[index] if index < 2 else TRIAL_KINDS[2 + index % 2])
        if kind == "constant":
            return kind, np.ones(shape, dtype=complex)
        if kind == "single-cap":
            vals = np.zeros(shape, dtype=complex)
            vals[self.cap_index == rng.integers(len(self.caps))] = 1.0
            return kind, vals
        if kind == "random-phase":
            phases = np.exp(2j * np.pi * rng.random(len(self.caps)))
            return kind, phases[self.cap_index]
        if kind == "random-gaussian":
            z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            return kind, z / math.sqrt(2.0)
        raise DomainError(f"unknown trial kind {kind!r}")


@lru_cache(maxsize=2)
def _engine(inst: DecouplingInstance) -> RatioEngine:
    return RatioEngine(inst)


def decoupling_ratio(g: GridFunction, inst: DecouplingInstance) -> float:
    """Both sides of the decoupling inequality for g on one grid; returns lhs/rhs."""
    if g.cube != inst.frequency_cube:
        raise DomainError("g must be defined on the full unit cube")
    if not np.any(g.values):
        raise DegenerateInputError("g is identically zero")
    grid = inst.grid()
    caps = inst.caps()
    ev = GridEvaluator.for_caps(g, caps, grid)
    total, groups = ev.power_sums(g.coefficients(), [inst.p], weight_on_grid(inst.weight(), grid))
    return _ratio_from_sums(total, groups, inst.p)


def l2_decoupling_check(g: GridFunction, Q: FrequencyCube, B: SpatialCube, E: float = 8.0,
                        cap_scale=None, period_box: bool = False, x_n: float = 0.0,
                        padding: float = 4.0, spacing: float = 0.5) -> float:
    """L^2 decoupling down to caps of side 1/R, R = side(B).

    With ``period_box`` the norms are plain sums over the integer points of
    [0, 1/h)^{n-1} x {x_n}, h the frequency step; distinct frequencies are then
    exactly orthogonal and the ratio is 1 up to rounding.
    """
    R = B.side
    finest = 1 / as_fraction(R)
    cap = finest if cap_scale is None else as_fraction(cap_scale)
    if cap < finest:
        raise InvalidScaleError(f"cap scale {cap} is finer than 1/R = {finest}")
    if Q.side < finest:
        raise InvalidScaleError(f"cube side {Q.side} is smaller than 1/R = {finest}")
    if g.cube != Q:
        g = g.restrict(Q)
    caps = dyadic_partition(Q, cap)
    if period_box:
        P = g.step.denominator if g.step.numerator == 1 else None
        if P is None:
            raise InvalidScaleError(f"frequency step {g.step} is not 1/P for an integer P")
        ticks = [np.arange(P, dtype=float)] * g.dim + [np.array([float(x_n)])]
        mesh = np.meshgrid(*ticks, indexing="ij")
        pts = SpatialPointSet(np.stack([m.ravel() for m in mesh], axis=-1))
        lhs = float(np.sum(np.abs(evaluate_extension(g, pts)) ** 2))
        rhs = sum(float(np.sum(np.abs(evaluate_extension(g.restrict(q), pts)) ** 2)) for q in caps)
    else:
        grid = SpatialGrid(B, padding, spacing)
        ev = GridEvaluator.for_caps(g, caps, grid)
        total, groups = ev.power_sums(g.coefficients(), [2.0], weight_on_grid(WeightSpec(B, E), grid))
        lhs, rhs = float(total[0]), float(np.sum(groups[:, 0]))
    if rhs == 0:
        raise DegenerateInputError("g is identically zero")
    return math.sqrt(lhs / rhs)


def neighborhood_ratio(xi, t, amplitudes, R: float, p: float, E: float,
                       B: SpatialCube | None = None, padding: float = 4.0,
                       spacing: float = 0.5) -> float:
    """Decoupling ratio for f = sum_j a_j e(omega_j . x), omega_j = (xi_j, |xi_j|^2 + t_j).

    Each point must lie in the 1/R-neighborhood above [0,1]^{n-1}; points are
    binned by xi into caps of side R^(-1/2).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    t = np.asarray(t, dtype=float).ravel()
    amps = np.asarray(amplitudes, dtype=complex).ravel()
    if not (len(xi) == len(t) == len(amps)) or len(xi) == 0:
        raise DomainError("xi, t and amplitudes must be nonempty and of equal length")
    if np.any(xi < 0) or np.any(xi > 1):
        raise DomainError("frequency points must project into [0,1]^{n-1}")
    if np.any(t < 0) or np.any(t > 1.0 / R):
        raise DomainError(f"vertical offsets must lie in [0, 1/R] = [0, {1.0 / R}]")
    if not np.any(amps):
        raise DegenerateInputError("all amplitudes are zero")
    n = xi.shape[1] + 1
    B = SpatialCube.centered(n, R) if B is None else B
    width = R ** -0.5
    per_axis = int(round(1 / width))
    bins = np.minimum((xi / width).astype(np.int64), per_axis - 1)
    keys = np.ravel_multi_index(bins.T, (per_axis,) * (n - 1))
    groups = [np.flatnonzero(keys == k) for k in np.unique(keys)]
    freqs = np.concatenate([xi, (np.sum(xi * xi, axis=1) + t)[:, None]], axis=1)
    grid = SpatialGrid(B, padding, spacing)
    ev = GridEvaluator(freqs, grid, groups)
    total, sums = ev.power_sums(amps, [float(p)], weight_on_grid(WeightSpec(B, E), grid))
    return _ratio_from_sums(total, sums, float(p))


@dataclass
class Estimate:
    best_ratio: float
    argmax: dict
    ratios: list[float] = field(default_factory=list)


def _trial_ratio(engine: RatioEngine, job) -> tuple[str, float]:
    seed, index, force = job
    kind, vals = engine.trial(seed, index, force)
    return kind, engine.ratio(vals)


def estimate_constant(inst: DecouplingInstance, trials: int, seed: int,
                      force: str | None = None, refine: bool = True,
                      workers: int | None = 1) -> Estimate:
    """Lower bound for the decoupling constant: max ratio over a seeded trial family.

    Trial 0 is g = 1, trial 1 a single-cap indicator, later trials alternate
    per-cap random phases and complex Gaussian draws.  A greedy pass then
    re-draws one cap phase at a time on the best function, keeping improvements.
    ``force`` fixes the kind of every trial and disables the greedy pass.
    """
    if trials < 1:
        raise InsufficientDataError("need at least one trial")
    if force is not None and force not in TRIAL_KINDS:
        raise DomainError(f"unknown trial kind {force!r}")
    jobs = [(seed, i, force) for i in range(trials)]
    results = ordered_map(_trial_ratio, jobs, _engine, (inst,), workers)
    ratios = [r for _, r in results]
    best_i = int(np.argmax(ratios))
    best = ratios[best_i]
    argmax = {"kind": results[best_i][0], "trial": best_i, "seed": seed, "refined": 0}
    if refine and force is None and len(inst.caps()) > 1:
        engine = _engine(inst)
        _, vals = engine.trial(seed, best_i)
        rng = np.random.default_rng([seed, trials, 1])
        for ci in range(len(engine.caps)):
            cand = vals.copy()
            cand[engine.cap_index == ci] *= np.exp(2j * np.pi * rng.random())
            if not np.any(cand[engine.cap_index == ci]):
                continue
            r = engine.ratio(cand)
            if r > best:
                best, vals = r, cand
                argmax["refined"] += 1
    return Estimate(best, argmax, ratios)


@dataclass
class SweepRow:
    delta_exponent: int
    best_ratio: float
    argmax_kind: str
    argmax: dict
    wall_ms: float

    @property
    def delta(self) -> float:
        return 4.0 ** -self.delta_exponent


@dataclass
class DecouplingReport:
    n: int
    p: float
    E: float
    trials: int
    seed: int
    M: int
    padding: float
    spacing: float
    force: str | None
    rows: list[SweepRow]
    eta_hat: float | None = None
    residual: float | None = None
    wall_ms: float = 0.0

    def pairs(self) -> list[tuple[float, float]]:
        return [(r.delta, r.best_ratio) for r in self.rows]

    def csv_rows(self) -> list[dict]:
        return [{"schema_version": SCHEMA_VERSION, "n": self.n, "p": _num(self.p), "E": _num(self.E),
                 "delta_exponent": r.delta_exponent, "trials": self.trials, "seed": self.seed,
                 "best_ratio": repr(float(r.best_ratio)), "argmax_kind": r.argmax_kind}
                for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def fit_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "eta_hat": self.eta_hat, "residual": self.residual,
                "rows": [{"delta_exponent": r.delta_exponent, "delta": r.delta,
                          "best_ratio": r.best_ratio, "argmax": r.argmax} for r in self.rows],
                "lower_bound": True}

    def to_json(self) -> str:
        return json.dumps(self.fit_json(), indent=2, sort_keys=True)


def _num(x: float):
    return int(x) if float(x).is_integer() else x


def scale_sweep(n: int, p: float, E: float, delta_exponents: Sequence[int], trials: int, seed: int,
                M: int = 8, padding: float = 4.0, spacing: float = 0.5, force: str | None = None,
                workers: int | None = 1) -> DecouplingReport:
    """estimate_constant at each delta = 4^-k; fits eta when at least three scales are present."""
    start = time.perf_counter()
    rows = []
    for k in delta_exponents:
        t0 = time.perf_counter()
        inst = DecouplingInstance.from_exponent(n, p, E, k, M=M, padding=padding, spacing=spacing)
        est = estimate_constant(inst, trials, seed, force=force, workers=workers)
        rows.append(SweepRow(int(k), est.best_ratio, est.argmax["kind"], est.argmax,
                             1000.0 * (time.perf_counter() - t0)))
    report = DecouplingReport(n, float(p), float(E), trials, seed, M, padding, spacing, force, rows)
    if len(rows) >= 3:
        report.eta_hat, report.residual = fit_eta(report.pairs())
    report.wall_ms = 1000.0 * (time.perf_counter() - start)
    return report


def fit_eta(rows: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of log(ratio) against log(1/delta), and the RMS residual."""
    rows = list(rows)
    if len(rows) < 3:
        raise InsufficientDataError(f"need at least 3 scales to fit, got {len(rows)}")
    deltas = np.array([float(d) for d, _ in rows])
    ratios = np.array([float(r) for _, r in rows])
    if np.any(ratios <= 0) or not np.all(np.isfinite(ratios)):
        raise DegenerateInputError("ratios must be positive and finite")
    if np.any(deltas <= 0):
        raise DomainError("scales must be positive")
    x = np.log(1.0 / deltas)
    y = np.log(ratios)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


def read_sweep_csv(text: str) -> list[tuple[float, float]]:
    reader = csv.DictReader(io.StringIO(text))
    return [(4.0 ** -int(row["delta_exponent"]), float(row["best_ratio"])) for row in reader]
