"""Command line front end.

    decoupling-lab [--config FILE] [--workers N] [--seed S] [--out DIR] [--verbose]
                   COMMAND [key=value ...]

Configuration is plain ``key=value`` text; later sources override earlier ones
(file, then flags, then trailing overrides).  Every run writes its data files
plus ``manifest.json`` with sha256 checksums into the output directory.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateInputError, LabError, TransversalityError

log = logging.getLogger("decoupling_lab")

COMMANDS = ("extend", "ratio", "sweep", "kakeya", "multiscale", "compare", "verify", "fit")
NEEDS_SEED = {"extend", "ratio", "sweep", "kakeya", "multiscale", "compare"}

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_DEGENERATE, EXIT_IO = 0, 1, 2, 3, 4

DEFAULTS = {
    "n": "2", "p": "4", "E": "8", "M": "8", "padding": "4", "spacing": "0.5",
    "delta_exponents": "1,2,3,4", "trials": "20", "kind": "random-gaussian", "force": "",
    "delta": "1/8", "m": "1", "draws": "20", "transverse_cubes": "", "nu": "",
    "R": "256", "tiles_per_family": "16", "tilt": "0.1", "spread": "0.1", "tiles": "",
    "layout": "random", "points": "0,0", "input": "", "output_path": "out",
}
KEYS = set(DEFAULTS) | {"command", "seed", "workers"}


class ConfigError(LabError, ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    command: str
    n: int
    p: float
    E: float
    delta_exponents: list[int]
    trials: int
    seed: int | None
    M: int
    padding: float
    spacing: float
    output_path: str
    workers: int | None = None
    extra: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "extra"}
        out.update(self.extra)
        return out


def parse_pairs(source: str) -> dict[str, str]:
    pairs = {}
    for raw in source.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError([f"line {raw!r} is not key=value"])
        pairs[key.strip()] = value.strip()
    return pairs


def _dyadic(text: str) -> Fraction:
    from .geometry import is_dyadic
    x = Fraction(text)
    if not is_dyadic(x):
        raise ValueError(f"{text} is not dyadic")
    return x


def parse_config(source: str | dict, overrides: dict | None = None) -> ExperimentConfig:
    """Validate key=value text (or a dict of strings); every violation is reported at once."""
    pairs = parse_pairs(source) if isinstance(source, str) else dict(source)
    pairs.update(overrides or {})
    errors = [f"unknown key {k!r}" for k in pairs if k not in KEYS]
    vals = dict(DEFAULTS)
    vals.update({k: v for k, v in pairs.items() if k in KEYS})
    command = vals.get("command", "")
    if command not in COMMANDS:
        errors.append(f"command must be one of {', '.join(COMMANDS)}, got {command!r}")

    def num(key, kind=float, check=None, message=None):
        try:
            v = kind(vals[key])
        except (TypeError, ValueError):
            errors.append(f"{key}={vals[key]!r} is not a valid {kind.__name__}")
            return None
        if check is not None and not check(v):
            errors.append(message or f"{key}={vals[key]} is out of range")
        return v

    n = num("n", int, lambda v: v >= 2, "n must be >= 2")
    p = num("p", float, lambda v: v >= 2, "p must be ≥ 2")
    E = num("E", float, lambda v: v >= 1, "E must be >= 1")
    M = num("M", int, lambda v: v >= 1, "M must be >= 1")
    padding = num("padding", float, lambda v: v >= 1, "padding must be >= 1")
    spacing = num("spacing", float, lambda v: 0 < v <= 0.5, "spacing must lie in (0, 1/2]")
    trials = num("trials", int, lambda v: v >= 1, "trials must be >= 1")
    num("m", int, lambda v: v >= 1, "m must be >= 1")
    num("draws", int, lambda v: v >= 1, "draws must be >= 1")
    num("R", float, lambda v: v > 0 and float(v).is_integer() and (int(v) & (int(v) - 1)) == 0,
        "R must be a power of two")
    num("tiles_per_family", int, lambda v: v >= 1, "tiles_per_family must be >= 1")
    try:
        exps = [int(x) for x in vals["delta_exponents"].split(",") if x.strip()]
        if not exps or any(k < 1 for k in exps):
            errors.append("delta_exponents must be positive integers (delta = 4^-k)")
    except ValueError:
        errors.append(f"delta_exponents={vals['delta_exponents']!r}: non-dyadic scale "
                      "(give integers k with delta = 4^-k)")
        exps = []
    try:
        d = _dyadic(vals["delta"])
        if d >= 1:
            errors.append(f"delta={vals['delta']} must be below 1")
    except (ValueError, ZeroDivisionError):
        errors.append(f"delta={vals['delta']!r} is a non-dyadic scale")
    if vals["transverse_cubes"]:
        try:
            parse_cubes(vals["transverse_cubes"])
        except (ValueError, LabError) as exc:
            errors.append(f"transverse_cubes: {exc}")
    seed = None
    if "seed" in vals:
        seed = num("seed", int, lambda v: v >= 0, "seed must be >= 0")
    elif command in NEEDS_SEED:
        errors.append(f"seed is required for command {command!r}")
    workers = None
    if "workers" in vals:
        workers = num("workers", int, lambda v: v >= 1, "workers must be >= 1")
    if errors:
        raise ConfigError(errors)
    extra = {k: vals[k] for k in DEFAULTS if k not in
             ("n", "p", "E", "M", "padding", "spacing", "delta_exponents", "trials", "output_path")}
    return ExperimentConfig(command, n, p, E, exps, trials, seed, M, padding, spacing,
                            vals["output_path"], workers, extra)


def parse_cubes(text: str):
    """``corner@side`` entries separated by ``;``, corners comma separated: ``0@1/4;3/4@1/4``."""
    from .geometry import FrequencyCube
    cubes = []
    for part in text.split(";"):
        corner, _, side = part.partition("@")
        cubes.append(FrequencyCube(tuple(Fraction(c) for c in corner.split(",")), Fraction(side)))
    return tuple(cubes)


def default_cubes(n: int):
    from .geometry import FrequencyCube
    q = Fraction(1, 4)
    if n == 2:
        return (FrequencyCube((Fraction(0),), q), FrequencyCube((Fraction(3, 4),), q))
    corners = [(Fraction(0),) * (n - 1)]
    for i in range(n - 1):
        c = [Fraction(0)] * (n - 1)
        c[i] = Fraction(3, 4)
        corners.append(tuple(c))
    return tuple(FrequencyCube(c, q) for c in corners)


def parse_tiles(text: str, R: float):
    """Families separated by ``|``, tiles by ``;``, each ``center:direction[:amplitude]``."""
    from .kakeya import Tile
    families = []
    for fam in text.split("|"):
        tiles = []
        for spec in fam.split(";"):
            parts = spec.split(":")
            center = [float(x) for x in parts[0].split(",")]
            direction = [float(x) for x in parts[1].split(",")]
            amp = float(parts[2]) if len(parts) > 2 else 1.0
            tiles.append(Tile.for_scale(center, direction, R, amp))
        families.append(tiles)
    return families


# --- output -------------------------------------------------------------------

class Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}
        self.stages: list[dict] = []

    def write(self, name: str, text: str):
        data = text.encode()
        (self.root / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        log.info("wrote %s", self.root / name)

    def write_json(self, name: str, obj):
        self.write(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")

    def stage(self, name: str, start: float):
        self.stages.append({"stage": name, "wall_ms": round(1000.0 * (time.perf_counter() - start), 3)})


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_json"):
        return obj.to_json()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


# --- commands -----------------------------------------------------------------

def _cmd_extend(cfg: ExperimentConfig, out: Outputs):
    from .fields import evaluate_extension, make_test_function
    from .geometry import FrequencyCube
    Q = FrequencyCube.unit(cfg.n - 1)
    g = make_test_function(cfg.extra["kind"], Q, cfg.M, seed=cfg.seed,
                           cap=FrequencyCube((Fraction(0),) * (cfg.n - 1), Fraction(1, 2)))
    pts = np.array([[float(x) for x in p.split(",")] for p in cfg.extra["points"].split(";")])
    if pts.shape[1] != cfg.n:
        from .errors import DomainError
        raise DomainError(f"points must have {cfg.n} coordinates")
    vals = evaluate_extension(g, pts)
    cols = [f"x{i + 1}" for i in range(cfg.n)] + ["re", "im", "abs"]
    rows = [dict(zip(cols, [repr(float(c)) for c in x] + [repr(float(v.real)), repr(float(v.imag)),
                                                            repr(float(abs(v)))]))
            for x, v in zip(pts, vals)]
    out.write("extend.csv", _csv(rows, cols))


def _instance(cfg: ExperimentConfig, k: int):
    from .decoupling import DecouplingInstance
    return DecouplingInstance.from_exponent(cfg.n, cfg.p, cfg.E, k, M=cfg.M, padding=cfg.padding,
                                            spacing=cfg.spacing)


def _cmd_ratio(cfg: ExperimentConfig, out: Outputs):
    from .decoupling import decoupling_ratio
    from .fields import make_test_function
    rows = []
    for k in cfg.delta_exponents:
        inst = _instance(cfg, k)
        caps = inst.caps()
        g = make_test_function(cfg.extra["kind"], inst.frequency_cube, inst.cells_per_axis,
                               seed=cfg.seed, cap=caps[0])
        rows.append({"delta_exponent": k, "ratio": decoupling_ratio(g, inst), "kind": cfg.extra["kind"]})
    out.write_json("ratio.json", {"schema_version": 1, "seed": cfg.seed, "rows": rows})


def _cmd_sweep(cfg: ExperimentConfig, out: Outputs):
    from .decoupling import scale_sweep
    from .errors import InsufficientDataError
    report = scale_sweep(cfg.n, cfg.p, cfg.E, cfg.delta_exponents, cfg.trials, cfg.seed, M=cfg.M,
                         padding=cfg.padding, spacing=cfg.spacing, force=cfg.extra["force"] or None,
                         workers=cfg.workers)
    out.write("sweep.csv", report.to_csv())
    for row in report.rows:
        out.stages.append({"stage": f"sweep delta_exponent={row.delta_exponent}",
                           "wall_ms": round(row.wall_ms, 3)})
    if report.eta_hat is None:
        raise InsufficientDataError(f"fit needs at least 3 scales, got {len(report.rows)}; "
                                    "raw rows were written to sweep.csv")
    out.write("fit.json", report.to_json() + "\n")


def _cmd_fit(cfg: ExperimentConfig, out: Outputs):
    from .decoupling import SCHEMA_VERSION, fit_eta, read_sweep_csv
    path = cfg.extra["input"]
    if not path:
        from .errors import InsufficientDataError
        raise InsufficientDataError("fit needs input=<sweep csv>")
    rows = read_sweep_csv(Path(path).read_text())
    eta, res = fit_eta(rows)
    out.write_json("fit.json", {"schema_version": SCHEMA_VERSION, "eta_hat": eta, "residual": res,
                                "rows": [{"delta": d, "best_ratio": r} for d, r in rows],
                                "lower_bound": True})


def _cmd_kakeya(cfg: ExperimentConfig, out: Outputs):
    from .kakeya import KAKEYA_COLUMNS, kakeya_check, perpendicular_tiles, random_tile_families
    R = float(cfg.extra["R"])
    nu = float(cfg.extra["nu"] or 0.5)
    if cfg.extra["tiles"]:
        families = parse_tiles(cfg.extra["tiles"], R)
    elif cfg.extra["layout"] == "perpendicular":
        families = perpendicular_tiles(R)
    else:
        families = random_tile_families(cfg.n, R, int(cfg.extra["tiles_per_family"]), cfg.seed,
                                        float(cfg.extra["tilt"]), float(cfg.extra["spread"]))
    res = kakeya_check(families, R, nu)
    out.write("kakeya.csv", _csv([res.row()], KAKEYA_COLUMNS))


def _transverse(cfg: ExperimentConfig):
    cubes = parse_cubes(cfg.extra["transverse_cubes"]) if cfg.extra["transverse_cubes"] else default_cubes(cfg.n)
    nu = float(cfg.extra["nu"]) if cfg.extra["nu"] else None
    return cubes, nu


def _cmd_multiscale(cfg: ExperimentConfig, out: Outputs):
    from .fields import make_test_function
    from .geometry import FrequencyCube
    from .multilinear import TransverseConfig, multiscale_inequality_check
    delta = Fraction(cfg.extra["delta"])
    m = int(cfg.extra["m"])
    cubes, nu = _transverse(cfg)
    # the multiscale check only needs side >= delta; certify at the coarsest scale the cubes admit
    tc = TransverseConfig(cubes, cubes[0].side ** (2 ** m), m, nu)
    M = int(round(1 / float(delta) ** (2 ** m)))
    ledgers = []
    for d in range(int(cfg.extra["draws"])):
        g = make_test_function(cfg.extra["kind"], FrequencyCube.unit(cfg.n - 1), M, seed=cfg.seed + d)
        ledgers.append(multiscale_inequality_check(g, delta, cfg.p, m, tc, cfg.E, cfg.padding,
                                                   cfg.spacing).to_json())
    out.write_json("ledger.json", {"schema_version": 1, "delta": str(delta), "m": m, "p": cfg.p,
                                   "max_implied_constant": max(l["implied_constant"] for l in ledgers),
                                   "draws": ledgers})


def _cmd_compare(cfg: ExperimentConfig, out: Outputs):
    from .multilinear import linear_vs_multilinear_report
    cubes, _ = _transverse(cfg)
    rep = linear_vs_multilinear_report(cfg.n, cfg.p, cfg.delta_exponents, cubes, int(cfg.extra["m"]),
                                       cfg.E, cfg.trials, cfg.seed, cfg.M, cfg.padding, cfg.spacing,
                                       cfg.workers)
    out.write_json("compare.json", rep)
    cols = ["delta_exponent", "linear", "multilinear", "linear_kind", "multilinear_kind", "nu", "mu",
            "m", "admissible"]
    out.write("compare.csv", _csv([{k: r[k] for k in cols} for r in rep["rows"]], cols))


def _cmd_verify(cfg: ExperimentConfig, out: Outputs) -> int:
    from .verify import run_suite
    results = run_suite()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    out.write_json("verify.json", {"schema_version": 1,
                                   "results": [{"name": r.name, "ok": r.ok, "detail": r.detail}
                                               for r in results]})
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


HANDLERS = {"extend": _cmd_extend, "ratio": _cmd_ratio, "sweep": _cmd_sweep, "kakeya": _cmd_kakeya,
            "multiscale": _cmd_multiscale, "compare": _cmd_compare, "verify": _cmd_verify,
            "fit": _cmd_fit}


def run(cfg: ExperimentConfig) -> int:
    """Dispatch one experiment; returns the process exit status."""
    root = Path(cfg.output_path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        probe = root / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: cannot write to {root}: {exc}", file=sys.stderr)
        return EXIT_IO
    out = Outputs(root)
    start = time.perf_counter()
    status = EXIT_OK
    try:
        status = HANDLERS[cfg.command](cfg, out) or EXIT_OK
    except TransversalityError as exc:
        print(f"error: {exc} (offending: {exc.offending})", file=sys.stderr)
        status = EXIT_INVALID
    except DegenerateInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_DEGENERATE
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    out.stage(cfg.command, start)
    manifest = {"schema_version": 1, "tool": "decoupling-lab", "version": __version__,
                "config": cfg.echo(), "exit_status": status, "stages": out.stages,
                "checksums": dict(sorted(out.files.items()))}
    try:
        (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                                       default=_jsonable) + "\n")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decoupling-lab", description=__doc__.splitlines()[0])
    ap.add_argument("items", nargs="*", metavar="COMMAND | key=value",
                    help=f"one of {', '.join(COMMANDS)}, then key=value overrides")
    ap.add_argument("--config", type=Path)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    items = list(args.items)
    command = items.pop(0) if items and "=" not in items[0] else None
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    pairs: dict[str, str] = {}
    if args.config is not None:
        try:
            pairs.update(parse_pairs(args.config.read_text()))
        except OSError as exc:
            print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
            return EXIT_IO
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
    if command:
        pairs["command"] = command
    if args.seed is not None:
        pairs["seed"] = str(args.seed)
    if args.out is not None:
        pairs["output_path"] = args.out
    workers = args.workers
    if workers is None and "workers" not in pairs and os.environ.get("DECOUPLING_LAB_WORKERS"):
        pairs["workers"] = os.environ["DECOUPLING_LAB_WORKERS"]
    elif workers is not None:
        pairs["workers"] = str(workers)
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            print(f"error: override {item!r} is not key=value", file=sys.stderr)
            return EXIT_INVALID
        pairs[key] = value
    try:
        cfg = parse_config(pairs)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    log.info("config %s", cfg.echo())
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
