"""Batch experiment runner.

    randiff <experiment> [options]
    randiff sweep --config suite.json

Every experiment produces a table (CSV) or a report (JSON).  Exit codes are
0 when all checks pass, 1 when a check fails and 2 for usage or config errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import concentration, dynamics, intersectivity, modular
from .profiles import Profile, ProfileError, RandomSet, partial_sums, sample, slln_ratio

log = logging.getLogger(__name__)

EXPERIMENTS = ("sample", "params", "tail", "intersect", "average", "slln", "blocks", "covering")
AVERAGE_MODES = ("multiple", "random", "semirandom", "centered")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_PROFILE = "power:0.5"


class ConfigError(ValueError):
    """A bad config value; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    experiment: str
    name: str | None = None
    profile: str | None = None
    n_max: int | None = None
    N: int | None = None
    seed: int = 0
    seeds: int = 1
    trials: int = 1000
    ell: int = 2
    eps: float = 0.5
    S_N: float | None = None
    family_size: int = 100
    family: str | None = None
    sigma: float = 2.0
    L: int = 10
    system: str = "rotation:101"
    mode: str = "multiple"
    x: int = 0
    every: int | None = None
    A: str | None = None
    A_size: int | None = None
    R: str | None = None
    tolerance: float = 0.1
    expect: dict[str, list] = field(default_factory=dict)
    out: str | None = None
    format: str | None = None
    timestamp: bool = True
    threads: int = 1

    @classmethod
    def from_dict(cls, d: dict, where: str = "config") -> ExperimentConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"{where}.{unknown[0]}", "unknown field")
        if "experiment" not in d:
            raise ConfigError(f"{where}.experiment", "missing")
        hints = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, val in d.items():
            _check_type(f"{where}.{key}", hints[key], val)
        cfg = cls(**d)
        cfg.validate(where)
        return cfg

    def validate(self, where: str = "config") -> None:
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(f"{where}.{name}", msg)

        need(self.experiment in EXPERIMENTS, "experiment", f"expected one of {EXPERIMENTS}")
        need(self.format in (None, "csv", "json"), "format", "expected csv or json")
        need(self.seeds >= 1, "seeds", "must be >= 1")
        need(self.trials >= 1, "trials", "must be >= 1")
        need(self.ell >= 1, "ell", "must be >= 1")
        need(self.threads >= 1, "threads", "must be >= 1")
        need(self.N is None or self.N >= 1, "N", "must be >= 1")
        need(self.n_max is None or self.n_max >= 1, "n_max", "must be >= 1")
        need(self.mode in AVERAGE_MODES, "mode", f"expected one of {AVERAGE_MODES}")
        need(self.sigma > 1, "sigma", "must exceed 1")
        need(self.L >= 1, "L", "must be >= 1")
        for key, val in (("A", self.A), ("R", self.R)):
            if val and val.startswith("@"):
                need(Path(val[1:]).exists(), key, f"file {val[1:]} does not exist")
        need(self.family is None or Path(self.family.lstrip("@")).exists(), "family",
             f"file {self.family} does not exist")
        if self.experiment in ("params", "tail", "intersect", "average", "slln", "covering"):
            need(self.N is not None, "N", f"required for {self.experiment}")
        if self.experiment in ("params", "covering"):
            need(self.N >= 2, "N", "must be >= 2")
        if self.experiment in ("params", "covering", "tail"):
            need(0 < self.eps < 1 or (self.experiment == "params" and self.eps == 1), "eps",
                 "must lie in (0, 1)")

    def output_format(self, default: str) -> str:
        if self.format:
            return self.format
        if self.out and self.out.endswith(".csv"):
            return "csv"
        if self.out and self.out.endswith(".json"):
            return "json"
        return default


_SCALARS = {"int": (int,), "float": (int, float), "str": (str,), "bool": (bool,)}


def _check_type(path: str, hint: str, val) -> None:
    """Reject config values whose JSON type does not match the field annotation."""
    if val is None and "None" in hint:
        return
    base = hint.split("|")[0].strip()
    if base.startswith("dict"):
        ok = isinstance(val, dict)
    else:
        kinds = _SCALARS[base]
        ok = isinstance(val, kinds) and (base == "bool" or not isinstance(val, bool))
    if not ok:
        raise ConfigError(path, f"expected {hint}, got {type(val).__name__} {val!r}")


@dataclass
class Result:
    """Rows for CSV, a report for JSON, and named pass/fail checks."""

    columns: list[str]
    rows: list[list[Any]]
    report: dict
    checks: dict[str, bool] = field(default_factory=dict)
    default_format: str = "json"

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


# helpers


def _profile(cfg: ExperimentConfig, n_max: int) -> Profile:
    try:
        return Profile.parse(cfg.profile or DEFAULT_PROFILE, n_max)
    except (ProfileError, ValueError) as exc:
        raise ConfigError("config.profile", str(exc)) from None


def _read_set_file(path: str) -> np.ndarray:
    """Elements from a bitmap (.bin) or a text file with one integer per line."""
    p = Path(path)
    if p.suffix == ".bin":
        from .bitmap import read_bitmap
        return np.flatnonzero(read_bitmap(p))
    els = [int(t) for t in p.read_text().split()]
    return np.asarray(els, dtype=np.int64)


def _file_arg(spec: str) -> str | None:
    """The path named by '@path', or by a bare path that exists."""
    if spec.startswith("@"):
        return spec[1:]
    return spec if Path(spec).is_file() else None


def _difference_set(cfg: ExperimentConfig, n_max: int, seed: int):
    """R from a file (text or bitmap, 1-based), 'squares', or a fresh sample of the profile."""
    if cfg.R is None:
        return sample(_profile(cfg, n_max), seed)
    if cfg.R == "squares":
        k = np.arange(1, math.isqrt(n_max) + 1)
        return RandomSet.from_elements(k * k, n_max)
    path = _file_arg(cfg.R)
    if path:
        if path.endswith(".bin"):
            return RandomSet.from_bitmap(path)
        return RandomSet.from_elements(_read_set_file(path), n_max)
    raise ConfigError("config.R", "expected a file, 'squares' or nothing")


def _finite_set(cfg: ExperimentConfig, N: int, seed: int) -> intersectivity.FiniteSet:
    spec = cfg.A or "random:0.5"
    path = _file_arg(spec)
    if path:
        if path.endswith(".bin"):
            return intersectivity.FiniteSet.from_bitmap(path)
        return intersectivity.FiniteSet.from_elements(_read_set_file(path), N)
    try:
        return intersectivity.FiniteSet.parse(spec, N, seed)
    except (ValueError, IndexError) as exc:
        raise ConfigError("config.A", str(exc)) from None


def _check_expectations(cfg: ExperimentConfig, res: Result) -> None:
    for key, bounds in cfg.expect.items():
        if key not in res.report:
            raise ConfigError(f"config.expect.{key}", "not a reported quantity")
        lo, hi = bounds
        v = res.report[key]
        res.checks[f"expect:{key}"] = (lo is None or v >= lo) and (hi is None or v <= hi)


# experiments


def exp_sample(cfg: ExperimentConfig) -> Result:
    n_max = cfg.n_max or cfg.N or 1000
    prof = _profile(cfg, n_max)
    rset = sample(prof, cfg.seed)
    report = {"profile": prof.to_dict(), "seed": cfg.seed, "n_max": n_max,
              "count": len(rset), "S": partial_sums(prof)(n_max),
              "elements": rset.elements.tolist()}
    return Result(["n"], [[int(n)] for n in rset.elements], report, default_format="csv")


def exp_params(cfg: ExperimentConfig) -> Result:
    if cfg.S_N is not None:
        S_N = cfg.S_N
    elif cfg.profile is not None:
        S_N = partial_sums(_profile(cfg, cfg.N))(cfg.N)
    else:
        # no profile: every n is selected, S(N) = N
        S_N = float(cfg.N)
    try:
        rep = modular.optimal_params(cfg.N, cfg.ell, cfg.eps, S_N)
    except modular.ModuliError as exc:
        raise ConfigError("config.N", str(exc)) from None
    d = rep.to_dict()
    d["lhs_floor"] = math.floor(rep.lhs_exact)
    return Result(list(d), [list(d.values())], d)


def exp_covering(cfg: ExperimentConfig) -> Result:
    S_N = cfg.S_N if cfg.S_N is not None else partial_sums(_profile(cfg, cfg.N))(cfg.N)
    try:
        mods = modular.select_moduli(cfg.N, cfg.ell)
    except modular.ModuliError as exc:
        raise ConfigError("config.N", str(exc)) from None
    Q = mods.Q
    bits = concentration.covering_bits(mods, Q, cfg.N)
    per_event = concentration.corollary1_bound(cfg.eps, S_N)
    log_union = bits * math.log(2) - cfg.eps ** 2 * S_N / 4
    d = {"N": cfg.N, "ell": cfg.ell, "eps": cfg.eps, "S_N": S_N, "q": list(mods.q), "Q": Q,
         "widened": mods.widened, "covering_bits": bits,
         "covering_bits_reference": concentration.covering_bits_reference(mods, Q, cfg.N),
         "log_cardinality": bits * math.log(2), "per_event_bound": per_event,
         "log_union_bound": log_union, "union_bound": min(1.0, math.exp(min(log_union, 700)))}
    return Result(list(d), [list(d.values())], d)


def _load_family(path: str, N: int) -> np.ndarray:
    """Coefficient rows from .npy or whitespace-separated text, one vector per row."""
    p = Path(path.lstrip("@"))
    family = np.load(p) if p.suffix == ".npy" else np.loadtxt(p, ndmin=2)
    family = np.atleast_2d(family)
    if family.shape[1] != N:
        raise ConfigError("config.family", f"rows have length {family.shape[1]}, expected N={N}")
    if np.abs(family).max() > 1:
        raise ConfigError("config.family", "coefficients must satisfy |a_n| <= 1")
    return family


def exp_tail(cfg: ExperimentConfig) -> Result:
    prof = _profile(cfg, cfg.n_max or cfg.N)
    if cfg.family:
        family = _load_family(cfg.family, cfg.N)
    else:
        rng = np.random.default_rng([cfg.seed, 1])
        family = rng.choice(np.array([-1, 1], dtype=np.int8), size=(cfg.family_size, cfg.N))
    est = concentration.sup_tail_monte_carlo(prof, family, cfg.N, cfg.eps, cfg.trials, cfg.seed)
    d = est.to_dict()
    ok = est.empirical_tail <= est.bound + 3 * est.std_error
    return Result(list(d), [list(d.values())], d, {"tail_dominated": ok})


def exp_intersect(cfg: ExperimentConfig) -> Result:
    N = cfg.A_size or cfg.N
    A = _finite_set(cfg, N, cfg.seed)
    R = _difference_set(cfg, max(N - 1, 1), cfg.seed)
    w = intersectivity.find_ap_with_difference_in(A, R, cfg.ell)
    d = {"N": N, "ell": cfg.ell, "density": A.density, "R_size": len(R),
         "found": w is not None, "witness": w.to_dict() if w else None,
         "differences_scanned": intersectivity.differences_scanned(A, R, cfg.ell)}
    checks = {"witness_valid": w is None or intersectivity.is_witness(A, w, R)}
    row = [N, cfg.ell, d["found"], w.a if w else "", w.r if w else "", d["differences_scanned"]]
    return Result(["N", "ell", "found", "a", "r", "differences_scanned"], [row], d, checks)


def _semirandom_horizon(cfg: ExperimentConfig, N: int, cap: int = 1 << 28) -> int:
    """Smallest doubling of 2N whose S(n) clears N by five standard deviations."""
    n = 2 * N
    while n < cap and partial_sums(_profile(cfg, n))(n) < N + 5 * math.sqrt(N) + 5:
        n *= 2
    return n


def exp_average(cfg: ExperimentConfig) -> Result:
    sysm = dynamics.FiniteSystem.parse(cfg.system)
    ell = 1 if cfg.mode == "semirandom" else cfg.ell
    Fs = [dynamics.Observable.random_indicator(sysm.m, [cfg.seed, i]) for i in range(max(ell, 2))]
    N = cfg.N
    every = cfg.every or max(1, N // 1000)
    checks = {}
    if cfg.mode == "multiple":
        terms = dynamics._product_along(sysm, Fs[:ell], cfg.x, np.arange(1, N + 1))
        trace = np.cumsum(terms) / np.arange(1, N + 1)
    elif cfg.mode == "random":
        R = _difference_set(cfg, N, cfg.seed)
        U = R.membership[1 : N + 1]
        terms = np.where(U, dynamics._product_along(sysm, Fs[:ell], cfg.x, np.arange(1, N + 1)), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            trace = np.cumsum(terms) / np.cumsum(U)
    elif cfg.mode == "semirandom":
        R = _difference_set(cfg, cfg.n_max or _semirandom_horizon(cfg, N), cfg.seed)
        r = dynamics._first_elements(R, N)
        k = np.arange(1, N + 1)
        terms = Fs[0].values[sysm.orbit(cfg.x, k)] * Fs[1].values[sysm.orbit(cfg.x, r)]
        trace = np.cumsum(terms) / k
        prefix = dynamics.semirandom_prefix(sysm, Fs[0], Fs[1], R, N, cfg.x)
        checks["representations_agree"] = abs(prefix - trace[-1]) <= 1e-12
    else:
        prof = _profile(cfg, N)
        R = _difference_set(cfg, N, cfg.seed)
        trace = dynamics.centered_trace(sysm, Fs[:ell], prof, R, N, cfg.x)[1:]
    idx = np.arange(every, N + 1, every)
    rows = [[int(n), float(trace[n - 1])] for n in idx if np.isfinite(trace[n - 1])]
    d = {"system": sysm.name, "mode": cfg.mode, "ell": ell, "N": N, "x": cfg.x,
         "final": float(trace[-1]), "trace": rows}
    return Result(["N", "value"], rows, d, checks, default_format="csv")


def exp_slln(cfg: ExperimentConfig) -> Result:
    prof = _profile(cfg, cfg.n_max or cfg.N)
    S = partial_sums(prof)(cfg.N)
    rows = []
    for s in range(cfg.seed, cfg.seed + cfg.seeds):
        rset = sample(prof, s)
        rows.append([s, rset.counting(cfg.N), S, slln_ratio(rset, cfg.N)])
    ratios = np.array([r[3] for r in rows])
    d = {"N": cfg.N, "S_N": S, "seeds": cfg.seeds, "min_ratio": float(ratios.min()),
         "max_ratio": float(ratios.max()),
         "max_deviation": float(np.abs(ratios - 1).max())}
    checks = {"ratios_within_tolerance": d["max_deviation"] <= cfg.tolerance}
    return Result(["seed", "counting", "S_N", "ratio"], rows, d, checks, default_format="csv")


def exp_blocks(cfg: ExperimentConfig) -> Result:
    n_max = cfg.n_max or cfg.N or 1000
    R = _difference_set(cfg, n_max - 1, cfg.seed)
    part = dynamics.block_partition(R, cfg.L, n_max)
    d = {"L": cfg.L, "n_max": n_max, "R_size": len(R), "num_blocks": part.num_blocks,
         "hit_count": int(part.hit_blocks.size), "hit_density": part.hit_density,
         "hit_blocks_head": part.hit_blocks[:20].tolist()}
    rows = [[int(k)] for k in part.hit_blocks]
    return Result(["hit_block"], rows, d)


RUNNERS = {
    "sample": exp_sample, "params": exp_params, "tail": exp_tail, "intersect": exp_intersect,
    "average": exp_average, "slln": exp_slln, "blocks": exp_blocks, "covering": exp_covering,
}


# output


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def render(cfg: ExperimentConfig, res: Result) -> str:
    fmt = cfg.output_format(res.default_format)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    if fmt == "json":
        doc = {"experiment": cfg.experiment, "seed": cfg.seed, **res.report,
               "checks": res.checks, "passed": res.passed}
        if cfg.timestamp:
            doc["generated"] = stamp
        return json.dumps(doc, indent=2, default=_jsonable) + "\n"
    buf = io.StringIO()
    if cfg.timestamp:
        buf.write(f"# generated {stamp} experiment={cfg.experiment} seed={cfg.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(res.columns)
    for row in res.rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def execute(cfg: ExperimentConfig) -> Result:
    cfg.validate()
    res = RUNNERS[cfg.experiment](cfg)
    _check_expectations(cfg, res)
    return res


def run(cfg: ExperimentConfig) -> int:
    """Run one experiment, write its output, and return the exit code."""
    try:
        res = execute(cfg)
    except (ConfigError, ValueError) as exc:
        # module precondition failures are usage errors too
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(cfg, res)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    for name, ok in res.checks.items():
        if not ok:
            print(f"check failed: {name}", file=sys.stderr)
    return EXIT_OK if res.passed else EXIT_FAIL


@dataclass
class SweepRow:
    name: str
    experiment: str
    passed: bool
    checks: dict[str, bool]
    report: dict


def _sweep_one(cfg: ExperimentConfig) -> SweepRow:
    res = execute(cfg)
    return SweepRow(cfg.name or cfg.experiment, cfg.experiment, res.passed, res.checks, res.report)


def sweep(configs: list[ExperimentConfig], threads: int = 1) -> list[SweepRow]:
    """Run configs (in worker processes when threads > 1); rows keep the input order."""
    if threads > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_sweep_one, configs))
    return [_sweep_one(c) for c in configs]


def format_summary(rows: list[SweepRow]) -> str:
    width = max([4] + [len(r.name) for r in rows])
    lines = [f"{'name':<{width}}  {'experiment':<10}  result  checks"]
    for r in rows:
        detail = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in r.checks.items()) or "-"
        lines.append(f"{r.name:<{width}}  {r.experiment:<10}  {'PASS' if r.passed else 'FAIL':<6}  {detail}")
    return "\n".join(lines) + "\n"


def load_suite(path: str, overrides: dict) -> list[ExperimentConfig]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    entries = doc["runs"] if isinstance(doc, dict) and "runs" in doc else doc
    if not isinstance(entries, list):
        raise ConfigError("config.runs", "expected a list of experiment configs")
    defaults = doc.get("defaults", {}) if isinstance(doc, dict) else {}
    return [ExperimentConfig.from_dict({**defaults, **e, **overrides}, f"config.runs[{i}]")
            for i, e in enumerate(entries)]


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON config file; flags given on the command line win")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--no-timestamp", dest="timestamp", action="store_false")
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="randiff", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="experiment")

    def add(name, help_, *opts):
        sp = sub.add_parser(name, help=help_, parents=[common], argument_default=argparse.SUPPRESS)
        for flag, kw in opts:
            sp.add_argument(flag, **kw)
        return sp

    prof = ("--profile", {"help": "power:b | constant:p | logpower:b:c:e | JSON"})
    n_max = ("--n-max", {"dest": "n_max", "type": int})
    N = ("--N", {"dest": "N", "type": int})
    ell = ("--ell", {"type": int})
    eps = ("--eps", {"type": float})
    add("sample", "sample a random set", prof, n_max)
    add("params", "moduli and covering budget", N, ell, eps,
        ("--S-N", {"dest": "S_N", "type": float}), prof, n_max)
    add("tail", "Monte Carlo supremum tail", prof, N, eps, n_max,
        ("--family-size", {"dest": "family_size", "type": int}),
        ("--family", {"help": "coefficient rows (.npy or text); default is random signs"}))
    add("intersect", "search for progressions with differences in R", N, ell,
        ("--A", {"help": "@file or generator (full, interval:lo:hi, congruence:q:r, random:d)"}),
        ("--R", {"help": "@file, squares, or omit to sample the profile"}), prof)
    add("average", "ergodic average trace", N, ell, prof, n_max,
        ("--system", {}), ("--mode", {"choices": AVERAGE_MODES}), ("--x", {"type": int}),
        ("--every", {"type": int}), ("--R", {}))
    add("slln", "counting / S(N) across seeds", prof, N, n_max,
        ("--seeds", {"type": int}), ("--tolerance", {"type": float}))
    add("blocks", "zero-density block partition", n_max, N, prof,
        ("--L", {"dest": "L", "type": int}), ("--R", {}))
    add("covering", "covering-family size and union bound", N, ell, eps, prof, n_max,
        ("--S-N", {"dest": "S_N", "type": float}))
    sub.add_parser("sweep", help="run a suite of configs", parents=[common],
                   argument_default=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.pop("verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    experiment = args.pop("experiment", None)
    if experiment is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    config_path = args.pop("config", None)
    try:
        if experiment == "sweep":
            if not config_path:
                raise ConfigError("config", "sweep needs --config")
            threads = args.pop("threads", 1)
            out = args.pop("out", None)
            try:
                rows = sweep(load_suite(config_path, args), threads)
            except ValueError as exc:
                raise ConfigError("config", str(exc)) from None
            text = format_summary(rows)
            if out:
                Path(out).write_text(text)
            sys.stdout.write(text)
            return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL
        base = {}
        if config_path:
            try:
                base = json.loads(Path(config_path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError("config", f"cannot read {config_path}: {exc}") from None
        cfg = ExperimentConfig.from_dict({**base, **args, "experiment": experiment})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TypeError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
