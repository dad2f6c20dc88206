"""Benchmark command line: ``hybridfmm run|sweep|tune|check``.

Results are appended to a CSV file (or written to stdout) with one record per
evaluation; see :data:`CSV_COLUMNS`.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import autotune
from .checks import run_checks
from .distributions import generate
from .evaluate import evaluate
from .model import Config, ConfigError, Distribution, HybridFmmError, InputError, Method, Particles
from .oracle import direct_evaluate, rel_error

log = logging.getLogger("hybridfmm")

SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "schema_version", "method", "n", "p", "theta", "ncrit", "seed", "threads",
    "t_build_s", "t_tune_s", "t_upward_s", "t_traverse_s", "t_downward_s", "t_total_s",
    "n_p2p_pairs", "n_m2p_calls", "n_m2l_calls",
    "err_pot_l2", "err_force_l2", "err_pot_max", "err_force_max",
]


class UsageError(Exception):
    pass


# --- input -----------------------------------------------------------------------


def read_particles(path: str | Path) -> Particles:
    """Read ``x,y,z,q`` rows (with a header line) from a CSV file."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        missing = {"x", "y", "z", "q"} - set(reader.fieldnames or [])
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        rows = [(r["x"], r["y"], r["z"], r["q"]) for r in reader]
    try:
        data = np.array(rows, dtype=np.float64).reshape(-1, 4)
    except ValueError as err:
        raise InputError(f"{path}: non-numeric value ({err})") from None
    return Particles(data[:, :3], data[:, 3])


# --- output ----------------------------------------------------------------------


def _format(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def append_records(path: str | None, records: list[dict]) -> None:
    """Append records; the header is written only when the file is new or empty."""
    if path is None:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_format(rec[c]) for c in CSV_COLUMNS])
        sys.stdout.write(out.getvalue())
        return
    p = Path(path)
    fresh = not p.exists() or p.stat().st_size == 0
    if not fresh:
        with open(p, newline="") as f:
            header = next(csv.reader(f), [])
        if header != CSV_COLUMNS:
            raise HybridFmmError(f"{path}: existing header does not match the record schema")
    with open(p, "a", newline="") as f:
        writer = csv.writer(f)
        if fresh:
            writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_format(rec[c]) for c in CSV_COLUMNS])


# --- commands --------------------------------------------------------------------


def _config(args, method: Method) -> Config:
    try:
        return Config(p=args.p, theta=args.theta, n_crit=args.ncrit, method=method,
                      seed=args.seed, distribution=args.dist)
    except ConfigError as err:
        raise UsageError(str(err)) from None


def _particles(args, n: int | None = None) -> Particles:
    if args.input is not None:
        return read_particles(args.input)
    return generate(args.dist, args.n if n is None else n, args.seed)


def _timings_for(args, cfg: Config) -> tuple[autotune.KernelTimings, float]:
    t0 = time.perf_counter()
    timings, _ = autotune.get_timings(cfg.p, cfg.n_crit, args.timings, args.retune,
                                      args.repetitions, args.seed)
    return timings, time.perf_counter() - t0


def _warm_up(cfg: Config, timings, threads: int) -> None:
    # loads the compiled kernels so their one-off cost stays out of the record
    evaluate(generate(Distribution.CUBE, 256, 0), cfg, timings, threads=threads)


def run_one(particles: Particles, cfg: Config, args, timings=None, t_tune: float = 0.0) -> dict:
    _warm_up(cfg, timings, args.threads)
    result = evaluate(particles, cfg, timings, threads=args.threads)
    tm, cnt = result.timing, result.counters
    rec = {
        "schema_version": SCHEMA_VERSION, "method": cfg.method.value, "n": len(particles),
        "p": cfg.p, "theta": cfg.theta, "ncrit": cfg.n_crit, "seed": cfg.seed,
        "threads": args.threads, "t_build_s": tm.build, "t_tune_s": t_tune,
        "t_upward_s": tm.upward, "t_traverse_s": tm.traverse, "t_downward_s": tm.downward,
        "t_total_s": tm.total + t_tune, "n_p2p_pairs": cnt.n_p2p_pairs,
        "n_m2p_calls": cnt.n_m2p_calls, "n_m2l_calls": cnt.n_m2l_calls,
        "err_pot_l2": None, "err_force_l2": None, "err_pot_max": None, "err_force_max": None,
    }
    n = len(particles)
    if args.check_samples > 0 and n >= 2:
        k = min(args.check_samples, n)
        rng = np.random.default_rng([cfg.seed, 1])
        idx = np.arange(n) if k == n else np.sort(rng.choice(n, size=k, replace=False))
        try:
            err = rel_error(result.field.take(idx), direct_evaluate(particles, idx))
        except ValueError as e:
            log.warning("error norms skipped: %s", e)
        else:
            rec.update(err_pot_l2=err.potential_l2, err_force_l2=err.force_l2,
                       err_pot_max=err.potential_max, err_force_max=err.force_max)
    log.info("%s n=%d p=%d ncrit=%d: total %.3fs, p2p pairs %d, m2p %d, m2l %d, err_pot %s",
             cfg.method.value, n, cfg.p, cfg.n_crit, rec["t_total_s"], cnt.n_p2p_pairs,
             cnt.n_m2p_calls, cnt.n_m2l_calls, _format(rec["err_pot_l2"]) or "-")
    return rec


def cmd_run(args) -> int:
    cfg = _config(args, Method(args.method))
    particles = _particles(args)
    timings, t_tune = (None, 0.0)
    if cfg.method is Method.HYBRID:
        timings, t_tune = _timings_for(args, cfg)
    append_records(args.out, [run_one(particles, cfg, args, timings, t_tune)])
    return 0


def sweep_sizes(n_min: int, n_max: int, factor: float) -> list[int]:
    if n_min < 1 or n_max < n_min:
        raise UsageError("need 1 <= --n-min <= --n-max")
    if not factor > 1.0:
        raise UsageError("--factor must be > 1")
    sizes, n = [], float(n_min)
    while round(n) <= n_max:
        if not sizes or round(n) != sizes[-1]:
            sizes.append(int(round(n)))
        n *= factor
    return sizes


def cmd_sweep(args) -> int:
    try:
        methods = [Method(m.strip()) for m in args.methods.split(",") if m.strip()]
    except ValueError as err:
        raise UsageError(str(err)) from None
    if args.input is not None:
        raise UsageError("sweep generates its own inputs; --input is not supported")
    records = []
    timings_cache: dict[int, tuple] = {}
    for n in sweep_sizes(args.n_min, args.n_max, args.factor):
        particles = generate(args.dist, n, args.seed)
        for method in methods:
            cfg = _config(args, method)
            timings, t_tune = None, 0.0
            if method is Method.HYBRID:
                if cfg.p not in timings_cache:
                    timings_cache[cfg.p] = _timings_for(args, cfg)
                    t_tune = timings_cache[cfg.p][1]
                timings = timings_cache[cfg.p][0]
            rec = run_one(particles, cfg, args, timings, t_tune)
            if args.out is not None:
                append_records(args.out, [rec])
            records.append(rec)
    if args.out is None:
        append_records(None, records)
    return 0


def cmd_tune(args) -> int:
    try:
        cfg = Config(p=args.p, n_crit=args.ncrit)
    except ConfigError as err:
        raise UsageError(str(err)) from None
    path = Path(args.timings) if args.timings else autotune.default_cache_path(cfg.p)
    timings = autotune.tune_kernels(cfg.p, cfg.n_crit, args.repetitions, args.seed)
    autotune.save_timings(path, timings)
    print(f"p={timings.p} batch={timings.batch} repetitions={timings.repetitions}")
    print(f"t_p2p_pair   {timings.t_p2p_pair * 1e9:12.4f} ns")
    print(f"t_m2p_target {timings.t_m2p_target * 1e9:12.4f} ns")
    print(f"t_m2l_call   {timings.t_m2l_call * 1e9:12.4f} ns")
    print(f"written to {path}")
    return 0


def cmd_check(args) -> int:
    width = 28

    def show(r):
        print(f"{r.name:<{width}} {'PASS' if r.passed else 'FAIL'}  {r.seconds:6.2f}s  {r.detail}",
              flush=True)

    results = run_checks(seed=args.seed, n=args.n, fault=args.inject_fault, progress=show)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


# --- argument parsing ------------------------------------------------------------


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _repetitions(text: str) -> int:
    v = int(text)
    if v < autotune.MIN_REPETITIONS:
        raise argparse.ArgumentTypeError(
            f"must be >= {autotune.MIN_REPETITIONS}, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridfmm", description=__doc__.splitlines()[0])
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dist", choices=[d.value for d in Distribution], default="cube")
    common.add_argument("--input", metavar="FILE.csv", help="particles as x,y,z,q with header")
    common.add_argument("--p", type=int, default=8, help="expansion order")
    common.add_argument("--theta", type=float, default=0.5, help="MAC threshold")
    common.add_argument("--ncrit", type=int, default=200, help="max particles per leaf")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--threads", type=_pos_int, default=1)
    common.add_argument("--check-samples", type=_nonneg_int, default=100,
                        help="oracle targets to verify against (0 disables)")
    common.add_argument("--timings", metavar="FILE", help="kernel timings cache file")
    common.add_argument("--retune", action="store_true", help="re-measure kernel timings")
    common.add_argument("--out", metavar="FILE.csv", help="append records here")
    common.add_argument("--repetitions", type=_repetitions, default=5,
                        help="timing repetitions when tuning")
    methods = [m.value for m in Method]

    run = sub.add_parser("run", parents=[common], help="evaluate one configuration")
    run.add_argument("--n", type=_nonneg_int, default=10000)
    run.add_argument("--method", choices=methods, default="fmm")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", parents=[common], help="geometric sweep over N")
    sweep.add_argument("--n-min", type=int, default=10000)
    sweep.add_argument("--n-max", type=int, default=100000)
    sweep.add_argument("--factor", type=float, default=2.0)
    sweep.add_argument("--methods", default="fmm,hybrid,treecode",
                       help="comma-separated list of " + ", ".join(methods))
    sweep.set_defaults(func=cmd_sweep)

    tune = sub.add_parser("tune", help="measure kernel timings and write the cache file")
    tune.add_argument("--p", type=int, default=8)
    tune.add_argument("--ncrit", type=int, default=200, help="particles per synthetic cell")
    tune.add_argument("--repetitions", type=_repetitions, default=5)
    tune.add_argument("--seed", type=int, default=0)
    tune.add_argument("--timings", metavar="FILE")
    tune.set_defaults(func=cmd_tune)

    check = sub.add_parser("check", help="run the invariant suite on small inputs")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--n", type=_pos_int, default=1000)
    check.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    check.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return 2
    except (HybridFmmError, OSError) as err:
        print(f"{parser.prog}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
