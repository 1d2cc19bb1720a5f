"""``sympdrb`` command line: run, bench-scaling, validate, oracle."""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError, SympdrbError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("sympdrb")


def _load(args):
    from .config import apply_preset, load_config, validate_config

    cfg = load_config(args.config)
    if args.desk:
        cfg = apply_preset(cfg, "desk")
    elif args.paper:
        cfg = apply_preset(cfg, "full")
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    validate_config(cfg)
    return cfg


def cmd_validate(args) -> int:
    cfg = _load(args)
    print(f"{args.config}: ok (model {cfg.model.name}, full dim {cfg.full_dim}, "
          f"sizes {list(cfg.reduction.sizes)}, methods {list(cfg.reduction.methods)})")
    return EXIT_OK


def cmd_run(args) -> int:
    from .experiment import run_experiment, write_artifacts

    cfg = _load(args)
    result = run_experiment(cfg)
    meta = write_artifacts(result, cfg.output_dir)
    for row in result.errors_rows():
        print(f"{row['method']:>9} 2k={row['2k']:<4} error={float(row['frobenius_error_at_T']):.4e} "
              f"runtime={float(row['runtime_seconds']):.2f}s")
    print(f"artifacts written to {cfg.output_dir}")
    if not meta["gate_passed"]:
        print(f"manifold defect {meta['max_manifold_defect']:.3e} exceeds gate "
              f"{meta['manifold_gate']:.1e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import ScalingConfig, loglog_slope, run_scaling
    from .experiment import _atomic_write, _csv_text

    cfg = _load(args)
    sc = cfg.scaling
    bench_cfg = ScalingConfig(
        m_values=sc.m_values, methods=sc.methods, tableau=sc.tableau, k=sc.k,
        samples=sc.samples, steps=sc.steps, warmup=sc.warmup,
    )
    rows = run_scaling(bench_cfg)
    text = _csv_text(
        ["m", "method", "median_ns", "iqr_ns"],
        ({"m": r.m, "method": r.method, "median_ns": f"{r.median_ns:.0f}",
          "iqr_ns": f"{r.iqr_ns:.0f}"} for r in rows),
    )
    out = Path(cfg.output_dir) / "scaling.csv"
    _atomic_write(out, text)
    for r in rows:
        print(f"m={r.m:<6} {r.method:>9} median={r.median_ns / 1e6:9.3f} ms  iqr={r.iqr_ns / 1e6:7.3f} ms")
    for meth in sc.methods:
        print(f"log-log slope {meth}: {loglog_slope(rows, meth):.3f}")
    print(f"written {out}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracles import SUITES, run_suite

    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    print(f"{'suite':<16} {'trials':>6} {'max rel err':>12} {'tol':>8}  result")
    for name in names:
        res = run_suite(name, trials=args.trials, seed=args.seed or 0)
        ok &= res.passed
        print(f"{name:<16} {res.trials:>6} {res.max_rel_error:>12.3e} {res.tol:>8.0e}  "
              f"{'PASS' if res.passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    from .oracles import SUITES

    parser = argparse.ArgumentParser(prog="sympdrb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="INI experiment file")
        p.add_argument("--out", help="output directory (overrides [output] dir)")
        p.add_argument("--seed", type=int, help="rng seed (overrides [output] seed)")
        p.add_argument("--threads", type=int, help="BLAS thread limit")
        if config:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--desk", action="store_true", help="desk-scale SWE preset")
            g.add_argument("--paper", action="store_true", help="full-scale SWE preset")

    p = sub.add_parser("run", help="full, dynamical and global runs with CSV output")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("bench-scaling", help="per-step basis update time against m")
    common(p)
    p.set_defaults(func=cmd_bench)
    p = sub.add_parser("validate", help="parse and check a config without running")
    common(p)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("oracle", help="cross-check low-rank kernels against dense references")
    p.add_argument("suite", choices=[*SUITES, "all"])
    p.add_argument("--trials", type=int, default=200)
    common(p, config=False)
    p.set_defaults(func=cmd_oracle)
    return parser


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s: %(message)s",
    )
    try:
        with _thread_limit(args.threads):
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SympdrbError as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"numerical abort{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
