#!/usr/bin/env python3
"""Per-step basis update time against the full dimension, with log-log slopes.

    python3 scripts/bench_scaling.py [--m 512 1024 2048 4096] [--methods rkmk-cay tangent]
"""

import argparse

from threadpoolctl import threadpool_limits

from sympdrb.bench import ScalingConfig, loglog_slope, run_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, nargs="+", default=[512, 1024, 2048, 4096])
    ap.add_argument("--methods", nargs="+", default=["rkmk-cay", "tangent"])
    ap.add_argument("--tableau", default="rk4")
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--steps", type=int, default=60)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    cfg = ScalingConfig(m_values=tuple(args.m), methods=tuple(args.methods),
                        tableau=args.tableau, k=args.k, steps=args.steps)
    with threadpool_limits(limits=args.threads):
        rows = run_scaling(cfg)
    print(f"{'m':>6} {'method':>9} {'median ms':>10} {'iqr ms':>8}")
    for r in rows:
        print(f"{r.m:>6} {r.method:>9} {r.median_ns / 1e6:10.3f} {r.iqr_ns / 1e6:8.3f}")
    for meth in cfg.methods:
        print(f"slope {meth}: {loglog_slope(rows, meth):.3f}")


if __name__ == "__main__":
    main()
