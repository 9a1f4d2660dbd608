"""Run a factorization-error sweep and print a table of sup errors per epsilon.

    python3 scripts/run_sweep.py configs/additive.json --replicas 16 --dt 1e-3
"""
import argparse
import time
from pathlib import Path

from effwave.config import parse_config
from effwave.harness import convergence_sweep
from effwave.report import emit_plot_data, write_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", type=Path)
    ap.add_argument("--replicas", type=int, default=None)
    ap.add_argument("--dt", type=float, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    overrides = {k: v for k, v in (("replicas", args.replicas), ("dt", args.dt)) if v is not None}
    cfg = parse_config(args.config.read_text(), overrides or None)
    t0 = time.perf_counter()
    rep = convergence_sweep(cfg, threads=args.threads)
    wall = time.perf_counter() - t0
    print(f"{'epsilon':>10} {'replicas':>8} {'E sup err':>12} {'stderr':>10}")
    for r in rep.results:
        print(f"{r.eps:10.5f} {r.replicas:8d} {r.sup_mean:12.6f} {r.sup_stderr:10.6f}")
    for st in rep.verdict["steps"]:
        print(f"eps {st['from']:.5f} -> {st['to']:.5f}: paired drop {st['drop']:+.5f} "
              f"(stderr {st['stderr']:.5f})")
    print(f"strictly decreasing: {rep.verdict['strictly_decreasing']}   wall {wall:.1f}s")
    if args.out:
        write_report(rep, args.out, cfg=cfg, wall_seconds=wall)
        emit_plot_data(rep, args.out)
        print(f"results in {args.out}")


if __name__ == "__main__":
    main()
