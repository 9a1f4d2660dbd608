"""Print the lowest Bloch bands and the selected critical point for a config.

    python3 scripts/band_diagram.py configs/mathieu.json [--out bands_out]
"""
import argparse
from pathlib import Path

from effwave.config import parse_config
from effwave.pipeline import band_sweep, build_setup, correctors_at, select_critical
from effwave.report import emit_plot_data


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", type=Path)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    s = build_setup(parse_config(args.config.read_text()))
    B = band_sweep(s)
    cp = select_critical(s, B)
    cs = correctors_at(s, cp)
    print(f"critical point: band {cs.n}, theta {cs.theta:.6f}, lambda {cs.lam:.10f}")
    print(f"sigma* = {cs.sigma_star_formula:.10f}  (compat {cs.lam_pp_compat / (8 * 3.141592653589793**2):.10f})")
    for t, row in zip(B.thetas[:: max(1, len(B.thetas) // 8)], B.bands[:: max(1, len(B.thetas) // 8)]):
        print(f"theta={t:+.4f}  " + "  ".join(f"{v:10.4f}" for v in row))
    if args.out:
        for p in emit_plot_data(None, args.out, bands=B):
            print(f"wrote {p}")


if __name__ == "__main__":
    main()
