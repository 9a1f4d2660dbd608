"""Command-line entry point: ``effwave <command> --config run.json``."""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config
from .effective import HypothesisViolation
from .engine import (EpsProblem, discrete_cell_eigenvalue, integrate_eps, integrate_homogenized,
                     mass_diagnostics, sample_wiener_path)
from .harness import convergence_sweep, sample_times, well_prepared_initial
from .pipeline import band_sweep, build_setup, correctors_at, effective_model, select_critical
from .report import (MASS_HEADER, _write_csv, bands_rows, dumps, emit_plot_data, write_report)

STAGES = ("bands", "critical", "correctors", "effective", "simulate-eps", "simulate-homog",
          "converge")
COMMANDS = STAGES + ("all",)


class Context:
    def __init__(self, cfg: RunConfig, out: Path, threads: int, quiet: bool):
        self.cfg, self.out, self.threads, self.quiet = cfg, out, threads, quiet
        self.setup = build_setup(cfg)
        self._cache: dict = {}

    def log(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr)

    def get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def bands(self):
        return self.get("bands", lambda: band_sweep(self.setup))

    @property
    def critical(self):
        return self.get("critical", lambda: select_critical(self.setup, self.bands))

    @property
    def correctors(self):
        return self.get("correctors", lambda: correctors_at(self.setup, self.critical))

    def write(self, name: str, text: str) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)
        self.log(f"wrote {self.out / name}")


def _eps_problem(ctx: Context) -> EpsProblem:
    cfg, num, s = ctx.cfg, ctx.cfg.numerics, ctx.setup
    cs = ctx.correctors
    q = cfg.qs[-1]
    lam = cs.lam if num.lambda_mode == "plane_wave" else \
        discrete_cell_eigenvalue(s.sigma, s.c, cs.theta, num.points_per_cell, cs.n)
    return EpsProblem(sigma=s.sigma, c=s.c, q=q, theta=cs.theta, lam=lam, T=num.T, dt=num.dt,
                      L=num.L, points_per_cell=num.points_per_cell, d=s.d,
                      noise_kind=cfg.noise_kind, g=s.g, noise_scheme=cfg.noise_scheme)


def _trajectory_csv(ctx: Context, name: str, traj) -> None:
    header = ["t", "x", "re", "im"]
    rows = [[t, x, z.real, z.imag] for t, st in zip(traj.times, traj.states)
            for x, z in zip(traj.x, st)]
    ctx.out.mkdir(parents=True, exist_ok=True)
    _write_csv(ctx.out / name, header, rows)
    ctx.log(f"wrote {ctx.out / name}")


def run_stage(stage: str, ctx: Context) -> None:
    cfg, num = ctx.cfg, ctx.cfg.numerics
    if stage == "bands":
        header, rows = bands_rows(ctx.bands)
        ctx.out.mkdir(parents=True, exist_ok=True)
        _write_csv(ctx.out / "bands.csv", header, rows)
        emit_plot_data(None, ctx.out, bands=ctx.bands, notice=ctx.log)
    elif stage == "critical":
        ctx.write("critical.json", dumps(dataclasses.asdict(ctx.critical)))
    elif stage == "correctors":
        cs = ctx.correctors
        data = cs.report()
        data.update(n=cs.n, psi=cs.psi, zeta=cs.zeta, chi=cs.chi)
        ctx.write("correctors.json", dumps(data))
    elif stage == "effective":
        x = np.linspace(0, num.L, 65)[1:-1]
        ctx.write("effective.json", dumps(effective_model(ctx.setup, ctx.correctors, x).to_dict()))
    elif stage in ("simulate-eps", "simulate-homog"):
        path = sample_wiener_path(num.T, num.dt, num.seed, 0)
        p = _eps_problem(ctx)
        times = np.concatenate([[0.0], sample_times(num.T, num.dt, num.n_samples)])
        if stage == "simulate-eps":
            u0 = well_prepared_initial(ctx.correctors.psi, p.theta, ctx.setup.v0, p.eps, p.nodes,
                                       num.L)
            traj = integrate_eps(p, path, u0, times)
            amp = p.amplitude()
            name = "eps"
        else:
            nx = p.nx if num.homog_points == 0 else num.homog_points
            xh = np.linspace(0, num.L, nx + 1)
            m = effective_model(ctx.setup, ctx.correctors, xh[1:-1])
            traj = integrate_homogenized(m, path, ctx.setup.v0(xh).astype(complex), num.L,
                                         num.dt, nx, times, cfg.noise_scheme)
            amp = m.g_star if cfg.noise_kind == "multiplicative" else np.full(xh.size - 2, m.g_star)
            name = "homog"
        _trajectory_csv(ctx, f"trajectory_{name}.csv", traj)
        md = mass_diagnostics(traj, cfg.noise_kind, amp)
        _write_csv(ctx.out / f"mass_{name}.csv", MASS_HEADER, md.rows())
    elif stage == "converge":
        started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        t0 = time.perf_counter()
        rep = convergence_sweep(cfg, threads=ctx.threads, progress=ctx.log, bands=ctx.bands)
        write_report(rep, ctx.out, cfg=cfg, started_at=started,
                     wall_seconds=time.perf_counter() - t0)
        emit_plot_data(rep, ctx.out, notice=ctx.log)
        v = rep.verdict
        ctx.log(f"verdict: strictly decreasing = {v['strictly_decreasing']}")
    else:
        raise ValueError(f"unknown stage {stage!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="effwave", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--stage", choices=STAGES, default=None,
                    help="run this stage instead of the command's own (with 'all': stop after it)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, {"seed": args.seed} if args.seed is not None else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out or Path(cfg.output_dir)
    ctx = Context(cfg, out, max(1, args.threads), args.quiet)
    if args.command == "all":
        stages = STAGES if args.stage is None else STAGES[:STAGES.index(args.stage) + 1]
    else:
        stages = (args.stage or args.command,)
    try:
        for st in stages:
            ctx.log(f"[{st}]")
            run_stage(st, ctx)
    except HypothesisViolation as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
