"""Acceptance criteria, each checked at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary (and immediately with ``-s``).
"""
import json
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import const, cosine, record_criterion
from effwave.cli import main
from effwave.config import parse_config
from effwave.correctors import solve_correctors, zeta_identity_error
from effwave.engine import EpsProblem, integrate_eps, integrate_eps_batch, mass_diagnostics, sample_wiener_path
from effwave.harness import TwoScaleTestFunction, convergence_sweep, two_scale_pairing
from effwave.pipeline import build_setup, correctors_at, select_critical

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
PI2 = np.pi**2


def load(name, **overrides):
    return parse_config((CONFIGS / f"{name}.json").read_text(), overrides or None)


def verdict(number, ok, detail):
    record_criterion(number, ok, detail)
    print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_criterion_1_free_effective_mass():
    t0 = time.perf_counter()
    zero = const(0.0)
    errs = []
    for s in (0.5, 1.0, 2.0):
        cs = solve_correctors(const(s), zero, 0.0, 1)
        errs.append(abs(cs.sigma_star_formula - s) / s)
    dt = time.perf_counter() - t0
    verdict(1, max(errs) <= 1e-8 and dt < 1.0,
            f"max rel error {max(errs):.2e} <= 1e-8, runtime {dt:.2f}s < 1s")


def test_criterion_2_sigma_triple_consistency():
    t0 = time.perf_counter()
    cs = solve_correctors(const(1.0), cosine(0.0, 2.0), 0.0, 1)
    r_compat = abs(cs.sigma_star_formula - cs.lam_pp_compat / (8 * PI2)) / abs(cs.sigma_star_formula)
    r_fd = abs(cs.sigma_star_formula - cs.lam_pp_fd / (8 * PI2)) / abs(cs.sigma_star_formula)
    dt = time.perf_counter() - t0
    verdict(2, r_compat <= 1e-8 and r_fd <= 1e-6 and dt < 5.0,
            f"sigma*={cs.sigma_star_formula:.10f}, compat rel {r_compat:.1e} <= 1e-8, "
            f"fd rel {r_fd:.1e} <= 1e-6, runtime {dt:.2f}s < 5s")


def test_criterion_3_fredholm_hygiene():
    worst, names = 0.0, []
    for path in sorted(CONFIGS.glob("*.json")):
        s = build_setup(parse_config(path.read_text()))
        cs = correctors_at(s, select_critical(s))
        worst = max(worst, cs.compat_residual_zeta, cs.compat_residual_chi,
                    cs.solve_residual_zeta, cs.solve_residual_chi)
        names.append(path.stem)
    ratio = (zeta_identity_error(const(1.0), cosine(0.0, 2.0), 0.0, 1, 1e-2)
             / zeta_identity_error(const(1.0), cosine(0.0, 2.0), 0.0, 1, 5e-3))
    verdict(3, bool(names) and worst <= 1e-9 and 3.5 <= ratio <= 4.5,
            f"{len(names)} scenarios, worst residual {worst:.1e} <= 1e-9, "
            f"zeta-identity halving ratio {ratio:.3f} in [3.5, 4.5]")


def test_criterion_4_scheme_exactness():
    t0 = time.perf_counter()
    sigma, c = const(1.0), cosine(0.0, 2.0)
    lam = solve_correctors(sigma, c, 0.0, 1, fd_step=None).lam
    common = dict(sigma=sigma, c=c, q=8, theta=0.0, lam=lam, T=0.5, points_per_cell=64)
    x = EpsProblem(**common).x
    v0 = np.sin(np.pi * x) ** 2 * (1 + 0.5 * np.cos(16 * np.pi * x))

    p0 = EpsProblem(**common, dt=1e-4)
    m = integrate_eps(p0, sample_wiener_path(0.5, 1e-4, 1), v0).mass_series
    step_drift = float(np.max(np.abs(np.diff(m))) / m[0])

    pm = EpsProblem(**common, dt=1e-4, noise_kind="multiplicative", g=const(1.0))
    tm = integrate_eps(pm, sample_wiener_path(0.5, 1e-4, 2), v0)
    slope = mass_diagnostics(tm, "multiplicative", 1.0).log_slope

    dt_add = 1e-3
    pa = EpsProblem(**common, dt=dt_add, noise_kind="additive", g=const(1.0))
    paths = [sample_wiener_path(0.5, dt_add, 3, r) for r in range(256)]
    trs = integrate_eps_batch(pa, paths, v0, [0.5])
    gain = np.array([(t.mass_series[-1] - t.mass_series[0]) / 0.5 for t in trs])
    mean, se = gain.mean(), gain.std(ddof=1) / np.sqrt(gain.size)
    L = pa.L
    elapsed = time.perf_counter() - t0
    ok = step_drift <= 1e-10 and abs(slope - 1) <= 5 * pm.dt and abs(mean - L) <= 3 * se and elapsed < 120
    verdict(4, ok, f"per-step drift {step_drift:.1e} <= 1e-10; log-mass slope {slope:.8f} within "
                   f"{5 * pm.dt:.0e} of 1; additive slope {mean:.4f} +- {se:.4f} vs L={L}; "
                   f"runtime {elapsed:.1f}s < 120s")


def test_criterion_5_exact_factorization():
    t0 = time.perf_counter()
    cfg = load("exact_factorization")
    rep = convergence_sweep(cfg)
    finals = [float(np.sqrt(r.err_mean[-1])) for r in rep.results]
    at_T = all(abs(r.times[-1] - cfg.numerics.T) < 1e-12 for r in rep.results)
    dt = time.perf_counter() - t0
    verdict(5, at_T and max(finals) <= 1e-6 and dt < 60,
            f"L2 error at T per eps {[f'{e:.1e}' for e in finals]} <= 1e-6, runtime {dt:.1f}s < 60s")


def _trend(number, name):
    t0 = time.perf_counter()
    rep = convergence_sweep(load(name))
    dt = time.perf_counter() - t0
    steps = "; ".join(f"1/{round(1 / s['from'])}->1/{round(1 / s['to'])}: drop {s['drop']:.4f} "
                      f"vs stderr {s['stderr']:.4f}" for s in rep.verdict["steps"])
    sups = ", ".join(f"{r.sup_mean:.4f}" for r in rep.results)
    verdict(number, rep.verdict["strictly_decreasing"] and rep.results[0].replicas == 64 and dt < 900,
            f"mean sup-error [{sups}]; {steps}; runtime {dt:.0f}s")


@pytest.mark.slow
def test_criterion_6_additive_trend():
    _trend(6, "additive")


@pytest.mark.slow
def test_criterion_7_multiplicative_trend():
    _trend(7, "multiplicative")


def test_criterion_8_two_scale_pairing():
    eps = 1 / 64
    x = np.linspace(0, 1, 64 * 64 + 1)
    Psi = TwoScaleTestFunction(macro=lambda x: np.ones_like(x), micro=lambda y: np.cos(2 * np.pi * y))
    val = two_scale_pairing(np.cos(2 * np.pi * x / eps), x, Psi, eps).value
    phi = TwoScaleTestFunction(macro=lambda x: x**2 * (1 - x), micro=lambda y: np.ones_like(y))
    decay = []
    for q in (8, 16, 32):
        xq = np.linspace(0, 1, 64 * q + 1)
        decay.append(abs(two_scale_pairing(np.exp(2j * np.pi * xq * q), xq, phi, 1 / q).value))
    ok = abs(val - 0.5) <= 1e-3 and decay[0] > decay[1] > decay[2]
    verdict(8, ok, f"|pairing - 1/2| = {abs(val - 0.5):.1e} <= 1e-3; "
                   f"Riemann-Lebesgue |values| {[f'{d:.2e}' for d in decay]} decreasing")


def test_criterion_9_determinism(tmp_path):
    doc = json.loads((CONFIGS / "multiplicative.json").read_text())
    doc["numerics"].update(replicas=12, chunk=4, dt=1e-3, epsilons=[0.125, 0.0625])
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(doc))
    blobs = []
    for run, threads in enumerate((1, 1, 3)):
        out = tmp_path / f"run{run}"
        assert main(["converge", "--config", str(cfg), "--out", str(out), "--threads", str(threads),
                     "--quiet"]) == 0
        blobs.append((out / "errors.csv").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    verdict(9, ok, "errors.csv byte-identical across two runs and thread counts 1 and 3")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
