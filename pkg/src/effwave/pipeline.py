"""From a :class:`RunConfig` to coefficients, band data, correctors and the effective model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bands import BandStructure, CriticalPoint, compute_band_structure, locate_critical_point
from .config import RunConfig
from .correctors import CorrectorSet, solve_correctors
from .effective import EffectiveModel, HypothesisViolation, build_effective_model
from .periodic import (ZERO_POTENTIAL, MacroPotential, PeriodicFunction, macro_function,
                       macro_profile, sample_periodic, separable_potential)


@dataclass(eq=False)
class Setup:
    cfg: RunConfig
    sigma: PeriodicFunction
    c: PeriodicFunction
    d: MacroPotential
    g: PeriodicFunction | None
    v0: object
    test_macro: object


def build_setup(cfg: RunConfig) -> Setup:
    M = cfg.numerics.M
    sigma = sample_periodic(cfg.sigma, M)
    c = sample_periodic(cfg.c, M)
    if cfg.d.get("kind", "zero") == "separable":
        d = separable_potential(cfg.d["a"], cfg.d["b"], M, cfg.d.get("bound"))
    else:
        d = ZERO_POTENTIAL
    g = sample_periodic(cfg.noise["g"], M) if "g" in cfg.noise else None
    return Setup(cfg=cfg, sigma=sigma, c=c, d=d, g=g, v0=macro_profile(cfg.initial, cfg.numerics.L),
                 test_macro=macro_function(cfg.test_function))


def band_sweep(s: Setup) -> BandStructure:
    num = s.cfg.numerics
    thetas = np.linspace(-0.5, 0.5, num.n_theta)
    N = max(num.n_bands, s.cfg.n + 1)
    return compute_band_structure(s.sigma, s.c, thetas, N, num.K)


def select_critical(s: Setup, B: BandStructure | None = None) -> CriticalPoint:
    """First candidate that is a simple critical point of the chosen band."""
    B = B or band_sweep(s)
    num = s.cfg.numerics
    tried = []
    for theta in s.cfg.band["theta_candidates"]:
        cp = locate_critical_point(B, s.cfg.n, theta, h=num.fd_step, slope_tol=num.slope_tol,
                                   gap_tol=num.gap_tol)
        if cp.simple and cp.critical:
            return cp
        tried.append(f"theta={cp.theta:.6g} (gap={cp.gap:.3e}, slope={cp.slope:.3e})")
    raise HypothesisViolation("simple critical point", "no candidate qualifies: " + "; ".join(tried))


def correctors_at(s: Setup, cp: CriticalPoint) -> CorrectorSet:
    return solve_correctors(s.sigma, s.c, cp.theta, cp.n, s.cfg.numerics.K,
                            fd_step=s.cfg.numerics.fd_step)


def effective_model(s: Setup, cs: CorrectorSet, x_grid) -> EffectiveModel:
    num = s.cfg.numerics
    return build_effective_model(s.sigma, s.c, cs, s.d, s.g, s.cfg.noise_kind, x_grid,
                                 gap_tol=num.gap_tol, slope_tol=num.slope_tol)
