"""Homogenized coefficients collected into one record."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bands import check_simplicity
from .cell import GAP_TOL, CellEigenpair, evaluate_psi, hellmann_feynman_slope
from .correctors import CorrectorSet
from .periodic import MacroPotential, PeriodicFunction

NOISE_KINDS = ("none", "additive", "multiplicative")


class HypothesisViolation(ValueError):
    """The chosen band point is not a simple critical point."""

    def __init__(self, condition: str, detail: str):
        super().__init__(f"{condition}: {detail}")
        self.condition = condition


def _density(psi: np.ndarray, M: int) -> np.ndarray:
    y = np.arange(M) / M
    return np.abs(evaluate_psi(psi, y)) ** 2


def _quadrature_size(psi: np.ndarray, extra: int = 0) -> int:
    # |psi|^2 f is band-limited to 2K + K_f
    return 2 * (2 * (psi.size // 2) + extra) + 2


def effective_d(d: MacroPotential, psi: np.ndarray, x_grid, M: int | None = None) -> np.ndarray:
    """``d*(x) = int_T d(x, y) |psi(y)|^2 dy`` on ``x_grid``."""
    x_grid = np.asarray(x_grid, dtype=float)
    if d.is_zero:
        return np.zeros_like(x_grid)
    if M is None:
        extra = d.b.K if d.kind == "separable" else d.values.shape[1] // 2
        M = _quadrature_size(psi, extra)
    rho = _density(psi, M)
    y = np.arange(M) / M
    vals = d(x_grid[:, None], y[None, :])
    return np.asarray(vals @ rho / M, dtype=float)


def effective_g(g: PeriodicFunction, psi: np.ndarray) -> float:
    """``g* = int_T g(y) |psi(y)|^2 dy``; the amplitude must be real."""
    if not g.is_real:
        raise ValueError("noise amplitude must be a real periodic function")
    M = max(g.M, _quadrature_size(psi, g.K))
    y = np.arange(M) / M
    return float(np.mean(g(y) * _density(psi, M)))


@dataclass(eq=False)
class EffectiveModel:
    n: int
    theta: float
    lam: float
    sigma_star: float
    d_star: np.ndarray
    x_grid: np.ndarray
    g_star: float
    pair: CellEigenpair
    noise_kind: str = "none"
    zeta: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def psi(self) -> np.ndarray:
        return self.pair.psi

    @property
    def well_posed(self) -> bool:
        return self.sigma_star > 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "theta_n": self.theta,
            "lambda_n": self.lam,
            "sigma_star": self.sigma_star,
            "g_star": self.g_star,
            "noise_kind": self.noise_kind,
            "well_posed": self.well_posed,
            "x_grid": [float(v) for v in self.x_grid],
            "d_star": [float(v) for v in self.d_star],
            "psi_coeffs": [[float(z.real), float(z.imag)] for z in self.pair.psi],
            "notes": list(self.notes),
        }


def build_effective_model(sigma: PeriodicFunction, c: PeriodicFunction, correctors: CorrectorSet,
                          d: MacroPotential, g: PeriodicFunction | None, noise_kind: str,
                          x_grid, gap_tol: float = GAP_TOL, slope_tol: float = 1e-7,
                          curvature_rtol: float = 1e-8) -> EffectiveModel:
    """Assemble ``sigma*``, ``d*``, ``g*`` after checking simplicity and criticality."""
    if noise_kind not in NOISE_KINDS:
        raise ValueError(f"noise kind must be one of {NOISE_KINDS}")
    K = correctors.psi.size // 2
    n, theta = correctors.n, correctors.theta
    simple = check_simplicity(sigma, c, theta, n, K, gap_tol)
    if not simple.simple:
        raise HypothesisViolation("simple eigenvalue",
                                  f"band {n} at theta={theta} has gap {simple.gap:.3e}")
    slope = hellmann_feynman_slope(sigma, correctors.psi, theta)
    if abs(slope) > slope_tol * (1 + abs(correctors.lam)):
        raise HypothesisViolation("critical point",
                                  f"d lambda/d theta = {slope:.3e} at theta={theta}")
    sig = correctors.sigma_star_formula
    if abs(sig - correctors.lam_pp_compat / (8 * np.pi**2)) > curvature_rtol * max(abs(sig), 1e-300):
        raise ArithmeticError("effective sigma disagrees with the compatibility curvature")
    pair = CellEigenpair(n=n, theta=theta, lam=correctors.lam, psi=correctors.psi, residual=0.0)
    g_star = 0.0 if g is None or noise_kind == "none" else effective_g(g, correctors.psi)
    model = EffectiveModel(n=n, theta=theta, lam=correctors.lam, sigma_star=sig,
                           d_star=effective_d(d, correctors.psi, x_grid),
                           x_grid=np.asarray(x_grid, dtype=float), g_star=g_star, pair=pair,
                           noise_kind=noise_kind, zeta=correctors.zeta)
    if not model.well_posed:
        model.notes.append(f"sigma_star={sig:.6g} <= 0 (band maximum); solve runs but is flagged")
    return model
