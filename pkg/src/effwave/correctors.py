"""First and second order Bloch correctors and the effective coefficient.

All objects live in the truncated plane-wave space of the cell operator.  With
``S`` the Toeplitz matrix of ``sigma`` and ``D`` the shifted derivative,

* the first corrector solves ``A_n zeta = (S D + D S) psi``,
* the second solves ``A_n chi = 2 (S D + D S) zeta + 2 S psi - lam''/(4 pi^2) psi``,

where ``A_n = A(theta_n) - lam_n``.  Both right-hand sides must be orthogonal
to ``psi``; for the second one this fixes ``lam''``.  The additive freedom
along ``psi`` is removed by requiring ``<zeta, psi> = <chi, psi> = 0``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .bands import second_derivative_fd
from .cell import (DEFAULT_K, GAP_TOL, CellEigenpair, assemble_cell_operator, fix_gauge,
                   hellmann_feynman_slope, shifted_derivative, solve_cell_eigen, toeplitz_matrix)
from .periodic import PeriodicFunction

COMPAT_TOL = 1e-9
RESIDUAL_TOL = 1e-9
IMAG_TOL = 1e-10


class FredholmError(ValueError):
    """Right-hand side has a component along the kernel of the singular operator."""

    def __init__(self, residual: float):
        super().__init__(f"compatibility violated: |<rhs, psi>| = {residual:.3e}")
        self.residual = residual


def _sd_plus_ds(sigma: PeriodicFunction, u: np.ndarray, theta: float) -> np.ndarray:
    K = u.size // 2
    S = toeplitz_matrix(sigma, K)
    D = shifted_derivative(theta, K)
    return S @ (D * u) + D * (S @ u)


def build_zeta_rhs(sigma: PeriodicFunction, psi: np.ndarray, theta: float,
                   slope: float = 0.0) -> tuple[np.ndarray, complex]:
    """``sigma (d_y + 2 pi i theta) psi + (d_y + 2 pi i theta)(sigma psi)`` and its ``psi`` component.

    Away from a critical point pass ``slope = d lambda / d theta``: the term
    ``slope / (2 pi i) psi`` is added, which restores compatibility.
    """
    rhs = _sd_plus_ds(sigma, psi, theta)
    if slope:
        rhs = rhs + slope / (2j * np.pi) * psi
    return rhs, complex(np.vdot(psi, rhs))


def fredholm_solve(sigma: PeriodicFunction, c: PeriodicFunction, theta: float, lam: float,
                   psi: np.ndarray, rhs: np.ndarray, compat_tol: float = COMPAT_TOL,
                   gap_warn: float = 1e-3) -> np.ndarray:
    """Unique solution of ``(A(theta) - lam) u = rhs`` with ``<u, psi> = 0``.

    Solved through the deflated system ``(A_n + psi psi^H) u = rhs - <rhs, psi> psi``.
    """
    K = psi.size // 2
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.size != psi.size:
        raise ValueError("rhs and psi sizes differ")
    proj = complex(np.vdot(psi, rhs))
    if abs(proj) > compat_tol * max(1.0, float(np.linalg.norm(rhs))):
        raise FredholmError(abs(proj))
    A = assemble_cell_operator(sigma, c, theta, K, spectral_shift=lam).matrix
    w = np.linalg.eigvalsh(A)
    gap = np.sort(np.abs(w))[1]
    if gap < gap_warn:
        warnings.warn(f"near-degenerate eigenvalue (gap {gap:.2e}); corrector is ill-conditioned",
                      RuntimeWarning, stacklevel=2)
    b = rhs - proj * psi
    lu = lu_factor(A + np.outer(psi, psi.conj()))
    u = lu_solve(lu, b)
    u = u - np.vdot(psi, u) * psi
    res = float(np.linalg.norm(A @ u - b))
    if res > RESIDUAL_TOL * max(1.0, float(np.linalg.norm(b))):
        raise RuntimeError(f"deflated solve residual {res:.3e} above tolerance")
    return u


def compute_chi(sigma: PeriodicFunction, c: PeriodicFunction, psi: np.ndarray, zeta: np.ndarray,
                theta: float, lam: float, slope: float = 0.0) -> tuple[np.ndarray, float]:
    """Second corrector together with the curvature fixed by its compatibility condition.

    ``slope`` (zero at a critical point) adds the ``-(i slope / pi) zeta`` term.
    """
    base = _chi_base(sigma, psi, zeta, theta, slope)
    lam_pp = 4 * np.pi**2 * np.vdot(psi, base)
    if abs(lam_pp.imag) > IMAG_TOL * max(1.0, abs(lam_pp.real)):
        raise ArithmeticError(f"curvature from compatibility is not real: {lam_pp}")
    lam_pp = float(lam_pp.real)
    rhs = base - lam_pp / (4 * np.pi**2) * psi
    chi = fredholm_solve(sigma, c, theta, lam, psi, rhs)
    return chi, lam_pp


def _chi_base(sigma, psi, zeta, theta, slope=0.0):
    S = toeplitz_matrix(sigma, psi.size // 2)
    base = 2 * _sd_plus_ds(sigma, zeta, theta) + 2 * (S @ psi)
    if slope:
        base = base - (1j * slope / np.pi) * zeta
    return base


def effective_sigma(sigma: PeriodicFunction, psi: np.ndarray, zeta: np.ndarray, theta: float,
                    check_real: bool = True) -> float | complex:
    """Effective coefficient as the torus integral

    ``sigma |psi|^2 + sigma psi conj((d_y + 2 pi i theta) zeta) - sigma conj(zeta) (d_y + 2 pi i theta) psi``.
    """
    K = psi.size // 2
    S = toeplitz_matrix(sigma, K)
    D = shifted_derivative(theta, K)
    Spsi = S @ psi
    value = np.vdot(psi, Spsi) + np.vdot(D * zeta, Spsi) - np.vdot(zeta, S @ (D * psi))
    if not check_real:
        return complex(value)
    scale = max(1.0, abs(value.real))
    if abs(value.imag) > IMAG_TOL * scale:
        raise ArithmeticError(f"effective sigma has imaginary part {value.imag:.3e}")
    return float(value.real)


@dataclass(eq=False)
class CorrectorSet:
    n: int
    theta: float
    lam: float
    psi: np.ndarray
    zeta: np.ndarray
    chi: np.ndarray
    compat_residual_zeta: float
    compat_residual_chi: float
    solve_residual_zeta: float
    solve_residual_chi: float
    lam_pp_compat: float
    sigma_star_formula: float
    lam_pp_fd: float = float("nan")
    lam_pp_fd_error: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def sigma_star_ratio(self) -> float:
        """``sigma*`` from the formula over ``lam''_fd / (8 pi^2)``."""
        return self.sigma_star_formula / (self.lam_pp_fd / (8 * np.pi**2))

    def report(self) -> dict:
        return {
            "theta_n": self.theta,
            "lambda_n": self.lam,
            "lambda_pp_compat": self.lam_pp_compat,
            "lambda_pp_fd": self.lam_pp_fd,
            "sigma_star_formula": self.sigma_star_formula,
            "sigma_star_ratio": self.sigma_star_ratio,
            "compat_residuals": {
                "zeta": self.compat_residual_zeta,
                "chi": self.compat_residual_chi,
                "zeta_solve": self.solve_residual_zeta,
                "chi_solve": self.solve_residual_chi,
            },
        }


def _residual(sigma, c, theta, lam, psi, u, rhs) -> float:
    A = assemble_cell_operator(sigma, c, theta, psi.size // 2, spectral_shift=lam).matrix
    return float(np.linalg.norm(A @ u - rhs + np.vdot(psi, rhs) * psi))


def solve_correctors(sigma: PeriodicFunction, c: PeriodicFunction, theta: float, n: int = 1,
                     K: int = DEFAULT_K, fd_step: float | None = 1e-2,
                     pair: CellEigenpair | None = None) -> CorrectorSet:
    """Eigenpair, both correctors, the curvature two ways and the effective coefficient."""
    if pair is None:
        pairs = solve_cell_eigen(assemble_cell_operator(sigma, c, theta, K), min(n + 1, 2 * K + 1))
        pair = pairs[n - 1]
    psi, lam = pair.psi, pair.lam
    slope = hellmann_feynman_slope(sigma, psi, theta)
    rhs_z, proj_z = build_zeta_rhs(sigma, psi, theta, slope)
    zeta = fredholm_solve(sigma, c, theta, lam, psi, rhs_z)
    chi, lam_pp = compute_chi(sigma, c, psi, zeta, theta, lam, slope)
    rhs_c = _chi_base(sigma, psi, zeta, theta, slope) - lam_pp / (4 * np.pi**2) * psi
    out = CorrectorSet(
        n=n, theta=float(theta), lam=lam, psi=psi, zeta=zeta, chi=chi,
        compat_residual_zeta=abs(proj_z),
        compat_residual_chi=abs(complex(np.vdot(psi, rhs_c))),
        solve_residual_zeta=_residual(sigma, c, theta, lam, psi, zeta, rhs_z),
        solve_residual_chi=_residual(sigma, c, theta, lam, psi, chi, rhs_c),
        lam_pp_compat=lam_pp,
        sigma_star_formula=effective_sigma(sigma, psi, zeta, theta),
        extra={"slope": slope},
    )
    if fd_step:
        fd = second_derivative_fd(sigma, c, n, theta, fd_step, K)
        out.lam_pp_fd = fd.richardson
        out.lam_pp_fd_error = fd.error
    return out


def zeta_shift_probe(sigma: PeriodicFunction, psi: np.ndarray, zeta: np.ndarray, theta: float,
                     mu: complex) -> float:
    """Change of the effective coefficient under ``zeta -> zeta + mu psi``."""
    base = effective_sigma(sigma, psi, zeta, theta, check_real=False)
    moved = effective_sigma(sigma, psi, zeta + mu * psi, theta, check_real=False)
    return abs(moved - base)


def zeta_identity_error(sigma: PeriodicFunction, c: PeriodicFunction, theta: float, n: int,
                        h: float, K: int = DEFAULT_K) -> float:
    """``|| P (d psi / d theta)_fd - P (2 pi i zeta) ||`` with ``P`` the projector off ``psi``.

    The neighbouring eigenvectors are phase-aligned to ``psi(theta)`` before
    differencing.
    """
    def pair_at(t):
        return solve_cell_eigen(assemble_cell_operator(sigma, c, t, K), min(n + 1, 2 * K + 1))[n - 1]

    center = pair_at(theta)
    psi = center.psi
    plus = fix_gauge(pair_at(theta + h).psi, psi)
    minus = fix_gauge(pair_at(theta - h).psi, psi)
    fd = (plus - minus) / (2 * h)
    rhs, _ = build_zeta_rhs(sigma, psi, theta)
    zeta = fredholm_solve(sigma, c, theta, center.lam, psi, rhs)

    def perp(u):
        return u - np.vdot(psi, u) * psi

    return float(np.linalg.norm(perp(fd) - perp(2j * np.pi * zeta)))


__all__ = [
    "COMPAT_TOL", "CorrectorSet", "FredholmError", "GAP_TOL", "build_zeta_rhs", "compute_chi",
    "effective_sigma", "fredholm_solve", "solve_correctors", "zeta_identity_error",
    "zeta_shift_probe",
]
