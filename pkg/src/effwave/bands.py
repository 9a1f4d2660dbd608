"""Bloch band sweeps, critical points and finite-difference curvature."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .cell import (DEFAULT_K, GAP_TOL, assemble_cell_operator, eigenvalues, fix_gauge,
                   hellmann_feynman_slope, solve_cell_eigen)
from .periodic import PeriodicFunction

SYMMETRY_POINTS = (0.0, 0.5, -0.5)


class BandCrossingError(RuntimeError):
    pass


@dataclass(eq=False)
class BandStructure:
    thetas: np.ndarray
    bands: np.ndarray            # shape (len(thetas), N); row j ascending
    K: int
    eigvecs: np.ndarray | None = None   # shape (len(thetas), N, 2K+1)
    sigma: PeriodicFunction | None = None
    c: PeriodicFunction | None = None

    @property
    def N(self) -> int:
        return self.bands.shape[1]

    def band(self, n: int) -> np.ndarray:
        return self.bands[:, n - 1]


@dataclass(frozen=True)
class CriticalPoint:
    n: int
    theta: float
    lam: float
    slope: float        # Hellmann-Feynman d lambda / d theta at theta
    gap: float
    lam_pp_fd: float
    simple: bool
    critical: bool
    at_symmetry_point: bool = False


@dataclass(frozen=True)
class SimplicityReport:
    n: int
    theta: float
    gap: float
    simple: bool


@dataclass(frozen=True)
class SecondDerivative:
    value: float        # centered difference at step h
    half_step: float    # same at h/2
    richardson: float   # (4 * half_step - value) / 3
    error: float        # |half_step - value| / 3
    h: float


def compute_band_structure(sigma: PeriodicFunction, c: PeriodicFunction, thetas, N: int,
                           K: int = DEFAULT_K, store_vectors: bool = True,
                           workers: int = 1) -> BandStructure:
    thetas = np.sort(np.asarray(thetas, dtype=float))
    if thetas.size and (thetas[0] < -0.5 - 1e-12 or thetas[-1] > 0.5 + 1e-12):
        raise ValueError("theta grid must lie in the dual cell [-1/2, 1/2]")

    def solve(theta):
        try:
            return solve_cell_eigen(assemble_cell_operator(sigma, c, theta, K), N)
        except Exception as exc:
            raise type(exc)(f"{exc} (theta={theta})") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(solve, thetas))
    else:
        pairs = [solve(t) for t in thetas]

    bands = np.array([[p.lam for p in row] for row in pairs]).reshape(thetas.size, N)
    vecs = None
    if store_vectors:
        vecs = np.zeros((thetas.size, N, 2 * K + 1), dtype=complex)
        for j, row in enumerate(pairs):
            for i, p in enumerate(row):
                ref = vecs[j - 1, i] if j > 0 else None
                vecs[j, i] = fix_gauge(p.psi, ref)
    return BandStructure(thetas=thetas, bands=bands, K=K, eigvecs=vecs, sigma=sigma, c=c)


def band_value(sigma, c, n: int, theta: float, K: int) -> float:
    theta = (theta + 0.5) % 1.0 - 0.5
    return float(eigenvalues(sigma, c, theta, K)[n - 1])


def check_simplicity(sigma: PeriodicFunction, c: PeriodicFunction, theta: float, n: int,
                     K: int = DEFAULT_K, gap_tol: float = GAP_TOL) -> SimplicityReport:
    size = 2 * K + 1
    if not 1 <= n < size:
        raise ValueError(f"band n={n} out of range 1..{size - 1}")
    w = eigenvalues(sigma, c, theta, K)
    gaps = [w[n] - w[n - 1]]
    if n >= 2:
        gaps.append(w[n - 1] - w[n - 2])
    gap = float(min(gaps))
    return SimplicityReport(n=n, theta=float(theta), gap=gap, simple=gap > gap_tol)


def second_derivative_fd(sigma: PeriodicFunction, c: PeriodicFunction, n: int, theta: float,
                         h: float = 1e-2, K: int = DEFAULT_K,
                         gap_tol: float = GAP_TOL) -> SecondDerivative:
    """Centered second difference of ``lambda_n`` with one step-halving Richardson pass."""
    probes = {}
    for s in (-2, -1, 0, 1, 2):
        t = theta + s * h / 2
        t = (t + 0.5) % 1.0 - 0.5 if abs(t) > 0.5 else t
        w = eigenvalues(sigma, c, t, K)
        gap = w[n] - w[n - 1]
        if n >= 2:
            gap = min(gap, w[n - 1] - w[n - 2])
        if gap <= gap_tol:
            raise BandCrossingError(f"band {n} not simple at theta={t:.6g} inside the stencil")
        probes[s] = float(w[n - 1])
    full = (probes[2] - 2 * probes[0] + probes[-2]) / h**2
    half = (probes[1] - 2 * probes[0] + probes[-1]) / (h / 2) ** 2
    return SecondDerivative(value=full, half_step=half, richardson=(4 * half - full) / 3,
                            error=abs(half - full) / 3, h=h)


def _is_symmetric(sigma: PeriodicFunction, c: PeriodicFunction) -> bool:
    return sigma.is_real and c.is_real


def locate_critical_point(B: BandStructure, n: int, theta_init: float = 0.0,
                          h: float = 1e-2, slope_tol: float = 1e-7,
                          gap_tol: float = GAP_TOL) -> CriticalPoint:
    """Refine a stationary point of band ``n`` near ``theta_init``.

    Golden-section search on the band over a bracket taken from the sweep,
    then a root polish of the Hellmann-Feynman slope.  Symmetry points
    ``0, +-1/2`` are stationary for real coefficients and are returned directly.
    """
    sigma, c, K = B.sigma, B.c, B.K
    if sigma is None or c is None:
        raise ValueError("band structure does not carry its coefficients")
    if not 1 <= n <= B.N:
        raise ValueError(f"band {n} not present (N={B.N})")
    lo, hi = float(B.thetas[0]), float(B.thetas[-1])
    if not lo - 1e-12 <= theta_init <= hi + 1e-12:
        raise ValueError(f"theta_init={theta_init} outside the sweep [{lo}, {hi}]")

    def lam(t):
        return band_value(sigma, c, n, t, K)

    def slope(t):
        t = (t + 0.5) % 1.0 - 0.5
        pair = solve_cell_eigen(assemble_cell_operator(sigma, c, t, K), n)[n - 1]
        return hellmann_feynman_slope(sigma, pair.psi, t)

    at_symmetry_point = False
    theta = None
    if _is_symmetric(sigma, c):
        for p in SYMMETRY_POINTS:
            if abs(theta_init - p) < 1e-12:
                theta, at_symmetry_point = p, True
                break
    if theta is None:
        band = B.band(n)
        j = int(np.argmin(np.abs(B.thetas - theta_init)))
        if 0 < j < B.thetas.size - 1:
            a, m, b = B.thetas[j - 1], B.thetas[j], B.thetas[j + 1]
            if band[j] <= min(band[j - 1], band[j + 1]):
                sign = 1.0
            elif band[j] >= max(band[j - 1], band[j + 1]):
                sign = -1.0
            else:
                sign = 0.0
            if sign:
                res = minimize_scalar(lambda t: sign * lam(t), bracket=(a, m, b),
                                      method="golden", tol=1e-10)
                theta = float(res.x)
                sa, sb = slope(theta - 1e-4), slope(theta + 1e-4)
                if sa * sb < 0:
                    theta = brentq(slope, theta - 1e-4, theta + 1e-4, xtol=1e-15, rtol=4e-16)
        if theta is None:
            # no interior bracket: fall back to the nearest symmetry point
            theta = min(SYMMETRY_POINTS, key=lambda p: abs(p - theta_init))
            at_symmetry_point = True

    pair = solve_cell_eigen(assemble_cell_operator(sigma, c, theta, K), n)[n - 1]
    s = hellmann_feynman_slope(sigma, pair.psi, theta)
    report = check_simplicity(sigma, c, theta, n, K, gap_tol)
    try:
        fd = second_derivative_fd(sigma, c, n, theta, h, K, gap_tol).richardson
    except BandCrossingError:
        fd = float("nan")
    return CriticalPoint(n=n, theta=float(theta), lam=pair.lam, slope=s, gap=report.gap,
                         lam_pp_fd=fd, simple=report.simple,
                         critical=abs(s) <= slope_tol * (1 + abs(pair.lam)),
                         at_symmetry_point=at_symmetry_point)


def band_structure_to_rows(B: BandStructure) -> list[list[float]]:
    return [[float(t), *map(float, row)] for t, row in zip(B.thetas, B.bands)]
