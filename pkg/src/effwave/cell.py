"""Shifted (Bloch) cell operator and its eigenpairs.

Plane-wave Galerkin discretization on ``k = -K..K``.  With ``S`` the Toeplitz
matrix of ``sigma`` coefficients, ``C`` that of ``c`` and ``D = diag(2 pi i (k + theta))``
the shifted derivative, the operator is ``A(theta) = -D S D + C``, i.e.
``A[k, l] = 4 pi^2 (k + theta)(l + theta) sigma(k - l) + c(k - l)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .periodic import PeriodicFunction

DEFAULT_K = 16
GAP_TOL = 1e-6


class CoefficientError(ValueError):
    """Cell coefficients violate a standing assumption (positivity, reality)."""


class EigenSolveError(RuntimeError):
    pass


def toeplitz_matrix(f: PeriodicFunction, K: int) -> np.ndarray:
    """Galerkin multiplication matrix ``T[k, l] = f(k - l)`` for ``|k|, |l| <= K``."""
    c = f.coeffs_up_to(2 * K)
    col = c[2 * K:]          # f(0), f(1), ..., f(2K)  -> T[k, -K] for k = -K.. : f(k + K)
    row = c[2 * K::-1]       # f(0), f(-1), ..., f(-2K)
    return toeplitz(col[: 2 * K + 1], row[: 2 * K + 1])


def wavenumbers(K: int) -> np.ndarray:
    return np.arange(-K, K + 1)


def shifted_derivative(theta: float, K: int) -> np.ndarray:
    """Diagonal of ``d/dy + 2 pi i theta`` in the plane-wave basis."""
    return 2j * np.pi * (wavenumbers(K) + theta)


@dataclass(frozen=True, eq=False)
class CellOperator:
    theta: float
    K: int
    matrix: np.ndarray
    spectral_shift: float = 0.0

    def hermitian_defect(self) -> float:
        A = self.matrix
        return float(np.max(np.abs(A - A.conj().T)))


@dataclass(frozen=True, eq=False)
class CellEigenpair:
    n: int
    theta: float
    lam: float
    psi: np.ndarray
    residual: float
    degenerate: bool = False

    @property
    def K(self) -> int:
        return self.psi.size // 2


def _check_coefficients(sigma: PeriodicFunction, c: PeriodicFunction) -> None:
    if not sigma.is_real or not c.is_real:
        raise CoefficientError("sigma and c must be real periodic functions")
    if not sigma.positive:
        lo = float(np.min(sigma.samples.real))
        raise CoefficientError(
            f"sigma must be uniformly positive (minimum sample {lo:.6g} <= 0)")


def assemble_cell_operator(sigma: PeriodicFunction, c: PeriodicFunction, theta: float,
                           K: int = DEFAULT_K, spectral_shift: float = 0.0) -> CellOperator:
    _check_coefficients(sigma, c)
    if K < 1:
        raise ValueError("truncation K must be >= 1")
    if abs(theta) > 0.5 + 1e-12:
        raise ValueError(f"theta={theta} outside the dual cell [-1/2, 1/2]")
    S = toeplitz_matrix(sigma, K)
    C = toeplitz_matrix(c, K)
    q = 2 * np.pi * (wavenumbers(K) + theta)
    A = np.outer(q, q) * S + C
    if spectral_shift:
        A = A - spectral_shift * np.eye(2 * K + 1)
    A = 0.5 * (A + A.conj().T)
    return CellOperator(theta=float(theta), K=K, matrix=A, spectral_shift=float(spectral_shift))


def fix_gauge(psi: np.ndarray, reference: np.ndarray | None = None,
              tie_tol: float = 1e-10) -> np.ndarray:
    """Remove the arbitrary phase of an eigenvector.

    Without ``reference`` the largest-modulus coefficient (smallest ``k`` among
    near-ties) is made real positive.  With ``reference`` the phase maximizing
    ``Re <psi, reference>`` is chosen, which keeps sweeps in ``theta`` continuous.
    """
    psi = np.asarray(psi, dtype=complex)
    mags = np.abs(psi)
    top = float(mags.max(initial=0.0))
    if top == 0.0:
        raise ValueError("cannot fix the gauge of a zero vector")
    if reference is not None:
        overlap = np.vdot(reference, psi)  # sum psi * conj(ref)
        if abs(overlap) > 1e-8 * np.linalg.norm(psi) * np.linalg.norm(reference):
            return psi * (np.conj(overlap) / abs(overlap))
    j = int(np.flatnonzero(mags >= top * (1 - tie_tol))[0])
    return psi * (np.conj(psi[j]) / mags[j])


def solve_cell_eigen(A: CellOperator, n_max: int, gap_tol: float = GAP_TOL) -> list[CellEigenpair]:
    """Lowest ``n_max`` eigenpairs, ascending, normalized and gauge-fixed.

    Degenerate eigenvalues (neighbour closer than ``gap_tol``) come back with an
    arbitrary orthonormal basis and ``degenerate=True``.
    """
    size = A.matrix.shape[0]
    if not 1 <= n_max <= size:
        raise ValueError(f"n_max={n_max} outside 1..{size}")
    try:
        w, V = np.linalg.eigh(A.matrix)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenSolveError(f"dense Hermitian eigensolve failed at theta={A.theta}: {exc}") from exc
    out = []
    for i in range(n_max):
        psi = fix_gauge(V[:, i])
        lam = float(w[i])
        res = float(np.linalg.norm(A.matrix @ psi - lam * psi))
        near = [abs(w[j] - w[i]) for j in (i - 1, i + 1) if 0 <= j < size]
        out.append(CellEigenpair(n=i + 1, theta=A.theta, lam=lam + A.spectral_shift, psi=psi,
                                 residual=res, degenerate=bool(min(near) <= gap_tol)))
    return out


def cell_eigenpairs(sigma: PeriodicFunction, c: PeriodicFunction, theta: float, n_max: int,
                    K: int = DEFAULT_K) -> list[CellEigenpair]:
    return solve_cell_eigen(assemble_cell_operator(sigma, c, theta, K), n_max)


def eigenvalues(sigma: PeriodicFunction, c: PeriodicFunction, theta: float,
                K: int = DEFAULT_K) -> np.ndarray:
    return np.linalg.eigvalsh(assemble_cell_operator(sigma, c, theta, K).matrix)


def hellmann_feynman_slope(sigma: PeriodicFunction, psi: np.ndarray, theta: float) -> float:
    """``d lambda / d theta`` for a simple eigenpair: ``<A'(theta) psi, psi>``."""
    K = psi.size // 2
    S = toeplitz_matrix(sigma, K)
    q = 2 * np.pi * (wavenumbers(K) + theta)
    # A'(theta) = 2 pi (q_k S_kl + S_kl q_l)
    dA = 2 * np.pi * (q[:, None] * S + S * q[None, :])
    return float(np.vdot(psi, dA @ psi).real)


def evaluate_psi(psi: np.ndarray, y) -> np.ndarray:
    """Trigonometric interpolation of a coefficient vector at points ``y``."""
    K = psi.size // 2
    y = np.asarray(y, dtype=float)
    return np.exp(2j * np.pi * np.multiply.outer(y, wavenumbers(K))) @ psi
