"""Complex tridiagonal operators and solvers.

The production path factors once with LAPACK ``gttrf`` and reuses the factors
every step (``gttrs``); :func:`thomas_solve` is a plain forward-elimination /
back-substitution kept as an independent reference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack


@dataclass(frozen=True, eq=False)
class Tridiagonal:
    """Matrix with ``lower[i] = A[i+1, i]``, ``diag[i] = A[i, i]``, ``upper[i] = A[i, i+1]``."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag[:, None] * v if v.ndim == 2 else self.diag * v
        if v.ndim == 2:
            out[:-1] += self.upper[:, None] * v[1:]
            out[1:] += self.lower[:, None] * v[:-1]
        else:
            out[:-1] += self.upper * v[1:]
            out[1:] += self.lower * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def shifted(self, alpha: complex, beta: complex) -> Tridiagonal:
        """``alpha * I + beta * self``."""
        return Tridiagonal(lower=beta * self.lower, diag=alpha + beta * self.diag,
                           upper=beta * self.upper)

    def hermitian_defect(self) -> float:
        d = np.max(np.abs(self.diag.imag), initial=0.0)
        o = np.max(np.abs(self.lower - np.conj(self.upper)), initial=0.0)
        return float(max(d, o))


class FactoredTridiagonal:
    """LU factors of a complex tridiagonal matrix, reusable across right-hand sides."""

    def __init__(self, T: Tridiagonal):
        self._dense = None
        if T.n <= 2:
            # gttrf wrappers mishandle the empty second superdiagonal at n = 2
            self._dense = T.to_dense().astype(complex)
            if np.linalg.cond(self._dense) > 1 / np.finfo(float).eps:
                raise np.linalg.LinAlgError("tridiagonal factorization failed (singular)")
            return
        dl, d, du = (np.asarray(a, dtype=complex) for a in (T.lower, T.diag, T.upper))
        self._factors = lapack.zgttrf(dl, d, du)
        info = self._factors[-1]
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal factorization failed (info={info})")

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return np.linalg.solve(self._dense, b)
        dl, d, du, du2, ipiv, _ = self._factors
        x, info = lapack.zgttrs(dl, d, du, du2, ipiv, b)
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal solve failed (info={info})")
        return x


def thomas_solve(T: Tridiagonal, b: np.ndarray) -> np.ndarray:
    """Thomas algorithm without pivoting; columns of ``b`` are solved together."""
    n = T.n
    a = np.asarray(T.lower, dtype=complex)
    d = np.asarray(T.diag, dtype=complex)
    c = np.asarray(T.upper, dtype=complex)
    x = np.array(b, dtype=complex, copy=True)
    cp = np.empty(max(n - 1, 0), dtype=complex)
    dp = d[0]
    if n > 1:
        cp[0] = c[0] / dp
    x[0] = x[0] / dp
    for i in range(1, n):
        denom = d[i] - a[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = c[i] / denom
        x[i] = (x[i] - a[i - 1] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]
    return x
