"""1-periodic functions on the unit torus.

A :class:`PeriodicFunction` keeps both its Fourier coefficients (symmetric
indexing ``k = -K..K``) and its samples on a uniform grid of ``M`` points in
``[0, 1)``.  Quadrature on the torus is the uniform rule, which is exact for
band-limited integrands.
"""
from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

REAL_TOL = 1e-12


def dft_forward(samples: np.ndarray) -> np.ndarray:
    """Coefficients ``f(k) = (1/M) sum_j f(y_j) exp(-2 pi i k j / M)`` for ``k = -K..K``.

    ``K = M // 2``.  For even ``M`` the Nyquist coefficient is split evenly
    between ``k = -M/2`` and ``k = +M/2`` so that real input keeps conjugate
    symmetric coefficients and :func:`dft_inverse` restores the samples.
    """
    samples = np.asarray(samples)
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("samples must be a non-empty 1-D array")
    M = samples.size
    K = M // 2
    raw = np.fft.fft(samples) / M
    ks = np.arange(-K, K + 1)
    coeffs = raw[ks % M].astype(complex)
    if M % 2 == 0:
        coeffs[0] *= 0.5
        coeffs[-1] *= 0.5
    return coeffs


def dft_inverse(coeffs: np.ndarray, M: int) -> np.ndarray:
    """Samples ``f(j/M) = sum_k f(k) exp(2 pi i k j / M)`` from symmetric coefficients.

    Requires ``M >= 2K``; at ``M == 2K`` the pair ``k = +-K`` aliases onto the
    Nyquist mode (this is the layout produced by :func:`dft_forward`).
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.ndim != 1 or coeffs.size % 2 != 1:
        raise ValueError("coefficient array must have odd length 2K+1")
    K = coeffs.size // 2
    if M < 2 * K or M < 1:
        raise ValueError(f"grid size M={M} too small for K={K} (need M >= 2K)")
    full = np.zeros(M, dtype=complex)
    np.add.at(full, np.arange(-K, K + 1) % M, coeffs)
    return np.fft.ifft(full) * M


@dataclass(frozen=True, eq=False)
class PeriodicFunction:
    """Band-limited function on the torus, stored as coefficients and samples."""

    coeffs: np.ndarray
    samples: np.ndarray
    K: int
    M: int
    is_real: bool = False
    nu: float | None = None  # min sample when uniformly positive, else None
    label: str = ""

    @property
    def positive(self) -> bool:
        return self.nu is not None and self.nu > 0

    def coefficient(self, k: int) -> complex:
        if abs(k) > self.K:
            return 0j
        return complex(self.coeffs[k + self.K])

    def coeffs_up_to(self, order: int) -> np.ndarray:
        """Coefficients for ``k = -order..order`` (zero-padded or truncated)."""
        out = np.zeros(2 * order + 1, dtype=complex)
        m = min(order, self.K)
        out[order - m: order + m + 1] = self.coeffs[self.K - m: self.K + m + 1]
        return out

    def __call__(self, y) -> np.ndarray:
        """Trigonometric interpolation at arbitrary points (periodic in ``y``)."""
        y = np.asarray(y, dtype=float)
        ks = np.arange(-self.K, self.K + 1)
        vals = np.exp(2j * np.pi * np.multiply.outer(y, ks)) @ self.coeffs
        return vals.real if self.is_real else vals

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def scaled(self, factor: float) -> PeriodicFunction:
        return from_coefficients(self.coeffs * factor, self.M, label=self.label)

    def shifted(self, constant: float) -> PeriodicFunction:
        coeffs = self.coeffs.copy()
        coeffs[self.K] += constant
        return from_coefficients(coeffs, self.M, label=self.label)


def _detect_real(coeffs: np.ndarray) -> bool:
    return bool(np.max(np.abs(coeffs - np.conj(coeffs[::-1])), initial=0.0) <= REAL_TOL)


def from_coefficients(coeffs, M: int, label: str = "") -> PeriodicFunction:
    coeffs = np.asarray(coeffs, dtype=complex)
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("non-finite Fourier coefficient")
    K = coeffs.size // 2
    if M < 2 * K + 1:
        raise ValueError(f"grid size M={M} truncates a K={K} function (need M >= {2 * K + 1})")
    is_real = _detect_real(coeffs)
    if is_real:
        coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))
    samples = dft_inverse(coeffs, M)
    nu = None
    if is_real:
        samples = samples.real
        lo = float(samples.min())
        nu = lo if lo > 0 else None
    return PeriodicFunction(coeffs=coeffs, samples=samples, K=K, M=M, is_real=is_real,
                            nu=nu, label=label)


def from_samples(samples, label: str = "") -> PeriodicFunction:
    """Project grid samples onto the torus basis (aliasing accepted)."""
    samples = np.asarray(samples)
    if not np.all(np.isfinite(samples)):
        raise ValueError("non-finite sample")
    M = samples.size
    coeffs = dft_forward(samples)
    if M % 2 == 0:
        # the split Nyquist pair is not representable with M >= 2K+1; drop it
        coeffs = coeffs[1:-1]
    return from_coefficients(coeffs, M, label=label)


def _named(name: str, params: Mapping) -> dict[int, complex]:
    if name == "constant":
        return {0: complex(params.get("value", 1.0))}
    if name == "cosine":
        mean = float(params.get("mean", 0.0))
        amp = float(params.get("amplitude", 1.0))
        m = int(params.get("harmonic", 1))
        if m < 1:
            raise ValueError("cosine harmonic must be >= 1")
        return {0: complex(mean), m: 0.5 * amp, -m: 0.5 * amp}
    raise ValueError(f"unknown named function {name!r}")


def sample_periodic(spec, M: int) -> PeriodicFunction:
    """Build a :class:`PeriodicFunction` from a coefficient spec.

    ``spec`` is one of
      * ``{"fourier": [[k, re, im], ...]}``
      * ``{"named": "constant" | "cosine", "params": {...}}``
      * a mapping ``{k: value}``
      * a callable ``f(y)`` (sampled on the grid, then projected)
    """
    if callable(spec):
        y = np.arange(M) / M
        return from_samples(np.asarray(spec(y)), label=getattr(spec, "__name__", ""))
    if isinstance(spec, Mapping) and "fourier" in spec:
        table: dict[int, complex] = {}
        for entry in spec["fourier"]:
            k, re = int(entry[0]), float(entry[1])
            im = float(entry[2]) if len(entry) > 2 else 0.0
            table[k] = table.get(k, 0j) + complex(re, im)
        label = "fourier"
    elif isinstance(spec, Mapping) and "named" in spec:
        table = _named(spec["named"], spec.get("params", {}))
        label = spec["named"]
    elif isinstance(spec, Mapping):
        table = {int(k): complex(v) for k, v in spec.items()}
        label = "coefficients"
    else:
        raise TypeError(f"unsupported coefficient spec: {spec!r}")
    if not table:
        table = {0: 0j}
    if not all(np.isfinite(v) for v in table.values()):
        raise ValueError("non-finite Fourier coefficient")
    K = max(abs(k) for k in table)
    coeffs = np.zeros(2 * K + 1, dtype=complex)
    for k, v in table.items():
        coeffs[k + K] += v
    return from_coefficients(coeffs, M, label=label)


def inner_product_torus(a: PeriodicFunction, b: PeriodicFunction) -> complex:
    """Uniform-rule value of the integral of ``a * conj(b)`` over the torus."""
    if a.M != b.M:
        raise ValueError(f"grid mismatch: M={a.M} vs M={b.M}")
    return complex(np.mean(a.samples * np.conj(b.samples)))


def coeff_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """L2(T) inner product of two equal-length coefficient vectors."""
    return complex(np.vdot(b, a))


# ---------------------------------------------------------------------------
# macroscopic potential d(x, y)


MacroFunction = Callable[[np.ndarray], np.ndarray]


def macro_function(spec) -> MacroFunction:
    """Smooth real function of the slow variable from a named spec."""
    if callable(spec):
        return spec
    name = spec["named"]
    params = spec.get("params", {})
    if name == "constant":
        value = float(params.get("value", 0.0))
        return lambda x: np.full(np.shape(x), value)
    if name == "linear":
        slope = float(params.get("slope", 1.0))
        intercept = float(params.get("intercept", 0.0))
        return lambda x: slope * np.asarray(x, dtype=float) + intercept
    if name == "sine":
        amp = float(params.get("amplitude", 1.0))
        freq = float(params.get("frequency", 1.0))
        return lambda x: amp * np.sin(np.pi * freq * np.asarray(x, dtype=float))
    raise ValueError(f"unknown macro function {name!r}")


@dataclass(frozen=True, eq=False)
class MacroPotential:
    """The potential ``d(x, y)``, real, bounded in ``x`` and periodic in ``y``.

    ``kind`` is ``"zero"``, ``"separable"`` (``d = a(x) b(y)``) or ``"grid"``
    (values ``d(x_j, y_m)`` on an x-grid times the torus grid, linearly
    interpolated in ``x`` and trigonometrically in ``y``).
    """

    kind: str
    a: MacroFunction | None = None
    b: PeriodicFunction | None = None
    x_grid: np.ndarray | None = None
    values: np.ndarray | None = None
    bound: float = np.inf
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("zero", "separable", "grid"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "separable" and (self.a is None or self.b is None):
            raise ValueError("separable potential needs a(x) and b(y)")
        if self.kind == "separable" and not self.b.is_real:
            raise ValueError("d(x, y) must be real: b(y) has non-real coefficients")
        if self.kind == "grid":
            vals = np.asarray(self.values)
            if vals.ndim != 2 or vals.shape[0] != np.size(self.x_grid):
                raise ValueError("grid potential needs values of shape (len(x_grid), M)")
            if np.iscomplexobj(vals) and np.max(np.abs(vals.imag)) > 0:
                raise ValueError("d(x, y) must be real")
            if np.max(np.abs(vals)) > self.bound:
                raise ValueError("grid potential exceeds its declared bound")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def __call__(self, x, y) -> np.ndarray:
        """Pointwise values ``d(x, y)`` for broadcastable ``x`` and ``y``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros(np.broadcast(x, y).shape)
        if self.kind == "separable":
            return np.asarray(self.a(x), dtype=float) * self.b(y)
        # grid: linear in x between rows, trigonometric in y
        xb, yb = np.broadcast_arrays(x, y)
        xs = np.asarray(self.x_grid, dtype=float)
        rows = np.stack([dft_forward(row) for row in np.asarray(self.values, dtype=float)])
        K = rows.shape[1] // 2
        fx, fy = xb.ravel(), yb.ravel()
        idx = np.clip(np.searchsorted(xs, fx) - 1, 0, xs.size - 2)
        w = ((fx - xs[idx]) / (xs[idx + 1] - xs[idx]))[:, None]
        c = (1 - w) * rows[idx] + w * rows[idx + 1]
        phases = np.exp(2j * np.pi * np.multiply.outer(fy, np.arange(-K, K + 1)))
        return np.sum(c * phases, axis=1).real.reshape(xb.shape)

    def slice_at(self, x: float, M: int) -> np.ndarray:
        """Samples of ``y -> d(x, y)`` on the uniform torus grid of size ``M``."""
        y = np.arange(M) / M
        return np.asarray(self(np.full(M, float(x)), y), dtype=float)


ZERO_POTENTIAL = MacroPotential(kind="zero", bound=0.0)


def separable_potential(a_spec, b_spec, M: int = 64, bound: float | None = None) -> MacroPotential:
    a = macro_function(a_spec)
    b = b_spec if isinstance(b_spec, PeriodicFunction) else sample_periodic(b_spec, M)
    meta = {}
    if not callable(a_spec):
        meta["a"] = a_spec
    if not isinstance(b_spec, PeriodicFunction):
        meta["b"] = b_spec
    return MacroPotential(kind="separable", a=a, b=b, bound=np.inf if bound is None else bound,
                          meta=meta)


def macro_profile(spec, L: float = 1.0) -> MacroFunction:
    """Compactly supported initial envelope on ``D = (0, L)``.

    ``bump``: ``A exp(1 - 1/(1 - r^2))`` for ``r = (x - center)/half_width`` inside
    ``|r| < 1`` and zero outside; ``sine_bump`` multiplies it by ``sin(pi x / L)``.
    """
    if callable(spec):
        return spec
    name = spec["named"]
    params = spec.get("params", {})
    center = float(params.get("center", 0.5 * L))
    width = float(params.get("half_width", 0.35 * L))
    amp = float(params.get("amplitude", 1.0))
    if width <= 0:
        raise ValueError("half_width must be positive")

    def bump(x):
        x = np.asarray(x, dtype=float)
        r = (x - center) / width
        out = np.zeros_like(x)
        inside = np.abs(r) < 1
        out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
        return out

    if name == "bump":
        return bump
    if name == "sine_bump":
        return lambda x: bump(x) * np.sin(np.pi * np.asarray(x, dtype=float) / L)
    raise ValueError(f"unknown initial profile {name!r}")
