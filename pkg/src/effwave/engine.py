"""Time integration of the scaled stochastic Schrodinger problem and its limit.

Both problems are written for the envelope ``v`` in the form

    i dv + H v dt + (noise) = 0,   i.e.   dv = i H v dt + i g dW   (additive)
                                          dv = i H v dt + i g v dW (multiplicative)

with Ito increments and homogeneous Dirichlet data on ``D = (0, L)``.  ``H`` is
assembled once as a Hermitian tridiagonal matrix; each step applies the noise
at the left endpoint and then one implicit-midpoint (Cayley) step, which costs
a single tridiagonal solve with a matrix factored before the loop.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .effective import EffectiveModel
from .periodic import ZERO_POTENTIAL, MacroPotential, PeriodicFunction
from .tridiag import FactoredTridiagonal, Tridiagonal

NOISE_SCHEMES = ("exponential", "euler")


# ---------------------------------------------------------------------------
# Wiener paths


@dataclass(frozen=True, eq=False)
class WienerPath:
    dt: float
    n_steps: int
    increments: np.ndarray
    seed: int
    replica: int

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def W(self) -> np.ndarray:
        """Path values at ``0, dt, ..., T``."""
        return np.concatenate([[0.0], np.cumsum(self.increments)])

    def digest(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(self.increments).tobytes()).hexdigest()


def _steps(T: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError("time step must be positive")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, dt):
        raise ValueError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def sample_wiener_path(T: float, dt: float, seed: int, replica: int = 0) -> WienerPath:
    """Gaussian increments for replica ``replica`` of stream ``seed``.

    Each (seed, replica) pair keys its own Philox counter stream, so replicas
    are independent and can be drawn in any order.
    """
    n = _steps(T, dt)
    if seed < 0 or replica < 0:
        raise ValueError("seed and replica must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replica),))
    rng = np.random.Generator(np.random.Philox(ss))
    inc = rng.standard_normal(n) * np.sqrt(dt)
    return WienerPath(dt=float(dt), n_steps=n, increments=inc, seed=int(seed), replica=int(replica))


# ---------------------------------------------------------------------------
# problem description and operators


@dataclass(eq=False)
class EpsProblem:
    """The oscillating problem at ``eps = 1/q`` in the demodulated frame."""

    sigma: PeriodicFunction
    c: PeriodicFunction
    q: int
    theta: float = 0.0
    lam: float = 0.0
    T: float = 0.5
    dt: float = 1e-4
    L: float = 1.0
    points_per_cell: int = 64
    d: MacroPotential = ZERO_POTENTIAL
    noise_kind: str = "none"
    g: PeriodicFunction | None = None
    noise_scheme: str = "exponential"

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("q must be a positive integer (eps = 1/q)")
        self.q = int(self.q)
        cells = self.L * self.q
        if abs(cells - round(cells)) > 1e-9:
            raise ValueError("domain length must hold a whole number of eps-cells")
        if self.points_per_cell < 16:
            raise ValueError("need at least 16 grid points per eps-cell")
        if self.noise_kind not in ("none", "additive", "multiplicative"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        if self.noise_kind != "none" and self.g is None:
            raise ValueError("noisy problem needs an amplitude g")
        if self.g is not None and not self.g.is_real:
            raise ValueError("noise amplitude must be real")
        if self.noise_scheme not in NOISE_SCHEMES:
            raise ValueError(f"noise scheme must be one of {NOISE_SCHEMES}")
        _steps(self.T, self.dt)

    @property
    def eps(self) -> float:
        return 1.0 / self.q

    @property
    def nx(self) -> int:
        """Number of grid intervals on ``D``."""
        return int(round(self.L * self.q)) * self.points_per_cell

    @property
    def h(self) -> float:
        return self.L / self.nx

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.nx + 1)

    @property
    def x(self) -> np.ndarray:
        return self.nodes[1:-1]

    def amplitude(self) -> np.ndarray | None:
        return None if self.g is None else self.g(self.x / self.eps)


def magnetic_laplacian(sig_half: np.ndarray, h: float, kappa: float = 0.0) -> Tridiagonal:
    """``G^H diag(sig_half) G`` for ``G u = (e^{i kappa h/2} u_{j+1} - e^{-i kappa h/2} u_j) / h``.

    ``sig_half`` holds the coefficient at the ``n + 1`` half points of a grid
    with ``n`` interior nodes and zero Dirichlet data.  This is the
    discretization of ``-(d/dx + i kappa)(s (d/dx + i kappa) .)``.
    """
    sig_half = np.asarray(sig_half, dtype=float)
    diag = (sig_half[:-1] + sig_half[1:]) / h**2
    upper = -sig_half[1:-1] * np.exp(1j * kappa * h) / h**2
    return Tridiagonal(lower=np.conj(upper), diag=diag.astype(complex), upper=upper)


def eps_operator(p: EpsProblem, frame: str = "demodulated") -> Tridiagonal:
    """Hermitian tridiagonal ``H_eps`` on the interior nodes.

    Demodulated frame: ``-(d_x + 2 pi i theta/eps) sigma(x/eps) (d_x + 2 pi i theta/eps)
    + eps^-2 (c(x/eps) - lam) + d(x, x/eps)``.  Lab frame drops the shift and ``lam``.
    """
    half = (p.nodes[:-1] + p.nodes[1:]) / 2
    sig_half = p.sigma(half / p.eps)
    if frame == "demodulated":
        kappa, lam = 2 * np.pi * p.theta / p.eps, p.lam
    elif frame == "lab":
        kappa, lam = 0.0, 0.0
    else:
        raise ValueError(f"unknown frame {frame!r}")
    H = magnetic_laplacian(sig_half, p.h, kappa)
    x = p.x
    V = (p.c(x / p.eps) - lam) / p.eps**2
    if not p.d.is_zero:
        V = V + p.d(x, x / p.eps)
    return Tridiagonal(lower=H.lower, diag=H.diag + V, upper=H.upper)


def homogenized_operator(sigma_star: float, d_star: np.ndarray, L: float, nx: int) -> Tridiagonal:
    """``-sigma* d_xx + d*(x)`` on the interior nodes of a uniform grid with ``nx`` intervals."""
    h = L / nx
    H = magnetic_laplacian(np.full(nx, float(sigma_star)), h)
    d_star = np.broadcast_to(np.asarray(d_star, dtype=float), (nx - 1,))
    return Tridiagonal(lower=H.lower, diag=H.diag + d_star, upper=H.upper)


# ---------------------------------------------------------------------------
# trajectories


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray           # snapshot instants
    x: np.ndarray               # interior nodes
    states: np.ndarray          # (len(times), len(x)) complex
    mass_times: np.ndarray      # every step, 0..T
    mass_series: np.ndarray
    gain_series: np.ndarray | None = None   # h sum g^2 |v|^2 at each step's left endpoint
    meta: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return float(self.meta["h"])

    def state_at(self, t: float) -> np.ndarray:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-9:
            raise KeyError(f"no snapshot at t={t}")
        return self.states[j]


def _snapshot_steps(times, dt: float, n_steps: int) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    steps = np.rint(times / dt).astype(int)
    if np.any(np.abs(steps * dt - times) > 1e-9) or np.any(steps < 0) or np.any(steps > n_steps):
        raise ValueError("snapshot times must be multiples of dt inside [0, T]")
    return steps


def _as_interior(v0: np.ndarray, n: int) -> np.ndarray:
    v0 = np.asarray(v0, dtype=complex)
    if v0.shape[0] == n + 2:
        if abs(v0[0]) > 1e-12 or abs(v0[-1]) > 1e-12:
            raise ValueError("initial field violates the Dirichlet condition")
        v0 = v0[1:-1]
    if v0.shape[0] != n:
        raise ValueError(f"initial field has {v0.shape[0]} values, expected {n} interior nodes")
    return v0


def _integrate(H: Tridiagonal, dt: float, h: float, v0: np.ndarray, dW: np.ndarray,
               noise_kind: str, amp: np.ndarray | None, scheme: str,
               snap_steps: np.ndarray, phase=None):
    """Core loop over all columns of ``v0`` (one column per path).

    ``phase(t)``, when given, multiplies an additive amplitude at time ``t``
    (used by the lab-frame validation mode).
    """
    n_steps, R = dW.shape
    P = H.shifted(1.0, -0.5j * dt)              # I - i dt/2 H
    lu = FactoredTridiagonal(P)
    v = np.array(v0, dtype=complex, copy=True).reshape(H.n, R)
    states = np.empty((snap_steps.size, H.n, R), dtype=complex)
    mass = np.empty((n_steps + 1, R))
    gain = np.zeros((n_steps, R)) if noise_kind == "multiplicative" else None
    snap_at = {}
    for i, s in enumerate(snap_steps):
        snap_at.setdefault(int(s), []).append(i)
    a = None if amp is None else amp[:, None]
    a2 = None if amp is None else (amp**2)[:, None]

    mass[0] = h * np.sum(v.real**2 + v.imag**2, axis=0)
    for i in snap_at.get(0, ()):
        states[i] = v
    for k in range(n_steps):
        if noise_kind == "additive":
            src = a if phase is None else a * phase(k * dt)
            w = v + 1j * src * dW[k][None, :]
        elif noise_kind == "multiplicative":
            gain[k] = h * np.sum(a2 * (v.real**2 + v.imag**2), axis=0)
            if scheme == "exponential":
                w = v * np.exp(1j * a * dW[k][None, :] + 0.5 * a2 * dt)
            else:
                w = v * (1.0 + 1j * a * dW[k][None, :])
        else:
            w = v
        v = 2.0 * lu.solve(w) - w
        m = h * np.sum(v.real**2 + v.imag**2, axis=0)
        if not np.all(np.isfinite(m)):
            raise FloatingPointError(f"non-finite state at step {k + 1}")
        mass[k + 1] = m
        for i in snap_at.get(k + 1, ()):
            states[i] = v
    return states, mass, gain


def _paths_matrix(paths, dt: float) -> np.ndarray:
    paths = list(paths)
    if not paths:
        raise ValueError("need at least one Wiener path")
    n = paths[0].n_steps
    for p in paths:
        if abs(p.dt - dt) > 1e-15 * dt or p.n_steps != n:
            raise ValueError("all paths must share the problem's time grid")
    return np.stack([p.increments for p in paths], axis=1)


def _split(states, mass, gain, times, x, dt, paths, meta) -> list[Trajectory]:
    out = []
    mass_times = np.arange(mass.shape[0]) * dt
    for r, path in enumerate(paths):
        m = dict(meta)
        m.update(seed=path.seed, replica=path.replica, increments_consumed=path.n_steps,
                 increments_digest=path.digest())
        out.append(Trajectory(times=times, x=x, states=states[:, :, r].copy(),
                              mass_times=mass_times, mass_series=mass[:, r].copy(),
                              gain_series=None if gain is None else gain[:, r].copy(), meta=m))
    return out


def integrate_eps_batch(p: EpsProblem, paths, v0, snapshot_times=None,
                        frame: str = "demodulated") -> list[Trajectory]:
    """Integrate the oscillating problem once per path (same initial field)."""
    paths = list(paths)
    dW = _paths_matrix(paths, p.dt)
    n_steps = dW.shape[0]
    if snapshot_times is None:
        snapshot_times = [0.0, n_steps * p.dt]
    snap = _snapshot_steps(snapshot_times, p.dt, n_steps)
    H = eps_operator(p, frame)
    v0 = _as_interior(v0, H.n)
    v0 = np.repeat(v0[:, None], len(paths), axis=1)
    amp = p.amplitude() if p.noise_kind != "none" else None
    phase = None
    if frame == "lab" and p.noise_kind == "additive":
        spatial = np.exp(2j * np.pi * p.theta * p.x / p.eps)[:, None]

        def lab_phase(t):
            return spatial * np.exp(1j * p.lam * t / p.eps**2)
        phase = lab_phase
    states, mass, gain = _integrate(H, p.dt, p.h, v0, dW, p.noise_kind, amp, p.noise_scheme,
                                    snap, phase)
    meta = dict(kind="eps", frame=frame, eps=p.eps, q=p.q, h=p.h, dt=p.dt, L=p.L,
                noise_kind=p.noise_kind, noise_scheme=p.noise_scheme, theta=p.theta, lam=p.lam)
    return _split(states, mass, gain, snap * p.dt, p.x, p.dt, paths, meta)


def integrate_eps(p: EpsProblem, path: WienerPath, v0, snapshot_times=None,
                  frame: str = "demodulated") -> Trajectory:
    return integrate_eps_batch(p, [path], v0, snapshot_times, frame)[0]


def integrate_homogenized_batch(m: EffectiveModel, paths, v0, L: float, dt: float, nx: int,
                                snapshot_times=None, noise_scheme: str = "exponential",
                                d_star: np.ndarray | None = None) -> list[Trajectory]:
    """Integrate the limit equation ``i dv - sigma* v_xx dt + d* v dt + g* (1 or v) dW = 0``.

    ``d_star`` defaults to the model's samples when they sit on this grid.
    """
    paths = list(paths)
    dW = _paths_matrix(paths, dt)
    n_steps = dW.shape[0]
    if snapshot_times is None:
        snapshot_times = [0.0, n_steps * dt]
    snap = _snapshot_steps(snapshot_times, dt, n_steps)
    x = np.linspace(0.0, L, nx + 1)[1:-1]
    if d_star is None:
        d_star = m.d_star
        if np.size(d_star) != x.size:
            if np.size(m.x_grid) and np.any(np.asarray(d_star) != 0):
                d_star = np.interp(x, m.x_grid, m.d_star)
            else:
                d_star = np.zeros_like(x)
    H = homogenized_operator(m.sigma_star, d_star, L, nx)
    v0 = _as_interior(v0, H.n)
    v0 = np.repeat(v0[:, None], len(paths), axis=1)
    kind = m.noise_kind
    amp = np.full(x.size, m.g_star) if kind != "none" else None
    states, mass, gain = _integrate(H, dt, L / nx, v0, dW, kind, amp, noise_scheme, snap)
    meta = dict(kind="homogenized", h=L / nx, dt=dt, L=L, noise_kind=kind,
                noise_scheme=noise_scheme, sigma_star=m.sigma_star, g_star=m.g_star,
                well_posed=m.well_posed)
    return _split(states, mass, gain, snap * dt, x, dt, paths, meta)


def integrate_homogenized(m: EffectiveModel, path: WienerPath, v0, L: float, dt: float, nx: int,
                          snapshot_times=None, noise_scheme: str = "exponential") -> Trajectory:
    return integrate_homogenized_batch(m, [path], v0, L, dt, nx, snapshot_times, noise_scheme)[0]


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(eq=False)
class MassDiagnostics:
    t: np.ndarray
    mass: np.ndarray
    predicted: np.ndarray
    residual: np.ndarray
    law: str
    log_slope: float

    @property
    def max_rel_residual(self) -> float:
        return float(np.max(np.abs(self.residual)) / self.mass[0])

    def rows(self) -> list[list[float]]:
        return [[float(a), float(b), float(c), float(d)]
                for a, b, c, d in zip(self.t, self.mass, self.predicted, self.residual)]


def mass_diagnostics(traj: Trajectory, noise_kind: str | None = None,
                     amplitude: np.ndarray | float | None = None) -> MassDiagnostics:
    """Observed mass against its law.

    * no noise: constant mass;
    * additive: expected linear growth ``m0 + t * int |g|^2`` (``amplitude`` on the nodes);
    * multiplicative: pathwise ``m0 + int_0^t int g^2 |v|^2`` (accumulated from the
      recorded left-endpoint gain), which for constant ``g`` is ``m0 exp(g^2 t)``.
    """
    kind = noise_kind or traj.meta.get("noise_kind", "none")
    t, m = traj.mass_times, traj.mass_series
    m0 = m[0]
    if kind == "none":
        pred, law = np.full_like(m, m0), "constant"
    elif kind == "additive":
        if amplitude is None:
            raise ValueError("additive law needs the noise amplitude")
        amp = np.broadcast_to(np.asarray(amplitude, dtype=float), traj.x.shape)
        pred, law = m0 + t * traj.h * float(np.sum(amp**2)), "linear"
    elif kind == "multiplicative":
        dt = t[1] - t[0]
        if amplitude is not None and np.ndim(amplitude) == 0:
            pred, law = m0 * np.exp(float(amplitude) ** 2 * t), "exponential"
        else:
            pred = m0 + np.concatenate([[0.0], np.cumsum(traj.gain_series) * dt])
            law = "gain-integral"
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    slope = float(np.polyfit(t, np.log(m), 1)[0]) if np.all(m > 0) else float("nan")
    return MassDiagnostics(t=t, mass=m, predicted=pred, residual=m - pred, law=law, log_slope=slope)


def energy_functional(traj: Trajectory, eps: float, theta: float = 0.0) -> dict:
    """Monitored ``sup_t ||u||^2`` and ``eps^2 int_0^T ||u||_{H^1}^2 dt`` (trapezoid over snapshots)."""
    h = traj.h
    kappa = 2 * np.pi * theta / eps if eps else 0.0
    vals = []
    for s in traj.states:
        full = np.concatenate([[0], s, [0]])
        grad = (np.exp(0.5j * kappa * h) * full[1:] - np.exp(-0.5j * kappa * h) * full[:-1]) / h
        vals.append(h * np.sum(np.abs(s) ** 2) + h * np.sum(np.abs(grad) ** 2))
    vals = np.asarray(vals)
    integral = float(np.trapezoid(vals, traj.times)) if traj.times.size > 1 else 0.0
    return {"sup_mass": float(np.max(traj.mass_series)), "eps2_h1_integral": eps**2 * integral}


def discrete_cell_eigenvalue(sigma: PeriodicFunction, c: PeriodicFunction, theta: float,
                             points_per_cell: int, n: int = 1) -> float:
    """``n``-th eigenvalue of the finite-difference cell operator used by :func:`eps_operator`.

    On ``eps``-periodic fields the fine-grid operator is ``eps^-2`` times this
    periodic ``m``-point operator, so demodulating with it removes the
    ``O(h^2 / eps^2)`` phase drift left by the plane-wave eigenvalue.
    """
    m = int(points_per_cell)
    hy = 1.0 / m
    y = np.arange(m) * hy
    s = sigma(y + hy / 2)                      # s[j] between y_j and y_{j+1}
    phase = np.exp(2j * np.pi * theta * hy)
    A = np.zeros((m, m), dtype=complex)
    idx = np.arange(m)
    A[idx, idx] = (s + np.roll(s, 1)) / hy**2 + c(y)
    A[idx, (idx + 1) % m] += -s * phase / hy**2
    A[(idx + 1) % m, idx] += -s * np.conj(phase) / hy**2
    return float(np.linalg.eigvalsh(A)[n - 1])
