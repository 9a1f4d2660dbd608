"""Factorization experiments: initial data, frame changes, error series, pairings and sweeps."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .cell import evaluate_psi
from .config import RunConfig
from .engine import (EpsProblem, Trajectory, discrete_cell_eigenvalue, energy_functional,
                     integrate_eps_batch, integrate_homogenized_batch, mass_diagnostics,
                     sample_wiener_path)
from .pipeline import band_sweep, build_setup, correctors_at, effective_model, select_critical

MIN_POINTS_PER_CELL = 8


# ---------------------------------------------------------------------------
# initial data and frames


def well_prepared_initial(psi: np.ndarray, theta: float, v0: Callable, eps: float, x_grid,
                          L: float = 1.0, frame: str = "demodulated",
                          boundary_tol: float = 1e-12) -> np.ndarray:
    """``psi(x/eps) v0(x)`` on ``x_grid`` (times ``e^{2 pi i theta x/eps}`` in the lab frame).

    ``v0`` must vanish on a neighbourhood of both end points: it is checked on
    the outer 1% of the domain.
    """
    x = np.asarray(x_grid, dtype=float)
    edge = np.concatenate([np.linspace(0, 0.01 * L, 11), np.linspace(0.99 * L, L, 11)])
    if np.max(np.abs(v0(edge))) > boundary_tol:
        raise ValueError("initial envelope must vanish near the boundary of D")
    q = 1.0 / eps
    field_ = evaluate_psi(psi, np.mod(x * q, 1.0)) * v0(x)
    if frame == "lab":
        field_ = field_ * np.exp(2j * np.pi * theta * x / eps)
    elif frame != "demodulated":
        raise ValueError(f"unknown frame {frame!r}")
    return np.asarray(field_, dtype=complex)


def _phase(t: float, x, eps: float, theta: float, lam: float) -> np.ndarray:
    return np.exp(1j * lam * t / eps**2) * np.exp(2j * np.pi * theta * np.asarray(x) / eps)


def demodulate(u: np.ndarray, x, t: float, eps: float, theta: float, lam: float) -> np.ndarray:
    """Strip the fast phase ``e^{i lam t/eps^2} e^{2 pi i theta x/eps}``."""
    return np.asarray(u) * np.conj(_phase(t, x, eps, theta, lam))


def modulate(v: np.ndarray, x, t: float, eps: float, theta: float, lam: float) -> np.ndarray:
    return np.asarray(v) * _phase(t, x, eps, theta, lam)


def lift(values: np.ndarray, x_coarse, x_fine, L: float = 1.0) -> np.ndarray:
    """Piecewise-cubic interpolation of Dirichlet data from a coarse grid to a fine one."""
    x_coarse = np.asarray(x_coarse, dtype=float)
    x_fine = np.asarray(x_fine, dtype=float)
    if x_coarse.shape == x_fine.shape and np.allclose(x_coarse, x_fine, rtol=0, atol=1e-14):
        return np.asarray(values)
    xs = np.concatenate([[0.0], x_coarse, [L]])
    vs = np.concatenate([[0.0], np.asarray(values, dtype=complex), [0.0]])
    re = CubicSpline(xs, vs.real)(x_fine)
    im = CubicSpline(xs, vs.imag)(x_fine)
    return re + 1j * im


# ---------------------------------------------------------------------------
# factorization error


@dataclass(eq=False)
class ErrorSeries:
    times: np.ndarray
    errors: np.ndarray          # L2(D) norm at each instant

    @property
    def squared(self) -> np.ndarray:
        return self.errors**2

    @property
    def sup(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0


def factorization_error(v_eps: Trajectory, v: Trajectory, psi: np.ndarray, eps: float,
                        t_samples=None) -> ErrorSeries:
    """``|| v_eps(t) - psi(./eps) v(t) ||_{L2(D)}`` at each shared instant.

    The limit field is lifted to the fine grid first when the grids differ.
    """
    times = v_eps.times if t_samples is None else np.asarray(t_samples, dtype=float)
    if v_eps.times.shape != v.times.shape or np.any(np.abs(v_eps.times - v.times) > 1e-12):
        raise ValueError("trajectories were recorded at different instants")
    L = float(v_eps.meta.get("L", 1.0))
    osc = evaluate_psi(psi, np.mod(v_eps.x / eps, 1.0))
    h = v_eps.h
    errs = []
    for t in times:
        limit = lift(v.state_at(t), v.x, v_eps.x, L)
        diff = v_eps.state_at(t) - osc * limit
        errs.append(np.sqrt(h * np.sum(np.abs(diff) ** 2)))
    return ErrorSeries(times=np.asarray(times, dtype=float), errors=np.asarray(errs))


# ---------------------------------------------------------------------------
# two-scale pairing


@dataclass(eq=False)
class TwoScaleTestFunction:
    """``Psi(x, y) = macro(x) micro(y)``, optionally with the first-order corrector.

    With ``corrector`` set (coefficients of ``zeta``) and ``eps`` supplied at
    evaluation, the oscillating test field becomes
    ``macro(x) micro(x/eps) + eps macro'(x) zeta(x/eps)``.
    """

    macro: Callable
    micro: Callable
    corrector: np.ndarray | None = None
    macro_derivative: Callable | None = None

    def __call__(self, x, y, eps: float | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.asarray(self.macro(x), dtype=complex) * np.asarray(self.micro(y), dtype=complex)
        if self.corrector is not None and eps is not None:
            if self.macro_derivative is None:
                raise ValueError("corrector term needs the macro derivative")
            out = out + eps * self.macro_derivative(x) * evaluate_psi(self.corrector, np.mod(y, 1.0))
        return out


def _micro_from_coeffs(coeffs: np.ndarray) -> Callable:
    return lambda y: evaluate_psi(coeffs, np.mod(np.asarray(y, dtype=float), 1.0))


@dataclass(frozen=True)
class PairingResult:
    value: complex
    limit: complex | None


def two_scale_pairing(w: np.ndarray, x, Psi: TwoScaleTestFunction, eps: float, L: float = 1.0,
                      limit: Callable | None = None, M: int = 64,
                      nq: int | None = None) -> PairingResult:
    """``int_D w(x) conj(Psi(x, x/eps)) dx`` by the trapezoid rule on ``x``.

    ``x`` must be a uniform grid covering ``[0, L]`` (end points included) or its
    interior nodes, in which case zero boundary values are assumed.  ``limit``
    is an optional candidate ``w0(x, y)``; its pairing
    ``int_D int_T w0 conj(Psi) dy dx`` is evaluated by tensor quadrature
    (trapezoid in ``x`` on ``nq`` points, ``M``-point rule on the torus).
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=complex)
    if x.size < 2:
        raise ValueError("pairing needs a grid")
    h = x[1] - x[0]
    if eps / h < MIN_POINTS_PER_CELL - 1e-9:
        raise ValueError(f"oscillation under-resolved: {eps / h:.2f} points per eps-cell (< 8)")
    if x[0] > 1e-14:
        x = np.concatenate([[0.0], x, [L]])
        w = np.concatenate([[0.0], w, [0.0]])
    integrand = w * np.conj(Psi(x, x / eps))
    value = complex(np.trapezoid(integrand, x))
    lim = None
    if limit is not None:
        nq = nq or max(x.size, 257)
        xq = np.linspace(0.0, L, nq)
        yq = np.arange(M) / M
        vals = limit(xq[:, None], yq[None, :]) * np.conj(Psi(xq[:, None], yq[None, :]))
        lim = complex(np.trapezoid(np.mean(vals, axis=1), xq))
    return PairingResult(value=value, limit=lim)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(eq=False)
class EpsilonResult:
    eps: float
    q: int
    replicas: int
    times: np.ndarray
    err_mean: np.ndarray        # E ||.||^2 at each instant
    err_stderr: np.ndarray
    sup_mean: float             # E sup_t ||.||
    sup_stderr: float
    sup_per_replica: np.ndarray
    pairing: complex
    pairing_stderr: float
    pairing_limit: complex
    mass_residual: float        # worst relative mass-law residual over replicas
    energy: dict
    failures: list[dict] = field(default_factory=list)
    mass_rows: list[list[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.eps, "q": self.q, "replicas": self.replicas,
            "times": [float(t) for t in self.times],
            "err_mean": [float(v) for v in self.err_mean],
            "err_stderr": [float(v) for v in self.err_stderr],
            "sup_mean": self.sup_mean, "sup_stderr": self.sup_stderr,
            "pairing": [self.pairing.real, self.pairing.imag],
            "pairing_stderr": self.pairing_stderr,
            "pairing_limit": [self.pairing_limit.real, self.pairing_limit.imag],
            "mass_residual": self.mass_residual,
            "energy": self.energy,
            "failures": self.failures,
        }


@dataclass(eq=False)
class ConvergenceReport:
    scenario: str
    results: list[EpsilonResult]
    verdict: dict
    model: dict
    lift_error: float
    runtime: float = 0.0
    partial: bool = False
    bands: object = None

    @property
    def epsilons(self) -> list[float]:
        return [r.eps for r in self.results]

    def to_dict(self) -> dict:
        # runtime is deliberately left out so that repeated runs serialize identically
        return {
            "scenario": self.scenario,
            "epsilons": self.epsilons,
            "model": self.model,
            "lift_error": self.lift_error,
            "partial": self.partial,
            "verdict": self.verdict,
            "results": [r.to_dict() for r in self.results],
        }

    def error_rows(self) -> list[list]:
        rows = []
        for r in self.results:
            for t, m, s in zip(r.times, r.err_mean, r.err_stderr):
                rows.append([r.eps, r.replicas, float(t), float(m), float(s)])
        return rows


def monotone_verdict(results: list[EpsilonResult]) -> dict:
    """Each halving of ``eps`` must lower the mean sup-error by more than one stderr.

    The stderr is that of the per-replica difference: both runs use the same
    Wiener paths, so the paired difference is the quantity whose sign matters.
    """
    ordered = sorted(results, key=lambda r: -r.eps)
    steps = []
    for a, b in zip(ordered, ordered[1:]):
        n = min(a.sup_per_replica.size, b.sup_per_replica.size)
        diff = a.sup_per_replica[:n] - b.sup_per_replica[:n]
        drop = float(np.mean(diff)) if n else float("nan")
        se = float(np.std(diff, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        steps.append({"from": a.eps, "to": b.eps, "drop": drop, "stderr": se,
                      "decreasing": bool(n > 0 and drop > 0 and drop > se)})
    return {"strictly_decreasing": bool(steps) and all(s["decreasing"] for s in steps),
            "steps": steps}


def _mean_stderr(a: np.ndarray, axis: int = 0):
    a = np.asarray(a)
    n = a.shape[axis]
    mean = np.mean(a, axis=axis)
    se = np.std(a, axis=axis, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def sample_times(T: float, dt: float, n: int) -> np.ndarray:
    steps = np.unique(np.rint(np.linspace(0, T, n + 1)[1:] / dt).astype(int))
    return steps * dt


def _lift_error(v0: Callable, L: float, nx_coarse: int, nx_fine: int) -> float:
    if nx_coarse == nx_fine:
        return 0.0
    xc = np.linspace(0, L, nx_coarse + 1)[1:-1]
    xf = np.linspace(0, L, nx_fine + 1)[1:-1]
    e = lift(v0(xc).astype(complex), xc, xf, L) - v0(xf)
    return float(np.sqrt(L / nx_fine * np.sum(np.abs(e) ** 2)))


def convergence_sweep(cfg: RunConfig, threads: int = 1, progress: Callable | None = None,
                      bands=None) -> ConvergenceReport:
    """Run the oscillating and limit problems on shared paths for every ``eps`` and replica.

    Replicas are processed in chunks of fixed size (independent of ``threads``)
    and reduced in a fixed order, so the report depends only on the config.
    """
    start = time.perf_counter()
    s = build_setup(cfg)
    num = cfg.numerics
    B = bands if bands is not None else band_sweep(s)
    cp = select_critical(s, B)
    cs = correctors_at(s, cp)
    psi, theta = cs.psi, cs.theta
    times = sample_times(num.T, num.dt, num.n_samples)
    phi = s.test_macro
    Psi = TwoScaleTestFunction(macro=phi, micro=_micro_from_coeffs(psi))
    psi_norm2 = float(np.sum(np.abs(psi) ** 2))
    model_info, results, lift_err = {}, [], 0.0

    for q in cfg.qs:
        lam = cs.lam if num.lambda_mode == "plane_wave" else \
            discrete_cell_eigenvalue(s.sigma, s.c, theta, num.points_per_cell, cp.n)
        p = EpsProblem(sigma=s.sigma, c=s.c, q=q, theta=theta, lam=lam, T=num.T, dt=num.dt,
                       L=num.L, points_per_cell=num.points_per_cell, d=s.d,
                       noise_kind=cfg.noise_kind, g=s.g, noise_scheme=cfg.noise_scheme)
        nx_h = p.nx if num.homog_points == 0 else num.homog_points
        xh = np.linspace(0, num.L, nx_h + 1)
        model = effective_model(s, cs, xh[1:-1])
        model_info = {k: v for k, v in model.to_dict().items() if k not in ("x_grid", "d_star")}
        lift_err = max(lift_err, _lift_error(s.v0, num.L, nx_h, p.nx))
        u0 = well_prepared_initial(psi, theta, s.v0, p.eps, p.nodes, num.L)
        w0 = s.v0(xh).astype(complex)
        amp = p.amplitude()

        def cell(chunk, p=p, u0=u0, w0=w0, model=model, nx_h=nx_h, amp=amp):
            paths = [sample_wiener_path(num.T, num.dt, num.seed, r) for r in chunk]
            try:
                te = integrate_eps_batch(p, paths, u0, times)
                th = integrate_homogenized_batch(model, paths, w0, num.L, num.dt, nx_h, times,
                                                 cfg.noise_scheme)
            except Exception as exc:                           # recorded, not raised
                return {"failed": [{"q": p.q, "replicas": list(chunk), "error": repr(exc)}]}
            out = {"sq": [], "sup": [], "pair": [], "lim": [], "mass": [], "energy": [],
                   "mass_rows": None, "failed": []}
            for a, b in zip(te, th):
                es = factorization_error(a, b, psi, p.eps)
                out["sq"].append(es.squared)
                out["sup"].append(es.sup)
                pr = two_scale_pairing(a.state_at(num.T), a.x, Psi, p.eps, num.L)
                vT = np.concatenate([[0], b.state_at(num.T), [0]])
                lim = np.trapezoid(vT * np.conj(phi(xh)), xh) * psi_norm2
                out["pair"].append(pr.value)
                out["lim"].append(lim)
                md = mass_diagnostics(a, cfg.noise_kind, amp)
                if cfg.noise_kind == "additive":
                    # the linear law holds in expectation only; keep the series for averaging
                    out["mass"].append(md.mass)
                else:
                    out["mass"].append(md.max_rel_residual)
                out["energy"].append(energy_functional(a, p.eps, 0.0))
                if out["mass_rows"] is None:
                    out["mass_rows"] = md
            return out

        R = num.replicas
        chunks = [list(range(i, min(i + num.chunk, R))) for i in range(0, R, num.chunk)]
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outs = list(pool.map(cell, chunks))
        else:
            outs = [cell(c) for c in chunks]
        results.append(_reduce(p, outs, times, cfg, amp))
        if progress:
            progress(f"eps=1/{q}: sup-error {results[-1].sup_mean:.4e} "
                     f"+- {results[-1].sup_stderr:.2e}")

    report = ConvergenceReport(scenario=cfg.scenario, results=results,
                               verdict=monotone_verdict(results), model=model_info,
                               lift_error=lift_err, bands=B)
    report.partial = any(r.failures for r in results)
    report.runtime = time.perf_counter() - start
    return report


def _reduce(p: EpsProblem, outs: list[dict], times, cfg: RunConfig, amp) -> EpsilonResult:
    failures = [f for o in outs for f in o["failed"]]
    good = [o for o in outs if "sq" in o]
    sq = np.array([v for o in good for v in o["sq"]]).reshape(-1, len(times))
    sup = np.array([v for o in good for v in o["sup"]])
    pair = np.array([v for o in good for v in o["pair"]], dtype=complex)
    lim = np.array([v for o in good for v in o["lim"]], dtype=complex)
    n = sup.size
    if n == 0:
        nan = float("nan")
        return EpsilonResult(eps=p.eps, q=p.q, replicas=0, times=times,
                             err_mean=np.full(len(times), nan), err_stderr=np.full(len(times), nan),
                             sup_mean=nan, sup_stderr=nan, sup_per_replica=sup, pairing=complex(nan),
                             pairing_stderr=nan, pairing_limit=complex(nan), mass_residual=nan,
                             energy={}, failures=failures)
    err_mean, err_se = _mean_stderr(sq)
    sup_mean, sup_se = _mean_stderr(sup)
    pair_mean = complex(np.mean(pair))
    pair_se = float(np.std(pair, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    masses = [v for o in good for v in o["mass"]]
    md0 = good[0]["mass_rows"]
    if cfg.noise_kind == "additive":
        mean_mass = np.mean(np.array(masses), axis=0)
        pred = md0.predicted
        resid = mean_mass - pred
        mass_res = float(np.max(np.abs(resid)) / mean_mass[0])
        mass_rows = [[float(a), float(b), float(c), float(d)]
                     for a, b, c, d in zip(md0.t, mean_mass, pred, resid)]
    else:
        mass_res = float(np.max(masses))
        mass_rows = md0.rows()
    energies = [e for o in good for e in o["energy"]]
    energy = {"sup_mass": float(np.max([e["sup_mass"] for e in energies])),
              "eps2_h1_integral": float(np.mean([e["eps2_h1_integral"] for e in energies]))}
    return EpsilonResult(eps=p.eps, q=p.q, replicas=n, times=np.asarray(times), err_mean=err_mean,
                         err_stderr=err_se, sup_mean=float(sup_mean), sup_stderr=float(sup_se),
                         sup_per_replica=sup, pairing=pair_mean, pairing_stderr=pair_se,
                         pairing_limit=complex(np.mean(lim)), mass_residual=mass_res,
                         energy=energy, failures=failures, mass_rows=mass_rows)
