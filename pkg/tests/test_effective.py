import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import const, cosine
from effwave.cell import evaluate_psi
from effwave.correctors import solve_correctors
from effwave.effective import (HypothesisViolation, build_effective_model, effective_d,
                               effective_g)
from effwave.periodic import ZERO_POTENTIAL, MacroPotential, sample_periodic, separable_potential

X = np.linspace(0, 1, 17)[1:-1]


@pytest.fixture(scope="module")
def mathieu():
    return solve_correctors(const(1.0), cosine(0.0, 2.0), 0.0, 1)


def fine_average(f, psi, M=4096):
    y = np.arange(M) / M
    return np.mean(f(y) * np.abs(evaluate_psi(psi, y)) ** 2)


def test_effective_d_examples(mathieu):
    a_only = separable_potential({"named": "linear", "params": {"slope": 3, "intercept": 1}},
                                 {"named": "constant", "params": {"value": 1}})
    assert np.allclose(effective_d(a_only, mathieu.psi, X), 3 * X + 1, atol=1e-12)
    cos_y = separable_potential({"named": "constant", "params": {"value": 1}},
                                {"named": "cosine", "params": {"amplitude": 1}})
    flat = np.zeros(9, complex)
    flat[4] = 1
    assert np.allclose(effective_d(cos_y, flat, X), 0, atol=1e-14)
    x_cos = separable_potential({"named": "linear"}, {"named": "cosine", "params": {"amplitude": 1}})
    slope = fine_average(lambda y: np.cos(2 * np.pi * y), mathieu.psi)
    assert np.allclose(effective_d(x_cos, mathieu.psi, X), slope * X, atol=1e-12)
    assert np.allclose(effective_d(ZERO_POTENTIAL, mathieu.psi, X), 0)


def test_effective_d_grid_kind(mathieu):
    xs = np.linspace(0, 1, 9)
    y = np.arange(32) / 32
    vals = np.outer(1 + xs, np.cos(2 * np.pi * y)) + 0.5
    d = MacroPotential(kind="grid", x_grid=xs, values=vals, bound=5)
    slope = fine_average(lambda y: np.cos(2 * np.pi * y), mathieu.psi)
    assert np.allclose(effective_d(d, mathieu.psi, X), (1 + X) * slope + 0.5, atol=1e-12)


def test_effective_g_examples(mathieu):
    flat = np.zeros(9, complex)
    flat[4] = 1
    assert effective_g(const(0.7), mathieu.psi) == pytest.approx(0.7)
    assert effective_g(cosine(0, 1), flat) == pytest.approx(0, abs=1e-15)
    ref = fine_average(lambda y: np.cos(2 * np.pi * y), mathieu.psi)
    assert effective_g(cosine(0, 1), mathieu.psi) == pytest.approx(ref, abs=1e-10)
    with pytest.raises(ValueError):
        effective_g(sample_periodic({"fourier": [[1, 0, 1]]}, 16), mathieu.psi)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2 * np.pi))
def test_averaging_bounds_and_gauge(mean, amp, alpha):
    cs = solve_correctors(const(1.0), cosine(0.0, 2.0), 0.0, 1, fd_step=None)
    g = cosine(mean, amp)
    gs = effective_g(g, cs.psi)
    assert g.samples.min() - 1e-12 <= gs <= g.samples.max() + 1e-12
    assert abs(gs) <= g.max_abs() + 1e-12
    assert effective_g(g, np.exp(1j * alpha) * cs.psi) == pytest.approx(gs, abs=1e-14)
    d = separable_potential({"named": "linear"}, {"named": "cosine", "params": {"mean": mean, "amplitude": amp}})
    ds = effective_d(d, cs.psi, X)
    lo, hi = np.minimum(X * (mean - abs(amp)), X * (mean + abs(amp))), np.maximum(X * (mean - abs(amp)), X * (mean + abs(amp)))
    assert np.all(ds >= lo - 1e-12) and np.all(ds <= hi + 1e-12)


def test_free_model(one, zero):
    cs = solve_correctors(one, zero, 0.0, 1, K=8)
    m = build_effective_model(one, zero, cs, ZERO_POTENTIAL, const(1.0), "additive", X)
    assert m.sigma_star == pytest.approx(1.0) and m.g_star == pytest.approx(1.0)
    assert m.lam == pytest.approx(0, abs=1e-12) and np.all(m.d_star == 0)
    shifted = solve_correctors(one, const(3.0), 0.0, 1, K=8)
    m3 = build_effective_model(one, const(3.0), shifted, ZERO_POTENTIAL, const(1.0), "additive", X)
    assert m3.lam == pytest.approx(3.0) and m3.sigma_star == pytest.approx(m.sigma_star)
    assert m.to_dict()["well_posed"]


def test_full_mathieu_model(mathieu):
    one, c = const(1.0), cosine(0.0, 2.0)
    d = separable_potential({"named": "linear"}, {"named": "cosine", "params": {"amplitude": 1}})
    m = build_effective_model(one, c, mathieu, d, cosine(0, 1), "multiplicative", X)
    ref = fine_average(lambda y: np.cos(2 * np.pi * y), mathieu.psi)
    assert m.g_star == pytest.approx(ref, abs=1e-10)
    assert np.allclose(m.d_star, ref * X, atol=1e-12)
    assert m.sigma_star == pytest.approx(mathieu.sigma_star_formula)


def test_hypothesis_violations(one, zero):
    degenerate = solve_correctors(one, cosine(0.0, 2.0), 0.0, 1, fd_step=None)
    # reuse the corrector record at a degenerate free-band point
    degenerate.n = 2
    with pytest.raises(HypothesisViolation, match="simple"):
        build_effective_model(one, zero, degenerate, ZERO_POTENTIAL, None, "none", X)
    off = solve_correctors(cosine(1.0, 0.3), cosine(0.0, 2.0), 0.2, 1, fd_step=None)
    with pytest.raises(HypothesisViolation, match="critical"):
        build_effective_model(cosine(1.0, 0.3), cosine(0.0, 2.0), off, ZERO_POTENTIAL, None, "none", X)


def test_band_maximum_flagged(one, mathieu_c):
    cs = solve_correctors(one, mathieu_c, 0.5, 1, fd_step=None)
    m = build_effective_model(one, mathieu_c, cs, ZERO_POTENTIAL, None, "none", X)
    assert m.sigma_star < 0 and not m.well_posed and m.notes
