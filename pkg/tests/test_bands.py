import numpy as np
import pytest

from conftest import const, cosine
from effwave.bands import (BandCrossingError, band_structure_to_rows, check_simplicity,
                           compute_band_structure, locate_critical_point, second_derivative_fd)

PI2 = np.pi**2


def test_free_band_values(one, zero):
    B = compute_band_structure(one, zero, [0, 0.25, -0.25, 0.5, -0.5], 2, K=8)
    assert np.allclose(B.thetas, [-0.5, -0.25, 0, 0.25, 0.5])
    assert np.allclose(B.band(1), [PI2, PI2 / 4, 0, PI2 / 4, PI2], atol=1e-10)
    assert np.all(np.diff(B.bands, axis=1) >= -1e-12)


def test_constant_shift(one, zero):
    thetas = np.linspace(-0.5, 0.5, 9)
    B0 = compute_band_structure(one, zero, thetas, 3, K=8)
    B5 = compute_band_structure(one, const(5.0), thetas, 3, K=8)
    assert np.allclose(B5.bands, B0.bands + 5, atol=1e-10)


def test_grid_refinement(one, mathieu_c):
    B65 = compute_band_structure(one, mathieu_c, np.linspace(-0.5, 0.5, 65), 3)
    B129 = compute_band_structure(one, mathieu_c, np.linspace(-0.5, 0.5, 129), 3)
    assert np.allclose(B65.bands, B129.bands[::2], atol=1e-10)
    assert np.allclose(B65.bands, B65.bands[::-1], atol=1e-10)


def test_sweep_gauge_alignment(mathieu_c):
    B = compute_band_structure(cosine(1.0, 0.3), mathieu_c, np.linspace(-0.5, 0.5, 33), 2)
    for n in range(2):
        v = B.eigvecs[:, n]
        overlaps = np.einsum("ij,ij->i", v[1:].conj(), v[:-1])
        assert np.all(overlaps.real >= 0)


def test_theta_outside_cell_rejected(one, zero):
    with pytest.raises(ValueError):
        compute_band_structure(one, zero, [0.0, 0.6], 2)


def test_critical_points(one, zero, mathieu_c):
    thetas = np.linspace(-0.5, 0.5, 33)
    free = locate_critical_point(compute_band_structure(one, zero, thetas, 3, K=8), 1, 0.0, h=1e-3)
    assert free.theta == 0 and free.lam == pytest.approx(0, abs=1e-12)
    assert free.lam_pp_fd == pytest.approx(8 * PI2, rel=1e-8)
    assert free.simple and free.critical
    shifted = locate_critical_point(compute_band_structure(one, const(5.0), thetas, 3, K=8), 1, 0.0)
    assert shifted.lam == pytest.approx(5.0) and shifted.lam_pp_fd == pytest.approx(8 * PI2, rel=1e-8)
    Bm = compute_band_structure(one, mathieu_c, thetas, 3)
    cp = locate_critical_point(Bm, 1, 0.0)
    Bhi = compute_band_structure(one, mathieu_c, [0.0], 3, K=32)
    assert cp.lam == pytest.approx(Bhi.bands[0, 0], abs=1e-6)
    hi = second_derivative_fd(one, mathieu_c, 1, 0.0, 1e-2, K=32).richardson
    assert cp.lam_pp_fd == pytest.approx(hi, rel=1e-6)


def test_interior_search_finds_symmetry_point(one, mathieu_c):
    # start from a grid point next to theta = 0 and let the search refine
    B = compute_band_structure(one, mathieu_c, np.linspace(-0.5, 0.5, 65), 3)
    cp = locate_critical_point(B, 1, B.thetas[33])
    assert abs(cp.theta) < 1e-6
    assert cp.critical
    # derivative tolerance still holds at twice the resolution
    B2 = compute_band_structure(one, mathieu_c, np.linspace(-0.5, 0.5, 129), 3, K=32)
    cp2 = locate_critical_point(B2, 1, cp.theta)
    assert cp2.critical


def test_simplicity_examples(one, zero):
    s = check_simplicity(one, zero, 0.0, 1, K=8)
    assert s.simple and s.gap == pytest.approx(4 * PI2)
    s2 = check_simplicity(one, zero, 0.0, 2, K=8)
    assert not s2.simple and s2.gap == pytest.approx(0, abs=1e-9)
    s3 = check_simplicity(one, zero, 0.25, 1, K=8)
    assert s3.gap == pytest.approx(2 * PI2)
    with pytest.raises(ValueError):
        check_simplicity(one, zero, 0.0, 0, K=8)


def test_second_derivative_examples(one, zero, mathieu_c):
    assert second_derivative_fd(one, zero, 1, 0.0, 1e-3, K=8).value == pytest.approx(8 * PI2, rel=1e-6)
    two = const(2.0)
    assert second_derivative_fd(two, zero, 1, 0.0, 1e-3, K=8).value == pytest.approx(16 * PI2, rel=1e-6)
    a = second_derivative_fd(one, mathieu_c, 1, 0.0, 1e-2).richardson
    b = second_derivative_fd(one, mathieu_c, 1, 0.0, 5e-3).richardson
    assert a == pytest.approx(b, rel=1e-6)


def test_even_symmetry_one_sided_stencil(one, mathieu_c):
    from effwave.bands import band_value
    h = 1e-2
    d = second_derivative_fd(one, mathieu_c, 1, 0.0, h)
    one_sided = 2 * (band_value(one, mathieu_c, 1, h / 2, 16) - band_value(one, mathieu_c, 1, 0.0, 16)) / (h / 2) ** 2
    assert one_sided == pytest.approx(d.half_step, rel=1e-10)


def test_crossing_inside_stencil(one, zero):
    with pytest.raises(BandCrossingError):
        second_derivative_fd(one, zero, 2, 0.0, 1e-2, K=8)


def test_rows(one, zero):
    B = compute_band_structure(one, zero, np.linspace(-0.5, 0.5, 5), 2, K=4)
    rows = band_structure_to_rows(B)
    assert len(rows) == 5 and len(rows[0]) == 3
