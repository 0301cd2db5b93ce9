import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from twophoton.correlation import StaticModel
from twophoton.ensemble import (
    IntegrandError,
    Spectrum,
    average_over_g,
    background_subtract,
    density_from_histogram,
    draw_couplings,
    point_mass,
    read_density,
    read_spectrum,
    sample_coupling_distribution,
    spectrum_scan,
    write_density,
)
from twophoton.errors import SolverError
from twophoton.hilbert import PEAK_DELTA_TILDE, SystemParams


def _analytic_cdf(g, g_max, half_width):
    """P(coupling <= g) for x uniform on the mask and a uniform standing-wave phase."""
    def inner(x):
        c = g / (g_max * np.exp(-x**2))
        return 1.0 if c >= 1 else 1.0 - 2.0 / np.pi * np.arccos(c)
    return integrate.quad(inner, -half_width, half_width, limit=200)[0] / (2 * half_width)


@pytest.mark.parametrize("geometry,half_width", [("masked", 0.5), ("unmasked", 2.0)])
def test_histogram_matches_analytic_distribution(geometry, half_width):
    d = sample_coupling_distribution(geometry, samples=400_000, seed=7)
    above = 1 - _analytic_cdf(1.0, 10.0, half_width)
    for lo, hi in [(1, 3), (3, 6), (6, 8), (8, 10)]:
        expected = (_analytic_cdf(hi, 10.0, half_width) - _analytic_cdf(lo, 10.0, half_width)) / above
        assert d.histogram_mass(lo, hi) == pytest.approx(expected, abs=5e-3)


def test_normalization_is_exact(masked_density):
    assert masked_density.normalization() == pytest.approx(1.0, abs=1e-12)
    assert average_over_g(lambda g: 1.0, masked_density) == pytest.approx(1.0, abs=1e-12)
    assert np.all(masked_density.weights >= 0)


def test_support_and_node_count(masked_density):
    assert masked_density.nodes.size == 32
    assert masked_density.nodes.min() > 1.0 and masked_density.nodes.max() < 10.0
    assert masked_density.edges[0] == pytest.approx(1.0)


def test_mask_concentrates_strong_coupling(masked_density):
    unmasked = sample_coupling_distribution("unmasked")
    assert masked_density.histogram_mass(8, 10) > unmasked.histogram_mass(8, 10)


def test_seeded_draws_are_reproducible():
    a = draw_couplings("masked", 10.0, 1000, seed=3)
    b = draw_couplings("masked", 10.0, 1000, seed=3)
    c = draw_couplings("masked", 10.0, 1000, seed=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.all((a >= 0) & (a <= 10.0))


def test_point_mass_reduces_to_single_evaluation():
    d = point_mass(9.0)
    assert d.is_point_mass
    assert average_over_g(lambda g: g**2, d) == 81.0


def test_quadrature_mean_close_to_histogram_mean(masked_density):
    d = masked_density
    hist_mean = float(np.sum(d.centers * d.values * np.diff(d.edges)))
    assert average_over_g(lambda g: g, d) == pytest.approx(hist_mean, rel=2e-3)


def test_integrand_failure_names_the_coupling(masked_density):
    def bad(g):
        if g > 5:
            raise SolverError("boom")
        return g

    with pytest.raises(IntegrandError) as info:
        average_over_g(bad, masked_density)
    assert info.value.g > 5


@pytest.mark.parametrize("kwargs", [{"f_cut": 0.0}, {"f_cut": 1.0}, {"samples": 10}, {"geometry": "round"}])
def test_invalid_sampling_arguments(kwargs):
    with pytest.raises(ValueError):
        sample_coupling_distribution(**kwargs)


def test_empty_support_is_an_error():
    with pytest.raises(ValueError):
        sample_coupling_distribution(mask_half_width=50.0, f_cut=0.999999, samples=10**4)


def test_density_round_trip(masked_density):
    buf = io.StringIO()
    write_density(masked_density, buf)
    buf.seek(0)
    back = read_density(buf)
    np.testing.assert_allclose(back.edges, masked_density.edges, rtol=1e-12)
    np.testing.assert_allclose(back.values, masked_density.values, rtol=1e-12)
    np.testing.assert_allclose(back.weights, masked_density.weights, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=3, max_size=30).filter(lambda v: sum(v) > 0.1),
       st.integers(2, 40))
def test_histogram_quadrature_weights_sum_to_one(values, n_nodes):
    edges = np.linspace(1.0, 10.0, len(values) + 1)
    d = density_from_histogram(edges, values, n_nodes)
    assert d.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(d.weights >= 0)


@pytest.fixture(scope="module")
def small_scan():
    p = SystemParams()
    return spectrum_scan(p, point_mass(9.0), [2.5, 2.0, 2.5, 3.0, PEAK_DELTA_TILDE], 0.1)


def test_scan_sorts_and_deduplicates(small_scan):
    assert small_scan.delta_tilde.tolist() == sorted(set(small_scan.delta_tilde.tolist()))
    assert small_scan.delta_tilde.size == 4


def test_scan_matches_direct_evaluation(small_scan):
    p = SystemParams()
    coeffs, _ = StaticModel(p).peak(p.delta)
    i = int(np.argmin(np.abs(small_scan.delta_tilde - PEAK_DELTA_TILDE)))
    assert small_scan.value_con[i] == pytest.approx(coeffs.conditional(0.1), rel=1e-12)
    assert small_scan.value_unc[i] == pytest.approx(coeffs.unconditional(0.1), rel=1e-12)


def test_scan_records_failures(monkeypatch):
    original = StaticModel.peak

    def flaky(self, delta, n_b=3, tol=1e-9):
        if abs(delta - 9.0 * 3.0) < 1e-9:
            raise SolverError("forced")
        return original(self, delta, n_b, tol)

    monkeypatch.setattr(StaticModel, "peak", flaky)
    scan = spectrum_scan(SystemParams(), point_mass(9.0), [1.0, 2.0, 3.0], 0.1)
    assert scan.delta_tilde.tolist() == [1.0, 3.0]
    assert scan.failures[0][0] == 2.0


def test_spectrum_csv_round_trip(small_scan):
    back = read_spectrum(io.StringIO(small_scan.to_csv()))
    np.testing.assert_array_equal(back.delta_tilde, small_scan.delta_tilde)
    np.testing.assert_array_equal(back.value_con, small_scan.value_con)


def test_background_subtraction_clamps():
    grid = np.array([1.0, 2.0, 3.0])
    bi = Spectrum(grid, np.array([3.0, 1.0, 5.0]), np.array([1.0, 1.0, 1.0]))
    mono = Spectrum(grid, np.array([1.0, 2.0, 1.0]), np.array([0.5, 0.5, 0.5]))
    out = background_subtract(bi, mono)
    np.testing.assert_array_equal(out.value_con, [2.0, 0.0, 4.0])
    assert out.clamped == 1
    with pytest.raises(ValueError):
        background_subtract(bi, Spectrum(grid + 1, mono.value_con, mono.value_unc))


def test_local_maxima():
    s = Spectrum(np.arange(5.0), np.array([0, 2, 1, 3, 0.0]), np.zeros(5))
    assert s.local_maxima().tolist() == [1.0, 3.0]


def test_far_wing_excess_scales_with_second_drive_squared():
    """Off-resonant spectrum excess over the static background is perturbative in E2."""
    grid = [4.0, 6.0]
    excess = []
    for e2 in (0.05, 0.1):
        p = SystemParams(e2=e2)
        scan = spectrum_scan(p, point_mass(9.0), grid, 0.1)
        background = StaticModel(p).background.conditional(0.1)
        excess.append(scan.value_con / background - 1)
    np.testing.assert_allclose(excess[1] / excess[0], 4.0, rtol=0.05)
    # at the weaker amplitude the far-detuned spectrum is flat to a few percent
    scan = spectrum_scan(SystemParams(e2=0.05), point_mass(9.0), np.arange(4.0, 6.01, 0.1), 0.1)
    assert np.ptp(scan.value_con) / scan.value_con.mean() < 0.05
