import math

import numpy as np
import pytest
from scipy.stats import kstest

from src.errors import GridMismatch, InvalidParameter, MassEscape, MomentumOutOfBand, OrderUnsupported
from src.fitting import power_law_fit
from src.quantum_state import (
    EnvelopeSpec, GridSpec, SpectralObservable, dilation_operator, expectation_diffop,
    grid_for_hbar, husimi, inner_product, make_coherent_state, moments, momentum_representation,
    norm, position_cdf, projective_measurement, sample_measurement, sample_positions,
)


def test_grid_validation():
    with pytest.raises(InvalidParameter):
        GridSpec(-1.0, 1.0, 100)
    with pytest.raises(InvalidParameter):
        GridSpec(1.0, -1.0, 128)
    assert GridSpec(-2.0, 2.0, 4096).boundary_points == 103


def test_grid_for_hbar_scales_with_resolution():
    assert grid_for_hbar(1e-3).n == 4096
    assert grid_for_hbar(1e-4).n == 16384
    assert grid_for_hbar(1e-1).n == 512


def test_coherent_state_moments(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.3, -0.5)
    assert norm(psi) == pytest.approx(1.0, abs=1e-12)
    m = moments(psi)
    spread = math.sqrt(hbar / 2)
    assert m.mean_q == pytest.approx(0.3, abs=1e-9)
    assert m.mean_p == pytest.approx(-0.5, abs=1e-9)
    assert m.dq == pytest.approx(spread, abs=1e-9)
    assert m.dp == pytest.approx(spread, abs=1e-9)
    assert m.heisenberg == pytest.approx(hbar / 2, abs=1e-9)
    assert abs(m.cov_qp) < 1e-9


def test_scaled_gaussian_envelope(grid, hbar):
    std = make_coherent_state(grid, hbar, 0.1, 0.2)
    same = make_coherent_state(grid, hbar, 0.1, 0.2, EnvelopeSpec.scaled_gaussian(1.0))
    np.testing.assert_allclose(same.amplitudes, std.amplitudes, atol=1e-12)
    wide = moments(make_coherent_state(grid, hbar, 0.0, 0.0, EnvelopeSpec.scaled_gaussian(2.0)))
    spread = math.sqrt(hbar / 2)
    assert wide.dq == pytest.approx(2 * spread, abs=1e-9)
    assert wide.dp == pytest.approx(spread / 2, abs=1e-9)


def test_custom_envelope_matches_sampled_gaussian(grid, hbar):
    eta = np.linspace(-10.0, 10.0, 2001)
    custom = EnvelopeSpec.custom(eta, np.exp(-0.5 * eta ** 2))
    psi = make_coherent_state(grid, hbar, 0.0, 0.4, custom)
    ref = make_coherent_state(grid, hbar, 0.0, 0.4)
    np.testing.assert_allclose(psi.amplitudes, ref.amplitudes, atol=1e-5)


def test_heisenberg_floor_for_random_envelopes(grid, hbar):
    rng = np.random.default_rng(7)
    for _ in range(100):
        order = int(rng.integers(1, 6))
        coeffs = rng.normal(size=order) + 1j * rng.normal(size=order)
        psi = make_coherent_state(grid, hbar, 0.0, 0.0, EnvelopeSpec.hermite(coeffs))
        assert moments(psi).heisenberg >= 0.5 * hbar * (1 - 1e-6)


def test_inner_products(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.0, 0.0)
    shifted = make_coherent_state(grid, hbar, 0.05, 0.0)
    odd = make_coherent_state(grid, hbar, 0.0, 0.0, EnvelopeSpec.hermite([0.0, 1.0]))
    assert inner_product(psi, psi).real == pytest.approx(norm(psi) ** 2, abs=1e-12)
    assert inner_product(psi, shifted).real == pytest.approx(math.exp(-0.05 ** 2 / (4 * hbar)), abs=1e-8)
    assert abs(inner_product(psi, odd)) < 1e-12
    other = make_coherent_state(GridSpec(-2.0, 2.0, 2048), hbar, 0.0, 0.0)
    with pytest.raises(GridMismatch):
        inner_product(psi, other)


def test_construction_errors(grid, hbar):
    with pytest.raises(MassEscape):
        make_coherent_state(grid, hbar, 1.99, 0.0)
    with pytest.raises(MomentumOutOfBand):
        make_coherent_state(grid, hbar, 0.0, 4.0)


def test_momentum_representation_preserves_norm(grid, hbar):
    psi = make_coherent_state(grid, hbar, -0.2, 0.7)
    mom = momentum_representation(psi)
    assert np.sum(mom.density) * mom.dp == pytest.approx(norm(psi) ** 2, abs=1e-12)
    assert mom.p[np.argmax(mom.density)] == pytest.approx(0.7, abs=mom.dp)
    assert np.all(np.diff(mom.p) > 0)


def test_expectation_of_polynomial_operators(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.3, 0.4)
    assert expectation_diffop(psi, [1.0]).real == pytest.approx(1.0, abs=1e-12)
    assert expectation_diffop(psi, [(0.0, 1.0)]).real == pytest.approx(0.3, abs=1e-9)
    assert expectation_diffop(psi, [0.0, 1.0]).real == pytest.approx(0.4, abs=1e-9)
    assert expectation_diffop(psi, [lambda x: np.cos(x)]).real == pytest.approx(
        math.cos(0.3) * math.exp(-hbar / 4), abs=1e-9)
    with pytest.raises(OrderUnsupported):
        expectation_diffop(psi, [0.0, 0.0, 0.0, 1.0])


def test_dilation_operator_on_coherent_states(hbar):
    grid = GridSpec(-2.0, 2.0, 4096)
    psi = make_coherent_state(grid, hbar, 0.3, 0.4)
    value = expectation_diffop(psi, dilation_operator(hbar))
    assert value.real == pytest.approx(0.12, abs=1e-9)
    assert abs(value.imag) < 1e-8


def test_quadratic_symbol_correction_scales_with_hbar():
    hbars = [1e-2, 1e-3, 1e-4]
    errors = []
    for h in hbars:
        psi = make_coherent_state(grid_for_hbar(h), h, 0.3, 0.4)
        value = expectation_diffop(psi, [(0.0, 0.0, 1.0), 0.0, 1.0]).real
        errors.append(abs(value - 0.25))
    fit = power_law_fit(hbars, errors)
    assert fit.slope == pytest.approx(1.0, abs=0.2)


def test_husimi_of_coherent_state(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.2, -0.3)
    q = 0.2 + np.linspace(-0.1, 0.1, 41)
    p = -0.3 + np.linspace(-0.1, 0.1, 41)
    field = husimi(psi, q, p)
    assert field.values.shape == (41, 41)
    assert field.argmax() == pytest.approx((0.2, -0.3), abs=1e-12)
    assert field.values.max() == pytest.approx(1 / (2 * math.pi * hbar), rel=0.02)


def test_husimi_mass_and_symmetry(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.0, 0.0)
    h = math.sqrt(hbar) / 4
    lattice = h * np.arange(-40, 41)
    field = husimi(psi, lattice, lattice)
    assert field.mass() == pytest.approx(1.0, abs=1e-3)
    np.testing.assert_allclose(field.values, field.values[::-1, ::-1], atol=1e-10)
    with pytest.raises(MomentumOutOfBand):
        husimi(psi, lattice, [10.0])


def test_position_sampling_is_seeded():
    h = 1e-4
    psi = make_coherent_state(grid_for_hbar(h), h, 0.3, 0.0)
    a = sample_positions(psi, 42, 10000)
    b = sample_positions(psi, 42, 10000)
    assert np.array_equal(a, b)
    assert abs(a.mean() - 0.3) < 3 * math.sqrt(h / 2 / 10000)
    assert not np.array_equal(a, sample_positions(psi, 43, 10000))


def test_position_samples_follow_the_cell_density(grid, hbar):
    psi = make_coherent_state(grid, hbar, -0.4, 0.2)
    cdf = position_cdf(psi)
    passed = sum(kstest(sample_positions(psi, seed, 100000), cdf).pvalue > 0.01 for seed in (1, 2, 3))
    assert passed >= 2


def test_full_range_measurement_is_identity(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.1, 0.1)
    outcome = projective_measurement(psi, SpectralObservable.full_range(grid))
    assert outcome.probabilities[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(outcome.post_states[0].amplitudes, psi.amplitudes, atol=1e-12)


def test_bin_probabilities_sum_to_norm(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.05, -0.2)
    obs = SpectralObservable(np.array([-2.0, -0.01, 0.02, 0.06, 2.0]), np.array([1.0, 2.0, 3.0, 4.0]))
    outcome = projective_measurement(psi, obs)
    assert outcome.probabilities.sum() == pytest.approx(norm(psi) ** 2, abs=1e-14)
    expected = expectation_diffop(psi, [obs.evaluate]).real
    assert outcome.expectation == pytest.approx(expected, abs=1e-10)
    for post in outcome.post_states:
        assert norm(post) == pytest.approx(1.0, abs=1e-12)


def test_symmetric_state_splits_evenly(grid, hbar):
    split = 0.5 * grid.dx
    psi = make_coherent_state(grid, hbar, split, 0.0)
    outcome = projective_measurement(psi, SpectralObservable.two_bins(grid, split))
    np.testing.assert_allclose(outcome.probabilities, [0.5, 0.5], atol=1e-12)


def test_empty_bins_have_no_post_state(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.0, 0.0)
    outcome = projective_measurement(psi, SpectralObservable.two_bins(grid, 1.5))
    assert outcome.post_states[1] is None
    with pytest.raises(InvalidParameter):
        projective_measurement(psi, SpectralObservable(np.array([-1.0, 1.0]), np.array([1.0])))


def test_sampled_measurement_collapses(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.0, 0.0)
    obs = SpectralObservable.two_bins(grid, 0.0)
    first = sample_measurement(psi, obs, seed=5)
    again = sample_measurement(psi, obs, seed=5)
    assert first.index == again.index
    assert first.value == obs.values[first.index]
    assert norm(first.post_state) == pytest.approx(1.0, abs=1e-12)
    outside = obs.bin_index(grid.x) != first.index
    assert np.all(first.post_state.amplitudes[outside] == 0)
