import math

import numpy as np
import pytest

from src.classical_dynamics import PotentialSpec
from src.errors import InvalidParameter, MassEscape, StabilityWarning
from src.propagators import (
    CoherentInitial, DilationState, PropagatorSpec, evolve, evolve_dilation, evolve_exact_reference,
    evolve_split_operator,
)
from src.quantum_state import (
    GridSpec, expectation_diffop, inner_product, make_coherent_state, moments, norm,
)


def l2_distance(a, b):
    return norm(a.with_amplitudes(a.amplitudes - b.amplitudes))


def energy(psi, potential):
    return expectation_diffop(psi, [potential.coefficients, 0.0, 0.5]).real


def test_split_operator_conserves_norm_and_energy(grid, hbar):
    dw = PotentialSpec.double_well()
    psi0 = make_coherent_state(grid, hbar, 0.0, 0.0)
    record = evolve_split_operator(psi0, dw, 1e-3, 10000, snapshot_stride=500)
    assert np.max(np.abs(record.norms - 1.0)) <= 1e-10
    e0 = energy(psi0, dw)
    early = [s for t, s in zip(record.snapshot_times, record.snapshots) if t <= 1.0 + 1e-12]
    assert max(abs(energy(s, dw) - e0) for s in early) <= 1e-8
    assert max(abs(energy(s, dw) - e0) for s in record.snapshots) <= 3e-8


def test_record_layout(grid, hbar):
    psi0 = make_coherent_state(grid, hbar, 0.0, 0.5)
    record = evolve_split_operator(psi0, PotentialSpec.zero(), 1e-3, 250, snapshot_stride=100, extra_snapshots=[42])
    assert len(record.times) == len(record.norms) == len(record.autocorrelation) == 251
    np.testing.assert_allclose(record.snapshot_times, [0.0, 0.042, 0.1, 0.2, 0.25])
    assert record.autocorrelation[0] == pytest.approx(1.0, abs=1e-12)
    assert record.snapshot_at(0.19) is record.snapshots[3]


def test_split_steps_compose(grid, hbar):
    dw = PotentialSpec.double_well()
    psi0 = make_coherent_state(grid, hbar, 0.2, 0.1)
    whole = evolve_split_operator(psi0, dw, 1e-3, 500, snapshot_stride=500).final
    half = evolve_split_operator(psi0, dw, 1e-3, 300, snapshot_stride=300).final
    rest = evolve_split_operator(half, dw, 1e-3, 200, snapshot_stride=200).final
    assert l2_distance(whole, rest) < 1e-9


def test_free_split_operator_matches_closed_form(grid, hbar):
    psi0 = make_coherent_state(grid, hbar, -0.5, 0.5)
    final = evolve_split_operator(psi0, PotentialSpec.zero(), 1e-3, 1000, snapshot_stride=1000).final
    exact = evolve_exact_reference("free", -0.5, 0.5, hbar, 1.0, grid)
    assert l2_distance(final, exact) < 1e-6


def test_harmonic_split_operator_converges_at_second_order():
    h = 0.1
    grid = GridSpec(-6.0, 6.0, 512)
    harmonic = PotentialSpec.quadratic(1.0)
    psi0 = make_coherent_state(grid, h, 1.0, 0.0)
    exact = evolve_exact_reference("harmonic", 1.0, 0.0, h, 1.0, grid)

    def error(dt):
        n = round(1.0 / dt)
        return l2_distance(evolve_split_operator(psi0, harmonic, dt, n, snapshot_stride=n).final, exact)

    coarse, fine = error(1e-2), error(5e-3)
    assert 3.2 <= coarse / fine <= 4.8
    assert error(1e-3) < 1e-6


def test_harmonic_period_returns_to_start():
    h = 0.1
    grid = GridSpec(-6.0, 6.0, 512)
    psi0 = make_coherent_state(grid, h, 1.0, 0.0)
    record = evolve_split_operator(psi0, PotentialSpec.quadratic(1.0), 2 * math.pi / 6000, 6000, snapshot_stride=6000)
    assert abs(record.autocorrelation[-1]) == pytest.approx(1.0, abs=1e-5)


def test_exact_harmonic_quarter_period():
    h = 0.01
    grid = GridSpec(-3.0, 3.0, 1024)
    psi = evolve_exact_reference("harmonic", 1.0, 0.0, h, math.pi / 2, grid)
    m = moments(psi)
    assert m.mean_q == pytest.approx(0.0, abs=1e-10)
    assert m.mean_p == pytest.approx(-1.0, abs=1e-10)
    assert norm(psi) == pytest.approx(1.0, abs=1e-10)


def test_exact_free_spreading():
    h = 0.01
    grid = GridSpec(-4.0, 8.0, 2048)
    psi = evolve_exact_reference("free", 0.0, 1.0, h, 2.0, grid)
    m = moments(psi)
    assert m.mean_q == pytest.approx(2.0, abs=1e-10)
    assert m.mean_p == pytest.approx(1.0, abs=1e-10)
    assert m.dq ** 2 == pytest.approx(0.5 * h * (1 + 2.0 ** 2), abs=1e-9)


def test_exact_reference_at_zero_is_the_initial_state(grid, hbar):
    start = make_coherent_state(grid, hbar, 0.3, -0.4)
    for kind in ("harmonic", "free"):
        ref = evolve_exact_reference(kind, 0.3, -0.4, hbar, 0.0, grid)
        np.testing.assert_allclose(ref.amplitudes, start.amplitudes, atol=1e-10)
    with pytest.raises(InvalidParameter):
        evolve_exact_reference("dilation", 0.0, 0.0, hbar, 1.0, grid)


@pytest.mark.parametrize("h", [1e-2, 1e-3, 1e-4])
def test_dilation_at_half_ehrenfest_time_is_hbar_free(h):
    grid = GridSpec(-10.0, 10.0, 1024)
    psi = evolve_dilation(0.0, 0.0, None, h, 0.5 * math.log(1 / h), grid)
    expected = math.pi ** -0.25 * np.exp(-0.5 * grid.x ** 2)
    np.testing.assert_allclose(psi.amplitudes, expected, atol=1e-12)


@pytest.mark.parametrize("h", [1e-2, 1e-3])
def test_dilation_at_ehrenfest_time(h):
    half_width = 100.0 / math.sqrt(h)
    grid = GridSpec(-half_width, half_width, 1024)
    psi = evolve_dilation(0.0, 0.0, None, h, math.log(1 / h), grid)
    expected = (h / math.pi) ** 0.25 * np.exp(-0.5 * h * grid.x ** 2)
    np.testing.assert_allclose(psi.amplitudes, expected, atol=1e-12)


def test_dilation_is_a_group(hbar):
    state = DilationState(CoherentInitial(0.1, 0.2, hbar))
    x = np.linspace(-3, 3, 101)
    np.testing.assert_array_equal(state.evolve(0.7).evolve(1.1).evaluate(x), state.evolve(0.7 + 1.1).evaluate(x))


def test_dilation_autocorrelation(hbar):
    grid = GridSpec(-16.0, 16.0, 4096)
    record = evolve(PropagatorSpec.exact_dilation(0.05), CoherentInitial(0.0, 0.0, hbar), grid, 3.0,
                    snapshot_stride=20)
    expected = np.sqrt(1.0 / np.cosh(record.times))
    np.testing.assert_allclose(np.abs(record.autocorrelation), expected, atol=1e-8)
    np.testing.assert_allclose(record.norms, 1.0, atol=1e-8)
    assert record.final.grid.x_max == pytest.approx(16.0 * math.exp(3.0))


def test_dilated_state_outgrowing_the_grid(hbar):
    with pytest.raises(MassEscape):
        evolve_dilation(0.0, 0.0, None, hbar, 3.0, GridSpec(-2.0, 2.0, 4096))


def test_evolve_dispatches_exact_kinds(hbar):
    grid = GridSpec(-2.0, 2.0, 4096)
    record = evolve(PropagatorSpec.exact_harmonic(dt=0.01), CoherentInitial(1.0, 0.0, hbar), grid,
                    math.pi / 2, snapshot_stride=1000)
    m = moments(record.final)
    assert m.mean_q == pytest.approx(0.0, abs=1e-9)
    assert m.mean_p == pytest.approx(-1.0, abs=1e-9)
    split = evolve(PropagatorSpec.split_operator(1e-3), CoherentInitial(1.0, 0.0, hbar), grid, math.pi / 2,
                   snapshot_stride=10000, potential=PotentialSpec.quadratic(1.0))
    assert abs(inner_product(split.final, record.final)) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(InvalidParameter):
        evolve(PropagatorSpec.split_operator(1e-3), CoherentInitial(0.0, 0.0, hbar), grid, 1.0)


def test_large_step_warns(grid, hbar):
    psi0 = make_coherent_state(grid, hbar, 0.0, 0.0)
    with pytest.warns(StabilityWarning):
        evolve_split_operator(psi0, PotentialSpec.double_well(), 1.0, 1)


def test_escaping_packet_raises(grid, hbar):
    psi0 = make_coherent_state(grid, hbar, 1.0, 1.0)
    with pytest.raises(MassEscape) as info:
        evolve_split_operator(psi0, PotentialSpec.zero(), 1e-3, 1000, snapshot_stride=100)
    assert info.value.hbar == hbar


def test_exact_dilation_record_snapshots_on_comoving_grid(grid):
    h = 1e-3
    t_half = 0.5 * math.log(1 / h)
    record = evolve(PropagatorSpec.exact_dilation(t_half / 10), CoherentInitial(0.0, 0.0, h), grid, t_half,
                    snapshot_stride=5)
    np.testing.assert_allclose(record.snapshot_times, record.times[[0, 5, 10]])
    final = record.final
    assert final.grid.x_max == pytest.approx(2.0 * math.exp(t_half))
    expected = math.pi ** -0.25 * np.exp(-0.5 * final.grid.x ** 2)
    np.testing.assert_allclose(final.amplitudes, expected, atol=1e-12)
    assert moments(final).dq == pytest.approx(1 / math.sqrt(2), abs=1e-9)
