import math

import numpy as np
import pytest

from src.classical_dynamics import PhaseSpacePoint, PotentialSpec, SystemSpec, level_set_momentum, separatrix
from src.errors import InvalidParameter, WindowOutOfRange
from src.propagators import EvolutionRecord, evolve_dilation, evolve_exact_reference, evolve_split_operator
from src.quantum_state import GridSpec, make_coherent_state
from src.regime_classifier import ehrenfest_time
from src.semiclassical_diagnostics import (
    SweepExperiment, coherent_fit, egorov_error, hbar_sweep, landmark_schedule, localization_metrics,
    revival_detector, run_diagnostic,
)


def synthetic_record(amplitudes, dt=0.1):
    amplitudes = np.asarray(amplitudes, dtype=complex)
    times = dt * np.arange(len(amplitudes))
    return EvolutionRecord(times, np.ones(len(times)), amplitudes, np.array([]), [])


def test_landmark_schedule():
    marks = landmark_schedule(1e-3, math.sqrt(2))
    assert [f for f, _ in marks] == [0.25, 0.5, 1.0, 2.0]
    assert marks[2][1] == pytest.approx(math.log(1000) / math.sqrt(2))


@pytest.mark.parametrize("potential", [PotentialSpec.double_well(), PotentialSpec.quadratic(1.0), PotentialSpec.zero()])
def test_egorov_error_vanishes_at_start(potential, grid, hbar):
    start = PhaseSpacePoint(0.3, 0.2)
    assert egorov_error(potential, (0.0, 1.0), start, 0.0, hbar, 1e-3, grid) < 1e-9
    assert egorov_error(potential, (2.0, 3.0), start, 0.0, hbar, 1e-3, grid) < 1e-9


@pytest.mark.parametrize("t", [1.0, 5.0, 10.0])
def test_harmonic_egorov_is_exact(t, grid, hbar):
    err = egorov_error(PotentialSpec.quadratic(1.0), (0.0, 1.0), PhaseSpacePoint(1.0, 0.0), t, hbar, 1e-3, grid)
    assert err < 1e-6


def test_coherent_fit_recovers_a_coherent_state(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.3, -0.2)
    fit = coherent_fit(psi, PhaseSpacePoint(0.31, -0.21))
    assert fit.center.q == pytest.approx(0.3, abs=1e-6)
    assert fit.center.p == pytest.approx(-0.2, abs=1e-6)
    assert fit.residual < 1e-8
    assert fit.overlap == pytest.approx(1.0, abs=1e-10)
    assert fit.squeezing == pytest.approx(1.0, abs=1e-5)


def test_coherent_fit_follows_squeezed_harmonic_motion(grid, hbar):
    psi = evolve_exact_reference("harmonic", 1.0, 0.0, hbar, 1.0, grid, width=1.5)
    center = PhaseSpacePoint(math.cos(1.0), -math.sin(1.0))
    fit = coherent_fit(psi, center)
    assert fit.residual < 1e-5
    assert fit.center.distance(center) < 1e-6


def test_coherent_fit_ignores_global_phase(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.1, 0.3)
    rotated = psi.with_amplitudes(np.exp(0.7j) * psi.amplitudes)
    guess = PhaseSpacePoint(0.1, 0.3)
    assert coherent_fit(rotated, guess).overlap == pytest.approx(coherent_fit(psi, guess).overlap, abs=1e-10)


def test_localization_of_a_coherent_state(grid, hbar):
    psi = make_coherent_state(grid, hbar, 0.0, 0.0)
    metrics = localization_metrics(psi)
    assert metrics.dq == pytest.approx(math.sqrt(hbar / 2), abs=1e-4)
    assert metrics.ipr == pytest.approx(2 * math.sqrt(hbar / 2) * math.sqrt(math.pi), rel=1e-6)
    assert metrics.tube_mass is None


def test_tube_mass_around_the_separatrix(grid, hbar):
    dw = SystemSpec.double_well()
    curve = separatrix(dw, 0.0)
    start = PhaseSpacePoint(0.5, level_set_momentum(dw, 0.0, 0.5))
    psi = make_coherent_state(grid, hbar, start.q, start.p)
    wide = localization_metrics(psi, curve)
    assert 0.95 <= wide.tube_mass <= 1.0 + 1e-6
    assert wide.branch_masses[0] == pytest.approx(wide.tube_mass, abs=1e-6)
    assert wide.lobe_masses[1] == pytest.approx(wide.tube_mass, abs=1e-6)
    narrow = localization_metrics(psi, curve, radius=2 * math.sqrt(hbar))
    wider = localization_metrics(psi, curve, radius=4 * math.sqrt(hbar))
    assert narrow.tube_mass <= wider.tube_mass + 1e-12
    with pytest.raises(InvalidParameter):
        localization_metrics(psi, curve, radius=0.0)


def test_revival_detector_on_synthetic_traces():
    record = synthetic_record([1.0, 0.2, 0.1, 0.15, 0.6, 0.1, 0.05, 0.6, 0.1, 0.05, 0.02])
    summary = revival_detector(record, (0.0, 1.0))
    assert summary.peak_time == pytest.approx(0.4)
    assert summary.peak_height == pytest.approx(0.6)

    flat = revival_detector(synthetic_record(np.linspace(1.0, 0.1, 20)), (0.0, 1.9))
    assert flat.peak_time is None and flat.peak_height is None

    with pytest.raises(WindowOutOfRange):
        revival_detector(record, (0.5, 5.0))


def test_first_sample_is_never_a_revival():
    record = synthetic_record([1.0, 0.2, 0.5, 0.2, 0.1, 0.1, 0.1])
    summary = revival_detector(record, (0.0, 0.6))
    assert summary.peak_time == pytest.approx(0.2)
    assert summary.peak_height == pytest.approx(0.5)


def test_harmonic_revival():
    h = 0.1
    grid = GridSpec(-6.0, 6.0, 512)
    dt = 2 * math.pi / 1000
    record = evolve_split_operator(make_coherent_state(grid, h, 1.0, 0.0), PotentialSpec.quadratic(1.0),
                                   dt, 1008, snapshot_stride=1008)
    summary = revival_detector(record, (0.1, 2 * math.pi + 0.01))
    assert summary.peak_time == pytest.approx(2 * math.pi, abs=dt)
    assert summary.peak_height == pytest.approx(1.0, abs=1e-4)


def test_dilation_has_no_revival(hbar):
    from src.propagators import CoherentInitial, PropagatorSpec, evolve
    record = evolve(PropagatorSpec.exact_dilation(0.05), CoherentInitial(0.0, 0.0, hbar),
                    GridSpec(-16.0, 16.0, 4096), 3.0, snapshot_stride=100)
    assert revival_detector(record, (0.05, 3.0)).peak_time is None


def test_dilation_spread_is_hbar_free():
    experiment = SweepExperiment("dilation", PhaseSpacePoint(0.0, 0.0), ehrenfest_fraction=0.5)
    report = hbar_sweep(experiment, [1e-2, 1e-3, 1e-4], "spread")
    assert report.exponent == pytest.approx(0.0, abs=0.05)
    np.testing.assert_allclose(report.values, math.sqrt(0.5), atol=1e-9)
    assert list(report.hbars) == [1e-2, 1e-3, 1e-4]


def test_sweep_argument_checks():
    experiment = SweepExperiment("double-well", PhaseSpacePoint(0.5, 0.0))
    with pytest.raises(InvalidParameter):
        hbar_sweep(experiment, [1e-2, 1e-3], "spread")
    with pytest.raises(InvalidParameter) as info:
        run_diagnostic(experiment, 1e-3, "bogus")
    assert info.value.hbar == 1e-3


def test_sweep_experiment_exponents():
    assert SweepExperiment("double-well", PhaseSpacePoint(0.0, 0.0)).exponent() == pytest.approx(math.sqrt(2))
    experiment = SweepExperiment("dilation", PhaseSpacePoint(0.0, 0.0), ehrenfest_fraction=1.0)
    assert experiment.time_for(1e-2) == pytest.approx(math.log(100))


@pytest.mark.slow
def test_coherent_fit_residual_scales_like_sqrt_hbar():
    experiment = SweepExperiment("double-well", PhaseSpacePoint(0.5, 0.0), t=1.0)
    report = hbar_sweep(experiment, [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], "coherent-fit")
    assert report.exponent == pytest.approx(0.5, abs=0.15)


@pytest.mark.slow
def test_egorov_error_scales_like_hbar():
    experiment = SweepExperiment("double-well", PhaseSpacePoint(0.5, 0.0), t=1.0)
    report = hbar_sweep(experiment, [1e-2, 1e-3, 1e-4], "egorov", max_workers=2)
    assert report.exponent == pytest.approx(1.0, abs=0.2)


@pytest.mark.slow
def test_double_well_packet_follows_the_separatrix(grid, hbar):
    system = SystemSpec.double_well()
    t_e = ehrenfest_time(hbar, math.sqrt(2))
    dt = 1e-3
    n_steps = math.ceil(2 * t_e / dt)
    early, half = round(0.2 * t_e / dt), round(0.5 * t_e / dt)
    psi0 = make_coherent_state(grid, hbar, 0.0, 0.0)
    record = evolve_split_operator(psi0, system.as_potential(), dt, n_steps + 8, snapshot_stride=n_steps + 8,
                                   extra_snapshots=[early, half])

    fit = coherent_fit(record.snapshot_at(early * dt), PhaseSpacePoint(0.0, 0.0))
    assert fit.residual < 0.1

    at_half = record.snapshot_at(half * dt)
    on = localization_metrics(at_half, separatrix(system, 0.0))
    off = localization_metrics(at_half, separatrix(system, 0.2))
    assert on.dq >= 5 * math.sqrt(hbar / 2)
    assert on.tube_mass >= 0.5
    assert on.tube_mass - off.tube_mass >= 0.3

    revival = revival_detector(record, (0.5 * t_e, 2 * t_e))
    assert revival.peak_time is not None
    assert 0.5 * t_e <= revival.peak_time <= 2 * t_e
    assert revival.peak_height > revival.baseline


def test_sweep_grid_and_step_follow_hbar():
    anchored = SweepExperiment("double-well", PhaseSpacePoint(0.5, 0.0))
    assert anchored.grid_for(1e-4).n == 16384
    assert anchored.dt_for(1e-2) == 1e-3
    assert anchored.dt_for(1e-4) == pytest.approx(1e-4)
    custom = SweepExperiment("double-well", PhaseSpacePoint(0.5, 0.0), n=8192, grid_hbar=1e-2, dt=2e-3)
    assert custom.grid_for(1e-2).n == 8192
    assert custom.grid_for(1e-4).n == 131072
    assert custom.dt_for(1e-3) == pytest.approx(2e-4)


def test_ehrenfest_sweep_rejects_large_hbar():
    experiment = SweepExperiment("dilation", PhaseSpacePoint(0.0, 0.0), ehrenfest_fraction=0.5)
    with pytest.raises(InvalidParameter) as info:
        run_diagnostic(experiment, 2.0, "spread")
    assert info.value.hbar == 2.0
