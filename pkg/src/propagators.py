"""Schrodinger evolution: split-operator stepping and closed-form references.

evolve_split_operator handles H = -hbar^2/2 d^2/dx^2 + V(x) with Strang
splitting (half potential phase, kinetic phase in Fourier space, half
potential phase). The dilation, harmonic and free propagators are exact.
"""
from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import fft

from . import config
from .classical_dynamics import PotentialSpec
from .errors import InvalidParameter, MassEscape, NonFinite, StabilityWarning
from .quantum_state import (
    EnvelopeSpec,
    GridSpec,
    Wavefunction,
    boundary_mass,
    coherent_amplitude,
    make_coherent_state,
)

logger = logging.getLogger(__name__)

PROPAGATOR_KINDS = ("split-operator", "exact-dilation", "exact-harmonic", "exact-free")


@dataclass(frozen=True)
class PropagatorSpec:
    """How to evolve. dt is the split-operator step, or the sampling step of an exact record."""

    kind: str
    dt: Optional[float] = None
    omega: Optional[float] = None

    def __post_init__(self):
        if self.kind not in PROPAGATOR_KINDS:
            raise InvalidParameter(f"unknown propagator kind '{self.kind}'")
        if self.kind == "split-operator" and not (self.dt is not None and self.dt > 0):
            raise InvalidParameter("split-operator propagation requires dt > 0")
        if self.dt is not None and not self.dt > 0:
            raise InvalidParameter("dt must be positive")
        if self.kind == "exact-harmonic" and not (self.omega is not None and self.omega > 0):
            raise InvalidParameter("exact harmonic propagation requires omega > 0")

    @classmethod
    def split_operator(cls, dt: float) -> "PropagatorSpec":
        return cls("split-operator", dt=dt)

    @classmethod
    def exact_dilation(cls, dt: Optional[float] = None) -> "PropagatorSpec":
        return cls("exact-dilation", dt=dt)

    @classmethod
    def exact_harmonic(cls, omega: float = 1.0, dt: Optional[float] = None) -> "PropagatorSpec":
        return cls("exact-harmonic", dt=dt, omega=omega)

    @classmethod
    def exact_free(cls, dt: Optional[float] = None) -> "PropagatorSpec":
        return cls("exact-free", dt=dt)


@dataclass(frozen=True)
class CoherentInitial:
    """Analytic initial data: envelope centred at (q, p)."""

    q: float
    p: float
    hbar: float
    envelope: EnvelopeSpec = EnvelopeSpec()

    def sample(self, grid: GridSpec) -> Wavefunction:
        return make_coherent_state(grid, self.hbar, self.q, self.p, self.envelope)


@dataclass(frozen=True, eq=False)
class EvolutionRecord:
    """Dense per-step norms and autocorrelation <psi0, psi_t>, plus strided snapshots."""

    times: np.ndarray
    norms: np.ndarray
    autocorrelation: np.ndarray
    snapshot_times: np.ndarray
    snapshots: List[Wavefunction]

    def __post_init__(self):
        if not (len(self.times) == len(self.norms) == len(self.autocorrelation)):
            raise InvalidParameter("times, norms and autocorrelation must have equal length")
        if len(self.snapshot_times) != len(self.snapshots):
            raise InvalidParameter("one snapshot time per snapshot")
        if len(self.times) == 0 or self.times[0] != 0.0:
            raise InvalidParameter("a record starts at t = 0")

    @property
    def final(self) -> Wavefunction:
        return self.snapshots[-1]

    def snapshot_at(self, t: float) -> Wavefunction:
        """Snapshot taken closest to t."""
        return self.snapshots[int(np.argmin(np.abs(self.snapshot_times - t)))]


def _support(weights: np.ndarray, coords: np.ndarray) -> np.ndarray:
    return coords[weights > config.SUPPORT_THRESHOLD * weights.max()]


def stability_number(psi: Wavefunction, potential: PotentialSpec, dt: float) -> float:
    """dt (max|V| + p_max^2 / 2) / hbar over the state's position and momentum support."""
    xs = _support(psi.density, psi.grid.x)
    rho_p = np.abs(fft.fft(psi.amplitudes)) ** 2
    ps = _support(rho_p, psi.hbar * psi.grid.k)
    v_max = float(np.max(np.abs(potential.value(xs))))
    p_max = float(np.max(np.abs(ps)))
    return dt * (v_max + 0.5 * p_max ** 2) / psi.hbar


def refined_step(dt: float, design_hbar: float, hbar: float) -> float:
    """dt shrunk in proportion to hbar below design_hbar; the stability number scales like dt / hbar."""
    return dt * min(1.0, hbar / design_hbar)


def _check_contained(psi: Wavefunction, t: float):
    edge = boundary_mass(psi)
    if edge > config.DRIFT_BOUNDARY_TOL:
        raise MassEscape(
            f"boundary mass {edge:.3g} at t={t:.6g} exceeds {config.DRIFT_BOUNDARY_TOL}; widen the grid",
            edge,
            psi.hbar,
        )


def evolve_split_operator(psi0: Wavefunction, potential: PotentialSpec, dt: float, n_steps: int,
                          snapshot_stride: int = 1, extra_snapshots: Iterable[int] = ()) -> EvolutionRecord:
    """Strang-split evolution for n_steps of size dt.

    Snapshots are kept at t = 0, every snapshot_stride steps, at the steps
    listed in extra_snapshots and at the last step.
    """
    if not dt > 0:
        raise InvalidParameter("dt must be positive")
    if n_steps < 1 or snapshot_stride < 1:
        raise InvalidParameter("n_steps and snapshot_stride must be positive")
    grid, hbar = psi0.grid, psi0.hbar
    _check_contained(psi0, 0.0)
    sigma = stability_number(psi0, potential, dt)
    if sigma > config.STABILITY_LIMIT:
        msg = f"stability number {sigma:.3g} exceeds {config.STABILITY_LIMIT}; reduce dt"
        logger.warning(msg)
        warnings.warn(msg, StabilityWarning)

    half_v = np.exp(-0.5j * dt * potential.value(grid.x) / hbar)
    kinetic = np.exp(-0.5j * dt * hbar * grid.k ** 2)
    extra = set(int(s) for s in extra_snapshots)

    initial = psi0.amplitudes
    psi = initial.copy()
    dx = grid.dx
    times = dt * np.arange(n_steps + 1)
    norms = np.empty(n_steps + 1)
    autocorr = np.empty(n_steps + 1, dtype=complex)
    norms[0] = math.sqrt(np.vdot(psi, psi).real * dx)
    autocorr[0] = np.vdot(initial, psi) * dx
    snap_times = [0.0]
    snaps = [psi0]

    for step in range(1, n_steps + 1):
        psi = half_v * fft.ifft(kinetic * fft.fft(half_v * psi))
        norm2 = np.vdot(psi, psi).real * dx
        if not math.isfinite(norm2):
            raise NonFinite(f"non-finite amplitudes at step {step} (t={times[step]:.6g})", hbar=hbar)
        norms[step] = math.sqrt(norm2)
        autocorr[step] = np.vdot(initial, psi) * dx
        if step % snapshot_stride == 0 or step == n_steps or step in extra:
            state = Wavefunction(grid, hbar, psi)
            _check_contained(state, times[step])
            snap_times.append(times[step])
            snaps.append(state)

    logger.debug("split-operator: %d steps, norm drift %.3g", n_steps, abs(norms[-1] - norms[0]))
    return EvolutionRecord(times, norms, autocorr, np.array(snap_times), snaps)


@dataclass(frozen=True)
class DilationState:
    """psi_t(x) = e^(-t/2) psi_0(e^(-t) x) for the flow of h = qp, kept in closed form."""

    initial: CoherentInitial
    t: float = 0.0

    def evolve(self, s: float) -> "DilationState":
        return DilationState(self.initial, self.t + s)

    def evaluate(self, x) -> np.ndarray:
        init = self.initial
        x = np.asarray(x, dtype=float)
        scale = math.exp(-self.t)
        return math.exp(-0.5 * self.t) * coherent_amplitude(scale * x, init.hbar, init.q, init.p, init.envelope)

    def comoving_grid(self, base: GridSpec) -> GridSpec:
        """base stretched by e^t, which keeps the state's share of the window fixed."""
        return base.scaled(math.exp(self.t))

    def sample(self, grid: GridSpec, tol: float = config.CONSTRUCTION_BOUNDARY_TOL) -> Wavefunction:
        psi = Wavefunction(grid, self.initial.hbar, self.evaluate(grid.x))
        edge = boundary_mass(psi)
        if edge > tol:
            raise MassEscape(
                f"dilated state at t={self.t:.6g} leaves {edge:.3g} of its mass at the edge of "
                f"[{grid.x_min}, {grid.x_max}]",
                edge,
                self.initial.hbar,
            )
        return psi


def evolve_dilation(q0: float, p0: float, envelope: Optional[EnvelopeSpec], hbar: float, t: float,
                    grid: GridSpec) -> Wavefunction:
    initial = CoherentInitial(q0, p0, hbar, envelope or EnvelopeSpec.standard())
    return DilationState(initial).evolve(t).sample(grid)


def _gaussian_reference(x: np.ndarray, q0: float, p0: float, hbar: float, t: float,
                        omega: float, width: float) -> np.ndarray:
    """Exact evolution of a Gaussian of width s under p^2/2 + omega^2 x^2 / 2 (omega = 0 is free)."""
    alpha0 = 1j / width ** 2
    if omega == 0:
        qz = 1.0 + alpha0 * t
        pz = alpha0
        qt, pt = q0 + p0 * t, p0
        arg = math.atan2(qz.imag, qz.real)
    else:
        c, s = math.cos(omega * t), math.sin(omega * t)
        qz = c + alpha0 / omega * s
        pz = -omega * s + alpha0 * c
        qt = q0 * c + p0 / omega * s
        pt = p0 * c - q0 * omega * s
        principal = math.atan2(qz.imag, qz.real)
        arg = principal + 2 * math.pi * round((omega * t - principal) / (2 * math.pi))
    alpha = pz / qz
    action = 0.5 * (pt * qt - p0 * q0)
    prefactor = (math.pi * hbar * width ** 2) ** -0.25 * abs(qz) ** -0.5 * cmath.exp(-0.5j * arg)
    dx = x - qt
    return prefactor * np.exp(1j / hbar * (0.5 * alpha * dx ** 2 + pt * dx + p0 * q0 + action))


def evolve_exact_reference(kind: str, q0: float, p0: float, hbar: float, t: float, grid: GridSpec,
                           omega: float = 1.0, width: float = 1.0) -> Wavefunction:
    """Closed-form evolved Gaussian for the harmonic ('harmonic') or free ('free') Hamiltonian."""
    if kind == "harmonic":
        if not omega > 0:
            raise InvalidParameter("omega must be positive")
        amps = _gaussian_reference(grid.x, q0, p0, hbar, t, omega, width)
    elif kind == "free":
        amps = _gaussian_reference(grid.x, q0, p0, hbar, t, 0.0, width)
    else:
        raise InvalidParameter(f"no exact reference for '{kind}'")
    psi = Wavefunction(grid, hbar, amps)
    _check_contained(psi, t)
    return psi


def _sample_times(t_final: float, dt: float) -> np.ndarray:
    n = max(1, math.ceil(t_final / dt - 1e-9))
    return np.linspace(0.0, t_final, n + 1)


def _analytic_record(states, times: np.ndarray, base: Wavefunction, snapshot_stride: int,
                     grid_for) -> EvolutionRecord:
    norms = np.empty(len(times))
    autocorr = np.empty(len(times), dtype=complex)
    snap_times, snaps = [], []
    dx = base.grid.dx
    for i, (t, (evaluate, state)) in enumerate(zip(times, states)):
        on_base = evaluate(base.grid.x)
        autocorr[i] = np.vdot(base.amplitudes, on_base) * dx
        sampled = grid_for(t, state)
        norms[i] = math.sqrt(float(np.sum(sampled.density)) * sampled.grid.dx)
        if i % snapshot_stride == 0 or i == len(times) - 1:
            snap_times.append(t)
            snaps.append(sampled)
    return EvolutionRecord(times, norms, autocorr, np.array(snap_times), snaps)


def evolve(spec: PropagatorSpec, initial: CoherentInitial, grid: GridSpec, t_final: float,
           snapshot_stride: int = 1, potential: Optional[PotentialSpec] = None,
           extra_snapshots: Sequence[int] = ()) -> EvolutionRecord:
    """Evolve analytic initial data to t_final with any propagator kind.

    Exact dilation snapshots live on the comoving grid; every other kind
    samples on `grid`.
    """
    if not t_final > 0:
        raise InvalidParameter("t_final must be positive")
    if spec.kind == "split-operator":
        if potential is None:
            raise InvalidParameter("split-operator evolution needs a potential")
        n_steps = max(1, math.ceil(t_final / spec.dt - 1e-9))
        return evolve_split_operator(initial.sample(grid), potential, t_final / n_steps, n_steps,
                                     snapshot_stride, extra_snapshots)

    dt = spec.dt or t_final / 1000
    times = _sample_times(t_final, dt)
    base = initial.sample(grid)
    if spec.kind == "exact-dilation":
        start = DilationState(initial)
        states = [start.evolve(t) for t in times]

        def grid_for(t, state):
            return state.sample(state.comoving_grid(grid))

        return _analytic_record([(s.evaluate, s) for s in states], times, base, snapshot_stride, grid_for)

    omega = spec.omega if spec.kind == "exact-harmonic" else 0.0
    width = initial.envelope.gaussian_width
    if width is None:
        raise InvalidParameter("exact harmonic and free references need a Gaussian envelope")

    def state_at(t):
        return lambda x: _gaussian_reference(np.asarray(x), initial.q, initial.p, initial.hbar, t, omega, width)

    def grid_for(t, state):
        psi = Wavefunction(grid, initial.hbar, state(grid.x))
        _check_contained(psi, t)
        return psi

    evolvers = [state_at(t) for t in times]
    return _analytic_record([(f, f) for f in evolvers], times, base, snapshot_stride, grid_for)
