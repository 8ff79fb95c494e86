"""Quantum-classical correspondence measures.

Egorov error, coherent-state fits of evolved packets, localization and
tube masses around classical level sets, revival detection in the
autocorrelation, and hbar sweeps that fit a power law to any of them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from numpy.polynomial import polynomial as poly
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from . import config
from .classical_dynamics import (
    PhaseSpacePoint,
    PotentialSpec,
    SeparatrixCurve,
    SystemSpec,
    flow_map,
    hyperbolic_analysis,
)
from .errors import (
    InvalidParameter,
    LabError,
    OptimizerStalled,
    UnsupportedSystem,
    WindowOutOfRange,
)
from .fitting import power_law_fit
from .propagators import CoherentInitial, DilationState, EvolutionRecord, evolve_split_operator, refined_step
from .quantum_state import (
    GridSpec,
    Wavefunction,
    expectation_diffop,
    grid_for_hbar,
    husimi,
    make_coherent_state,
    moments,
    norm,
    refined_grid,
)
from .regime_classifier import ehrenfest_time

logger = logging.getLogger(__name__)


def landmark_schedule(hbar: float, lam: float = 1.0,
                      fractions: Sequence[float] = config.SCHEDULE_FRACTIONS) -> List[Tuple[float, float]]:
    """(fraction, time) pairs at the given fractions of the Ehrenfest time."""
    t_e = ehrenfest_time(hbar, lam)
    return [(f, f * t_e) for f in fractions]


def _split_evolve(psi0: Wavefunction, potential: PotentialSpec, t: float, dt: float) -> Wavefunction:
    if t == 0:
        return psi0
    n_steps = max(1, math.ceil(t / dt - 1e-9))
    return evolve_split_operator(psi0, potential, t / n_steps, n_steps, snapshot_stride=n_steps).final


def egorov_error(potential: PotentialSpec, symbol: Sequence[float], start: PhaseSpacePoint, t: float,
                 hbar: float, dt: float, grid: Optional[GridSpec] = None) -> float:
    """|<psi_t, f(Q) psi_t> - f(q(t))| for the coherent state started at `start`.

    symbol holds the ascending coefficients of the polynomial f.
    """
    grid = grid or grid_for_hbar(hbar)
    psi_t = _split_evolve(make_coherent_state(grid, hbar, start.q, start.p), potential, t, dt)
    quantum = expectation_diffop(psi_t, [tuple(symbol)]).real
    classical_q = flow_map(SystemSpec.potential_well(potential), start, t, dt).q
    classical = float(poly.polyval(classical_q, np.asarray(symbol, dtype=float)))
    return abs(quantum - classical)


@dataclass(frozen=True)
class CoherentFit:
    center: PhaseSpacePoint
    width: complex
    overlap: float
    residual: float

    @property
    def squeezing(self) -> complex:
        return 1.0 / self.width


def _gaussian_family(x: np.ndarray, hbar: float, q: float, p: float, z: complex) -> np.ndarray:
    dx = x - q
    return np.exp(-z * dx * dx / (2 * hbar) + 1j * p * dx / hbar)


def _husimi_seed(psi: Wavefunction, guess: PhaseSpacePoint) -> PhaseSpacePoint:
    spread = 3.0 * math.sqrt(psi.hbar)
    p_cap = psi.grid.p_nyquist(psi.hbar)
    q_lat = guess.q + np.linspace(-spread, spread, 15)
    p_lat = np.clip(guess.p + np.linspace(-spread, spread, 15), -p_cap, p_cap)
    return PhaseSpacePoint(*husimi(psi, q_lat, p_lat).argmax())


def coherent_fit(psi: Wavefunction, guess: PhaseSpacePoint) -> CoherentFit:
    """Best Gaussian exp(-z (x-q)^2 / 2hbar + i p (x-q) / hbar) approximating psi up to phase.

    Parameters are searched in units of sqrt(hbar) around the Husimi maximum
    near `guess`, with the width seeded from the state's moments. The
    residual is the norm of the part of psi orthogonal to the fitted state.
    """
    hbar = psi.hbar
    x = psi.grid.x
    dx = psi.grid.dx
    target = psi.amplitudes / norm(psi)
    seed = _husimi_seed(psi, guess)
    m = moments(psi)
    u0 = hbar / (2 * m.dq ** 2)
    v0 = -m.cov_qp / m.dq ** 2
    scale = math.sqrt(hbar)
    origin = np.array([seed.q, seed.p, math.log(u0), v0])
    steps = np.array([scale, scale, 1.0, 1.0])

    def unpack(theta):
        q, p, log_u, v = origin + steps * theta
        return q, p, complex(math.exp(min(log_u, 50.0)), v)

    def mismatch(theta):
        q, p, z = unpack(theta)
        g = _gaussian_family(x, hbar, q, p, z)
        g_norm = math.sqrt(np.vdot(g, g).real * dx)
        if not g_norm > 0 or not math.isfinite(g_norm):
            return 2.0, 0j
        g = g / g_norm
        o = np.vdot(g, target) * dx
        rest = target - o * g
        return np.vdot(rest, rest).real * dx, o

    result = minimize(
        lambda th: mismatch(th)[0],
        np.zeros(4),
        method="Powell",
        options={"xtol": config.FIT_XTOL, "ftol": 1e-14, "maxiter": config.FIT_MAX_SWEEPS, "maxfev": 200_000},
    )
    f_best, o_best = mismatch(result.x)
    q, p, z = unpack(result.x)
    fit = CoherentFit(PhaseSpacePoint(q, p), 1.0 / z, min(abs(o_best), 1.0), math.sqrt(max(f_best, 0.0)))

    h = 1e-6
    grad = np.array([
        (mismatch(result.x + h * e)[0] - mismatch(result.x - h * e)[0]) / (2 * h) for e in np.eye(4)
    ])
    if not result.success or np.max(np.abs(grad)) > config.FIT_GRADIENT_TOL:
        raise OptimizerStalled(
            f"coherent fit stopped at residual {fit.residual:.3g} with gradient {np.max(np.abs(grad)):.3g} "
            f"({result.message})",
            best=fit,
            hbar=hbar,
        )
    logger.debug("coherent fit: center (%.6g, %.6g), residual %.3g, %d evaluations",
                 q, p, fit.residual, result.nfev)
    return fit


@dataclass(frozen=True)
class LocalizationMetrics:
    dq: float
    ipr: float
    tube_mass: Optional[float] = None
    branch_masses: Optional[Tuple[float, float]] = None
    lobe_masses: Optional[Tuple[float, float]] = None


def _densify(points: np.ndarray, spacing: float) -> np.ndarray:
    seg = np.diff(points, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    pieces = [points[:1]]
    for start, step, length in zip(points[:-1], seg, lengths):
        k = max(1, int(math.ceil(length / spacing)))
        frac = np.arange(1, k + 1)[:, None] / k
        pieces.append(start + frac * step)
    return np.vstack(pieces)


def _anchored_lattice(lo: float, hi: float, h: float) -> np.ndarray:
    return h * np.arange(math.floor(lo / h), math.ceil(hi / h) + 1)


def localization_metrics(psi: Wavefunction, curve: Optional[SeparatrixCurve] = None,
                         radius: Optional[float] = None) -> LocalizationMetrics:
    """Spread, inverse participation ratio and, given a curve, Husimi tube masses.

    The tube is every phase-space point within `radius` (default 5 sqrt(hbar))
    of the curve. Husimi nodes sit on a lattice of spacing sqrt(hbar)/4
    anchored at the origin, so a wider tube only adds nodes.
    """
    dq = moments(psi).dq
    n2 = norm(psi) ** 2
    ipr = 1.0 / (float(np.sum(psi.density ** 2)) * psi.grid.dx / n2 ** 2)
    if curve is None:
        return LocalizationMetrics(dq, ipr)

    hbar = psi.hbar
    radius = config.TUBE_RADIUS_FACTOR * math.sqrt(hbar) if radius is None else radius
    if not radius > 0:
        raise InvalidParameter("tube radius must be positive")
    h = config.HUSIMI_SPACING_FACTOR * math.sqrt(hbar)
    q_lo, q_hi, p_lo, p_hi = curve.bounding_box()
    q_lat = _anchored_lattice(q_lo - radius, q_hi + radius, h)
    p_lat = _anchored_lattice(p_lo - radius, p_hi + radius, h)
    density = husimi(psi, q_lat, p_lat)

    tree = cKDTree(np.vstack([_densify(b, 0.25 * h) for b in curve.branches]))
    qq, pp = np.meshgrid(q_lat, p_lat, indexing="ij")
    nodes = np.column_stack([qq.ravel(), pp.ravel()])
    dist, _ = tree.query(nodes, distance_upper_bound=radius)
    inside = (dist <= radius).reshape(qq.shape)
    cell = density.values * h * h
    tube = float(cell[inside].sum())
    branch = (float(cell[inside & (pp >= 0)].sum()), float(cell[inside & (pp < 0)].sum()))
    lobe = (float(cell[inside & (qq < 0)].sum()), float(cell[inside & (qq >= 0)].sum()))
    logger.debug("tube mass %.4f within r=%.3g on a %dx%d lattice", tube, radius, q_lat.size, p_lat.size)
    return LocalizationMetrics(dq, ipr, tube, branch, lobe)


@dataclass(frozen=True)
class RevivalSummary:
    peak_time: Optional[float]
    peak_height: Optional[float]
    baseline: float


def revival_detector(record: EvolutionRecord, window: Tuple[float, float]) -> RevivalSummary:
    """Largest strict local maximum of |<psi0, psi_t>| inside the window.

    A peak must clear the window median by REVIVAL_THRESHOLD; the first
    record sample is never a peak and candidates need both neighbours.
    """
    t_a, t_b = window
    times = np.asarray(record.times)
    if not t_a < t_b or t_a < times[0] - 1e-12 or t_b > times[-1] + 1e-12:
        raise WindowOutOfRange(f"window [{t_a}, {t_b}] is not inside the record [{times[0]}, {times[-1]}]")
    amp = np.abs(record.autocorrelation)
    idx = np.nonzero((times >= t_a) & (times <= t_b))[0]
    if idx.size == 0:
        raise WindowOutOfRange(f"window [{t_a}, {t_b}] holds no samples")
    baseline = float(np.median(amp[idx]))
    inner = idx[(idx >= 1) & (idx <= len(amp) - 2)]
    peaks = inner[(amp[inner] > amp[inner - 1]) & (amp[inner] > amp[inner + 1])
                  & (amp[inner] > baseline + config.REVIVAL_THRESHOLD)]
    if peaks.size == 0:
        return RevivalSummary(None, None, baseline)
    best = peaks[int(np.argmax(amp[peaks]))]
    return RevivalSummary(float(times[best]), float(amp[best]), baseline)


@dataclass(frozen=True)
class SweepExperiment:
    """One point of an hbar sweep: a scenario evolved to a fixed or Ehrenfest-scaled time.

    When ehrenfest_fraction is set the time is that fraction of
    log(1/hbar)/lambda, with lambda taken from the scenario's saddle.
    Grids follow n points sized for grid_hbar (the default anchor when n
    is None) and dt shrinks like hbar below grid_hbar.
    """

    scenario: str
    start: PhaseSpacePoint
    t: float = 1.0
    dt: float = 1e-3
    ehrenfest_fraction: Optional[float] = None
    symbol: Tuple[float, ...] = (0.0, 1.0)
    omega: float = 1.0
    x_min: float = -2.0
    x_max: float = 2.0
    n: Optional[int] = None
    grid_hbar: float = config.GRID_ANCHOR_HBAR

    def grid_for(self, hbar: float) -> GridSpec:
        if self.n is None:
            return grid_for_hbar(hbar, self.x_min, self.x_max)
        return refined_grid(self.x_min, self.x_max, self.n, self.grid_hbar, hbar)

    def dt_for(self, hbar: float) -> float:
        return refined_step(self.dt, self.grid_hbar, hbar)

    def system(self) -> SystemSpec:
        if self.scenario == "double-well":
            return SystemSpec.double_well()
        if self.scenario == "dilation":
            return SystemSpec.dilation()
        if self.scenario == "harmonic":
            return SystemSpec.harmonic(self.omega)
        if self.scenario == "free":
            return SystemSpec.free()
        raise InvalidParameter(f"unknown scenario '{self.scenario}'")

    def exponent(self) -> float:
        if self.scenario == "dilation":
            return 1.0
        return hyperbolic_analysis(self.system(), PhaseSpacePoint(0.0, 0.0)).exponent

    def time_for(self, hbar: float) -> float:
        if self.ehrenfest_fraction is None:
            return self.t
        return self.ehrenfest_fraction * ehrenfest_time(hbar, self.exponent())


@dataclass(frozen=True, eq=False)
class ScalingReport:
    hbars: np.ndarray
    values: np.ndarray
    exponent: float
    residual: float


def _evolved_state(experiment: SweepExperiment, hbar: float, t: float) -> Wavefunction:
    if experiment.scenario == "dilation":
        base = experiment.grid_for(hbar)
        state = DilationState(CoherentInitial(experiment.start.q, experiment.start.p, hbar)).evolve(t)
        return state.sample(state.comoving_grid(base))
    grid = experiment.grid_for(hbar)
    psi0 = make_coherent_state(grid, hbar, experiment.start.q, experiment.start.p)
    return _split_evolve(psi0, experiment.system().as_potential(), t, experiment.dt_for(hbar))


def run_diagnostic(experiment: SweepExperiment, hbar: float, diagnostic: str) -> float:
    """Scalar diagnostic for one hbar; errors come back annotated with that hbar."""
    try:
        t = experiment.time_for(hbar)
        if diagnostic == "egorov":
            if experiment.scenario == "dilation":
                raise UnsupportedSystem("egorov sweeps need a kinetic-plus-potential system")
            return egorov_error(experiment.system().as_potential(), experiment.symbol, experiment.start,
                                t, hbar, experiment.dt_for(hbar), experiment.grid_for(hbar))
        psi = _evolved_state(experiment, hbar, t)
        if diagnostic == "spread":
            return moments(psi).dq
        if diagnostic == "coherent-fit":
            system = experiment.system()
            if system.separable:
                guess = flow_map(system, experiment.start, t, experiment.dt_for(hbar))
            else:
                guess = PhaseSpacePoint(experiment.start.q * math.exp(t), experiment.start.p * math.exp(-t))
            return coherent_fit(psi, guess).residual
        raise InvalidParameter(f"unknown sweep diagnostic '{diagnostic}'")
    except LabError as exc:
        exc.hbar = hbar
        raise


def hbar_sweep(experiment: SweepExperiment, hbars: Sequence[float], diagnostic: str,
               max_workers: int = 1) -> ScalingReport:
    """Run the diagnostic for every hbar and fit value ~ C hbar^exponent."""
    hbars = sorted({float(h) for h in hbars}, reverse=True)
    if len(hbars) < 3:
        raise InvalidParameter("an hbar sweep needs at least three distinct values")
    if min(hbars) <= 0:
        raise InvalidParameter("hbar values must be positive")
    if math.log10(hbars[0] / hbars[-1]) < 2 - 1e-9:
        logger.warning("hbar values span less than two decades; the fitted exponent is poorly constrained")
    if max_workers > 1:
        values = Parallel(n_jobs=max_workers)(delayed(run_diagnostic)(experiment, h, diagnostic) for h in hbars)
    else:
        values = [run_diagnostic(experiment, h, diagnostic) for h in hbars]
    for h, v in zip(hbars, values):
        logger.info("hbar=%.3g %s=%.6g", h, diagnostic, v)
    fit = power_law_fit(hbars, values)
    return ScalingReport(np.array(hbars), np.array(values, dtype=float), fit.slope, fit.residual)
