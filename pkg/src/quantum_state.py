"""Wavefunctions on a periodic uniform grid and the operations on them.

Positions are grid samples x_j = x_min + j dx (x_max excluded); momenta are
hbar * k with k the discrete Fourier wavenumbers. Integrals are rectangle-rule
sums times dx, spectrally accurate for smooth states that vanish at the edges.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import hermite as herm
from numpy.polynomial import polynomial as poly
from scipy import fft
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from . import config
from .errors import (
    GridMismatch,
    InvalidParameter,
    MassEscape,
    MomentumOutOfBand,
    OrderUnsupported,
)

logger = logging.getLogger(__name__)

ENVELOPE_KINDS = ("standard", "scaled", "custom", "hermite")
HUSIMI_CHUNK_ELEMENTS = 4_000_000


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, math.ceil(math.log2(max(n, 1))))


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)) or not self.x_min < self.x_max:
            raise InvalidParameter(f"grid needs x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n) != self.n or self.n < 64 or not _is_power_of_two(int(self.n)):
            raise InvalidParameter(f"grid size must be a power of two >= 64, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.width / self.n

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n)
        x.setflags(write=False)
        return x

    @cached_property
    def k(self) -> np.ndarray:
        k = 2.0 * np.pi * fft.fftfreq(self.n, d=self.dx)
        k.setflags(write=False)
        return k

    @property
    def boundary_points(self) -> int:
        """Points on each side counted as the boundary region."""
        return max(1, int(math.ceil(config.BOUNDARY_FRACTION * self.n)))

    def p_nyquist(self, hbar: float) -> float:
        return math.pi * hbar / self.dx

    def scaled(self, factor: float) -> "GridSpec":
        """Same point count on [factor * x_min, factor * x_max]."""
        return GridSpec(self.x_min * factor, self.x_max * factor, self.n)


def grid_for_hbar(hbar: float, x_min: float = -2.0, x_max: float = 2.0) -> GridSpec:
    """Grid whose spacing keeps up with the sqrt(hbar) packet width.

    Anchored at n = 4096 points on a width-4 window for hbar = 1e-3;
    n grows like width / sqrt(hbar), rounded up to a power of two.
    """
    if not hbar > 0:
        raise InvalidParameter("hbar must be positive")
    width = x_max - x_min
    needed = config.GRID_ANCHOR_N * (width / config.GRID_ANCHOR_WIDTH) * math.sqrt(config.GRID_ANCHOR_HBAR / hbar)
    return GridSpec(x_min, x_max, max(64, next_power_of_two(math.ceil(needed - 1e-9))))


def refined_grid(x_min: float, x_max: float, n: int, design_hbar: float, hbar: float) -> GridSpec:
    """n points on [x_min, x_max], refined like 1/sqrt(hbar) below the hbar n was sized for."""
    if hbar < design_hbar:
        n = max(n, next_power_of_two(math.ceil(n * math.sqrt(design_hbar / hbar) - 1e-9)))
    return GridSpec(x_min, x_max, n)


@dataclass(frozen=True, eq=False)
class Wavefunction:
    grid: GridSpec
    hbar: float
    amplitudes: np.ndarray

    def __post_init__(self):
        if not self.hbar > 0:
            raise InvalidParameter("hbar must be positive")
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n,):
            raise InvalidParameter(f"expected {self.grid.n} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def with_amplitudes(self, amplitudes) -> "Wavefunction":
        return Wavefunction(self.grid, self.hbar, amplitudes)


@dataclass(frozen=True, eq=False)
class EnvelopeSpec:
    """Unit-norm profile a(eta) on the scale-free axis eta = (x - q) / sqrt(hbar)."""

    kind: str = "standard"
    width: float = 1.0
    eta: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    coefficients: Tuple[complex, ...] = ()

    def __post_init__(self):
        if self.kind not in ENVELOPE_KINDS:
            raise InvalidParameter(f"unknown envelope kind '{self.kind}'")
        if self.kind == "scaled" and not self.width > 0:
            raise InvalidParameter("envelope width must be positive")
        if self.kind == "custom":
            if self.eta is None or self.values is None or len(self.eta) != len(self.values) or len(self.eta) < 4:
                raise InvalidParameter("custom envelopes need matching eta/values samples (at least 4)")
            if not np.all(np.diff(self.eta) > 0):
                raise InvalidParameter("custom envelope eta samples must increase")
        if self.kind == "hermite" and (not self.coefficients or not any(self.coefficients)):
            raise InvalidParameter("hermite envelopes need a nonzero coefficient")

    @classmethod
    def standard(cls) -> "EnvelopeSpec":
        return cls("standard")

    @classmethod
    def scaled_gaussian(cls, width: float) -> "EnvelopeSpec":
        return cls("scaled", width=float(width))

    @classmethod
    def custom(cls, eta, values) -> "EnvelopeSpec":
        return cls("custom", eta=np.asarray(eta, dtype=float), values=np.asarray(values, dtype=complex))

    @classmethod
    def hermite(cls, coefficients: Sequence[complex]) -> "EnvelopeSpec":
        return cls("hermite", coefficients=tuple(complex(c) for c in coefficients))

    @property
    def gaussian_width(self) -> Optional[float]:
        """Width s of a Gaussian envelope, None for the other kinds."""
        if self.kind == "standard":
            return 1.0
        if self.kind == "scaled":
            return self.width
        return None

    @cached_property
    def _splines(self):
        norm = math.sqrt(trapezoid(np.abs(self.values) ** 2, self.eta))
        if norm == 0:
            raise InvalidParameter("custom envelope has zero norm")
        vals = self.values / norm
        return CubicSpline(self.eta, vals.real), CubicSpline(self.eta, vals.imag)

    def __call__(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        if self.kind in ("standard", "scaled"):
            s = self.gaussian_width
            return (np.pi * s * s) ** -0.25 * np.exp(-0.5 * (eta / s) ** 2) + 0j
        if self.kind == "hermite":
            c = np.array(self.coefficients)
            n = np.arange(len(c))
            norm2 = np.sum(np.abs(c) ** 2 * 2.0 ** n * np.array([math.factorial(int(k)) for k in n])) * math.sqrt(math.pi)
            return herm.hermval(eta, c) * np.exp(-0.5 * eta * eta) / math.sqrt(norm2)
        re, im = self._splines
        inside = (eta >= self.eta[0]) & (eta <= self.eta[-1])
        out = np.zeros(eta.shape, dtype=complex)
        out[inside] = re(eta[inside]) + 1j * im(eta[inside])
        return out


def coherent_amplitude(x, hbar: float, q: float, p: float, envelope: Optional[EnvelopeSpec] = None) -> np.ndarray:
    """hbar^(-1/4) a((x - q) / sqrt(hbar)) exp(i p x / hbar), evaluated pointwise."""
    envelope = envelope or EnvelopeSpec.standard()
    x = np.asarray(x, dtype=float)
    return hbar ** -0.25 * envelope((x - q) / math.sqrt(hbar)) * np.exp(1j * p * x / hbar)


def make_coherent_state(grid: GridSpec, hbar: float, q: float, p: float,
                        envelope: Optional[EnvelopeSpec] = None) -> Wavefunction:
    if not hbar > 0:
        raise InvalidParameter("hbar must be positive")
    if abs(p) >= grid.p_nyquist(hbar):
        raise MomentumOutOfBand(f"p={p} exceeds the grid's Nyquist momentum {grid.p_nyquist(hbar):.6g}")
    amps = coherent_amplitude(grid.x, hbar, q, p, envelope)
    total = math.sqrt(np.sum(np.abs(amps) ** 2) * grid.dx)
    if total == 0 or not math.isfinite(total):
        raise MassEscape(f"coherent state at q={q} has no mass on [{grid.x_min}, {grid.x_max}]", 1.0)
    psi = Wavefunction(grid, hbar, amps / total)
    edge = boundary_mass(psi)
    if edge > config.CONSTRUCTION_BOUNDARY_TOL:
        raise MassEscape(
            f"coherent state at q={q} leaves {edge:.3g} of its mass at the grid edge; widen the grid",
            edge,
        )
    return psi


def boundary_mass(psi: Wavefunction) -> float:
    b = psi.grid.boundary_points
    rho = psi.density
    return float((rho[:b].sum() + rho[-b:].sum()) * psi.grid.dx)


def norm(psi: Wavefunction) -> float:
    return math.sqrt(float(np.sum(psi.density)) * psi.grid.dx)


def inner_product(psi: Wavefunction, phi: Wavefunction) -> complex:
    """<psi, phi>, antilinear in the first argument."""
    if psi.grid != phi.grid or psi.hbar != phi.hbar:
        raise GridMismatch("inner product needs both states on the same grid and hbar")
    return complex(np.vdot(psi.amplitudes, phi.amplitudes) * psi.grid.dx)


@dataclass(frozen=True, eq=False)
class MomentumAmplitudes:
    p: np.ndarray
    dp: float
    amplitudes: np.ndarray

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def momentum_representation(psi: Wavefunction) -> MomentumAmplitudes:
    """Momentum amplitudes on the grid p = hbar k, sorted by p.

    Normalized so that sum |phi(p)|^2 dp equals the position-space norm squared.
    """
    grid, hbar = psi.grid, psi.hbar
    p = hbar * grid.k
    phase = np.exp(-1j * p * grid.x_min / hbar)
    amps = fft.fft(psi.amplitudes) * grid.dx / math.sqrt(2 * math.pi * hbar) * phase
    order = np.argsort(p)
    return MomentumAmplitudes(p[order], 2 * math.pi * hbar / (grid.n * grid.dx), amps[order])


def _apply_momentum_power(psi: Wavefunction, power: int) -> np.ndarray:
    if power == 0:
        return psi.amplitudes
    symbol = (psi.hbar * psi.grid.k) ** power
    return fft.ifft(symbol * fft.fft(psi.amplitudes))


@dataclass(frozen=True)
class Moments:
    mean_q: float
    mean_p: float
    dq: float
    dp: float
    heisenberg: float
    cov_qp: float


def moments(psi: Wavefunction) -> Moments:
    edge = boundary_mass(psi)
    if edge > config.DRIFT_BOUNDARY_TOL:
        raise MassEscape(f"boundary mass {edge:.3g} exceeds {config.DRIFT_BOUNDARY_TOL}", edge, psi.hbar)
    x = psi.grid.x
    rho = psi.density
    total = rho.sum()
    mean_q = float(np.sum(x * rho) / total)
    var_q = float(np.sum((x - mean_q) ** 2 * rho) / total)

    p = psi.hbar * psi.grid.k
    rho_p = np.abs(fft.fft(psi.amplitudes)) ** 2
    mean_p = float(np.sum(p * rho_p) / rho_p.sum())
    var_p = float(np.sum((p - mean_p) ** 2 * rho_p) / rho_p.sum())

    p_psi = _apply_momentum_power(psi, 1)
    sym = float(np.real(np.vdot(x * psi.amplitudes, p_psi)) / total)
    dq, dp = math.sqrt(max(var_q, 0.0)), math.sqrt(max(var_p, 0.0))
    return Moments(mean_q, mean_p, dq, dp, dq * dp, sym - mean_q * mean_p)


Coefficient = Union[float, complex, Sequence[complex], Callable[[np.ndarray], np.ndarray]]


def _coefficient_values(coeff: Coefficient, x: np.ndarray) -> np.ndarray:
    if callable(coeff):
        return np.asarray(coeff(x))
    if np.isscalar(coeff):
        return np.full(x.shape, coeff, dtype=complex)
    return poly.polyval(x, np.asarray(coeff, dtype=complex))


def expectation_diffop(psi: Wavefunction, coefficients: Sequence[Coefficient]) -> complex:
    """<psi, H psi> for H = sum_l a_l(x) (-i hbar d/dx)^l, l <= 2.

    Each a_l is a scalar, ascending polynomial coefficients in x, or a
    callable on the position grid. Derivatives are taken spectrally.
    """
    coefficients = list(coefficients)
    for order, coeff in enumerate(coefficients):
        if order > 2 and (callable(coeff) or np.any(np.asarray(coeff) != 0)):
            raise OrderUnsupported(f"derivative order {order} exceeds 2")
    x = psi.grid.x
    h_psi = np.zeros(psi.grid.n, dtype=complex)
    for order, coeff in enumerate(coefficients[:3]):
        h_psi += _coefficient_values(coeff, x) * _apply_momentum_power(psi, order)
    return complex(np.vdot(psi.amplitudes, h_psi) * psi.grid.dx)


def dilation_operator(hbar: float) -> List[Coefficient]:
    """Coefficients of (xP + Px) / 2 = x P - i hbar / 2."""
    return [-0.5j * hbar, (0.0, 1.0)]


@dataclass(frozen=True, eq=False)
class HusimiField:
    q: np.ndarray
    p: np.ndarray
    values: np.ndarray  # shape (len(q), len(p))
    hbar: float

    def cell_area(self) -> float:
        if len(self.q) < 2 or len(self.p) < 2:
            raise InvalidParameter("cell area needs at least two lattice points per axis")
        return float((self.q[1] - self.q[0]) * (self.p[1] - self.p[0]))

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area())

    def argmax(self) -> Tuple[float, float]:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.q[i]), float(self.p[j])


def husimi(psi: Wavefunction, q_lattice, p_lattice) -> HusimiField:
    """|<psi_qp, psi>|^2 / (2 pi hbar) with standard Gaussian psi_qp.

    The overlaps for all lattice nodes are one matrix product between the
    plane-wave factors exp(-i p x / hbar) and the Gaussian-windowed state.
    """
    q = np.asarray(q_lattice, dtype=float)
    p = np.asarray(p_lattice, dtype=float)
    grid, hbar = psi.grid, psi.hbar
    if p.size and np.max(np.abs(p)) > grid.p_nyquist(hbar):
        raise MomentumOutOfBand(
            f"lattice momentum {np.max(np.abs(p)):.6g} exceeds the Nyquist momentum {grid.p_nyquist(hbar):.6g}"
        )
    reach = 10.0 * math.sqrt(hbar)
    x = grid.x
    keep = (x >= q.min() - reach) & (x <= q.max() + reach)
    x, amps = x[keep], psi.amplitudes[keep]
    plane = np.exp(-1j * np.outer(p, x) / hbar) * grid.dx
    norm_c = (math.pi * hbar) ** -0.25
    values = np.empty((q.size, p.size))
    chunk = max(1, HUSIMI_CHUNK_ELEMENTS // max(x.size, 1))
    for start in range(0, q.size, chunk):
        qs = q[start:start + chunk]
        window = norm_c * np.exp(-((x[:, None] - qs[None, :]) ** 2) / (2 * hbar)) * amps[:, None]
        overlaps = plane @ window
        values[start:start + chunk] = (np.abs(overlaps) ** 2).T / (2 * math.pi * hbar)
    logger.debug("husimi on %dx%d lattice from %d grid points", q.size, p.size, x.size)
    return HusimiField(q, p, values, hbar)


@dataclass(frozen=True, eq=False)
class PositionCDF:
    """Piecewise-linear CDF of the cell density |psi(x_j)|^2 dx on [x_j - dx/2, x_j + dx/2]."""

    edges: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        return np.interp(x, self.edges, self.values, left=0.0, right=1.0)


def position_cdf(psi: Wavefunction) -> PositionCDF:
    dx = psi.grid.dx
    edges = np.append(psi.grid.x - 0.5 * dx, psi.grid.x[-1] + 0.5 * dx)
    cells = psi.density * dx
    cum = np.concatenate([[0.0], np.cumsum(cells)]) / cells.sum()
    cum[-1] = 1.0
    return PositionCDF(edges, cum)


def sample_positions(psi: Wavefunction, seed: int, count: int) -> np.ndarray:
    """Inverse-CDF draws from the cell density with a seeded generator."""
    if count < 0:
        raise InvalidParameter("count must be nonnegative")
    cdf = position_cdf(psi)
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    j = np.clip(np.searchsorted(cdf.values, u, side="right") - 1, 0, psi.grid.n - 1)
    width = cdf.values[j + 1] - cdf.values[j]
    frac = np.divide(u - cdf.values[j], width, out=np.full(count, 0.5), where=width > 0)
    return cdf.edges[j] + frac * psi.grid.dx


@dataclass(frozen=True, eq=False)
class SpectralObservable:
    """Position-bin observable sum_j lambda_j Pi_j; bin j is [breakpoints[j], breakpoints[j+1])."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.size < 2 or not np.all(np.diff(bp) > 0):
            raise InvalidParameter("breakpoints must be strictly increasing with at least two entries")
        if vals.shape != (bp.size - 1,):
            raise InvalidParameter("need one value per bin")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def full_range(cls, grid: GridSpec, value: float = 1.0) -> "SpectralObservable":
        return cls(np.array([grid.x_min, grid.x_max]), np.array([value]))

    @classmethod
    def two_bins(cls, grid: GridSpec, split: float = 0.0, values=(-1.0, 1.0)) -> "SpectralObservable":
        return cls(np.array([grid.x_min, split, grid.x_max]), np.asarray(values, dtype=float))

    @property
    def n_bins(self) -> int:
        return self.values.size

    def bin_index(self, x) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)

    def evaluate(self, x) -> np.ndarray:
        return self.values[self.bin_index(x)]


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    probabilities: np.ndarray
    post_states: List[Optional[Wavefunction]]
    expectation: float


def _check_covers(grid: GridSpec, obs: SpectralObservable):
    if obs.breakpoints[0] > grid.x[0] or obs.breakpoints[-1] <= grid.x[-1]:
        raise InvalidParameter(
            f"partition [{obs.breakpoints[0]}, {obs.breakpoints[-1]}] does not cover the grid"
        )


def projective_measurement(psi: Wavefunction, obs: SpectralObservable) -> MeasurementOutcome:
    _check_covers(psi.grid, obs)
    idx = obs.bin_index(psi.grid.x)
    probs = np.bincount(idx, weights=psi.density * psi.grid.dx, minlength=obs.n_bins)
    posts: List[Optional[Wavefunction]] = []
    for j, pj in enumerate(probs):
        if pj < config.EMPTY_BIN_PROBABILITY:
            posts.append(None)
            continue
        projected = np.where(idx == j, psi.amplitudes, 0.0)
        posts.append(psi.with_amplitudes(projected / math.sqrt(pj)))
    return MeasurementOutcome(probs, posts, float(np.dot(obs.values, probs)))


@dataclass(frozen=True, eq=False)
class MeasurementSample:
    index: int
    value: float
    post_state: Wavefunction


def sample_measurement(psi: Wavefunction, obs: SpectralObservable, seed: int) -> MeasurementSample:
    """Draw one outcome j with probability p_j and collapse onto bin j."""
    outcome = projective_measurement(psi, obs)
    rng = np.random.default_rng(seed)
    j = int(rng.choice(obs.n_bins, p=outcome.probabilities / outcome.probabilities.sum()))
    return MeasurementSample(j, float(obs.values[j]), outcome.post_states[j])
