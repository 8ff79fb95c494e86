"""Classical Hamiltonian flows in one degree of freedom.

Systems are either kinetic-plus-potential (p^2/2 + V(q), including the
harmonic and free references) or the dilation h(q, p) = qp. Separable
systems are stepped with velocity Verlet; the dilation uses its closed-form
flow (q e^t, p e^-t).
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from . import config
from .errors import (
    DegenerateWindow,
    EmptyLevelSet,
    InvalidParameter,
    NoFixedPoint,
    NonFiniteState,
    NotHyperbolic,
    UnboundedLevelSet,
    UnsupportedSystem,
)
from .fitting import log_slope

logger = logging.getLogger(__name__)

MAX_POTENTIAL_DEGREE = 8
DOUBLE_WELL_COEFFICIENTS = (0.0, 0.0, -1.0, 0.0, 1.0)
SYSTEM_KINDS = ("potential", "dilation", "harmonic", "free")
POTENTIAL_KINDS = ("double-well", "quadratic", "custom")


def _horner(coeffs: Sequence[float], x):
    """Evaluate a polynomial with ascending coefficients; works on floats and arrays."""
    if not coeffs:
        return 0.0 * x
    acc = coeffs[-1] + 0.0 * x
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def _derivative_coefficients(coeffs: Sequence[float], order: int = 1) -> Tuple[float, ...]:
    out = list(coeffs)
    for _ in range(order):
        out = [k * c for k, c in enumerate(out)][1:]
    return tuple(float(c) for c in out)


def _canonical_direction(v) -> Tuple[float, float]:
    """Unit vector with its first non-negligible component positive."""
    v = np.real_if_close(np.asarray(v), tol=1000).astype(float)
    v = v / np.linalg.norm(v)
    lead = v[0] if abs(v[0]) > 1e-12 else v[1]
    if lead < 0:
        v = -v
    return float(v[0]), float(v[1])


@dataclass(frozen=True)
class PhaseSpacePoint:
    q: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.p)):
            raise InvalidParameter(f"phase-space point must be finite, got ({self.q}, {self.p})")
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "p", float(self.p))

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.p])

    def distance(self, other: "PhaseSpacePoint") -> float:
        return math.hypot(self.q - other.q, self.p - other.p)


@dataclass(frozen=True)
class PotentialSpec:
    """V(x) as a polynomial of degree <= 8, coefficients in ascending powers.

    quadratic(k) means V = k x^2 / 2; double_well() is V = x^2 (x^2 - 1).
    """

    kind: str
    coefficients: Tuple[float, ...]
    k: Optional[float] = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise InvalidParameter(f"unknown potential kind '{self.kind}'")
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs:
            coeffs = (0.0,)
        if len(coeffs) > MAX_POTENTIAL_DEGREE + 1:
            raise InvalidParameter(f"potential degree is limited to {MAX_POTENTIAL_DEGREE}")
        if not all(math.isfinite(c) for c in coeffs):
            raise InvalidParameter("potential coefficients must be finite")
        if self.kind == "double-well" and coeffs != DOUBLE_WELL_COEFFICIENTS:
            raise InvalidParameter("the double well takes no parameters")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def double_well(cls) -> "PotentialSpec":
        return cls("double-well", DOUBLE_WELL_COEFFICIENTS)

    @classmethod
    def quadratic(cls, k: float) -> "PotentialSpec":
        return cls("quadratic", (0.0, 0.0, 0.5 * float(k)), k=float(k))

    @classmethod
    def custom(cls, coefficients: Sequence[float]) -> "PotentialSpec":
        return cls("custom", tuple(coefficients))

    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls("custom", (0.0,))

    @cached_property
    def force_coefficients(self) -> Tuple[float, ...]:
        return tuple(-c for c in _derivative_coefficients(self.coefficients, 1))

    def value(self, x):
        return _horner(self.coefficients, x)

    def derivative(self, x, order: int = 1):
        return _horner(_derivative_coefficients(self.coefficients, order), x)

    def force(self, x):
        return _horner(self.force_coefficients, x)

    def minimum(self) -> float:
        """Global minimum of V over the real line (-inf when unbounded below)."""
        coeffs = np.trim_zeros(np.array(self.coefficients), "b")
        if coeffs.size <= 1:
            return float(coeffs[0]) if coeffs.size else 0.0
        degree = coeffs.size - 1
        if degree % 2 == 1 or coeffs[-1] < 0:
            return -math.inf
        crit = Polynomial(_derivative_coefficients(tuple(coeffs), 1)).roots()
        real = crit[np.abs(crit.imag) <= 1e-7 * (1.0 + np.abs(crit.real))].real
        return float(np.min(self.value(real)))


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    potential: Optional[PotentialSpec] = None
    omega: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SYSTEM_KINDS:
            raise InvalidParameter(f"unknown system kind '{self.kind}'")
        if self.kind == "potential" and self.potential is None:
            raise InvalidParameter("a potential-well system needs a PotentialSpec")
        if self.kind == "harmonic":
            if self.omega is None or not self.omega > 0:
                raise InvalidParameter("harmonic systems require omega > 0")

    @classmethod
    def potential_well(cls, potential: PotentialSpec) -> "SystemSpec":
        return cls("potential", potential=potential)

    @classmethod
    def double_well(cls) -> "SystemSpec":
        return cls("potential", potential=PotentialSpec.double_well())

    @classmethod
    def dilation(cls) -> "SystemSpec":
        return cls("dilation")

    @classmethod
    def harmonic(cls, omega: float = 1.0) -> "SystemSpec":
        return cls("harmonic", omega=float(omega))

    @classmethod
    def free(cls) -> "SystemSpec":
        return cls("free")

    @property
    def separable(self) -> bool:
        return self.kind != "dilation"

    def as_potential(self) -> PotentialSpec:
        """Potential of a separable system; the dilation has none."""
        if self.kind == "potential":
            return self.potential
        if self.kind == "harmonic":
            return PotentialSpec.quadratic(self.omega ** 2)
        if self.kind == "free":
            return PotentialSpec.zero()
        raise UnsupportedSystem("the dilation Hamiltonian qp is not of kinetic-plus-potential form")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    energy: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.q) == len(self.p) == len(self.energy) == n):
            raise InvalidParameter("trajectory sequences must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise InvalidParameter("trajectory times must be strictly increasing")
        for arr in (self.times, self.q, self.p, self.energy):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def points(self) -> List[PhaseSpacePoint]:
        return [PhaseSpacePoint(q, p) for q, p in zip(self.q, self.p)]

    @property
    def final(self) -> PhaseSpacePoint:
        return PhaseSpacePoint(self.q[-1], self.p[-1])


@dataclass(frozen=True)
class SeparatrixCurve:
    """Samples of the level set h = energy; `upper` holds p >= 0, `lower` its mirror."""

    energy: float
    upper: np.ndarray
    lower: np.ndarray
    turning_points: Tuple[float, ...]

    @property
    def branches(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.upper, self.lower

    @property
    def all_points(self) -> np.ndarray:
        return np.vstack([self.upper, self.lower])

    def bounding_box(self) -> Tuple[float, float, float, float]:
        pts = self.all_points
        return (float(pts[:, 0].min()), float(pts[:, 0].max()),
                float(pts[:, 1].min()), float(pts[:, 1].max()))


@dataclass(frozen=True)
class HyperbolicData:
    fixed_point: PhaseSpacePoint
    exponent: float
    unstable: Tuple[float, float]
    stable: Tuple[float, float]


@dataclass(frozen=True)
class ManifoldMembership:
    stable: bool
    unstable: bool
    forward_distance: float
    backward_distance: float

    @property
    def homoclinic(self) -> bool:
        return self.stable and self.unstable


def _energy(system: SystemSpec, q, p):
    if system.kind == "dilation":
        return q * p
    return 0.5 * p * p + system.as_potential().value(q)


def hamiltonian_value(system: SystemSpec, x: PhaseSpacePoint) -> float:
    return float(_energy(system, x.q, x.p))


def vector_field(system: SystemSpec, x: PhaseSpacePoint) -> Tuple[float, float]:
    """(dh/dp, -dh/dq) at x."""
    if system.kind == "dilation":
        return x.q, -x.p
    return x.p, float(system.as_potential().force(x.q))


def linearization(system: SystemSpec, x: PhaseSpacePoint) -> np.ndarray:
    """Exact Jacobian of the vector field at x."""
    if system.kind == "dilation":
        return np.array([[1.0, 0.0], [0.0, -1.0]])
    curvature = float(system.as_potential().derivative(x.q, order=2))
    return np.array([[0.0, 1.0], [-curvature, 0.0]])


def _verlet(force_coeffs: Tuple[float, ...], q: float, p: float, h: float, n: int):
    qs = np.empty(n + 1)
    ps = np.empty(n + 1)
    q = float(q)
    p = float(p)
    qs[0] = q
    ps[0] = p
    half = 0.5 * h
    f = _horner(force_coeffs, q)
    for i in range(1, n + 1):
        p_half = p + half * f
        q = q + h * p_half
        f = _horner(force_coeffs, q)
        p = p_half + half * f
        if not (math.isfinite(q) and math.isfinite(p)):
            raise NonFiniteState(
                f"non-finite state at step {i} (t={i * h:.6g}); the step is too large "
                f"or the motion is unbounded"
            )
        qs[i] = q
        ps[i] = p
    return qs, ps


def _sample_flow(system: SystemSpec, x0: PhaseSpacePoint, t: float, dt: float):
    """Uniform samples of the flow from 0 to t (t may be negative)."""
    if dt <= 0:
        raise InvalidParameter("dt must be positive")
    n = max(1, math.ceil(abs(t) / dt - 1e-9))
    times = np.linspace(0.0, t, n + 1)
    if system.kind == "dilation":
        q = x0.q * np.exp(times)
        p = x0.p * np.exp(-times)
    else:
        q, p = _verlet(system.as_potential().force_coefficients, x0.q, x0.p, t / n, n)
    return times, q, p


def integrate_flow(system: SystemSpec, x0: PhaseSpacePoint, t_final: float, dt: float) -> Trajectory:
    """Trajectory from t = 0 to t = t_final, both included.

    The step is shrunk to t_final / ceil(t_final / dt) so the grid lands on
    t_final. Keep lambda * dt < 0.1 for the largest local exponent; larger
    steps lose accuracy and eventually raise NonFiniteState.
    """
    if not t_final > 0:
        raise InvalidParameter("t_final must be positive")
    if dt > t_final:
        raise InvalidParameter("dt must not exceed t_final")
    times, q, p = _sample_flow(system, x0, t_final, dt)
    return Trajectory(times, q, p, _energy(system, q, p))


def flow_map(system: SystemSpec, x0: PhaseSpacePoint, t: float, dt: float) -> PhaseSpacePoint:
    """Phi^t(x0) for either sign of t."""
    if t == 0:
        return x0
    _, q, p = _sample_flow(system, x0, t, dt)
    return PhaseSpacePoint(q[-1], p[-1])


def _perturbation_direction(system: SystemSpec, x0: PhaseSpacePoint) -> Tuple[float, float]:
    eigvals, eigvecs = np.linalg.eig(linearization(system, x0))
    if np.all(np.abs(eigvals.imag) < 1e-12):
        order = np.argsort(eigvals.real)
        if eigvals.real[order[-1]] > 1e-12 and eigvals.real[order[0]] < -1e-12:
            return _canonical_direction(eigvecs[:, order[-1]])
    return 1.0, 0.0


def separation_exponent(system: SystemSpec, x0: PhaseSpacePoint, eps: float, t_total: float, dt: float) -> float:
    """Least-squares growth rate of the distance between x0 and a nearby point.

    The partner starts eps away along the local unstable direction (or along q
    when the linearization has no real +-lambda pair). Samples before the
    distance first exceeds 10 eps and after it reaches 1e-2 are excluded.
    """
    if not eps > 0:
        raise InvalidParameter("eps must be positive")
    if eps > 1e-6:
        warnings.warn("eps > 1e-6: the fit may leave the linear regime", RuntimeWarning)
    du, dp = _perturbation_direction(system, x0)
    partner = PhaseSpacePoint(x0.q + eps * du, x0.p + eps * dp)
    a = integrate_flow(system, x0, t_total, dt)
    b = integrate_flow(system, partner, t_total, dt)
    sep = np.hypot(b.q - a.q, b.p - a.p)

    saturated = np.nonzero(sep >= config.SEPARATION_SATURATION)[0]
    end = int(saturated[0]) if saturated.size else len(sep)
    crossed = np.nonzero(sep[:end] > config.SEPARATION_TRANSIENT_FACTOR * eps)[0]
    start = int(crossed[0]) if crossed.size else 0
    if end - start < config.MIN_FIT_SAMPLES:
        raise DegenerateWindow(
            f"fit window holds {max(end - start, 0)} samples; "
            f"need {config.MIN_FIT_SAMPLES} (reduce dt or eps)"
        )
    window = sep[start:end]
    if np.any(window <= 0):
        raise DegenerateWindow("trajectories coincide inside the fit window")
    fit = log_slope(a.times[start:end], window, min_samples=config.MIN_FIT_SAMPLES)
    logger.debug("separation fit over %d samples: slope=%.6g rms=%.3g", fit.samples, fit.slope, fit.residual)
    return fit.slope


def escape_time(system: SystemSpec, x: PhaseSpacePoint, y: PhaseSpacePoint,
                threshold: float, dt: float, t_max: float) -> Optional[float]:
    """First sampled time at which |Phi^t(x) - Phi^t(y)| >= threshold, else None."""
    a = integrate_flow(system, x, t_max, dt)
    b = integrate_flow(system, y, t_max, dt)
    sep = np.hypot(b.q - a.q, b.p - a.p)
    hits = np.nonzero(sep >= threshold)[0]
    return float(a.times[hits[0]]) if hits.size else None


def _fd_jacobian(system: SystemSpec, x: np.ndarray) -> np.ndarray:
    h = config.NEWTON_FD_STEP
    jac = np.empty((2, 2))
    for j in range(2):
        dx = np.zeros(2)
        dx[j] = h
        fp = np.array(vector_field(system, PhaseSpacePoint(*(x + dx))))
        fm = np.array(vector_field(system, PhaseSpacePoint(*(x - dx))))
        jac[:, j] = (fp - fm) / (2 * h)
    return jac


def _refine_fixed_point(system: SystemSpec, guess: PhaseSpacePoint) -> PhaseSpacePoint:
    x = guess.as_array()
    for iteration in range(config.NEWTON_MAX_ITER + 1):
        f = np.array(vector_field(system, PhaseSpacePoint(*x)))
        if np.linalg.norm(f) <= config.NEWTON_TOL:
            logger.debug("fixed point %s after %d Newton steps", x, iteration)
            return PhaseSpacePoint(*x)
        if iteration == config.NEWTON_MAX_ITER:
            break
        try:
            step = np.linalg.solve(_fd_jacobian(system, x), -f)
        except np.linalg.LinAlgError as exc:
            raise NoFixedPoint(f"singular Jacobian near {tuple(x)}") from exc
        x = x + step
        if not np.all(np.isfinite(x)):
            break
        if np.linalg.norm(step) <= config.NEWTON_TOL * (1.0 + np.linalg.norm(x)):
            return PhaseSpacePoint(*x)
    raise NoFixedPoint(f"Newton did not converge in {config.NEWTON_MAX_ITER} iterations from ({guess.q}, {guess.p})")


def hyperbolic_analysis(system: SystemSpec, guess: PhaseSpacePoint) -> HyperbolicData:
    fixed = _refine_fixed_point(system, guess)
    eigvals, eigvecs = np.linalg.eig(linearization(system, fixed))
    scale = max(1.0, float(np.max(np.abs(eigvals))))
    if np.any(np.abs(eigvals.imag) > 1e-10 * scale):
        raise NotHyperbolic(f"complex eigenvalues {eigvals} at ({fixed.q}, {fixed.p}): elliptic point")
    real = eigvals.real
    order = np.argsort(real)
    lam = float(real[order[-1]])
    if lam <= 1e-12 or abs(real[order[0]] + lam) > 1e-8 * scale:
        raise NotHyperbolic(f"eigenvalues {real} are not a +-lambda pair")
    return HyperbolicData(
        fixed_point=fixed,
        exponent=lam,
        unstable=_canonical_direction(eigvecs[:, order[-1]]),
        stable=_canonical_direction(eigvecs[:, order[0]]),
    )


def manifold_membership(system: SystemSpec, x: PhaseSpacePoint, fixed_point: PhaseSpacePoint,
                        horizon: float, dt: float, tol: float = 1e-2) -> ManifoldMembership:
    """Closest approach to the fixed point along the forward and backward flows.

    A point whose forward orbit comes within tol lies (numerically) on the
    stable manifold; within tol backward, on the unstable one.
    """
    def closest(t):
        _, q, p = _sample_flow(system, x, t, dt)
        return float(np.min(np.hypot(q - fixed_point.q, p - fixed_point.p)))

    forward = closest(horizon)
    backward = closest(-horizon)
    return ManifoldMembership(forward <= tol, backward <= tol, forward, backward)


def level_set_momentum(system: SystemSpec, energy: float, q: float) -> float:
    """Nonnegative p with p^2/2 + V(q) = energy."""
    gap = energy - float(system.as_potential().value(q))
    if gap < -config.LEVEL_SET_TOL:
        raise EmptyLevelSet(f"q={q} lies outside the classically allowed region at E={energy}")
    return math.sqrt(2.0 * max(gap, 0.0))


def _breakpoints(potential: PotentialSpec, energy: float) -> List[Tuple[float, bool]]:
    """Real roots of E - V, refined; the flag marks sign-changing (turning) roots."""
    coeffs = [-c for c in potential.coefficients]
    coeffs[0] += energy
    g = Polynomial(coeffs)
    dg = g.deriv()
    if g.degree() < 1:
        return []
    raw = g.roots()
    approx = sorted(r.real for r in raw if abs(r.imag) <= 1e-6 * (1.0 + abs(r.real)))
    out: List[Tuple[float, bool]] = []
    delta = 1e-6
    for r in approx:
        if out and abs(r - out[-1][0]) < 1e-5:
            continue
        lo, hi = r - delta, r + delta
        if g(lo) * g(hi) < 0:
            out.append((brentq(g, lo, hi, xtol=1e-15), True))
        elif dg(lo) * dg(hi) < 0:
            out.append((brentq(dg, lo, hi, xtol=1e-15), False))
        else:
            out.append((r, False))
    return out


def separatrix(system: SystemSpec, energy: float = 0.0, n_samples: int = 2001) -> SeparatrixCurve:
    """Sample the level set p = +-sqrt(2 (E - V(q))) over the allowed q-range.

    Each allowed segment between consecutive roots of E - V is sampled with
    points clustered at its ends, where p(q) has a square-root profile.
    """
    potential = system.as_potential()
    if energy < potential.minimum() - config.LEVEL_SET_TOL:
        raise EmptyLevelSet(f"E={energy} lies below min V={potential.minimum()}")
    points = _breakpoints(potential, energy)

    def gap(x):
        return energy - potential.value(x)

    if not points:
        if gap(0.0) > 0:
            raise UnboundedLevelSet(f"the level set h={energy} is unbounded")
        raise EmptyLevelSet(f"the level set h={energy} is empty")
    if gap(points[0][0] - 1.0) > 0 or gap(points[-1][0] + 1.0) > 0:
        raise UnboundedLevelSet(f"the level set h={energy} is unbounded")

    segments = [
        (a, b, ta, tb)
        for (a, ta), (b, tb) in zip(points[:-1], points[1:])
        if gap(0.5 * (a + b)) > 0
    ]
    if not segments:
        raise EmptyLevelSet(f"the level set h={energy} has no allowed segment")

    total = sum(b - a for a, b, _, _ in segments)
    qs: List[np.ndarray] = []
    pins: List[np.ndarray] = []
    for a, b, ta, tb in segments:
        m = max(16, int(round(n_samples * (b - a) / total)))
        theta = np.linspace(0.0, math.pi, m)
        q = a + (b - a) * 0.5 * (1.0 - np.cos(theta))
        q[0], q[-1] = a, b
        pin = np.zeros(m, dtype=bool)
        pin[0], pin[-1] = ta, tb
        if qs and qs[-1][-1] == q[0]:
            q, pin = q[1:], pin[1:]
        qs.append(q)
        pins.append(pin)
    q = np.concatenate(qs)
    turning = np.concatenate(pins)
    p = np.sqrt(2.0 * np.maximum(gap(q), 0.0))
    p[turning] = 0.0
    upper = np.column_stack([q, p])
    lower = np.column_stack([q, -p])
    turning_points = tuple(float(x) for x in q[turning])
    logger.debug("level set h=%.6g: %d samples per branch, turning points %s", energy, len(q), turning_points)
    return SeparatrixCurve(float(energy), upper, lower, turning_points)
