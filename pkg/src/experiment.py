"""Scenario runner: configuration, validation, run and sweep.

A run evolves one scenario at one hbar, writes the requested diagnostic
tables under the output directory and finishes with manifest.json.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from . import __version__, config
from .classical_dynamics import (
    PhaseSpacePoint,
    SystemSpec,
    hyperbolic_analysis,
    integrate_flow,
    separatrix,
)
from .errors import (
    ConfigInvalid,
    EmptyLevelSet,
    LabError,
    OptimizerStalled,
    UnboundedLevelSet,
    WindowOutOfRange,
)
from .propagators import (
    CoherentInitial,
    DilationState,
    PropagatorSpec,
    evolve,
    evolve_split_operator,
    refined_step,
    stability_number,
)
from .quantum_state import (
    GridSpec,
    SpectralObservable,
    husimi,
    make_coherent_state,
    moments,
    position_cdf,
    projective_measurement,
    refined_grid,
    sample_positions,
)
from .regime_classifier import classify_regime, ehrenfest_time
from .semiclassical_diagnostics import (
    SweepExperiment,
    coherent_fit,
    hbar_sweep,
    landmark_schedule,
    localization_metrics,
    revival_detector,
)
from .storage import write_json, write_record, write_scaling_report, write_snapshot, write_table

logger = logging.getLogger(__name__)

SCENARIOS = tuple(config.SCENARIO_PRESETS)
HYPERBOLIC_SCENARIOS = ("dilation", "double-well")


@dataclass
class ExperimentConfig:
    scenario: str = "double-well"
    hbar: Union[float, List[float]] = 1e-3
    x_min: float = -2.0
    x_max: float = 2.0
    n: int = 4096
    grid_hbar: float = config.GRID_ANCHOR_HBAR
    dt: float = 1e-3
    t_final: float = 1.0
    snapshot_stride: int = 100
    seed: int = 0
    out: str = config.OUTPUT_PATH
    diagnostics: List[str] = field(default_factory=lambda: ["moments"])
    q0: float = 0.0
    p0: float = 0.0
    omega: float = 1.0
    sample_count: int = 10000
    husimi_points: int = 64
    sweep_diagnostic: str = "coherent-fit"
    sweep_time: float = 1.0
    sweep_fraction: Optional[float] = None
    max_workers: int = 1

    def __post_init__(self):
        self._check()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Build a config from the scenario preset overlaid with `data`.

        A nested "grid": {"x_min", "x_max", "n"} block is accepted as well as
        flat grid fields.
        """
        data = dict(data)
        grid = data.pop("grid", None) or {}
        if not isinstance(grid, dict):
            raise ConfigInvalid("grid", "expected an object with x_min, x_max, n")
        data.update(grid)
        scenario = data.get("scenario", cls.scenario)
        if scenario not in config.SCENARIO_PRESETS:
            raise ConfigInvalid("scenario", f"unknown scenario '{scenario}'; choose from {', '.join(SCENARIOS)}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigInvalid(unknown[0], "unknown field")
        merged = dict(config.SCENARIO_PRESETS[scenario])
        merged.update(data)
        merged["scenario"] = scenario
        merged["diagnostics"] = list(merged.get("diagnostics", ["moments"]))
        try:
            return cls(**merged)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigInvalid):
                raise
            raise ConfigInvalid("config", str(exc)) from exc

    @classmethod
    def from_json(cls, path: str, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid("config", f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid("config", "the config document must be a JSON object")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)

    def _check(self):
        if self.scenario not in config.SCENARIO_PRESETS:
            raise ConfigInvalid("scenario", f"unknown scenario '{self.scenario}'")
        for h in self.hbars:
            if not (isinstance(h, (int, float)) and math.isfinite(h) and h > 0):
                raise ConfigInvalid("hbar", f"hbar values must be positive, got {h!r}")
        if not self.t_final > 0:
            raise ConfigInvalid("t_final", "must be positive")
        if not self.dt > 0:
            raise ConfigInvalid("dt", "must be positive")
        if not self.x_min < self.x_max:
            raise ConfigInvalid("grid", "x_min must be below x_max")
        if int(self.n) != self.n or self.n < 64 or self.n & (self.n - 1):
            raise ConfigInvalid("grid.n", "must be a power of two >= 64")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ConfigInvalid("snapshot_stride", "must be a positive integer")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ConfigInvalid("seed", "must be an unsigned 64-bit integer")
        bad = [d for d in self.diagnostics if d not in config.DIAGNOSTICS]
        if bad:
            raise ConfigInvalid("diagnostics", f"unknown diagnostic '{bad[0]}'")
        if self.sweep_diagnostic not in config.SWEEP_DIAGNOSTICS:
            raise ConfigInvalid("sweep_diagnostic", f"choose from {', '.join(config.SWEEP_DIAGNOSTICS)}")
        if self.scenario == "harmonic" and not self.omega > 0:
            raise ConfigInvalid("omega", "must be positive")
        if self.sample_count < 1 or self.husimi_points < 2:
            raise ConfigInvalid("sample_count", "sample_count >= 1 and husimi_points >= 2 required")

    @property
    def hbars(self) -> List[float]:
        return list(self.hbar) if isinstance(self.hbar, (list, tuple)) else [self.hbar]

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def system(self) -> SystemSpec:
        if self.scenario == "double-well":
            return SystemSpec.double_well()
        if self.scenario == "dilation":
            return SystemSpec.dilation()
        if self.scenario == "harmonic":
            return SystemSpec.harmonic(self.omega)
        return SystemSpec.free()

    def grid_for(self, hbar: float) -> GridSpec:
        """Configured grid, refined like 1/sqrt(hbar) below the hbar it was sized for."""
        return refined_grid(self.x_min, self.x_max, self.n, self.grid_hbar, hbar)

    def dt_for(self, hbar: float) -> float:
        """Configured step, shrunk like hbar below grid_hbar."""
        return refined_step(self.dt, self.grid_hbar, hbar)

    @property
    def start(self) -> PhaseSpacePoint:
        return PhaseSpacePoint(self.q0, self.p0)


@dataclass(frozen=True)
class ValidationIssue:
    level: str  # "warning" or "error"
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.field}: {self.message}"


@dataclass
class RunManifest:
    config: Dict[str, Any]
    artifacts: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    duration: float = 0.0
    version: str = __version__
    status: str = "running"
    exit_code: int = 0
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _record_failure(manifest: RunManifest, exc: Exception) -> None:
    if isinstance(exc, LabError):
        code = exc.exit_code
    elif isinstance(exc, OSError):
        code = config.EXIT_IO
    else:
        code = config.EXIT_UNEXPECTED
    manifest.status = "failed"
    manifest.exit_code = code
    manifest.error = str(exc) or type(exc).__name__


def _saddle_exponent(cfg: ExperimentConfig) -> Optional[float]:
    if cfg.scenario == "dilation":
        return 1.0
    if cfg.scenario == "double-well":
        return hyperbolic_analysis(cfg.system(), PhaseSpacePoint(0.0, 0.0)).exponent
    return None


def _classical_q_range(cfg: ExperimentConfig):
    system = cfg.system()
    energy = 0.5 * cfg.p0 ** 2 + float(system.as_potential().value(cfg.q0))
    try:
        q_lo, q_hi, _, p_hi = separatrix(system, energy, n_samples=257).bounding_box()
        return q_lo, q_hi, p_hi
    except (UnboundedLevelSet, EmptyLevelSet):
        q_end = cfg.q0 + cfg.p0 * cfg.t_final
        return min(cfg.q0, q_end), max(cfg.q0, q_end), abs(cfg.p0)


def validate(cfg: ExperimentConfig) -> List[ValidationIssue]:
    """Check a configuration without running it.

    Parameters
    ----------
    cfg : ExperimentConfig
        Configuration to check, for every hbar it lists.

    Returns
    -------
    List[ValidationIssue]
        Stability-heuristic, containment, Nyquist, grid-resolution and
        applicability findings; empty for a sound configuration.
    """
    issues: List[ValidationIssue] = []
    if cfg.dt > cfg.t_final:
        issues.append(ValidationIssue("error", "dt", "dt exceeds t_final"))
    lam = None
    if cfg.scenario in HYPERBOLIC_SCENARIOS:
        lam = _saddle_exponent(cfg)
    for hbar in cfg.hbars:
        tag = f"hbar={hbar:g}"
        grid = cfg.grid_for(hbar)
        margin = 10.0 * math.sqrt(hbar)
        if cfg.q0 - cfg.x_min < margin or cfg.x_max - cfg.q0 < margin:
            issues.append(ValidationIssue(
                "error", "q0", f"{tag}: coherent state at q={cfg.q0} lies within 10 sqrt(hbar) of the grid boundary"))
            continue
        if lam is not None and hbar >= 1.0:
            issues.append(ValidationIssue("error", "hbar", f"{tag}: the Ehrenfest time needs hbar < 1"))
        p_cap = grid.p_nyquist(hbar)
        if cfg.scenario == "dilation":
            p_reach = abs(cfg.p0)
        else:
            q_lo, q_hi, p_reach = _classical_q_range(cfg)
            if q_lo - margin < cfg.x_min or q_hi + margin > cfg.x_max:
                issues.append(ValidationIssue(
                    "warning", "grid",
                    f"{tag}: the classical path spans [{q_lo:.3g}, {q_hi:.3g}], within 10 sqrt(hbar) of the boundary"))
        if p_reach + margin > p_cap:
            issues.append(ValidationIssue(
                "error", "grid.n", f"{tag}: momenta up to {p_reach + margin:.3g} exceed the Nyquist bound {p_cap:.3g}"))
        if cfg.scenario != "dilation":
            try:
                psi0 = make_coherent_state(grid, hbar, cfg.q0, cfg.p0)
            except LabError as exc:
                issues.append(ValidationIssue("error", "q0", f"{tag}: {exc}"))
                continue
            sigma = stability_number(psi0, cfg.system().as_potential(), cfg.dt_for(hbar))
            if sigma > config.STABILITY_LIMIT:
                issues.append(ValidationIssue(
                    "warning", "dt", f"{tag}: stability number {sigma:.3g} exceeds {config.STABILITY_LIMIT}"))
        if lam is not None and hbar < 1.0 and cfg.t_final > 2.0 * ehrenfest_time(hbar, lam) + 1e-9:
            issues.append(ValidationIssue(
                "warning", "t_final", f"{tag}: runs past twice the Ehrenfest time lose grid fidelity"))
    for diag in cfg.diagnostics:
        if diag == "tube-mass" and cfg.scenario != "double-well":
            issues.append(ValidationIssue("warning", "diagnostics", "tube-mass needs the double-well separatrix; skipped"))
        if diag == "egorov" and cfg.scenario == "dilation":
            issues.append(ValidationIssue("warning", "diagnostics", "egorov needs a kinetic-plus-potential system; skipped"))
    return issues


def _regime(t: float, hbar: float, lam: Optional[float]) -> str:
    return classify_regime(t, hbar, lam) if lam is not None else "none"


class _Run:
    """State shared by the diagnostic writers of one run."""

    def __init__(self, cfg: ExperimentConfig, manifest: RunManifest):
        self.cfg = cfg
        self.manifest = manifest
        self.hbar = cfg.hbars[0]
        self.system = cfg.system()
        self.lam = _saddle_exponent(cfg)
        self.grid = cfg.grid_for(self.hbar)
        self.dt = cfg.dt_for(self.hbar)
        self.landmarks = []
        if self.lam is not None:
            self.landmarks = [(f, t) for f, t in landmark_schedule(self.hbar, self.lam) if t <= cfg.t_final + 1e-12]

    def path(self, name: str) -> str:
        return os.path.join(self.cfg.out, name)

    def record_artifact(self, path: str):
        self.manifest.artifacts.append(os.path.relpath(path, self.cfg.out))

    def classical_point(self, t: float) -> PhaseSpacePoint:
        if self.system.kind == "dilation":
            return PhaseSpacePoint(self.cfg.q0 * math.exp(t), self.cfg.p0 * math.exp(-t))
        if t == 0:
            return self.cfg.start
        return integrate_flow(self.system, self.cfg.start, t, self.dt).final

    def evolve(self):
        """Snapshots (t, psi) up to t_final, keyed states at the landmarks, and the dense record."""
        cfg, hbar = self.cfg, self.hbar
        initial = CoherentInitial(cfg.q0, cfg.p0, hbar)
        if self.system.kind == "dilation":
            record = evolve(PropagatorSpec.exact_dilation(self.dt), initial, self.grid, cfg.t_final, cfg.snapshot_stride)
            start = DilationState(initial)
            marks = {}
            for f, t in self.landmarks:
                state = start.evolve(t)
                marks[f] = (t, state.sample(state.comoving_grid(self.grid)))
            snaps = list(zip(record.snapshot_times, record.snapshots))
            return record, snaps, marks

        n_steps = max(1, math.ceil(cfg.t_final / self.dt - 1e-9))
        dt = cfg.t_final / n_steps
        landmark_steps = {f: int(round(t / dt)) for f, t in self.landmarks}
        guard = config.REVIVAL_GUARD_STEPS if "revivals" in cfg.diagnostics else 0
        record = evolve_split_operator(
            initial.sample(self.grid), self.system.as_potential(), dt, n_steps + guard,
            cfg.snapshot_stride, extra_snapshots=[n_steps, *landmark_steps.values()],
        )
        snaps = [(t, s) for t, s in zip(record.snapshot_times, record.snapshots) if t <= cfg.t_final * (1 + 1e-12)]
        by_time = {round(t / dt): (t, s) for t, s in snaps}
        marks = {f: by_time[k] for f, k in landmark_steps.items()}
        return record, snaps, marks


def _write_moments(run: _Run, snaps, marks):
    rows = {}
    for t, psi in list(snaps) + list(marks.values()):
        m = moments(psi)
        rows[float(t)] = {
            "t": float(t), "mean_q": m.mean_q, "mean_p": m.mean_p, "dq": m.dq, "dp": m.dp,
            "heisenberg": m.heisenberg, "regime": _regime(t, run.hbar, run.lam),
        }
    df = pd.DataFrame([rows[t] for t in sorted(rows)])
    run.record_artifact(write_table(df, run.path("moments.csv")))
    summary = {"dq_initial": float(df["dq"].iloc[0]), "dq_final": float(df["dq"].iloc[-1])}
    for f, (t, psi) in marks.items():
        summary[f"dq_at_{f:g}_ehrenfest"] = moments(psi).dq
    return summary


def _diagnostic_states(snaps, marks):
    """Landmark states when there are any, else the last snapshot."""
    if marks:
        return [(f"{f:g}T", t, psi) for f, (t, psi) in sorted(marks.items())]
    t, psi = snaps[-1]
    return [("final", t, psi)]


def _write_husimi(run: _Run, snaps, marks):
    summary = {}
    for label, t, psi in _diagnostic_states(snaps, marks):
        m = moments(psi)
        reach = 5.0 * math.sqrt(psi.hbar)
        grid = psi.grid
        q_half = max(5.0 * m.dq, reach)
        p_half = max(5.0 * m.dp, reach)
        p_cap = 0.99 * grid.p_nyquist(psi.hbar)
        q_lat = np.linspace(max(m.mean_q - q_half, grid.x_min), min(m.mean_q + q_half, grid.x[-1]), run.cfg.husimi_points)
        p_lat = np.linspace(max(m.mean_p - p_half, -p_cap), min(m.mean_p + p_half, p_cap), run.cfg.husimi_points)
        density = husimi(psi, q_lat, p_lat)
        qq, pp = np.meshgrid(q_lat, p_lat, indexing="ij")
        df = pd.DataFrame({"q": qq.ravel(), "p": pp.ravel(), "value": density.values.ravel()})
        run.record_artifact(write_table(df, run.path(f"husimi_{label}.csv")))
        summary[f"mass_{label}"] = density.mass()
        summary[f"t_{label}"] = float(t)
    return summary


def _write_coherent_fit(run: _Run, snaps, marks):
    rows = []
    for label, t, psi in _diagnostic_states(snaps, marks):
        stalled = False
        try:
            fit = coherent_fit(psi, run.classical_point(t))
        except OptimizerStalled as exc:
            logger.warning("coherent fit at t=%.4g stalled: %s", t, exc)
            fit, stalled = exc.best, True
        rows.append({
            "label": label, "t": float(t), "q": fit.center.q, "p": fit.center.p,
            "re_w": fit.width.real, "im_w": fit.width.imag,
            "overlap": fit.overlap, "residual": fit.residual, "stalled": stalled,
        })
    df = pd.DataFrame(rows)
    run.record_artifact(write_table(df, run.path("coherent_fit.csv")))
    return {f"residual_{r['label']}": r["residual"] for r in rows}


def _write_egorov(run: _Run, snaps):
    if run.system.kind == "dilation":
        logger.warning("egorov skipped: the dilation has no kinetic-plus-potential form")
        return {"skipped": True}
    traj = integrate_flow(run.system, run.cfg.start, run.cfg.t_final, run.dt)
    rows = []
    for t, psi in snaps:
        quantum = moments(psi).mean_q
        classical = float(np.interp(t, traj.times, traj.q))
        rows.append({"t": float(t), "quantum": quantum, "classical": classical, "error": abs(quantum - classical)})
    df = pd.DataFrame(rows)
    run.record_artifact(write_table(df, run.path("egorov.csv")))
    return {"max_error": float(df["error"].max())}


def _write_revivals(run: _Run, record):
    cfg = run.cfg
    end = float(record.times[-1])
    if run.lam is not None:
        t_e = ehrenfest_time(run.hbar, run.lam)
        window = (0.5 * t_e, min(2.0 * t_e, end))
    else:
        window = (float(record.times[1]), min(cfg.t_final * (1 + 1e-12), end))
    try:
        found = revival_detector(record, window)
        payload = {"peak_time": found.peak_time, "peak_height": found.peak_height, "baseline": found.baseline}
    except WindowOutOfRange as exc:
        logger.warning("revival search skipped: %s", exc)
        payload = {"peak_time": None, "peak_height": None, "baseline": None, "skipped": str(exc)}
    payload["window"] = list(window)
    run.record_artifact(write_json(payload, run.path("revivals.json")))
    return payload


def _write_tube_mass(run: _Run, snaps, marks):
    if run.cfg.scenario != "double-well":
        logger.warning("tube-mass skipped: only the double well has a separatrix")
        return {"skipped": True}
    on = separatrix(run.system, 0.0)
    off = separatrix(run.system, config.OFF_MANIFOLD_ENERGY)
    rows = []
    for label, t, psi in _diagnostic_states(snaps, marks):
        m_on = localization_metrics(psi, on)
        m_off = localization_metrics(psi, off)
        rows.append({
            "label": label, "t": float(t), "dq": m_on.dq, "ipr": m_on.ipr,
            "tube_mass": m_on.tube_mass, "off_manifold_mass": m_off.tube_mass,
            "upper_branch": m_on.branch_masses[0], "lower_branch": m_on.branch_masses[1],
            "left_lobe": m_on.lobe_masses[0], "right_lobe": m_on.lobe_masses[1],
        })
    df = pd.DataFrame(rows)
    run.record_artifact(write_table(df, run.path("tube_mass.csv")))
    return {f"tube_mass_{r['label']}": r["tube_mass"] for r in rows}


def _write_measurement(run: _Run, snaps):
    t, psi = snaps[-1]
    samples = sample_positions(psi, run.cfg.seed, run.cfg.sample_count)
    run.record_artifact(write_table(pd.DataFrame({"x": samples}), run.path("samples.csv")))
    ks = stats.kstest(samples, position_cdf(psi))
    split = float(np.clip(moments(psi).mean_q, psi.grid.x_min + psi.grid.dx, psi.grid.x_max - psi.grid.dx))
    outcome = projective_measurement(psi, SpectralObservable.two_bins(psi.grid, split))
    return {
        "t": float(t), "ks_statistic": float(ks.statistic), "ks_pvalue": float(ks.pvalue),
        "split": split, "p_left": float(outcome.probabilities[0]), "p_right": float(outcome.probabilities[1]),
    }


def run(cfg: ExperimentConfig) -> RunManifest:
    """Execute one scenario and write its artifacts; manifest.json is written last.

    Parameters
    ----------
    cfg : ExperimentConfig
        Single-hbar configuration.

    Returns
    -------
    RunManifest
        Config echo, artifact list, per-diagnostic summaries and duration.
    """
    if len(cfg.hbars) != 1:
        raise ConfigInvalid("hbar", "run takes a single hbar; use sweep for a list")
    issues = validate(cfg)
    errors = [i for i in issues if i.level == "error"]
    if errors:
        raise ConfigInvalid(errors[0].field, errors[0].message)
    for issue in issues:
        logger.warning("%s", issue)
    os.makedirs(cfg.out, exist_ok=True)

    manifest = RunManifest(config=cfg.to_dict())
    started = time.perf_counter()
    try:
        run_ = _Run(cfg, manifest)
        logger.info("[%s] evolving to t=%.6g at hbar=%g on n=%d", cfg.scenario, cfg.t_final, run_.hbar, run_.grid.n)
        record, snaps, marks = run_.evolve()
        manifest.artifacts.append(os.path.relpath(write_record(record, run_.path("record.csv")), cfg.out))
        index_rows = []
        for i, (t, psi) in enumerate(snaps):
            name = f"snap_{i}.csv"
            run_.record_artifact(write_snapshot(psi, run_.path(name)))
            index_rows.append({"index": i, "t": float(t), "file": name})
        run_.record_artifact(write_table(pd.DataFrame(index_rows), run_.path("snapshots.csv")))

        for diag in cfg.diagnostics:
            logger.info("[%s] diagnostic %s", cfg.scenario, diag)
            if diag == "moments":
                manifest.summary[diag] = _write_moments(run_, snaps, marks)
            elif diag == "husimi":
                manifest.summary[diag] = _write_husimi(run_, snaps, marks)
            elif diag == "coherent-fit":
                manifest.summary[diag] = _write_coherent_fit(run_, snaps, marks)
            elif diag == "egorov":
                manifest.summary[diag] = _write_egorov(run_, snaps)
            elif diag == "revivals":
                manifest.summary[diag] = _write_revivals(run_, record)
            elif diag == "tube-mass":
                manifest.summary[diag] = _write_tube_mass(run_, snaps, marks)
            elif diag == "measurement-samples":
                manifest.summary[diag] = _write_measurement(run_, snaps)
        manifest.status = "success"
    except Exception as exc:
        _record_failure(manifest, exc)
        raise
    finally:
        manifest.duration = time.perf_counter() - started
        write_json(manifest.to_dict(), os.path.join(cfg.out, config.MANIFEST_NAME))
        logger.info("manifest written to %s (%s)", os.path.join(cfg.out, config.MANIFEST_NAME), manifest.status)
    return manifest


def sweep(cfg: ExperimentConfig) -> RunManifest:
    """Run the sweep diagnostic over every hbar of the config and fit its exponent."""
    hbars = cfg.hbars
    if len(set(hbars)) < 3:
        raise ConfigInvalid("hbar", "a sweep needs at least three distinct hbar values")
    errors = [i for i in validate(cfg) if i.level == "error"]
    if errors:
        raise ConfigInvalid(errors[0].field, errors[0].message)
    os.makedirs(cfg.out, exist_ok=True)
    fraction = cfg.sweep_fraction
    if fraction is None and cfg.scenario == "dilation":
        fraction = 0.5
    experiment = SweepExperiment(
        scenario=cfg.scenario, start=cfg.start, t=cfg.sweep_time, dt=cfg.dt,
        ehrenfest_fraction=fraction, omega=cfg.omega, x_min=cfg.x_min, x_max=cfg.x_max,
        n=cfg.n, grid_hbar=cfg.grid_hbar,
    )
    manifest = RunManifest(config=cfg.to_dict())
    started = time.perf_counter()
    try:
        report = hbar_sweep(experiment, hbars, cfg.sweep_diagnostic, max_workers=cfg.max_workers)
        csv_path, json_path = write_scaling_report(
            report, os.path.join(cfg.out, "scaling.csv"), os.path.join(cfg.out, "scaling.json"))
        manifest.artifacts += [os.path.relpath(csv_path, cfg.out), os.path.relpath(json_path, cfg.out)]
        manifest.summary[cfg.sweep_diagnostic] = {"exponent": report.exponent, "residual": report.residual}
        manifest.status = "success"
    except Exception as exc:
        _record_failure(manifest, exc)
        raise
    finally:
        manifest.duration = time.perf_counter() - started
        write_json(manifest.to_dict(), os.path.join(cfg.out, config.MANIFEST_NAME))
    return manifest
