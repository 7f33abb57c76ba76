"""Run orchestration: configure, integrate, monitor, verify, persist.

A run advances the chosen system with fixed-step RK4, carries a tracer
cloud along with the solver stages, samples the geometric diagnostics on a
fixed cadence, and post-processes the samples into criterion functionals,
type-I monitors, transport-identity residuals, and growth-bound margins.
Everything written to disk is deterministic for a given configuration.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import criteria as crit
from . import solver, tracers
from .diagnostics import diag_field
from .fields import solve_pressure
from .grid import GridSpec
from .storage import save_diagnostics, save_field, write_csv, write_json, write_manifest

UNDER_RESOLVED_TAIL = 1e-3
WEAKER_CRITERION_NOTE = "weaker than the alignment criterion"


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class Region:
    label: str
    center: tuple | None = None
    radius: float | None = None

    @property
    def is_global(self) -> bool:
        return self.center is None

    def to_dict(self) -> dict:
        if self.is_global:
            return {"label": self.label, "kind": "global"}
        return {
            "label": self.label,
            "kind": "ball",
            "center": list(self.center),
            "radius": self.radius,
        }


@dataclass
class RunConfig:
    system: str
    n: int
    dt: float
    t_end: float
    initial: str
    seed: int = 0
    dealias: float = 2.0 / 3.0
    length: float = 2.0 * np.pi
    amplitude: float = 1.0
    band: int = 3
    snapshot_every: int = 0
    snapshot_diagnostics: bool = False
    sample_every: int = 1
    cfl_guard: float | None = None
    tracer_count: int = 0
    tracer_points: np.ndarray | None = None
    regions: list = field(default_factory=list)
    candidate_time: float | None = None
    window_fraction: float = 0.25

    def __post_init__(self):
        if self.system not in ("euler3d", "boussinesq2d"):
            raise ConfigError(f"unknown system {self.system!r}")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("t_end must be an integer multiple of dt")
        if round(steps) % self.sample_every != 0:
            raise ConfigError("sample_every must divide the number of steps")
        if self.candidate_time is None:
            self.candidate_time = self.t_end
        if self.candidate_time < self.t_end:
            raise ConfigError("candidate_time must be at least t_end")
        if self.initial not in solver.INITIAL_CONDITIONS:
            raise ConfigError(
                f"unknown initial condition {self.initial!r}; choose from {solver.INITIAL_CONDITIONS}"
            )
        for region in self.regions:
            if not region.is_global:
                if len(region.center) != self.dim:
                    raise ConfigError(f"region {region.label!r} center must have {self.dim} components")
                if not region.radius or region.radius <= 0:
                    raise ConfigError(f"region {region.label!r} needs a positive radius")

    @property
    def dim(self) -> int:
        return 3 if self.system == "euler3d" else 2

    @property
    def n_steps(self) -> int:
        return round(self.t_end / self.dt)

    def grid(self) -> GridSpec:
        return GridSpec(dim=self.dim, n=self.n, length=self.length, dealias=self.dealias)

    def all_regions(self) -> list:
        return [Region("global")] + list(self.regions)

    def to_echo(self) -> dict:
        return {
            "system": self.system,
            "n": self.n,
            "dealias": self.dealias,
            "length": self.length,
            "dt": self.dt,
            "t_end": self.t_end,
            "initial": self.initial,
            "amplitude": self.amplitude,
            "band": self.band,
            "seed": self.seed,
            "snapshot_every": self.snapshot_every,
            "snapshot_diagnostics": self.snapshot_diagnostics,
            "sample_every": self.sample_every,
            "cfl_guard": self.cfl_guard,
            "tracer_count": self.tracer_count,
            "tracer_points": None
            if self.tracer_points is None
            else np.asarray(self.tracer_points).tolist(),
            "regions": [r.to_dict() for r in self.all_regions()],
            "candidate_time": self.candidate_time,
            "window_fraction": self.window_fraction,
        }


def _parse_points(text: str, dim: int) -> np.ndarray:
    points = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        values = [float(v) for v in chunk.split(",")]
        if len(values) != dim:
            raise ConfigError(f"point {chunk!r} must have {dim} components")
        points.append(values)
    if not points:
        raise ConfigError("empty point list")
    return np.asarray(points)


def load_config(path: str | Path) -> RunConfig:
    """Parse the sectioned key-value run configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    try:
        run = parser["run"]
        grid_sec = parser["grid"] if parser.has_section("grid") else {}
        time_sec = parser["time"]
        initial = parser["initial"]
    except KeyError as exc:
        raise ConfigError(f"missing config section {exc}") from exc

    system = run.get("system", "").strip()
    dim = 3 if system == "euler3d" else 2
    tracer_count = 0
    tracer_points = None
    if parser.has_section("tracers"):
        sec = parser["tracers"]
        if "points" in sec:
            tracer_points = _parse_points(sec["points"], dim)
            tracer_count = tracer_points.shape[0]
        else:
            tracer_count = sec.getint("count", 0)

    regions = []
    if parser.has_section("regions"):
        for label, value in parser["regions"].items():
            try:
                center_text, radius_text = value.split(";")
                center = tuple(float(v) for v in center_text.split(","))
                radius = float(radius_text)
            except ValueError as exc:
                raise ConfigError(
                    f"region {label!r} must be 'c1,c2[,c3] ; radius', got {value!r}"
                ) from exc
            regions.append(Region(label=label, center=center, radius=radius))

    crit_sec = parser["criteria"] if parser.has_section("criteria") else {}

    def _getfloat(section, key, default=None):
        value = section.get(key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {value!r}") from exc

    try:
        return RunConfig(
            system=system,
            seed=int(run.get("seed", 0)),
            n=_require_int(grid_sec, "n"),
            dealias=_getfloat(grid_sec, "dealias", 2.0 / 3.0),
            length=_getfloat(grid_sec, "length", 2.0 * np.pi),
            dt=_require_float(time_sec, "dt"),
            t_end=_require_float(time_sec, "t_end"),
            snapshot_every=int(time_sec.get("snapshot_every", 0)),
            snapshot_diagnostics=str(time_sec.get("snapshot_diagnostics", "false")).lower()
            in ("1", "true", "yes"),
            sample_every=int(time_sec.get("sample_every", 1)),
            cfl_guard=_getfloat(time_sec, "cfl_guard", None),
            initial=initial.get("name", "").strip(),
            amplitude=_getfloat(initial, "amplitude", 1.0),
            band=int(initial.get("band", 3)),
            tracer_count=tracer_count,
            tracer_points=tracer_points,
            regions=regions,
            candidate_time=_getfloat(crit_sec, "candidate_time", None),
            window_fraction=_getfloat(crit_sec, "window_fraction", 0.25),
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _require_float(section, key) -> float:
    value = section.get(key)
    if value is None:
        raise ConfigError(f"missing required key {key!r}")
    return float(value)


def _require_int(section, key) -> int:
    value = section.get(key)
    if value is None:
        raise ConfigError(f"missing required key {key!r}")
    return int(value)


@dataclass
class RunResult:
    config: RunConfig
    times: np.ndarray
    report: dict
    records: list
    residual_summaries: dict
    bound_checks: dict
    final_state: object
    manifest: dict | None = None
    output_dir: Path | None = None


def _region_masks(grid: GridSpec, regions: list) -> dict:
    masks = {}
    for region in regions:
        if region.is_global or region.radius >= grid.length / 2.0:
            masks[region.label] = None
        else:
            dist = grid.periodic_distance(np.asarray(region.center, dtype=float))
            mask = dist <= region.radius
            if not np.any(mask):
                raise ConfigError(f"region {region.label!r} contains no grid points")
            masks[region.label] = mask
    return masks


def _sup(values: np.ndarray, mask) -> float:
    return float(np.max(values if mask is None else values[mask]))


def _tracer_seeds(config: RunConfig, grid: GridSpec) -> np.ndarray:
    if config.tracer_points is not None:
        return np.mod(np.asarray(config.tracer_points, dtype=float), grid.length)
    if config.tracer_count <= 0:
        return np.zeros((0, grid.dim))
    rng = np.random.default_rng(config.seed + 1)
    return rng.uniform(0.0, grid.length, size=(config.tracer_count, grid.dim))


def _sample_tracer_fields(grid: GridSpec, state, positions: np.ndarray):
    """Point samples of the velocity gradient, pressure Hessian, and carrier
    vector at tracer positions; returns (vec, mat, hess) arrays."""
    d = grid.dim
    uh = state.u.spectral
    theta = state.theta if d == 2 else None
    p = solve_pressure(state.u, theta)
    ph = p.spectral
    k = grid.wavenumbers

    stack = []
    for i in range(d):
        for j in range(d):
            stack.append(1j * k[i] * uh[j])  # d_i u_j
    hess_index = len(stack)
    for i in range(d):
        for j in range(i, d):
            stack.append(-(k[i] * k[j]) * ph)
    carrier_index = len(stack)
    if d == 2:
        th = theta.spectral
        stack.append(-1j * k[1] * th)
        stack.append(1j * k[0] * th)

    sampler = tracers.SpectralSampler(grid, positions)
    sampled = sampler.sample(np.stack(stack))

    npts = positions.shape[0]
    grad_u = np.empty((npts, d, d))
    idx = 0
    for i in range(d):
        for j in range(d):
            grad_u[:, i, j] = sampled[idx]
            idx += 1
    hess = np.empty((npts, d, d))
    idx = hess_index
    for i in range(d):
        for j in range(i, d):
            hess[:, i, j] = sampled[idx]
            hess[:, j, i] = sampled[idx]
            idx += 1
    if d == 3:
        sym = 0.5 * (grad_u + np.swapaxes(grad_u, 1, 2))
        skew = grad_u - sym
        vec = np.stack(
            [
                skew[:, 1, 2] - skew[:, 2, 1],
                skew[:, 2, 0] - skew[:, 0, 2],
                skew[:, 0, 1] - skew[:, 1, 0],
            ],
            axis=-1,
        )
        mat = sym
    else:
        vec = np.stack([sampled[carrier_index], sampled[carrier_index + 1]], axis=-1)
        mat = np.swapaxes(grad_u, 1, 2)  # Jacobian orientation
    return vec, mat, hess


SUP_QUANTITIES = (
    "alignment_negative",
    "stretch_excess",
    "carrier_sup",
    "hessian_direction_sup",
    "velocity_sup",
)


def run(config: RunConfig, output_dir: str | Path | None = None) -> RunResult:
    grid = config.grid()
    state = solver.initial_condition(
        config.initial, grid, seed=config.seed, amplitude=config.amplitude, band=config.band
    )
    stepper = solver.StepperConfig(dt=config.dt, cfl_guard=config.cfl_guard)
    regions = config.all_regions()
    masks = _region_masks(grid, regions)
    positions = _tracer_seeds(config, grid)
    seeds = positions.copy()
    n_tracers = positions.shape[0]

    theta0 = state.theta if config.dim == 2 else None
    diag0 = diag_field(state.u, solve_pressure(state.u, theta0), theta0)
    eps = 1e-12 * max(float(np.max(diag0.vec_mag)), 1.0)

    sample_times = []
    sup_series = {name: {r.label: [] for r in regions} for name in SUP_QUANTITIES}
    energy_series = []
    tail_series = []
    theta_l2_series = []
    theta_min = np.inf
    theta_max = -np.inf
    tracer_positions_hist = []
    tracer_vec = []
    tracer_mat = []
    tracer_hess = []
    snapshots = []

    out_dir = Path(output_dir) if output_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    def take_snapshot(step: int, current) -> None:
        if out_dir is None:
            return
        base = out_dir / "snapshots" / f"snap_{step:06d}"
        t = step * config.dt
        paths = list(save_field(Path(str(base) + "_velocity"), current.u, "velocity", t))
        theta_now = current.theta if config.dim == 2 else None
        if theta_now is not None:
            paths.extend(save_field(Path(str(base) + "_temperature"), theta_now, "temperature", t))
        p_now = solve_pressure(current.u, theta_now)
        paths.extend(save_field(Path(str(base) + "_pressure"), p_now, "pressure", t))
        if config.snapshot_diagnostics:
            diag = diag_field(current.u, p_now, theta_now, eps=eps)
            paths.extend(save_diagnostics(base, diag, t))
        snapshots.extend(paths)

    def sample(step: int, current, pos: np.ndarray) -> None:
        nonlocal theta_min, theta_max
        t = step * config.dt
        theta_now = current.theta if config.dim == 2 else None
        p = solve_pressure(current.u, theta_now)
        diag = diag_field(current.u, p, theta_now, eps=eps)
        velocity_mag = current.u.magnitude()
        values = {
            "alignment_negative": diag.align_negative,
            "stretch_excess": diag.stretch_excess,
            "carrier_sup": diag.vec_mag,
            "hessian_direction_sup": diag.p_xi_mag,
            "velocity_sup": velocity_mag,
        }
        for name, arr in values.items():
            for region in regions:
                sup_series[name][region.label].append(_sup(arr, masks[region.label]))
        sample_times.append(t)
        energy_series.append(solver.kinetic_energy(current.u))
        spectra = [current.u.spectral]
        if theta_now is not None:
            spectra.append(theta_now.spectral)
            theta_l2_series.append(solver.scalar_l2_norm(theta_now))
            theta_min = min(theta_min, float(np.min(theta_now.values)))
            theta_max = max(theta_max, float(np.max(theta_now.values)))
        tail_series.append(solver.spectral_tail_ratio(grid, *spectra))
        if n_tracers:
            vec, mat, hess = _sample_tracer_fields(grid, current, pos)
            tracer_positions_hist.append(pos.copy())
            tracer_vec.append(vec)
            tracer_mat.append(mat)
            tracer_hess.append(hess)

    for step_index in range(config.n_steps + 1):
        if step_index % config.sample_every == 0:
            sample(step_index, state, positions)
        want_snapshot = step_index in (0, config.n_steps) or (
            config.snapshot_every > 0 and step_index % config.snapshot_every == 0
        )
        if want_snapshot:
            take_snapshot(step_index, state)
        if step_index == config.n_steps:
            break
        try:
            if config.dim == 3:
                state, stages = solver.rk4_stages_euler(state, stepper)
            else:
                state, stages = solver.rk4_stages_boussinesq(state, stepper)
            if n_tracers:
                positions = tracers.advance_positions(grid, stages, positions, config.dt)
        except (solver.SolverError, tracers.TracerError) as exc:
            raise type(exc)(f"aborted at step {step_index}: {exc}") from exc

    times = np.asarray(sample_times)
    kind = "euler" if config.dim == 3 else "boussinesq"

    records = []
    residual_summaries = {}
    bound_aggregate = {}
    if n_tracers:
        vec = np.stack(tracer_vec)
        mat = np.stack(tracer_mat)
        hess = np.stack(tracer_hess)
        pos_hist = np.stack(tracer_positions_hist)
        series = tracers.diagnostics_series(kind, vec, mat, hess, eps)
        carrier_max = max(float(np.max(series["vec_mag"])), 1e-300)
        bound_tol = 1e-6 * carrier_max
        variants = ("lemma", "double-exp", "damped") if kind == "euler" else ("lemma", "double-exp")
        bound_aggregate = {
            v: {"min_margin": np.inf, "violations": 0, "tolerance": bound_tol} for v in variants
        }
        for p in range(n_tracers):
            record = tracers.TracerRecord(
                index=p,
                seed_point=seeds[p],
                kind=kind,
                times=times,
                positions=pos_hist[:, p],
                series={k: v[:, p] for k, v in series.items()},
            )
            if times.size >= 5:
                record.series["residuals"] = tracers.dynamical_residuals(record)
                for name, value in tracers.residual_summary(record.series["residuals"]).items():
                    residual_summaries[name] = max(residual_summaries.get(name, 0.0), value)
            record.series["bounds"] = {}
            for variant in variants:
                check = tracers.growth_bound_check(record, variant, bound_tol)
                record.series["bounds"][variant] = check
                agg = bound_aggregate[variant]
                agg["min_margin"] = min(agg["min_margin"], check.min_margin)
                agg["violations"] += check.violations
            records.append(record)
        for agg in bound_aggregate.values():
            agg["min_margin"] = float(agg["min_margin"])

    report = _build_report(
        config,
        times,
        sup_series,
        energy_series,
        tail_series,
        theta_l2_series,
        (theta_min, theta_max),
        residual_summaries,
        bound_aggregate,
    )

    manifest = None
    if out_dir is not None:
        files = list(snapshots)
        for record in records:
            path = out_dir / "tracers" / f"tracer_{record.index:03d}.csv"
            _write_tracer_csv(path, record)
            files.append(path)
        report_path = out_dir / "report.json"
        write_json(report_path, report)
        files.append(report_path)
        manifest = write_manifest(
            out_dir / "manifest.json",
            config.to_echo(),
            files,
            {
                "under_resolved": report["under_resolved"],
                "n_steps": config.n_steps,
                "tracer_seeds": seeds.tolist(),
            },
        )

    return RunResult(
        config=config,
        times=times,
        report=report,
        records=records,
        residual_summaries=residual_summaries,
        bound_checks=bound_aggregate,
        final_state=state,
        manifest=manifest,
        output_dir=out_dir,
    )


def _build_report(
    config: RunConfig,
    times: np.ndarray,
    sup_series: dict,
    energy_series: list,
    tail_series: list,
    theta_l2_series: list,
    theta_range: tuple,
    residual_summaries: dict,
    bound_aggregate: dict,
) -> dict:
    kind = "euler" if config.dim == 3 else "boussinesq"
    weight = "none" if kind == "euler" else "linear"
    threshold = 1.0 if kind == "euler" else 2.0
    horizon = config.candidate_time
    regions = config.all_regions()

    monitor_mask = times < horizon
    criteria_entries = []
    monitors = []
    bkm_entries = []
    for region in regions:
        label = region.label
        align = np.asarray(sup_series["alignment_negative"][label])
        stretch = np.asarray(sup_series["stretch_excess"][label])
        carrier = np.asarray(sup_series["carrier_sup"][label])
        velocity = np.asarray(sup_series["velocity_sup"][label])
        hess_dir = np.asarray(sup_series["hessian_direction_sup"][label])

        for name, series in (("alignment_negative", align), ("stretch_excess", stretch)):
            entry = crit.criterion_functional(
                times, series, weight=None if weight == "none" else weight,
                horizon=None if weight == "none" else horizon, region=label,
            ).to_dict()
            entry["name"] = name
            criteria_entries.append(entry)
            if np.any(monitor_mask):
                monitor = crit.type_one_monitor(
                    times[monitor_mask],
                    series[monitor_mask],
                    horizon=horizon,
                    threshold=threshold,
                    window_fraction=config.window_fraction,
                    region=label,
                ).to_dict()
                monitor["name"] = name
                monitor["samples_used"] = int(np.count_nonzero(monitor_mask))
                monitors.append(monitor)
        if kind == "euler":
            entry = crit.criterion_functional(times, 2.0 * hess_dir, region=label).to_dict()
            entry["name"] = "hessian_direction"
            entry["note"] = WEAKER_CRITERION_NOTE
            criteria_entries.append(entry)

        if kind == "euler":
            bkm_entries.append(
                {
                    "name": "carrier_supnorm_integral",
                    "region": label,
                    "weight": "none",
                    "value": crit.bkm_integral(times, carrier),
                }
            )
        else:
            bkm_entries.append(
                {
                    "name": "carrier_supnorm_integral",
                    "region": label,
                    "weight": "linear",
                    "horizon": horizon,
                    "value": crit.bkm_integral(times, carrier, weight="linear", horizon=horizon),
                }
            )
        bkm_entries.append(
            {
                "name": "velocity_supnorm_integral",
                "region": label,
                "weight": "none",
                "value": crit.bkm_integral(times, velocity),
            }
        )

    tail = np.asarray(tail_series)
    report = {
        "system": config.system,
        "kind": kind,
        "grid": {"dim": config.dim, "n": config.n, "length": config.length, "dealias": config.dealias},
        "time": {"dt": config.dt, "t_end": config.t_end, "sample_every": config.sample_every},
        "candidate_time": horizon,
        "monitor_threshold": threshold,
        "regions": [r.to_dict() for r in regions],
        "series": {
            "times": times.tolist(),
            "kinetic_energy": list(energy_series),
            "spectral_tail_ratio": tail.tolist(),
            "sup_norms": {
                name: {label: list(series) for label, series in per_region.items()}
                for name, per_region in sup_series.items()
            },
        },
        "criteria": criteria_entries,
        "type_one": monitors,
        "bkm": bkm_entries,
        "residual_summaries": residual_summaries,
        "bound_checks": bound_aggregate,
        "under_resolved": bool(np.any(tail > UNDER_RESOLVED_TAIL)),
    }
    if theta_l2_series:
        report["series"]["theta_l2"] = list(theta_l2_series)
        report["theta_range"] = [theta_range[0], theta_range[1]]
    return report


def _write_tracer_csv(path: Path, record: tracers.TracerRecord) -> None:
    s = record.series
    columns = {"time": record.times}
    for axis in range(record.positions.shape[1]):
        columns[f"x{axis + 1}"] = record.positions[:, axis]
    columns["carrier_mag"] = s["vec_mag"]
    columns["alpha"] = s["alpha"]
    columns["rho"] = s["rho"]
    columns["align"] = s["align"]
    columns["stretch_balance"] = s["stretch_balance"]
    for name, series in s.get("residuals", {}).items():
        columns[f"residual_{name}"] = series
    for variant, check in s.get("bounds", {}).items():
        columns[f"margin_{variant.replace('-', '_')}"] = check.margins
    write_csv(path, columns)


__all__ = [
    "ConfigError",
    "Region",
    "RunConfig",
    "RunResult",
    "load_config",
    "run",
    "UNDER_RESOLVED_TAIL",
    "WEAKER_CRITERION_NOTE",
]
