"""Pseudo-spectral time integration of incompressible flow on the torus.

3D: inviscid momentum transport with the nonlinearity in rotational form
(u x curl u), which is a pure gradient away from the divergence-free part
and therefore conserves kinetic energy up to time-integration error.

2D: the same transport plus a vertical buoyancy force from an advected
temperature field. The mean (zero-mode) force is removed, i.e. the solver
works in the frame of the mean flow; on a periodic box a nonzero mean
buoyancy cannot be balanced by a periodic pressure and would only
accelerate the box average.

Time stepping is classical RK4 with a fixed step; quadratic terms are
dealiased with the grid's truncation rule before projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, VectorField, project_spectral
from .grid import GridSpec

INITIAL_CONDITIONS = (
    "taylor-green-3d",
    "taylor-green-2d",
    "taylor-green-2d-embedded",
    "boussinesq-bubble",
    "random-band-limited",
)


class SolverError(RuntimeError):
    """Time integration failure."""


class CflError(SolverError):
    """Advective CFL guard tripped."""


class NonFiniteStateError(SolverError):
    """NaN or Inf detected in the evolved state."""


@dataclass(frozen=True)
class StepperConfig:
    """Fixed-step RK4 configuration; cfl_guard caps max|u| dt / dx when set."""

    dt: float
    cfl_guard: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.cfl_guard is not None and not self.cfl_guard > 0:
            raise ValueError("cfl_guard must be positive when set")


@dataclass(frozen=True)
class EulerState:
    time: float
    u: VectorField


@dataclass(frozen=True)
class BoussinesqState:
    time: float
    u: VectorField
    theta: ScalarField


def _vorticity_spectral(grid: GridSpec, uh: np.ndarray) -> np.ndarray:
    k = grid.wavenumbers
    if grid.dim == 3:
        wh = np.empty_like(uh)
        wh[0] = 1j * (k[1] * uh[2] - k[2] * uh[1])
        wh[1] = 1j * (k[2] * uh[0] - k[0] * uh[2])
        wh[2] = 1j * (k[0] * uh[1] - k[1] * uh[0])
        return wh
    return 1j * (k[0] * uh[1] - k[1] * uh[0])


def _euler_rhs(grid: GridSpec, uh: np.ndarray) -> tuple[np.ndarray, float]:
    """Projected spectral tendency of the 3D momentum equation; also max|u|."""
    u = grid.ifftn(uh)
    w = grid.ifftn(_vorticity_spectral(grid, uh))
    force = np.empty_like(u)
    force[0] = u[1] * w[2] - u[2] * w[1]
    force[1] = u[2] * w[0] - u[0] * w[2]
    force[2] = u[0] * w[1] - u[1] * w[0]
    fh = grid.truncate(grid.fftn(force))
    project_spectral(grid, fh)
    fh[(slice(None),) + (0,) * grid.dim] = 0.0
    umax = float(np.max(np.sqrt(np.sum(u**2, axis=0))))
    return fh, umax


def _boussinesq_rhs(
    grid: GridSpec, uh: np.ndarray, th: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Projected tendencies of 2D momentum (with buoyancy) and temperature."""
    u = grid.ifftn(uh)
    w = grid.ifftn(_vorticity_spectral(grid, uh))
    force = np.empty_like(u)
    force[0] = w * u[1]
    force[1] = -w * u[0]
    fh = grid.truncate(grid.fftn(force))
    fh[1] += th
    project_spectral(grid, fh)
    fh[(slice(None),) + (0,) * grid.dim] = 0.0

    k = grid.wavenumbers
    grad_th = np.empty_like(u)
    grad_th[0] = grid.ifftn(1j * k[0] * th)
    grad_th[1] = grid.ifftn(1j * k[1] * th)
    adv = -(u[0] * grad_th[0] + u[1] * grad_th[1])
    th_rhs = grid.truncate(grid.fftn(adv))
    umax = float(np.max(np.sqrt(np.sum(u**2, axis=0))))
    return fh, th_rhs, umax


def _check_cfl(grid: GridSpec, config: StepperConfig, umax: float) -> None:
    if config.cfl_guard is not None:
        cfl = umax * config.dt / grid.dx
        if cfl > config.cfl_guard:
            raise CflError(f"CFL number {cfl:.3f} exceeds guard {config.cfl_guard:.3f}")


def _check_finite(*arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise NonFiniteStateError("non-finite values in evolved state")


def rk4_stages_euler(state: EulerState, config: StepperConfig):
    """One RK4 step; returns the new state and the four (time, uh) stages."""
    grid = state.u.grid
    dt = config.dt
    t0 = state.time
    uh = state.u.spectral

    k1, umax = _euler_rhs(grid, uh)
    _check_cfl(grid, config, umax)
    s2 = uh + 0.5 * dt * k1
    k2, _ = _euler_rhs(grid, s2)
    s3 = uh + 0.5 * dt * k2
    k3, _ = _euler_rhs(grid, s3)
    s4 = uh + dt * k3
    k4, _ = _euler_rhs(grid, s4)
    uh_new = uh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(uh_new)
    new_state = EulerState(time=t0 + dt, u=VectorField.from_spectral(grid, uh_new))
    stages = [(t0, uh), (t0 + 0.5 * dt, s2), (t0 + 0.5 * dt, s3), (t0 + dt, s4)]
    return new_state, stages


def rk4_stages_boussinesq(state: BoussinesqState, config: StepperConfig):
    grid = state.u.grid
    dt = config.dt
    t0 = state.time
    uh = state.u.spectral
    th = state.theta.spectral

    ku1, kt1, umax = _boussinesq_rhs(grid, uh, th)
    _check_cfl(grid, config, umax)
    su2, st2 = uh + 0.5 * dt * ku1, th + 0.5 * dt * kt1
    ku2, kt2, _ = _boussinesq_rhs(grid, su2, st2)
    su3, st3 = uh + 0.5 * dt * ku2, th + 0.5 * dt * kt2
    ku3, kt3, _ = _boussinesq_rhs(grid, su3, st3)
    su4, st4 = uh + dt * ku3, th + dt * kt3
    ku4, kt4, _ = _boussinesq_rhs(grid, su4, st4)
    uh_new = uh + (dt / 6.0) * (ku1 + 2.0 * ku2 + 2.0 * ku3 + ku4)
    th_new = th + (dt / 6.0) * (kt1 + 2.0 * kt2 + 2.0 * kt3 + kt4)
    _check_finite(uh_new, th_new)
    new_state = BoussinesqState(
        time=t0 + dt,
        u=VectorField.from_spectral(grid, uh_new),
        theta=ScalarField.from_spectral(grid, th_new),
    )
    stages = [(t0, uh), (t0 + 0.5 * dt, su2), (t0 + 0.5 * dt, su3), (t0 + dt, su4)]
    return new_state, stages


def step_euler(state: EulerState, config: StepperConfig) -> EulerState:
    """Advance a 3D state by one RK4 step."""
    new_state, _ = rk4_stages_euler(state, config)
    return new_state


def step_boussinesq(state: BoussinesqState, config: StepperConfig) -> BoussinesqState:
    """Advance a 2D buoyant state by one RK4 step."""
    new_state, _ = rk4_stages_boussinesq(state, config)
    return new_state


def initial_condition(
    name: str,
    grid: GridSpec,
    seed: int | None = None,
    amplitude: float = 1.0,
    band: int = 3,
):
    """Named divergence-free, band-limited initial states."""
    x = grid.coords
    if name == "taylor-green-3d":
        if grid.dim != 3:
            raise ValueError("taylor-green-3d requires a 3D grid")
        u = amplitude * np.stack(
            [
                np.sin(x[0]) * np.cos(x[1]) * np.cos(x[2]),
                -np.cos(x[0]) * np.sin(x[1]) * np.cos(x[2]),
                np.zeros(grid.shape),
            ]
        )
        return EulerState(time=0.0, u=VectorField(grid, u))
    if name == "taylor-green-2d-embedded":
        if grid.dim != 3:
            raise ValueError("taylor-green-2d-embedded requires a 3D grid")
        u = amplitude * np.stack(
            [
                np.cos(x[0]) * np.sin(x[1]),
                -np.sin(x[0]) * np.cos(x[1]),
                np.zeros(grid.shape),
            ]
        )
        return EulerState(time=0.0, u=VectorField(grid, u))
    if name == "taylor-green-2d":
        if grid.dim != 2:
            raise ValueError("taylor-green-2d requires a 2D grid")
        u = amplitude * np.stack([np.cos(x[0]) * np.sin(x[1]), -np.sin(x[0]) * np.cos(x[1])])
        theta = ScalarField(grid, np.zeros(grid.shape))
        return BoussinesqState(time=0.0, u=VectorField(grid, u), theta=theta)
    if name == "boussinesq-bubble":
        if grid.dim != 2:
            raise ValueError("boussinesq-bubble requires a 2D grid")
        u = VectorField(grid, np.zeros((2,) + grid.shape))
        theta = ScalarField(grid, amplitude * np.sin(x[0]) * np.sin(x[1]))
        return BoussinesqState(time=0.0, u=u, theta=theta)
    if name == "random-band-limited":
        if seed is None:
            raise ValueError("random-band-limited requires a seed")
        rng = np.random.default_rng(seed)
        uh = grid.fftn(rng.standard_normal((grid.dim,) + grid.shape))
        mask = np.ones(grid.shape, dtype=bool)
        low = np.zeros(grid.shape, dtype=bool)
        unit = 2.0 * np.pi / grid.length
        for k in grid.wavenumbers:
            mask &= np.abs(k) <= band * unit * (1 + 1e-12)
            low |= np.abs(k) >= 0.5 * unit
        mask &= low
        uh *= mask
        project_spectral(grid, uh)
        u = grid.ifftn(uh)
        umax = np.max(np.sqrt(np.sum(u**2, axis=0)))
        if umax > 0:
            u *= amplitude / umax
        if grid.dim == 3:
            return EulerState(time=0.0, u=VectorField(grid, u))
        th = grid.fftn(rng.standard_normal(grid.shape)) * mask
        theta = grid.ifftn(th)
        tmax = np.max(np.abs(theta))
        if tmax > 0:
            theta *= amplitude / tmax
        return BoussinesqState(time=0.0, u=VectorField(grid, u), theta=ScalarField(grid, theta))
    raise ValueError(f"unknown initial condition {name!r}; choose from {INITIAL_CONDITIONS}")


def kinetic_energy(u: VectorField) -> float:
    """0.5 integral of |u|^2 over the box."""
    grid = u.grid
    return 0.5 * float(np.sum(u.values**2)) * grid.dx**grid.dim


def scalar_l2_norm(f: ScalarField) -> float:
    grid = f.grid
    return float(np.sqrt(np.sum(f.values**2) * grid.dx**grid.dim))


def spectral_tail_ratio(grid: GridSpec, *spectral_arrays: np.ndarray) -> float:
    """Energy fraction carried by the outer retained wavenumber band.

    Values above ~1e-3 indicate the resolution is being exhausted and runs
    should be flagged as under-resolved.
    """
    outer = np.zeros(grid.shape, dtype=bool)
    cut = 0.75 * grid.k_cutoff
    for k in grid.wavenumbers:
        outer |= np.abs(k) >= cut
    outer &= grid.dealias_mask
    total = 0.0
    tail = 0.0
    for arr in spectral_arrays:
        e = np.abs(arr) ** 2
        if e.ndim > grid.dim:
            e = np.sum(e, axis=tuple(range(e.ndim - grid.dim)))
        total += float(np.sum(e[grid.dealias_mask]))
        tail += float(np.sum(e[outer]))
    return tail / total if total > 0 else 0.0


__all__ = [
    "INITIAL_CONDITIONS",
    "SolverError",
    "CflError",
    "NonFiniteStateError",
    "StepperConfig",
    "EulerState",
    "BoussinesqState",
    "step_euler",
    "step_boussinesq",
    "rk4_stages_euler",
    "rk4_stages_boussinesq",
    "initial_condition",
    "kinetic_energy",
    "scalar_l2_norm",
    "spectral_tail_ratio",
]
