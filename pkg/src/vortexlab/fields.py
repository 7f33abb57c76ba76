"""Scalar/vector/tensor fields on a periodic grid and their spectral operators.

Fields are immutable: the sample array is frozen at construction and the
spectral mirror is cached on first use. Differentiation is exact for the
trigonometric interpolant; the 2/3-rule truncation is applied to nonlinear
products only (here: the pressure source), never to plain derivatives.
"""

from __future__ import annotations

import numpy as np

from .grid import GridSpec


class FieldError(ValueError):
    """Invalid field construction or operation."""


class DivergenceError(FieldError):
    """Velocity field is not divergence-free to the required tolerance."""


class EmptyRegionError(FieldError):
    """A ball region contains no grid points."""


class _Field:
    """Shared machinery for grid-sampled fields; do not instantiate directly."""

    rank = -1

    def __init__(self, grid: GridSpec, values: np.ndarray, _spectral: np.ndarray | None = None):
        values = np.asarray(values, dtype=np.float64)
        expected = (grid.dim,) * self.rank + grid.shape
        if values.shape != expected:
            raise FieldError(
                f"{type(self).__name__} expects shape {expected}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
            raise FieldError(f"{type(self).__name__} has {bad} non-finite sample(s)")
        values = values.copy()
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self._spectral = _spectral

    @classmethod
    def from_spectral(cls, grid: GridSpec, coeffs: np.ndarray):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        expected = (grid.dim,) * cls.rank + grid.shape
        if coeffs.shape != expected:
            raise FieldError(f"{cls.__name__} spectral shape {expected} expected, got {coeffs.shape}")
        values = grid.ifftn(coeffs)
        return cls(grid, values, _spectral=coeffs.copy())

    @property
    def spectral(self) -> np.ndarray:
        """Cached forward transform of the samples."""
        if self._spectral is None:
            self._spectral = self.grid.fftn(self.values)
        return self._spectral

    def magnitude(self) -> np.ndarray:
        """Pointwise magnitude: |f| for scalars, Euclidean/Frobenius norm otherwise."""
        if self.rank == 0:
            return np.abs(self.values)
        comp_axes = tuple(range(self.rank))
        return np.sqrt(np.sum(self.values**2, axis=comp_axes))

    def __eq__(self, other) -> bool:
        return (
            type(self) is type(other)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )


class ScalarField(_Field):
    rank = 0


class VectorField(_Field):
    rank = 1


class TensorField(_Field):
    rank = 2


def _derivative_coeffs(grid: GridSpec, coeffs: np.ndarray, axis: int) -> np.ndarray:
    """Spectral derivative along one spatial axis of trailing-grid-shaped coeffs."""
    k = grid.wavenumbers[axis]
    return 1j * k * coeffs


def gradient(field: ScalarField | VectorField) -> VectorField | TensorField:
    """Spectral gradient.

    For a scalar f returns the vector (d_i f). For a vector u returns the
    tensor G with G[i, j] = d_i u_j.
    """
    grid = field.grid
    if isinstance(field, ScalarField):
        fh = field.spectral
        out = np.empty((grid.dim,) + grid.shape, dtype=np.complex128)
        for i in range(grid.dim):
            out[i] = _derivative_coeffs(grid, fh, i)
        return VectorField.from_spectral(grid, out)
    if isinstance(field, VectorField):
        uh = field.spectral
        out = np.empty((grid.dim, grid.dim) + grid.shape, dtype=np.complex128)
        for i in range(grid.dim):
            for j in range(grid.dim):
                out[i, j] = _derivative_coeffs(grid, uh[j], i)
        return TensorField.from_spectral(grid, out)
    raise FieldError("gradient expects a ScalarField or VectorField")


def divergence(u: VectorField) -> ScalarField:
    grid = u.grid
    uh = u.spectral
    div = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(grid.dim):
        div += _derivative_coeffs(grid, uh[i], i)
    return ScalarField.from_spectral(grid, div)


def curl(u: VectorField) -> VectorField | ScalarField:
    """Curl of u: a vector in 3D, the scalar d1 u2 - d2 u1 in 2D."""
    grid = u.grid
    uh = u.spectral
    if grid.dim == 3:
        out = np.empty((3,) + grid.shape, dtype=np.complex128)
        out[0] = _derivative_coeffs(grid, uh[2], 1) - _derivative_coeffs(grid, uh[1], 2)
        out[1] = _derivative_coeffs(grid, uh[0], 2) - _derivative_coeffs(grid, uh[2], 0)
        out[2] = _derivative_coeffs(grid, uh[1], 0) - _derivative_coeffs(grid, uh[0], 1)
        return VectorField.from_spectral(grid, out)
    w = _derivative_coeffs(grid, uh[1], 0) - _derivative_coeffs(grid, uh[0], 1)
    return ScalarField.from_spectral(grid, w)


def perp_gradient(theta: ScalarField) -> VectorField:
    """Perpendicular gradient (-d2 theta, d1 theta); defined in 2D only."""
    grid = theta.grid
    if grid.dim != 2:
        raise FieldError("perp_gradient is defined for 2D grids only")
    th = theta.spectral
    out = np.empty((2,) + grid.shape, dtype=np.complex128)
    out[0] = -_derivative_coeffs(grid, th, 1)
    out[1] = _derivative_coeffs(grid, th, 0)
    return VectorField.from_spectral(grid, out)


def hessian(p: ScalarField) -> TensorField:
    """Second-derivative tensor of p; each unordered pair computed once."""
    grid = p.grid
    ph = p.spectral
    out = np.empty((grid.dim, grid.dim) + grid.shape, dtype=np.complex128)
    for i in range(grid.dim):
        ki = grid.wavenumbers[i]
        for j in range(i, grid.dim):
            kj = grid.wavenumbers[j]
            out[i, j] = -(ki * kj) * ph
            if j != i:
                out[j, i] = out[i, j]
    return TensorField.from_spectral(grid, out)


def max_divergence(u: VectorField) -> tuple[float, tuple[int, ...]]:
    """Max |div u| over the grid and the index where it is attained."""
    div = divergence(u).values
    idx = np.unravel_index(np.argmax(np.abs(div)), div.shape)
    return float(np.abs(div[idx])), tuple(int(i) for i in idx)


def solve_pressure(
    u: VectorField,
    theta: ScalarField | None = None,
    div_tol: float = 1e-8,
) -> ScalarField:
    """Recover the mean-zero pressure from the velocity (and buoyancy in 2D).

    Solves lap(p) = -d_i u_j d_j u_i (+ d_2 theta when a 2D buoyancy field
    is supplied). The quadratic source is dealiased before inversion.
    """
    grid = u.grid
    worst, idx = max_divergence(u)
    if worst > div_tol:
        coords = tuple(float(grid.axis_coords[i]) for i in idx)
        raise DivergenceError(
            f"velocity divergence {worst:.3e} exceeds {div_tol:.1e} "
            f"at grid index {idx}, x = {coords}"
        )
    if theta is not None and grid.dim != 2:
        raise FieldError("buoyancy source is supported on 2D grids only")

    grad_u = gradient(u).values
    source = -np.einsum("ij...,ji...->...", grad_u, grad_u)
    source_hat = grid.truncate(grid.fftn(source))
    if theta is not None:
        source_hat = source_hat + _derivative_coeffs(grid, theta.spectral, 1)
    p_hat = -source_hat * grid.inv_k_square
    return ScalarField.from_spectral(grid, p_hat)


def project_divergence_free(u: VectorField) -> VectorField:
    """Leray projection onto divergence-free fields (mean flow untouched)."""
    grid = u.grid
    uh = project_spectral(grid, u.spectral.copy())
    return VectorField.from_spectral(grid, uh)


def project_spectral(grid: GridSpec, uh: np.ndarray) -> np.ndarray:
    """In-place Leray projection of spectral velocity coefficients."""
    k_dot_u = np.zeros(grid.shape, dtype=np.complex128)
    for i in range(grid.dim):
        k_dot_u += grid.wavenumbers[i] * uh[i]
    k_dot_u *= grid.inv_k_square
    for i in range(grid.dim):
        uh[i] -= grid.wavenumbers[i] * k_dot_u
    return uh


def region_sup_norm(field: _Field, center, radius: float) -> float:
    """Max pointwise magnitude over the periodic ball B(center, radius).

    A radius of at least half the period covers every grid point, so the
    result equals the global sup exactly in that case.
    """
    if radius <= 0:
        raise FieldError("radius must be positive")
    mag = field.magnitude()
    grid = field.grid
    if radius >= grid.length / 2.0:
        return float(np.max(mag))
    dist = grid.periodic_distance(np.asarray(center, dtype=float))
    mask = dist <= radius
    if not np.any(mask):
        raise EmptyRegionError(
            f"ball of radius {radius:g} around {tuple(np.asarray(center, float))} "
            f"contains no grid points (spacing {grid.dx:g})"
        )
    return float(np.max(mag[mask]))


__all__ = [
    "ScalarField",
    "VectorField",
    "TensorField",
    "FieldError",
    "DivergenceError",
    "EmptyRegionError",
    "gradient",
    "divergence",
    "curl",
    "perp_gradient",
    "hessian",
    "max_divergence",
    "solve_pressure",
    "project_divergence_free",
    "project_spectral",
    "region_sup_norm",
]
