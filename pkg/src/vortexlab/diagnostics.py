"""Pointwise geometric diagnostics of the velocity gradient and pressure Hessian.

The same direction-field construction serves both settings:

* 3D flow: the carrier vector is the vorticity, the matrix is the strain S.
* 2D buoyant flow: the carrier vector is the perpendicular temperature
  gradient, the matrix is the full velocity Jacobian J[i, j] = d_j u_i
  (its symmetric part is never taken; the transport of the carrier vector
  requires the Jacobian orientation, not the gradient-transpose).

Degeneracy convention: where the carrier vector vanishes, every derived
quantity is zero; where additionally only the stretched vector vanishes,
the stretching direction and the alignment scalar are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, VectorField, gradient, hessian, perp_gradient
from .grid import GridSpec


def sharp_bracket(f, sign: str):
    """Positive part for sign='plus' ([f]+ = max(f, 0)), negative part for 'minus'."""
    if sign == "plus":
        return np.maximum(f, 0.0)
    if sign == "minus":
        return np.maximum(-f, 0.0)
    raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")


def positive_part(f):
    return np.maximum(f, 0.0)


def negative_part(f):
    return np.maximum(-f, 0.0)


def strain_rotation_split(grad_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a velocity-gradient matrix into symmetric and skew parts."""
    grad_u = np.asarray(grad_u, dtype=float)
    if not np.all(np.isfinite(grad_u)):
        raise ValueError("velocity gradient has non-finite entries")
    sym = 0.5 * (grad_u + np.swapaxes(grad_u, -1, -2))
    skew = grad_u - sym
    return sym, skew


def vorticity_from_rotation(omega_mat: np.ndarray, skew_tol: float = 1e-12) -> np.ndarray:
    """Recover the vorticity vector from the skew part of the velocity gradient."""
    omega_mat = np.asarray(omega_mat, dtype=float)
    if omega_mat.shape[-2:] != (3, 3):
        raise ValueError("rotation matrix must be 3x3")
    scale = max(float(np.max(np.abs(omega_mat))), 1.0)
    asym = np.max(np.abs(omega_mat + np.swapaxes(omega_mat, -1, -2)))
    if asym > skew_tol * scale:
        raise ValueError(f"matrix is not skew-symmetric (defect {asym:.3e})")
    w1 = omega_mat[..., 1, 2] - omega_mat[..., 2, 1]
    w2 = omega_mat[..., 2, 0] - omega_mat[..., 0, 2]
    w3 = omega_mat[..., 0, 1] - omega_mat[..., 1, 0]
    return np.stack([w1, w2, w3], axis=-1)


def rotation_from_vorticity(omega: np.ndarray) -> np.ndarray:
    """Skew matrix whose contraction with the alternating tensor gives omega back."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros(omega.shape[:-1] + (3, 3))
    out[..., 0, 1] = 0.5 * omega[..., 2]
    out[..., 1, 0] = -0.5 * omega[..., 2]
    out[..., 0, 2] = -0.5 * omega[..., 1]
    out[..., 2, 0] = 0.5 * omega[..., 1]
    out[..., 1, 2] = 0.5 * omega[..., 0]
    out[..., 2, 1] = -0.5 * omega[..., 0]
    return out


def direction_quantities(vec: np.ndarray, mat: np.ndarray, hess: np.ndarray, eps: float) -> dict:
    """Direction fields and alignment scalars for batched pointwise inputs.

    vec has shape (..., d); mat and hess have shape (..., d, d). Returns a
    dict of arrays over the batch shape. `unit_stretch_mag` is the magnitude
    of mat applied to the unit carrier direction.
    """
    vec = np.asarray(vec, dtype=float)
    mat = np.asarray(mat, dtype=float)
    hess = np.asarray(hess, dtype=float)
    vmag = np.linalg.norm(vec, axis=-1)
    active = vmag > eps
    denom = np.where(active, vmag, 1.0)
    xi = vec / denom[..., None] * active[..., None]

    m_xi = np.einsum("...ij,...j->...i", mat, xi)
    alpha = np.einsum("...i,...i->...", xi, m_xi)
    smag = np.linalg.norm(m_xi, axis=-1)
    stretch_active = active & (smag > eps)
    denom2 = np.where(stretch_active, smag, 1.0)
    zeta = m_xi / denom2[..., None] * stretch_active[..., None]

    p_xi = np.einsum("...ij,...j->...i", hess, xi)
    rho = np.einsum("...i,...i->...", xi, p_xi)
    align = np.einsum("...i,...i->...", zeta, p_xi)
    stretch_balance = (smag**2 - 2.0 * alpha**2 - rho) * active

    return {
        "vec_mag": vmag,
        "active": active,
        "stretch_active": stretch_active,
        "xi": xi,
        "zeta": zeta,
        "alpha": alpha * active,
        "rho": rho * active,
        "align": align,
        "stretch_balance": stretch_balance,
        "unit_stretch_mag": smag * active,
        "stretch_vec_mag": smag * vmag * active,
        "p_xi": p_xi,
        "p_xi_mag": np.linalg.norm(p_xi, axis=-1),
    }


@dataclass(frozen=True)
class EulerPointDiag:
    S: np.ndarray
    Omega: np.ndarray
    omega: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    alpha: float
    rho: float
    align: float
    stretch_balance: float


@dataclass(frozen=True)
class BoussinesqPointDiag:
    U: np.ndarray
    g: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    alpha: float
    rho: float
    align: float
    stretch_balance: float


def euler_directions(omega: np.ndarray, S: np.ndarray, P: np.ndarray, eps: float = 0.0) -> EulerPointDiag:
    """Pointwise 3D diagnostics from vorticity, strain, and pressure Hessian."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    q = direction_quantities(np.asarray(omega, float), np.asarray(S, float), np.asarray(P, float), eps)
    return EulerPointDiag(
        S=np.asarray(S, float),
        Omega=rotation_from_vorticity(omega),
        omega=np.asarray(omega, float),
        xi=q["xi"],
        zeta=q["zeta"],
        alpha=float(q["alpha"]),
        rho=float(q["rho"]),
        align=float(q["align"]),
        stretch_balance=float(q["stretch_balance"]),
    )


def boussinesq_directions(g: np.ndarray, U: np.ndarray, P: np.ndarray, eps: float = 0.0) -> BoussinesqPointDiag:
    """Pointwise 2D diagnostics; U is the velocity Jacobian U[i, j] = d_j u_i."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    q = direction_quantities(np.asarray(g, float), np.asarray(U, float), np.asarray(P, float), eps)
    return BoussinesqPointDiag(
        U=np.asarray(U, float),
        g=np.asarray(g, float),
        xi=q["xi"],
        zeta=q["zeta"],
        alpha=float(q["alpha"]),
        rho=float(q["rho"]),
        align=float(q["align"]),
        stretch_balance=float(q["stretch_balance"]),
    )


@dataclass(frozen=True)
class DiagnosticField:
    """Grid-sampled diagnostics; scalar entries have grid shape, vectors carry
    a trailing component axis."""

    kind: str
    grid: GridSpec
    eps: float
    vec: np.ndarray
    mat: np.ndarray
    hess: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray
    align: np.ndarray
    stretch_balance: np.ndarray
    vec_mag: np.ndarray
    stretch_vec_mag: np.ndarray
    p_xi_mag: np.ndarray
    active: np.ndarray

    @property
    def align_negative(self) -> np.ndarray:
        return negative_part(self.align)

    @property
    def stretch_excess(self) -> np.ndarray:
        return positive_part(self.stretch_balance)

    def scalar_field(self, values: np.ndarray) -> ScalarField:
        return ScalarField(self.grid, values)


def diag_field(
    u: VectorField,
    p: ScalarField,
    theta: ScalarField | None = None,
    eps: float | None = None,
) -> DiagnosticField:
    """Evaluate the pointwise diagnostics over the whole grid.

    3D input gives the vorticity/strain diagnostics; 2D input requires the
    temperature field and gives the perpendicular-gradient/Jacobian ones.
    """
    grid = u.grid
    if p.grid != grid or (theta is not None and theta.grid != grid):
        raise ValueError("fields must share one grid")
    grad_u = gradient(u).values
    hess_p = hessian(p).values
    if grid.dim == 3:
        kind = "euler"
        sym, skew = strain_rotation_split(np.moveaxis(grad_u, (0, 1), (-2, -1)))
        mat = sym
        vec = vorticity_from_rotation(skew)
    else:
        if theta is None:
            raise ValueError("2D diagnostics require the temperature field")
        kind = "boussinesq"
        # Jacobian orientation: J[i, j] = d_j u_i, i.e. the transpose of grad_u
        mat = np.moveaxis(grad_u, (0, 1), (-1, -2))
        vec = np.moveaxis(perp_gradient(theta).values, 0, -1)
    hess_pt = np.moveaxis(hess_p, (0, 1), (-2, -1))

    if eps is None:
        vmax = float(np.max(np.linalg.norm(vec, axis=-1)))
        eps = 1e-12 * vmax
    q = direction_quantities(vec, mat, hess_pt, eps)
    return DiagnosticField(
        kind=kind,
        grid=grid,
        eps=eps,
        vec=vec,
        mat=mat,
        hess=hess_pt,
        xi=q["xi"],
        zeta=q["zeta"],
        alpha=q["alpha"],
        rho=q["rho"],
        align=q["align"],
        stretch_balance=q["stretch_balance"],
        vec_mag=q["vec_mag"],
        stretch_vec_mag=q["stretch_vec_mag"],
        p_xi_mag=q["p_xi_mag"],
        active=q["active"],
    )


__all__ = [
    "sharp_bracket",
    "positive_part",
    "negative_part",
    "strain_rotation_split",
    "vorticity_from_rotation",
    "rotation_from_vorticity",
    "direction_quantities",
    "EulerPointDiag",
    "BoussinesqPointDiag",
    "euler_directions",
    "boussinesq_directions",
    "DiagnosticField",
    "diag_field",
]
