"""Randomized algebraic verification of the direction-field identities.

Every check here is pure matrix/vector algebra on a sample (S, P, v): no PDE
solve is involved. The material-derivative proxies are defined directly from
the sample,

    rate of |v|        := alpha |v|
    rate of direction  := S xi - alpha xi
    rate of |S v|      := -(zeta . P xi) |v|
    rate of zeta       := (-P xi + (zeta . P xi) zeta) / |S xi|

and the checks confirm the Pythagoras-type identities, the orthogonal
decomposition of P xi, and the sqrt(2)/sqrt(3) differential inequalities
these proxies satisfy. In 2D the matrix is a full (nonsymmetric) velocity
Jacobian; in 3D it is a symmetric strain. Either way the trace is zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

RESIDUAL_FLOOR = 1e-14
IDENTITY_TOL = 1e-10
INEQUALITY_TOL = 1e-12

IDENTITY_NAMES = (
    "vorticity_pythagoras",
    "strain_pythagoras",
    "three_term",
    "decomposition",
    "decomposition_projected",
    "alignment_rate",
    "xi_orthogonality",
    "zeta_orthogonality",
)
INEQUALITY_NAMES = ("two_term_vec", "two_term_stretch", "three_term_bound")


def _norm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, axis=-1)


@dataclass(frozen=True)
class AlgebraicSample:
    """Batch of (matrix, Hessian, carrier vector) samples with derived proxies.

    S has shape (m, d, d) and zero trace, P is symmetric (m, d, d), v is
    (m, d). Scalar-derived quantities have shape (m,).
    """

    S: np.ndarray
    P: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        S = np.atleast_3d(np.asarray(self.S, dtype=float))
        P = np.atleast_3d(np.asarray(self.P, dtype=float))
        v = np.atleast_2d(np.asarray(self.v, dtype=float))
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "v", v)
        m, d = v.shape
        if S.shape != (m, d, d) or P.shape != (m, d, d):
            raise ValueError("shape mismatch between S, P, v")
        scale = np.maximum(np.abs(S).max(axis=(1, 2)), 1.0)
        if np.any(np.abs(np.trace(S, axis1=1, axis2=2)) > 1e-12 * scale):
            raise ValueError("S must be trace-free")
        if np.max(np.abs(P - np.swapaxes(P, 1, 2))) > 1e-12 * max(np.abs(P).max(), 1.0):
            raise ValueError("P must be symmetric")

    @property
    def size(self) -> int:
        return self.v.shape[0]

    @property
    def dim(self) -> int:
        return self.v.shape[1]

    @cached_property
    def vec_mag(self):
        return _norm(self.v)

    @cached_property
    def ok_vec(self):
        return self.vec_mag > 0.0

    @cached_property
    def xi(self):
        denom = np.where(self.ok_vec, self.vec_mag, 1.0)
        return self.v / denom[:, None] * self.ok_vec[:, None]

    @cached_property
    def m_xi(self):
        return np.einsum("mij,mj->mi", self.S, self.xi)

    @cached_property
    def alpha(self):
        return np.einsum("mi,mi->m", self.xi, self.m_xi)

    @cached_property
    def unit_stretch_mag(self):
        return _norm(self.m_xi)

    @cached_property
    def ok_stretch(self):
        return self.ok_vec & (self.unit_stretch_mag > 0.0)

    @cached_property
    def zeta(self):
        denom = np.where(self.ok_stretch, self.unit_stretch_mag, 1.0)
        return self.m_xi / denom[:, None] * self.ok_stretch[:, None]

    @cached_property
    def stretch_mag(self):
        return self.unit_stretch_mag * self.vec_mag

    @cached_property
    def p_xi(self):
        return np.einsum("mij,mj->mi", self.P, self.xi)

    @cached_property
    def p_xi_mag(self):
        return _norm(self.p_xi)

    @cached_property
    def hess_vec_mag(self):
        return self.p_xi_mag * self.vec_mag

    @cached_property
    def align(self):
        return np.einsum("mi,mi->m", self.zeta, self.p_xi)

    @cached_property
    def rate_vec_mag(self):
        return self.alpha * self.vec_mag

    @cached_property
    def rate_xi(self):
        return self.m_xi - self.alpha[:, None] * self.xi

    @cached_property
    def rate_xi_mag(self):
        return _norm(self.rate_xi)

    @cached_property
    def rate_stretch_mag(self):
        return -self.align * self.vec_mag

    @cached_property
    def rate_zeta(self):
        denom = np.where(self.ok_stretch, self.unit_stretch_mag, 1.0)
        return (-self.p_xi + self.align[:, None] * self.zeta) / denom[:, None] * self.ok_stretch[:, None]

    @cached_property
    def rate_zeta_mag(self):
        return _norm(self.rate_zeta)


def make_samples(count: int, dim: int, seed: int, scale: float = 1.0) -> AlgebraicSample:
    """Seeded random batch: symmetric trace-free S in 3D, full trace-free matrix in 2D."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((count, dim, dim))
    if dim == 3:
        S = a + np.swapaxes(a, 1, 2)
    else:
        S = a.copy()
    tr = np.trace(S, axis1=1, axis2=2) / dim
    S -= tr[:, None, None] * np.eye(dim)
    b = rng.standard_normal((count, dim, dim))
    P = b + np.swapaxes(b, 1, 2)
    v = rng.standard_normal((count, dim))
    return AlgebraicSample(S=S * scale, P=P * scale, v=v * scale)


def _relative(err: np.ndarray, ref: np.ndarray) -> np.ndarray:
    return np.abs(err) / np.maximum(ref, RESIDUAL_FLOOR)


def check_vorticity_pythagoras(s: AlgebraicSample) -> np.ndarray:
    """Residual of (rate |v|)^2 + |rate xi|^2 |v|^2 = |S v|^2; nan where skipped."""
    lhs = s.rate_vec_mag**2 + (s.rate_xi_mag * s.vec_mag) ** 2
    res = _relative(lhs - s.stretch_mag**2, s.stretch_mag**2)
    return np.where(s.ok_stretch, res, np.nan)


def check_strain_pythagoras(s: AlgebraicSample) -> np.ndarray:
    """Residual of (rate |S v|)^2 + |rate zeta|^2 |S v|^2 = |P v|^2."""
    lhs = s.rate_stretch_mag**2 + (s.rate_zeta_mag * s.stretch_mag) ** 2
    res = _relative(lhs - s.hess_vec_mag**2, s.hess_vec_mag**2)
    return np.where(s.ok_stretch, res, np.nan)


def check_three_term(s: AlgebraicSample) -> np.ndarray:
    """Residual of the three-term splitting of |P v|^2."""
    lhs = (
        s.rate_stretch_mag**2
        + (s.rate_zeta_mag * s.rate_vec_mag) ** 2
        + (s.rate_zeta_mag * s.rate_xi_mag * s.vec_mag) ** 2
    )
    res = _relative(lhs - s.hess_vec_mag**2, s.hess_vec_mag**2)
    return np.where(s.ok_stretch, res, np.nan)


CONDITIONING_GUARD = 1e-4


def check_orthogonal_decompositions(s: AlgebraicSample) -> dict[str, np.ndarray]:
    """Residuals of the orthogonal splitting of P xi and the orthogonality of
    the direction rates; nan where the relevant denominator degenerates.

    Checks that divide by a rate magnitude skip samples where that magnitude
    is tiny against the cancellation scale of its own computation; otherwise
    pure roundoff would masquerade as an identity violation.
    """
    recomposed = s.align[:, None] * s.zeta - s.unit_stretch_mag[:, None] * s.rate_zeta
    dec = _relative(_norm(s.p_xi - recomposed), s.p_xi_mag)
    dec = np.where(s.ok_stretch, dec, np.nan)

    denom_stretch = np.where(s.ok_stretch, s.unit_stretch_mag, 1.0)
    rz_scale = (s.p_xi_mag + np.abs(s.align)) / denom_stretch
    ok_rz = s.ok_stretch & (s.rate_zeta_mag > CONDITIONING_GUARD * rz_scale)
    denom_rz = np.where(ok_rz, s.rate_zeta_mag, 1.0)
    coef = np.einsum("mi,mi->m", s.rate_zeta, s.p_xi) / denom_rz**2
    projected = s.align[:, None] * s.zeta + coef[:, None] * s.rate_zeta
    dec_proj = _relative(_norm(s.p_xi - projected), s.p_xi_mag)
    dec_proj = np.where(ok_rz, dec_proj, np.nan)

    unit_rz = s.rate_zeta / denom_rz[:, None]
    align_rate = np.einsum("mi,mi->m", unit_rz, s.p_xi) + s.unit_stretch_mag * s.rate_zeta_mag
    align_rate = np.where(ok_rz, _relative(align_rate, s.p_xi_mag), np.nan)

    ok_rx = s.ok_stretch & (s.rate_xi_mag > CONDITIONING_GUARD * s.unit_stretch_mag)
    xi_orth = _relative(np.einsum("mi,mi->m", s.xi, s.rate_xi), s.rate_xi_mag)
    xi_orth = np.where(ok_rx, xi_orth, np.nan)
    zeta_orth = _relative(np.einsum("mi,mi->m", s.zeta, s.rate_zeta), s.rate_zeta_mag)
    zeta_orth = np.where(ok_rz, zeta_orth, np.nan)

    return {
        "decomposition": dec,
        "decomposition_projected": dec_proj,
        "alignment_rate": align_rate,
        "xi_orthogonality": xi_orth,
        "zeta_orthogonality": zeta_orth,
    }


def check_inequalities(s: AlgebraicSample) -> dict[str, dict[str, np.ndarray]]:
    """Normalized slack and LHS/RHS ratio of the sqrt(2)/sqrt(3) inequalities."""
    lhs1 = s.rate_vec_mag + s.rate_xi_mag * s.vec_mag
    rhs1 = np.sqrt(2.0) * s.stretch_mag
    lhs2 = s.rate_stretch_mag + s.rate_zeta_mag * s.stretch_mag
    rhs2 = np.sqrt(2.0) * s.hess_vec_mag
    lhs3 = s.rate_stretch_mag + s.rate_zeta_mag * s.rate_vec_mag + s.rate_zeta_mag * s.rate_xi_mag * s.vec_mag
    rhs3 = np.sqrt(3.0) * s.hess_vec_mag

    out = {}
    for name, lhs, rhs in (
        ("two_term_vec", lhs1, rhs1),
        ("two_term_stretch", lhs2, rhs2),
        ("three_term_bound", lhs3, rhs3),
    ):
        slack = (rhs - lhs) / np.maximum(rhs, RESIDUAL_FLOOR)
        ratio = lhs / np.maximum(rhs, RESIDUAL_FLOOR)
        out[name] = {
            "slack": np.where(s.ok_stretch, slack, np.nan),
            "ratio": np.where(s.ok_stretch, ratio, np.nan),
        }
    return out


@dataclass
class IdentitySuiteReport:
    dim: int
    count: int
    seed: int
    scale: float
    tolerance: float
    inequality_tolerance: float
    residual_max: dict = field(default_factory=dict)
    inequality_min_slack: dict = field(default_factory=dict)
    inequality_max_ratio: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    elapsed_seconds: float = 0.0
    passed: bool = False
    worst: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "count": self.count,
            "seed": self.seed,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "inequality_tolerance": self.inequality_tolerance,
            "residual_max": self.residual_max,
            "inequality_min_slack": self.inequality_min_slack,
            "inequality_max_ratio": self.inequality_max_ratio,
            "skipped": self.skipped,
            "elapsed_seconds": self.elapsed_seconds,
            "passed": self.passed,
        }


def run_identity_suite(
    count: int,
    dim: int,
    seed: int,
    scale: float = 1.0,
    tolerance: float = IDENTITY_TOL,
    inequality_tolerance: float = INEQUALITY_TOL,
    samples: AlgebraicSample | None = None,
) -> IdentitySuiteReport:
    """Run every identity and inequality check over one seeded random batch."""
    t0 = time.perf_counter()
    s = samples if samples is not None else make_samples(count, dim, seed, scale)
    report = IdentitySuiteReport(
        dim=s.dim,
        count=s.size,
        seed=seed,
        scale=scale,
        tolerance=tolerance,
        inequality_tolerance=inequality_tolerance,
    )

    residuals = {
        "vorticity_pythagoras": check_vorticity_pythagoras(s),
        "strain_pythagoras": check_strain_pythagoras(s),
        "three_term": check_three_term(s),
    }
    residuals.update(check_orthogonal_decompositions(s))

    worst_val, worst_idx, worst_name = -1.0, 0, ""
    for name, res in residuals.items():
        n_skip = int(np.count_nonzero(np.isnan(res)))
        report.skipped[name] = n_skip
        if n_skip == res.size:
            report.residual_max[name] = 0.0
            continue
        mx = float(np.nanmax(res))
        report.residual_max[name] = mx
        if mx > worst_val:
            worst_val, worst_idx, worst_name = mx, int(np.nanargmax(res)), name

    for name, data in check_inequalities(s).items():
        slack = data["slack"]
        ok = ~np.isnan(slack)
        report.inequality_min_slack[name] = float(np.min(slack[ok])) if np.any(ok) else 0.0
        report.inequality_max_ratio[name] = float(np.nanmax(data["ratio"])) if np.any(ok) else 0.0

    report.passed = all(v <= tolerance for v in report.residual_max.values()) and all(
        v >= -inequality_tolerance for v in report.inequality_min_slack.values()
    )
    if not report.passed:
        report.worst = {
            "check": worst_name,
            "residual": worst_val,
            "S": s.S[worst_idx].tolist(),
            "P": s.P[worst_idx].tolist(),
            "v": s.v[worst_idx].tolist(),
        }
    report.elapsed_seconds = time.perf_counter() - t0
    return report


__all__ = [
    "AlgebraicSample",
    "IdentitySuiteReport",
    "IDENTITY_NAMES",
    "INEQUALITY_NAMES",
    "IDENTITY_TOL",
    "INEQUALITY_TOL",
    "make_samples",
    "check_vorticity_pythagoras",
    "check_strain_pythagoras",
    "check_three_term",
    "check_orthogonal_decompositions",
    "check_inequalities",
    "run_identity_suite",
]
