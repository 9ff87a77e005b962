"""PF-ODE velocity field and its closed-form time derivatives.

States live in the scaled frame x = s·(x0 + σ·ε). The denoiser seen by the ODE
is D(x; σ) = D_data(x / s(σ); σ), so its Jacobian and σ-partial pick up the
chain-rule terms of the scale. Everything accepts a single state (dim,) or a
batch (n, dim) at one time t.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from pfode_lab.errors import DomainError, SingularityError
from pfode_lab.models.mixture import Denoiser
from pfode_lab.models.parameterization import Parameterization, ParamKind


@dataclass(frozen=True)
class DenoiserTerms:
    denoised: np.ndarray
    jacobian: Optional[np.ndarray] = None
    sigma_deriv: Optional[np.ndarray] = None


@dataclass(frozen=True)
class VelocityEval:
    """dx/dt at (x, t); v = (ṡ/s)·x + σ̇·eps."""

    x: np.ndarray
    t: float
    v: np.ndarray
    eps: np.ndarray
    denoised: np.ndarray
    nfe_cost: int = 1


@dataclass(frozen=True)
class CurvatureEval:
    """Second time derivative of the trajectory through (x, t)."""

    xddot: np.ndarray
    eps_dot: np.ndarray
    norm: np.ndarray
    singular: bool = False


def _matvec(matrix: np.ndarray, vec: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", matrix, vec)


def _row_norm(x: np.ndarray):
    norm = np.linalg.norm(x, axis=-1)
    return float(norm) if np.ndim(norm) == 0 else norm


def _sigma_checked(p: Parameterization, t: float) -> float:
    sigma = float(p.sigma(t))
    if sigma < p.sigma_floor:
        raise SingularityError(f"sigma({t:g}) = {sigma:g} is below the floor {p.sigma_floor:g}")
    return sigma


def denoiser_terms(
    gm: Denoiser,
    p: Parameterization,
    x: np.ndarray,
    sigma: float,
    want_jacobian: bool = False,
    want_sigma_deriv: bool = False,
) -> DenoiserTerms:
    """Scaled-frame denoiser D(x; σ) with optional ∂D/∂x and ∂D/∂σ."""
    s = float(p.scale_of_sigma(sigma))
    y = np.asarray(x, dtype=float) / s
    ev = gm.denoise(y, sigma, want_jacobian=want_jacobian or (want_sigma_deriv and p.kind is ParamKind.VP),
                    want_sigma_deriv=want_sigma_deriv)

    jacobian = None if ev.jacobian is None else ev.jacobian / s
    sigma_deriv = ev.sigma_deriv
    if want_sigma_deriv and p.kind is ParamKind.VP:
        # d(1/s)/dσ = σ·s
        sigma_deriv = sigma_deriv + _matvec(ev.jacobian, y * sigma * s * s)
    return DenoiserTerms(ev.denoised, jacobian if want_jacobian else None, sigma_deriv)


def velocity(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> VelocityEval:
    """Probability-flow drift at (x, t); one denoiser evaluation."""
    sigma = _sigma_checked(p, t)
    x = np.asarray(x, dtype=float)
    s, s_dot, _ = p.scale_derivatives(t)
    sigma_dot, _ = p.sigma_derivatives(t)
    denoised = denoiser_terms(gm, p, x, sigma).denoised
    # ε-prediction recovered from the x-prediction
    eps = (x - s * denoised) / sigma
    v = (s_dot / s) * x + sigma_dot * eps
    if not np.all(np.isfinite(v)):
        raise SingularityError(f"non-finite velocity at t={t:g}")
    return VelocityEval(x=x, t=float(t), v=v, eps=eps, denoised=denoised)


def velocity_jacobian(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> np.ndarray:
    """∂v/∂x = (ṡ/s)·I + (σ̇/σ)(I − s·J_D)."""
    sigma = _sigma_checked(p, t)
    s, s_dot, _ = p.scale_derivatives(t)
    sigma_dot, _ = p.sigma_derivatives(t)
    jac = denoiser_terms(gm, p, x, sigma, want_jacobian=True).jacobian
    eye = np.eye(jac.shape[-1])
    return (s_dot / s) * eye + (sigma_dot / sigma) * (eye - s * jac)


def _singular_curvature(x: np.ndarray) -> CurvatureEval:
    inf = np.full_like(np.asarray(x, dtype=float), np.inf)
    return CurvatureEval(xddot=inf, eps_dot=inf, norm=_row_norm(inf), singular=True)


def _terms_at(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float):
    sigma = float(p.sigma(t))
    s, s_dot, s_ddot = p.scale_derivatives(t)
    sigma_dot, sigma_ddot = p.sigma_derivatives(t)
    terms = denoiser_terms(gm, p, x, sigma, want_jacobian=True, want_sigma_deriv=True)
    return sigma, (s, s_dot, s_ddot), (sigma_dot, sigma_ddot), terms


def eps_dot(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> np.ndarray:
    """Time derivative of the noise residual along the trajectory."""
    return curvature_general(gm, p, x, t).eps_dot


def curvature_general(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> CurvatureEval:
    """ẍ for any parameterization, from the denoiser, its Jacobian and σ-partial."""
    x = np.asarray(x, dtype=float)
    if float(p.sigma(t)) < p.sigma_floor:
        return _singular_curvature(x)
    sigma, (s, s_dot, s_ddot), (sigma_dot, sigma_ddot), terms = _terms_at(gm, p, x, t)
    D, J, D_sigma = terms.denoised, terms.jacobian, terms.sigma_deriv

    eps = (x - s * D) / sigma
    J_eps = _matvec(J, eps)
    J_D = _matvec(J, D)

    e_dot = (s_dot / s) * eps - (s_dot + sigma_dot * s / sigma) * J_eps - (s_dot * s / sigma) * J_D - (sigma_dot * s / sigma) * D_sigma
    xddot = (
        (s_ddot / s) * x
        + (sigma_ddot + 2.0 * sigma_dot * s_dot / s) * eps
        - sigma_dot * (s_dot + sigma_dot * s / sigma) * J_eps
        - sigma_dot * (s_dot * s / sigma) * J_D
        - sigma_dot * (sigma_dot * s / sigma) * D_sigma
    )
    return CurvatureEval(xddot=xddot, eps_dot=e_dot, norm=_row_norm(xddot))


def _require(p: Parameterization, kind: ParamKind):
    if p.kind is not kind:
        raise DomainError(f"{kind.value} curvature requested for a {p.kind.value} parameterization")


def curvature_edm(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> CurvatureEval:
    """ẍ = −(1/σ²)·J_D(x − D) − (1/σ)·D_σ."""
    _require(p, ParamKind.EDM)
    x = np.asarray(x, dtype=float)
    if float(p.sigma(t)) < p.sigma_floor:
        return _singular_curvature(x)
    sigma = float(p.sigma(t))
    terms = denoiser_terms(gm, p, x, sigma, want_jacobian=True, want_sigma_deriv=True)
    residual = x - terms.denoised
    J_res = _matvec(terms.jacobian, residual)
    xddot = -J_res / sigma**2 - terms.sigma_deriv / sigma
    # σ = t, so ẍ and ε̇ coincide
    e_dot = -J_res / sigma**2 - terms.sigma_deriv / sigma
    return CurvatureEval(xddot=xddot, eps_dot=e_dot, norm=_row_norm(xddot))


def curvature_ve(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> CurvatureEval:
    """ẍ = −(1/4σ⁴)(I + J_D)(x − D) − (1/4σ³)·D_σ."""
    _require(p, ParamKind.VE)
    x = np.asarray(x, dtype=float)
    if float(p.sigma(t)) < p.sigma_floor:
        return _singular_curvature(x)
    sigma = float(p.sigma(t))
    terms = denoiser_terms(gm, p, x, sigma, want_jacobian=True, want_sigma_deriv=True)
    residual = x - terms.denoised
    J_res = _matvec(terms.jacobian, residual)
    xddot = -(residual + J_res) / (4.0 * sigma**4) - terms.sigma_deriv / (4.0 * sigma**3)
    e_dot = -J_res / (2.0 * sigma**3) - terms.sigma_deriv / (2.0 * sigma**2)
    return CurvatureEval(xddot=xddot, eps_dot=e_dot, norm=_row_norm(xddot))


def curvature_vp(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> CurvatureEval:
    """VP form written with B(t) = β_min + β_d·t, ṡ = −½B·s and s̈/s = ¼B² − ½β_d."""
    _require(p, ParamKind.VP)
    x = np.asarray(x, dtype=float)
    if float(p.sigma(t)) < p.sigma_floor:
        return _singular_curvature(x)
    sigma = float(p.sigma(t))
    s = float(p.scale(t))
    B = p.beta_min + p.beta_d * t
    sigma_dot, sigma_ddot = p.sigma_derivatives(t)
    terms = denoiser_terms(gm, p, x, sigma, want_jacobian=True, want_sigma_deriv=True)
    D = terms.denoised

    eps = (x - s * D) / sigma
    J_eps = _matvec(terms.jacobian, eps)
    J_D = _matvec(terms.jacobian, D)
    mix = sigma_dot * s / sigma - 0.5 * B * s

    xddot = (
        (0.25 * B * B - 0.5 * p.beta_d) * x
        + (sigma_ddot - B * sigma_dot) * eps
        - sigma_dot * mix * J_eps
        + sigma_dot * (0.5 * B * s * s / sigma) * J_D
        - sigma_dot * (sigma_dot * s / sigma) * terms.sigma_deriv
    )
    e_dot = -0.5 * B * eps - mix * J_eps + (0.5 * B * s * s / sigma) * J_D - (sigma_dot * s / sigma) * terms.sigma_deriv
    return CurvatureEval(xddot=xddot, eps_dot=e_dot, norm=_row_norm(xddot))


SPECIALIZED = {
    ParamKind.EDM: curvature_edm,
    ParamKind.VE: curvature_ve,
    ParamKind.VP: curvature_vp,
}


def curvature(gm: Denoiser, p: Parameterization, x: np.ndarray, t: float) -> CurvatureEval:
    """Dispatch to the closed form matching p.kind."""
    return SPECIALIZED[p.kind](gm, p, x, t)
