"""Gaussian-mixture data distributions with an exact denoiser."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from pfode_lab.errors import ConfigError, DomainError

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class OracleEval:
    """Denoiser output at a batch of points.

    All arrays carry a leading batch axis when the query was a batch.
    """

    denoised: np.ndarray
    score: np.ndarray
    jacobian: Optional[np.ndarray] = None
    sigma_deriv: Optional[np.ndarray] = None
    responsibilities: Optional[np.ndarray] = None


class Denoiser(ABC):
    """Anything that returns E[x0 | x, σ] and its derivatives."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of the data space."""

    @abstractmethod
    def denoise(self, x: np.ndarray, sigma: float, want_jacobian: bool = False, want_sigma_deriv: bool = False) -> OracleEval:
        """Evaluate the denoiser at data-space point(s) `x` and noise level `sigma`.

        Args:
            x: Shape (dim,) or (n, dim)
            sigma: Noise level, strictly positive
            want_jacobian: Also return ∂D/∂x
            want_sigma_deriv: Also return ∂D/∂σ

        Returns:
            OracleEval with arrays shaped like `x` (Jacobian adds a trailing dim axis)
        """

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points from the clean data distribution, shape (n, dim)."""


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: tuple
    cov: tuple

    def to_dict(self) -> dict:
        return {"weight": self.weight, "mean": list(self.mean), "cov": [list(row) for row in self.cov]}


class GaussianMixture(Denoiser):
    """Mixture of Gaussians Σ_k w_k N(μ_k, C_k); immutable after construction."""

    def __init__(self, weights, means, covs, jitter: float = 1e-10):
        weights = np.asarray(weights, dtype=float)
        means = np.atleast_2d(np.asarray(means, dtype=float))
        covs = np.asarray(covs, dtype=float)

        if weights.ndim != 1 or len(weights) == 0:
            raise ConfigError("mixture needs at least one component")
        k, dim = len(weights), means.shape[1]
        if means.shape != (k, dim):
            raise ConfigError(f"means must have shape ({k}, dim), got {means.shape}")
        if covs.shape != (k, dim, dim):
            raise ConfigError(f"covs must have shape ({k}, {dim}, {dim}), got {covs.shape}")
        if np.any(weights <= 0.0) or np.any(weights > 1.0):
            raise ConfigError("component weights must lie in (0, 1]")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ConfigError(f"component weights must sum to 1, got {weights.sum()!r}")
        if not np.allclose(covs, np.swapaxes(covs, 1, 2), atol=1e-12):
            raise ConfigError("covariances must be symmetric")

        eigvals, eigvecs = np.linalg.eigh(covs)
        if np.any(eigvals < -1e-10 * max(1.0, float(np.abs(eigvals).max()))):
            raise ConfigError("covariances must be positive semi-definite")

        self._weights = weights
        self._means = means
        self._covs = covs
        self._eigvals = np.clip(eigvals, 0.0, None)
        self._eigvecs = eigvecs
        self._log_weights = np.log(weights)
        self.jitter = float(jitter)
        for arr in (self._weights, self._means, self._covs, self._eigvals, self._eigvecs, self._log_weights):
            arr.setflags(write=False)

    # -- accessors ------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self._means.shape[1]

    @property
    def num_components(self) -> int:
        return len(self._weights)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def means(self) -> np.ndarray:
        return self._means

    @property
    def covs(self) -> np.ndarray:
        return self._covs

    @property
    def components(self) -> list[MixtureComponent]:
        return [
            MixtureComponent(
                weight=float(w),
                mean=tuple(float(v) for v in mu),
                cov=tuple(tuple(float(v) for v in row) for row in c),
            )
            for w, mu, c in zip(self._weights, self._means, self._covs)
        ]

    def __repr__(self) -> str:
        return f"GaussianMixture(dim={self.dim}, components={self.num_components})"

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {"dim": self.dim, "components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianMixture":
        try:
            comps = data["components"]
            mixture = cls(
                weights=[c["weight"] for c in comps],
                means=[c["mean"] for c in comps],
                covs=[c["cov"] for c in comps],
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed mixture spec: {exc}") from exc
        if "dim" in data and int(data["dim"]) != mixture.dim:
            raise ConfigError(f"mixture declares dim={data['dim']} but components have dim={mixture.dim}")
        return mixture

    # -- sampling -------------------------------------------------------------

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n < 0:
            raise DomainError(f"sample count must be non-negative, got {n}")
        labels = rng.choice(self.num_components, size=n, p=self._weights)
        noise = rng.standard_normal((n, self.dim))
        roots = self._eigvecs * np.sqrt(self._eigvals)[:, None, :]
        return self._means[labels] + np.einsum("nij,nj->ni", roots[labels], noise)

    # -- denoiser -------------------------------------------------------------

    def _check_query(self, x: np.ndarray, sigma: float) -> tuple[np.ndarray, bool]:
        if not (np.isfinite(sigma) and sigma > 0.0):
            raise DomainError(f"denoiser needs sigma > 0, got {sigma}")
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}, got shape {x.shape}")
        return x, single

    def responsibilities(self, x: np.ndarray, sigma: float) -> np.ndarray:
        """Posterior component probabilities at noise level sigma, shape (n, K)."""
        x, single = self._check_query(x, sigma)
        resp, _, _ = self._posterior(x, sigma)
        return resp[0] if single else resp

    def _posterior(self, x: np.ndarray, sigma: float):
        # per component, eigen-coordinates of x - μ_k and the noisy variances a = λ + σ²
        a = self._eigvals + sigma * sigma + self.jitter  # (K, d)
        z = np.einsum("nd,kde->nke", x, self._eigvecs) - np.einsum("kd,kde->ke", self._means, self._eigvecs)[None]
        log_pdf = (
            self._log_weights[None]
            - 0.5 * (np.sum(np.log(a), axis=1) + self.dim * np.log(2.0 * np.pi))[None]
            - 0.5 * np.sum(z * z / a[None], axis=2)
        )
        resp = np.exp(log_pdf - logsumexp(log_pdf, axis=1, keepdims=True))
        return resp, z, a

    def denoise(self, x: np.ndarray, sigma: float, want_jacobian: bool = False, want_sigma_deriv: bool = False) -> OracleEval:
        x, single = self._check_query(x, sigma)
        resp, z, a = self._posterior(x, sigma)
        lam = self._eigvals[None]  # (1, K, d)
        basis = self._eigvecs  # (K, d, d)

        def back(coords: np.ndarray) -> np.ndarray:
            """Map per-component eigen-coordinates (n, K, d) back to data space."""
            return np.einsum("kde,nke->nkd", basis, coords)

        comp_means = self._means[None] + back(z * lam / a[None])  # m_k
        denoised = np.einsum("nk,nkd->nd", resp, comp_means)
        spread = comp_means - denoised[:, None, :]  # m_k - D

        jacobian = None
        if want_jacobian:
            gain = np.einsum("kde,ke,kfe->kdf", basis, self._eigvals / a, basis)  # C_k Σ_k⁻¹
            grad_log = -back(z / a[None])  # -Σ_k⁻¹ (x - μ_k)
            jacobian = np.einsum("nk,kdf->ndf", resp, gain) + np.einsum("nk,nkd,nkf->ndf", resp, spread, grad_log)

        sigma_deriv = None
        if want_sigma_deriv:
            mean_rate = back(-2.0 * sigma * z * lam / (a[None] ** 2))
            log_rate = -sigma * np.sum(1.0 / a, axis=1)[None] + sigma * np.sum(z * z / (a[None] ** 2), axis=2)
            sigma_deriv = np.einsum("nk,nkd->nd", resp, mean_rate) + np.einsum("nk,nkd,nk->nd", resp, spread, log_rate)

        score = (denoised - x) / (sigma * sigma)
        if single:
            return OracleEval(
                denoised=denoised[0],
                score=score[0],
                jacobian=None if jacobian is None else jacobian[0],
                sigma_deriv=None if sigma_deriv is None else sigma_deriv[0],
                responsibilities=resp[0],
            )
        return OracleEval(denoised, score, jacobian, sigma_deriv, resp)
