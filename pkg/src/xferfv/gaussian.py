"""Gaussian summaries of feature samples and closed-form distribution distances.

Covariances use the 1/n maximum-likelihood form plus an isotropic shrinkage
ridge scaled by the mean eigenvalue; shrinkage keeps summaries positive
semi-definite when the sample count is below the channel count. All
accumulation is float64 even though feature storage is float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularCovarianceError

DEFAULT_SHRINKAGE = 1e-6
SINGULAR_EIGENVALUE_FLOOR = 1e-12
SYMMETRY_RTOL = 1e-8


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and SPD covariance fitted to one feature sample matrix."""

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int

    def __post_init__(self):
        if self.mean.ndim != 1:
            raise ValueError(f"mean must be a vector, got shape {self.mean.shape}")
        c = self.mean.shape[0]
        if self.covariance.shape != (c, c):
            raise ValueError(
                f"covariance shape {self.covariance.shape} does not match dim {c}"
            )
        scale = max(float(np.abs(self.covariance).max(initial=0.0)), 1.0)
        gap = float(np.abs(self.covariance - self.covariance.T).max(initial=0.0))
        if gap > SYMMETRY_RTOL * scale:
            raise ValueError("covariance is not symmetric within tolerance")
        if self.sample_count < 2:
            raise ValueError("sample_count must be >= 2")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian(samples: np.ndarray, shrinkage: float = DEFAULT_SHRINKAGE) -> GaussianSummary:
    """ML fit: mean and (1/n)-covariance plus shrinkage * mean-eigenvalue on
    the diagonal (plain shrinkage when the trace is zero)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a matrix with >= 2 rows, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("samples contain NaN or Inf")
    if shrinkage < 0:
        raise ValueError("shrinkage must be >= 0")
    n, c = x.shape
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n
    cov = 0.5 * (cov + cov.T)
    trace = float(np.trace(cov))
    ridge = shrinkage * trace / c if trace > 0.0 else shrinkage
    if ridge > 0.0:
        cov[np.diag_indices(c)] += ridge
    return GaussianSummary(mean=mean, covariance=cov, sample_count=n)


def _require_symmetric(m: np.ndarray) -> np.ndarray:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(float(np.abs(m).max(initial=0.0)), 1.0)
    if float(np.abs(m - m.T).max(initial=0.0)) > SYMMETRY_RTOL * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    return 0.5 * (m + m.T)


def spd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition; negative eigenvalues
    are clamped to zero."""
    sym = _require_symmetric(np.asarray(m, dtype=np.float64))
    w, v = np.linalg.eigh(sym)
    w = np.maximum(w, 0.0)
    root = (v * np.sqrt(w)) @ v.T
    return 0.5 * (root + root.T)


def _check_dims(a: GaussianSummary, b: GaussianSummary) -> int:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return a.dim


def w2_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """2-Wasserstein distance between Gaussians.

    The cross term Tr((Sigma_a Sigma_b)^(1/2)) is evaluated as
    Tr((Sigma_a^(1/2) Sigma_b Sigma_a^(1/2))^(1/2)) so only symmetric
    eigenproblems arise; negative eigenvalues and a negative inner sum are
    clamped to zero before the square roots.
    """
    _check_dims(a, b)
    root_a = spd_sqrt(a.covariance)
    inner = root_a @ b.covariance @ root_a
    w = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    cross = float(np.sqrt(np.maximum(w, 0.0)).sum())
    delta = a.mean - b.mean
    sq = (
        float(delta @ delta)
        + float(np.trace(a.covariance))
        + float(np.trace(b.covariance))
        - 2.0 * cross
    )
    return float(np.sqrt(max(sq, 0.0)))


def _logdet_and_inverse(m: np.ndarray, label: str) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh(_require_symmetric(m))
    if float(w.min()) < SINGULAR_EIGENVALUE_FLOOR:
        raise SingularCovarianceError(
            f"{label} is singular (min eigenvalue {w.min():.3e} < "
            f"{SINGULAR_EIGENVALUE_FLOOR:.0e}); w2 avoids this inversion entirely"
        )
    return float(np.log(w).sum()), (v / w) @ v.T


def _logdet(m: np.ndarray, label: str) -> float:
    w = np.linalg.eigvalsh(_require_symmetric(m))
    if float(w.min()) < SINGULAR_EIGENVALUE_FLOOR:
        raise SingularCovarianceError(
            f"{label} is singular (min eigenvalue {w.min():.3e} < "
            f"{SINGULAR_EIGENVALUE_FLOOR:.0e})"
        )
    return float(np.log(w).sum())


def kl_divergence_gauss(a: GaussianSummary, b: GaussianSummary) -> float:
    """KL(a || b) between Gaussian summaries; log-determinants via eigenvalue
    log-sums. Raises SingularCovarianceError instead of regularizing harder."""
    c = _check_dims(a, b)
    logdet_b, inv_b = _logdet_and_inverse(b.covariance, "second covariance")
    logdet_a = _logdet(a.covariance, "first covariance")
    delta = b.mean - a.mean
    val = 0.5 * (
        float(np.trace(inv_b @ a.covariance))
        + float(delta @ inv_b @ delta)
        - c
        + logdet_b
        - logdet_a
    )
    return max(val, 0.0)


def bhattacharyya_gauss(a: GaussianSummary, b: GaussianSummary) -> float:
    """Bhattacharyya distance between Gaussian summaries, log-determinant form."""
    _check_dims(a, b)
    mix = 0.5 * (a.covariance + b.covariance)
    logdet_mix, inv_mix = _logdet_and_inverse(mix, "mixture covariance")
    logdet_a = _logdet(a.covariance, "first covariance")
    logdet_b = _logdet(b.covariance, "second covariance")
    delta = a.mean - b.mean
    val = 0.125 * float(delta @ inv_mix @ delta) + 0.5 * (
        logdet_mix - 0.5 * (logdet_a + logdet_b)
    )
    return max(val, 0.0)
