"""Comparison estimators over sampled per-voxel features: LEEP, LogME, GBC
and TransRate.

All four consume the class-stratified samples of the finest decoder scale
(the stage before the final convolution), concatenated across cases. LEEP
additionally needs per-row source posteriors and reports UNAVAILABLE when
the bundles carry none.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import EstimatorError, PosteriorsUnavailableError
from .gaussian import GaussianSummary, bhattacharyya_gauss
from .interchange import CaseBundle

LEEP_LOG_FLOOR = 1e-12
LOGME_TOL = 1e-6
LOGME_MAX_ITER = 100
DEFAULT_TRANSRATE_EPS = 1e-4
DEFAULT_GBC_SHRINKAGE = 1e-6


class MixedPosteriorWarning(UserWarning):
    """Some, but not all, bundles carry posteriors; they are dropped."""


@dataclass
class LabeledFeatureSet:
    features: np.ndarray
    labels: np.ndarray
    posteriors: np.ndarray | None = None

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a rows x channels matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")
        if self.posteriors is not None and (
            self.posteriors.ndim != 2
            or self.posteriors.shape[0] != self.features.shape[0]
        ):
            raise ValueError("posteriors must align with feature rows")

    @property
    def n(self) -> int:
        return self.features.shape[0]


def assemble_baseline_set(
    bundles: Sequence[CaseBundle], scale_index: int = 1
) -> LabeledFeatureSet:
    """Concatenate class-stratified samples (with class-id labels) across
    cases at one scale; posteriors are kept only when every bundle has them."""
    if not bundles:
        raise ValueError("empty bundle list")
    feats, labels, posts = [], [], []
    have_post = [b.scale(scale_index).source_posteriors is not None for b in bundles]
    attach = all(have_post)
    if any(have_post) and not attach:
        warnings.warn(
            "posteriors present in only some bundles; dropping them",
            MixedPosteriorWarning,
            stacklevel=2,
        )
    for bundle in bundles:
        scale = bundle.scale(scale_index)
        for class_id in sorted(scale.class_samples):
            m = scale.class_samples[class_id]
            feats.append(m)
            labels.append(np.full(m.shape[0], class_id, dtype=np.int64))
        if attach:
            posts.append(scale.source_posteriors)
    if not feats:
        raise EstimatorError(f"no class samples at scale {scale_index}")
    return LabeledFeatureSet(
        features=np.concatenate(feats, axis=0),
        labels=np.concatenate(labels),
        posteriors=np.concatenate(posts, axis=0) if attach else None,
    )


def leep(dataset: LabeledFeatureSet) -> float:
    """Log expected empirical prediction: mean log-likelihood of the target
    label under the empirical source-to-target transition model."""
    if dataset.posteriors is None:
        raise PosteriorsUnavailableError(
            "leep needs source posteriors and the bundles carry none"
        )
    post = np.asarray(dataset.posteriors, dtype=np.float64)
    n = dataset.n
    classes, y = np.unique(dataset.labels, return_inverse=True)
    joint = np.zeros((classes.size, post.shape[1]))
    np.add.at(joint, y, post)
    joint /= n
    p_z = joint.sum(axis=0)
    keep = p_z > 0.0
    conditional = joint[:, keep] / p_z[keep]
    likelihood = np.einsum("iz,iz->i", conditional[y], post[:, keep])
    return float(np.mean(np.log(np.maximum(likelihood, LEEP_LOG_FLOOR))))


def _evidence_path(
    lam: np.ndarray, z: np.ndarray, rho2: float, n: int, d: int
) -> tuple[float, list[float]]:
    """Fixed-point evidence maximization for one regression target.

    lam holds the squared singular values of the feature matrix, z the
    target's projections onto the left singular vectors, rho2 the squared
    residual outside the column space.
    """
    z2 = z**2
    alpha, beta = 1.0, 1.0
    trajectory: list[float] = []
    for _ in range(LOGME_MAX_ITER):
        denom = alpha + beta * lam
        m2 = float((beta**2 * lam * z2 / denom**2).sum())
        r2 = float((alpha**2 * z2 / denom**2).sum()) + rho2
        gamma = float((beta * lam / denom).sum())
        evidence = 0.5 * (
            d * np.log(alpha)
            + n * np.log(beta)
            - beta * r2
            - alpha * m2
            - float(np.log(denom).sum())
            - (d - lam.size) * np.log(alpha)
            - n * np.log(2.0 * np.pi)
        )
        if trajectory and abs(evidence - trajectory[-1]) / n < LOGME_TOL:
            trajectory.append(evidence)
            break
        trajectory.append(evidence)
        if m2 <= 0.0 or r2 <= 0.0:
            break
        alpha = gamma / m2
        beta = (n - gamma) / r2
    return trajectory[-1], trajectory


def logme_class_evidence(
    features: np.ndarray, target: np.ndarray
) -> tuple[float, list[float]]:
    """Maximized log-evidence (and its iteration trajectory) of a Bayesian
    linear model for one 0/1 target vector."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    n, d = x.shape
    u, sig, _ = np.linalg.svd(x, full_matrices=False)
    z = u.T @ y
    z[sig == 0] = 0.0
    rho2 = max(float(y @ y) - float(z @ z), 0.0)
    return _evidence_path(sig**2, z, rho2, n, d)


def logme(dataset: LabeledFeatureSet) -> float:
    """Mean over one-vs-rest targets of the maximized log-evidence per row.
    Classes whose target is constant are skipped."""
    scores = []
    for class_id in np.unique(dataset.labels):
        target = (dataset.labels == class_id).astype(np.float64)
        if target.all() or not target.any():
            continue
        evidence, _ = logme_class_evidence(dataset.features, target)
        scores.append(evidence / dataset.n)
    if not scores:
        raise EstimatorError("every one-vs-rest target is constant")
    return float(np.mean(scores))


def _diag_gaussian(rows: np.ndarray, shrinkage: float) -> GaussianSummary:
    x = np.asarray(rows, dtype=np.float64)
    mean = x.mean(axis=0)
    var = ((x - mean) ** 2).mean(axis=0)
    mean_var = float(var.mean())
    var = var + (shrinkage * mean_var if mean_var > 0 else shrinkage)
    return GaussianSummary(mean=mean, covariance=np.diag(var), sample_count=x.shape[0])


def gbc(dataset: LabeledFeatureSet, shrinkage: float = DEFAULT_GBC_SHRINKAGE) -> float:
    """Negative summed Bhattacharyya coefficient between per-class Gaussians
    (diagonal covariances); closer to 0 means better-separated classes."""
    summaries = {}
    for class_id in np.unique(dataset.labels):
        rows = dataset.features[dataset.labels == class_id]
        if rows.shape[0] >= 2:
            summaries[int(class_id)] = _diag_gaussian(rows, shrinkage)
    if len(summaries) < 2:
        raise EstimatorError("need at least 2 classes with >= 2 rows each")
    total = 0.0
    for a, b in combinations(sorted(summaries), 2):
        total += float(np.exp(-bhattacharyya_gauss(summaries[a], summaries[b])))
    return -total


def _coding_rate(rows: np.ndarray, eps: float) -> float:
    n, c = rows.shape
    sig = np.linalg.svd(rows, compute_uv=False)
    return 0.5 * float(np.log1p((c / (n * eps * eps)) * sig**2).sum())


def transrate(dataset: LabeledFeatureSet, eps: float = DEFAULT_TRANSRATE_EPS) -> float:
    """Coding-rate gap between all features and their class-conditional
    partition; rows are centered by the global mean throughout."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if dataset.n < 2:
        raise EstimatorError("need at least 2 rows")
    z = np.asarray(dataset.features, dtype=np.float64)
    z = z - z.mean(axis=0)
    rate = _coding_rate(z, eps)
    for class_id in np.unique(dataset.labels):
        rows = z[dataset.labels == class_id]
        rate -= rows.shape[0] / dataset.n * _coding_rate(rows, eps)
    return rate
