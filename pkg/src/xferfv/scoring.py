"""Transferability scoring: class consistency, feature variety, and the
multi-scale log-ratio aggregate.

Class consistency is, per foreground class, the mean pairwise distribution
distance between the class's per-case Gaussian summaries, summed over
classes; lower means features of one class agree across cases. Feature
variety is the mean inverse hyperspherical energy of each case's globally
sampled features after unit normalization; higher means less collapsed
features. The final score averages log(variety / consistency) over decoder
scales.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import EstimatorError, FormatError, NoSharedClassError
from .gaussian import DEFAULT_SHRINKAGE, GaussianSummary, fit_gaussian, w2_distance
from .gaussian import bhattacharyya_gauss, kl_divergence_gauss
from .interchange import CaseBundle, check_bundle_set
from .seeding import rng_for

DISTANCE_METRICS = ("w2", "kl", "bhattacharyya")


@dataclass(frozen=True)
class ScoreConfig:
    distance_metric: str = "w2"
    pair_budget: int = 2016
    hse_exponent: float = 1.0
    scales_used: tuple[int, ...] | None = None  # None selects every scale
    epsilon_floor: float = 1e-12
    seed: int = 42

    def __post_init__(self):
        if self.distance_metric not in DISTANCE_METRICS:
            raise ValueError(
                f"distance_metric {self.distance_metric!r} not in {DISTANCE_METRICS}"
            )
        if self.pair_budget < 1:
            raise ValueError("pair_budget must be >= 1")
        if self.hse_exponent < 0:
            raise ValueError("hse_exponent must be >= 0")
        if self.epsilon_floor <= 0:
            raise ValueError("epsilon_floor must be > 0")


@dataclass(frozen=True)
class ScaleScore:
    scale_index: int
    class_consistency: float
    feature_variety: float


@dataclass(frozen=True)
class ModelScore:
    model_id: str
    per_scale: tuple[ScaleScore, ...]
    transferability: float

    def as_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "per_scale": [
                {
                    "scale_index": s.scale_index,
                    "class_consistency": s.class_consistency,
                    "feature_variety": s.feature_variety,
                }
                for s in self.per_scale
            ],
            "transferability": self.transferability,
        }


def hyperspherical_energy(points: np.ndarray, s: float) -> float:
    """Riesz energy over ordered pairs of unit-normalized rows.

    Rows are L2-normalized first and zero-norm rows dropped; at least two
    must survive. Pair distances are floored at 1e-8 before exponentiation,
    so duplicated points give a large finite energy rather than Inf.
    """
    if s < 0:
        raise ValueError("exponent must be >= 0")
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {x.shape}")
    norms = np.linalg.norm(x, axis=1)
    keep = norms > np.finfo(np.float64).tiny
    if int(keep.sum()) < 2:
        raise EstimatorError("energy needs at least 2 nonzero rows")
    x = x[keep] / norms[keep, None]
    return float(_kernels.hse_energy(x, float(s)))


def _pair_distances(
    summaries: Sequence[GaussianSummary], pairs: Sequence[tuple[int, int]], metric: str
) -> np.ndarray:
    if metric == "w2":
        means = np.stack([g.mean for g in summaries])
        covs = np.stack([g.covariance for g in summaries])
        ia = np.array([p[0] for p in pairs], dtype=np.int64)
        ib = np.array([p[1] for p in pairs], dtype=np.int64)
        return np.sqrt(_kernels.w2_sq_pairs(means, covs, ia, ib))
    if metric == "kl":
        # KL is asymmetric; pairs are scored as the two-direction average.
        return np.array(
            [
                0.5
                * (
                    kl_divergence_gauss(summaries[i], summaries[j])
                    + kl_divergence_gauss(summaries[j], summaries[i])
                )
                for i, j in pairs
            ]
        )
    return np.array(
        [bhattacharyya_gauss(summaries[i], summaries[j]) for i, j in pairs]
    )


def class_consistency(
    bundles: Sequence[CaseBundle],
    scale_index: int,
    config: ScoreConfig,
    *,
    shrinkage: float = DEFAULT_SHRINKAGE,
) -> float:
    """Sum over foreground classes of the mean pairwise distance between the
    per-case class Gaussians at one scale.

    Pairs range over unordered pairs of distinct case ids that both carry the
    class; when a class has more pairs than pair_budget, a uniform
    deterministic subsample of pair_budget pairs is scored.
    """
    if len(bundles) < 2:
        raise ValueError("need at least 2 case bundles")
    per_class_cases: dict[int, list[int]] = {}
    for ci, bundle in enumerate(bundles):
        for class_id in bundle.scale(scale_index).class_samples:
            per_class_cases.setdefault(class_id, []).append(ci)

    fits: dict[tuple[int, int], GaussianSummary] = {}

    def fit(ci: int, class_id: int) -> GaussianSummary:
        key = (ci, class_id)
        if key not in fits:
            fits[key] = fit_gaussian(
                bundles[ci].scale(scale_index).class_samples[class_id], shrinkage
            )
        return fits[key]

    total = 0.0
    any_pairs = False
    for class_id in sorted(per_class_cases):
        cases = per_class_cases[class_id]
        pairs = [
            (i, j)
            for i, j in combinations(cases, 2)
            if bundles[i].case_id != bundles[j].case_id
        ]
        if not pairs:
            continue
        any_pairs = True
        if len(pairs) > config.pair_budget:
            rng = rng_for(config.seed, "pair-subsample", scale_index, class_id)
            chosen = rng.choice(len(pairs), size=config.pair_budget, replace=False)
            chosen.sort()
            pairs = [pairs[k] for k in chosen]
        involved = sorted({c for p in pairs for c in p})
        remap = {c: k for k, c in enumerate(involved)}
        summaries = [fit(c, class_id) for c in involved]
        dists = _pair_distances(
            summaries,
            [(remap[i], remap[j]) for i, j in pairs],
            config.distance_metric,
        )
        total += float(dists.mean())
    if not any_pairs:
        raise NoSharedClassError(
            f"scale {scale_index}: no foreground class occurs in two distinct cases"
        )
    return total


def feature_variety(
    bundles: Sequence[CaseBundle], scale_index: int, config: ScoreConfig
) -> float:
    """Mean over cases of the inverse hyperspherical energy of the case's
    global samples at one scale."""
    if not bundles:
        raise ValueError("need at least 1 case bundle")
    inv = []
    for bundle in bundles:
        energy = hyperspherical_energy(
            bundle.scale(scale_index).global_samples, config.hse_exponent
        )
        inv.append(1.0 / energy)
    return float(np.mean(inv))


def score_model(
    model_id: str,
    bundles: Sequence[CaseBundle],
    config: ScoreConfig = ScoreConfig(),
) -> ModelScore:
    """Score one model's exported bundles: per-scale consistency and variety,
    aggregated as the mean over used scales of log(variety / consistency)."""
    if len(bundles) < 2:
        raise ValueError("need at least 2 case bundles")
    diags = check_bundle_set(bundles)
    if diags:
        raise FormatError(
            "inconsistent bundle set: "
            + "; ".join(f"{d.location}: {d.message}" for d in diags)
        )
    num_scales = bundles[0].num_scales
    scales = config.scales_used or tuple(range(1, num_scales + 1))
    if not scales:
        raise ValueError("scales_used is empty")
    bad = [s for s in scales if not 1 <= s <= num_scales]
    if bad:
        raise ValueError(f"scales {bad} outside 1..{num_scales}")

    per_scale = []
    logs = []
    for scale_index in scales:
        c_cons = class_consistency(bundles, scale_index, config)
        f_v = feature_variety(bundles, scale_index, config)
        per_scale.append(
            ScaleScore(
                scale_index=scale_index,
                class_consistency=c_cons,
                feature_variety=f_v,
            )
        )
        logs.append(np.log(f_v / max(c_cons, config.epsilon_floor)))
    return ModelScore(
        model_id=model_id,
        per_scale=tuple(per_scale),
        transferability=float(np.mean(logs)),
    )
