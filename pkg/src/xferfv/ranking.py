"""Model ranking and agreement with fine-tuned performance.

Weighted Kendall's tau up-weights pairs involving well-performing models:
a model at performance rank r (0 = best) carries weight 1/(1+r) and a pair
carries the sum of its two weights. The Pearson coefficient measures linear
agreement on the raw values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

from .errors import EstimatorError
from .scoring import ModelScore


@dataclass(frozen=True)
class RankedModel:
    model_id: str
    estimate: float
    performance: float


@dataclass(frozen=True)
class CorrelationReport:
    weighted_tau: float
    pearson: float
    n_models: int
    ranking: tuple[RankedModel, ...]

    def as_dict(self) -> dict:
        return {
            "weighted_tau": self.weighted_tau,
            "pearson": self.pearson,
            "n_models": self.n_models,
            "ranking": [
                {
                    "model_id": r.model_id,
                    "estimate": r.estimate,
                    "performance": r.performance,
                }
                for r in self.ranking
            ],
        }


def _check_keys(
    estimates: Mapping[str, float], performances: Mapping[str, float]
) -> list[str]:
    if set(estimates) != set(performances):
        missing = sorted(set(estimates) ^ set(performances))
        raise ValueError(f"estimate/performance key sets differ on {missing}")
    if len(estimates) < 2:
        raise EstimatorError("need at least 2 models")
    return sorted(estimates)


def weighted_kendall_tau(
    estimates: Mapping[str, float], performances: Mapping[str, float]
) -> float:
    """Hyperbolically weighted Kendall correlation between the estimate and
    performance orderings. Tied estimates contribute zero concordance but
    full weight; tied performances are rejected."""
    models = _check_keys(estimates, performances)
    perf = [performances[m] for m in models]
    if len(set(perf)) != len(perf):
        raise EstimatorError("performance values must be distinct")
    order = sorted(models, key=lambda m: -performances[m])
    weight = {m: 1.0 / (1.0 + rank) for rank, m in enumerate(order)}
    num = 0.0
    den = 0.0
    for a, b in combinations(models, 2):
        w = weight[a] + weight[b]
        prod = (estimates[a] - estimates[b]) * (performances[a] - performances[b])
        num += w * (0.0 if prod == 0 else math.copysign(1.0, prod))
        den += w
    return num / den


def pearson(
    estimates: Mapping[str, float], performances: Mapping[str, float]
) -> float:
    """Sample Pearson correlation; constant series are an error."""
    models = _check_keys(estimates, performances)
    xs = [estimates[m] for m in models]
    ys = [performances[m] for m in models]
    n = len(models)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise EstimatorError("correlation undefined for a constant series")
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


def rank_models(scores: Sequence[ModelScore]) -> list[ModelScore]:
    """Descending by transferability; ties broken by model_id ascending."""
    if not scores:
        raise ValueError("no scores to rank")
    ids = [s.model_id for s in scores]
    if len(set(ids)) != len(ids):
        dup = sorted({m for m in ids if ids.count(m) > 1})
        raise ValueError(f"duplicate model ids: {dup}")
    return sorted(scores, key=lambda s: (-s.transferability, s.model_id))


def evaluate(
    estimates: Mapping[str, float], performances: Mapping[str, float]
) -> CorrelationReport:
    """Correlation report for a set of models present in both mappings."""
    tau = weighted_kendall_tau(estimates, performances)
    r = pearson(estimates, performances)
    ranked = sorted(estimates, key=lambda m: (-estimates[m], m))
    return CorrelationReport(
        weighted_tau=tau,
        pearson=r,
        n_models=len(ranked),
        ranking=tuple(
            RankedModel(
                model_id=m, estimate=estimates[m], performance=performances[m]
            )
            for m in ranked
        ),
    )
