"""Stratified foreground sampling and global sampling over dense feature volumes.

Per-class sample sizes follow the proportional rule n_k = clamp(round(rate * V_k),
per_class_min, min(per_class_max, V_k)); classes below the floor are skipped.
Global budgets halve per scale step toward the bottleneck. Patch-wise sampling
splits each budget across patches by largest-remainder apportionment so a case
never has to be stitched together in memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .interchange import ScaleSamples
from .seeding import rng_for

GLOBAL_STREAM_CLASS = 0  # class slot reserved for the global draw's sub-stream


@dataclass
class DenseFeatureVolume:
    """Per-voxel features (voxels x channels, float32) and aligned labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a voxels x channels matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must align with feature rows")

    @property
    def voxels(self) -> int:
        return self.features.shape[0]

    @property
    def channels(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SamplingConfig:
    rate: float = 0.05
    per_class_min: int = 10
    per_class_max: int = 500
    global_base: int = 300
    global_min: int = 32
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"rate {self.rate} outside (0, 1]")
        if self.per_class_min > self.per_class_max:
            raise ValueError("per_class_min > per_class_max")
        if self.global_min > self.global_base:
            raise ValueError("global_min > global_base")


def class_sample_size(voxel_count: int, config: SamplingConfig) -> int | None:
    """Rows to draw for a class with voxel_count foreground voxels, or None
    when the class falls below the per-class floor."""
    if voxel_count < config.per_class_min:
        return None
    n = math.floor(config.rate * voxel_count + 0.5)
    return max(config.per_class_min, min(config.per_class_max, voxel_count, n))


def scale_sample_budget(scale_index: int, config: SamplingConfig) -> int:
    """Global sample budget at a 1-based scale; halves per step toward the
    bottleneck, floored at global_min."""
    if scale_index < 1:
        raise ValueError(f"scale_index {scale_index} must be >= 1")
    return max(config.global_min, config.global_base >> (scale_index - 1))


def _draw(rng: np.random.Generator, pool: np.ndarray, n: int) -> np.ndarray:
    idx = rng.choice(pool.shape[0], size=n, replace=False)
    idx.sort()
    return pool[idx]


def stratified_class_sample(
    volume: DenseFeatureVolume,
    config: SamplingConfig,
    class_id: int,
    *,
    case_id: str = "",
    scale_index: int = 1,
) -> np.ndarray | None:
    """Uniform without-replacement draw from one foreground class, or None when
    the class has fewer than per_class_min voxels. Deterministic under
    (seed, case_id, scale_index, class_id)."""
    if class_id < 1:
        raise ValueError("background (class 0) is never class-sampled")
    voxel_idx = np.flatnonzero(volume.labels == class_id)
    n = class_sample_size(voxel_idx.size, config)
    if n is None:
        return None
    rng = rng_for(config.seed, case_id, scale_index, class_id)
    return volume.features[_draw(rng, voxel_idx, n)]


def global_sample(
    volume: DenseFeatureVolume,
    count: int,
    config: SamplingConfig,
    *,
    case_id: str = "",
    scale_index: int = 1,
) -> np.ndarray:
    """min(count, voxels) rows drawn uniformly over all voxels, background
    included. Deterministic under (seed, case_id, scale_index)."""
    if count < 2:
        raise ValueError(f"global sample count {count} must be >= 2")
    n = min(count, volume.voxels)
    rng = rng_for(config.seed, case_id, scale_index, GLOBAL_STREAM_CLASS)
    return volume.features[_draw(rng, np.arange(volume.voxels), n)]


def apportion(total: int, shares: Sequence[int]) -> list[int]:
    """Split `total` draws across pools of the given sizes, proportionally
    with largest-remainder rounding, never exceeding any pool."""
    sizes = np.asarray(shares, dtype=np.int64)
    pool = int(sizes.sum())
    if total > pool:
        raise ValueError(f"cannot draw {total} from {pool} available")
    quotas = total * sizes / pool if pool else sizes.astype(np.float64)
    counts = np.minimum(np.floor(quotas).astype(np.int64), sizes)
    # Hand out the remainder by descending fractional part, patch order on ties.
    while counts.sum() < total:
        frac = np.where(counts < sizes, quotas - counts, -np.inf)
        counts[int(np.argmax(frac))] += 1
    return [int(c) for c in counts]


def sample_from_patches(
    patches: Sequence[DenseFeatureVolume],
    config: SamplingConfig,
    *,
    case_id: str = "",
    scale_index: int = 1,
) -> ScaleSamples:
    """Sample one scale of one case from patch fragments without stitching.

    Budgets match the dense-path rules: per-class and global totals are the
    clamped sizes computed over the whole case, then apportioned across
    patches in proportion to each patch's share of the relevant voxels.
    """
    if not patches:
        raise ValueError("empty patch stream")
    channels = patches[0].channels
    for p in patches[1:]:
        if p.channels != channels:
            raise ValueError(
                f"channel mismatch across patches: {p.channels} vs {channels}"
            )

    class_ids = sorted(
        {int(c) for p in patches for c in np.unique(p.labels) if c >= 1}
    )
    class_samples: dict[int, np.ndarray] = {}
    for class_id in class_ids:
        per_patch_idx = [np.flatnonzero(p.labels == class_id) for p in patches]
        per_patch_counts = [idx.size for idx in per_patch_idx]
        n = class_sample_size(sum(per_patch_counts), config)
        if n is None:
            continue
        parts = []
        for pi, (patch, idx, take) in enumerate(
            zip(patches, per_patch_idx, apportion(n, per_patch_counts))
        ):
            if take == 0:
                continue
            rng = rng_for(config.seed, case_id, scale_index, class_id, pi)
            parts.append(patch.features[_draw(rng, idx, take)])
        class_samples[class_id] = np.concatenate(parts, axis=0)

    total_voxels = sum(p.voxels for p in patches)
    budget = min(scale_sample_budget(scale_index, config), total_voxels)
    global_parts = []
    for pi, (patch, take) in enumerate(
        zip(patches, apportion(budget, [p.voxels for p in patches]))
    ):
        if take == 0:
            continue
        rng = rng_for(config.seed, case_id, scale_index, GLOBAL_STREAM_CLASS, pi)
        global_parts.append(patch.features[_draw(rng, np.arange(patch.voxels), take)])
    global_samples = (
        np.concatenate(global_parts, axis=0)
        if global_parts
        else np.empty((0, channels), dtype=patches[0].features.dtype)
    )
    return ScaleSamples(
        channels=channels,
        class_samples=class_samples,
        global_samples=global_samples,
    )


def sample_dense(
    volume: DenseFeatureVolume,
    config: SamplingConfig,
    *,
    case_id: str = "",
    scale_index: int = 1,
) -> ScaleSamples:
    """Dense-path equivalent of sample_from_patches for in-memory volumes."""
    class_samples: dict[int, np.ndarray] = {}
    for class_id in sorted(int(c) for c in np.unique(volume.labels) if c >= 1):
        m = stratified_class_sample(
            volume, config, class_id, case_id=case_id, scale_index=scale_index
        )
        if m is not None:
            class_samples[class_id] = m
    budget = scale_sample_budget(scale_index, config)
    return ScaleSamples(
        channels=volume.channels,
        class_samples=class_samples,
        global_samples=global_sample(
            volume, budget, config, case_id=case_id, scale_index=scale_index
        ),
    )
