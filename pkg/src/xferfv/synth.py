"""Synthetic model banks with a controllable quality knob.

Each bank is a family of models scoring the same synthetic cases. A model's
quality q in [0, 1] controls two things at once:

* class tightness: per class k there is one dataset-level anchor direction
  shared by every model; a case's class-k feature cloud is Gaussian around
  ``q * anchor + (1 - q) * case_offset``, so higher q pulls the per-case
  distributions together and shrinks class consistency distances;
* global dispersal: global samples mix the class clouds with a background
  blob whose standard deviation grows with q, so higher q spreads the
  normalized samples wider and raises feature variety.

Both effects point the transferability score the same way, and the ground
truth performance is defined to be q itself, which makes rank agreement
checks exact rather than statistical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .interchange import CaseBundle, PerformanceRecord, ScaleSamples
from .seeding import rng_for

CLASS_ROWS = 48
GLOBAL_BASE_ROWS = 256
GLOBAL_MIN_ROWS = 64
CLASS_MIX_FRACTION = 0.2
BACKGROUND_SIGMA_FLOOR = 0.05
BACKGROUND_SIGMA_GAIN = 0.55
POSTERIOR_TEMPERATURE = 0.25


def _default_quality() -> dict[str, float]:
    return {f"model_{i:02d}": i / 5.0 for i in range(6)}


@dataclass(frozen=True)
class SynthSpec:
    """Bank shape: models with distinct qualities, shared synthetic cases."""

    n_models: int = 6
    n_cases: int = 8
    n_classes: int = 2
    channels_per_scale: tuple[int, ...] = (16, 32)
    quality: Mapping[str, float] = field(default_factory=_default_quality)
    noise_sigma: float = 0.05
    seed: int = 42

    def __post_init__(self):
        if self.n_models < 1 or self.n_cases < 1 or self.n_classes < 1:
            raise ValueError("n_models, n_cases and n_classes must be >= 1")
        if not self.channels_per_scale:
            raise ValueError("channels_per_scale must be non-empty")
        if any(c < 1 for c in self.channels_per_scale):
            raise ValueError("channel counts must be >= 1")
        object.__setattr__(
            self, "channels_per_scale", tuple(int(c) for c in self.channels_per_scale)
        )
        object.__setattr__(self, "quality", dict(self.quality))
        if len(self.quality) != self.n_models:
            raise ValueError(
                f"quality has {len(self.quality)} entries, expected {self.n_models}"
            )
        vals = list(self.quality.values())
        if len(set(vals)) != len(vals):
            raise ValueError("quality values must be distinct")
        if any(not 0.0 <= q <= 1.0 for q in vals):
            raise ValueError("quality values must lie in [0, 1]")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be > 0")


def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _global_rows(scale_index: int) -> int:
    return max(GLOBAL_MIN_ROWS, GLOBAL_BASE_ROWS >> (scale_index - 1))


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _case_scale(
    spec: SynthSpec,
    model_id: str,
    q: float,
    case_id: str,
    scale_index: int,
    channels: int,
    anchors: np.ndarray,
) -> ScaleSamples:
    class_samples: dict[int, np.ndarray] = {}
    centers = np.empty((spec.n_classes, channels))
    for k in range(1, spec.n_classes + 1):
        offset = _unit_vector(
            rng_for(spec.seed, "offset", model_id, case_id, scale_index, k), channels
        )
        center = q * anchors[k - 1] + (1.0 - q) * offset
        centers[k - 1] = center
        noise_rng = rng_for(
            spec.seed, "class-noise", model_id, case_id, scale_index, k
        )
        rows = center + spec.noise_sigma * noise_rng.standard_normal(
            (CLASS_ROWS, channels)
        )
        class_samples[k] = rows.astype(np.float32)

    g_rng = rng_for(spec.seed, "global", model_id, case_id, scale_index)
    total = _global_rows(scale_index)
    n_mix = int(round(total * CLASS_MIX_FRACTION))
    mix = centers[np.arange(n_mix) % spec.n_classes] + (
        spec.noise_sigma * g_rng.standard_normal((n_mix, channels))
    )
    bg_dir = _unit_vector(rng_for(spec.seed, "background", scale_index), channels)
    bg_sigma = BACKGROUND_SIGMA_FLOOR + BACKGROUND_SIGMA_GAIN * q
    background = bg_dir + bg_sigma * g_rng.standard_normal((total - n_mix, channels))
    global_samples = np.concatenate([mix, background]).astype(np.float32)

    stacked = np.concatenate([class_samples[k] for k in sorted(class_samples)])
    dists = np.linalg.norm(
        stacked[:, None, :].astype(np.float64) - anchors[None, :, :], axis=2
    )
    posteriors = _softmax_rows(-dists / POSTERIOR_TEMPERATURE).astype(np.float32)

    return ScaleSamples(
        channels=channels,
        class_samples=class_samples,
        global_samples=global_samples,
        source_posteriors=posteriors,
    )


def generate_bank(
    spec: SynthSpec,
) -> tuple[dict[str, list[CaseBundle]], list[PerformanceRecord]]:
    """Bundles for every model plus the ground-truth performance table."""
    anchors_per_scale = []
    for scale_index, channels in enumerate(spec.channels_per_scale, start=1):
        anchors = np.stack(
            [
                _unit_vector(rng_for(spec.seed, "anchor", scale_index, k), channels)
                for k in range(1, spec.n_classes + 1)
            ]
        )
        anchors_per_scale.append(anchors)

    bank: dict[str, list[CaseBundle]] = {}
    performance: list[PerformanceRecord] = []
    for model_id in sorted(spec.quality):
        q = float(spec.quality[model_id])
        cases = []
        for case_index in range(spec.n_cases):
            case_id = f"case_{case_index:02d}"
            scales = [
                _case_scale(
                    spec,
                    model_id,
                    q,
                    case_id,
                    scale_index,
                    channels,
                    anchors_per_scale[scale_index - 1],
                )
                for scale_index, channels in enumerate(
                    spec.channels_per_scale, start=1
                )
            ]
            cases.append(
                CaseBundle(
                    case_id=case_id,
                    num_classes=spec.n_classes + 1,
                    scales=scales,
                )
            )
        bank[model_id] = cases
        performance.append(PerformanceRecord(model_id=model_id, dice=q))
    return bank, performance
