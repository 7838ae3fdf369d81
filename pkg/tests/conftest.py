import numpy as np
import pytest

from xferfv.interchange import CaseBundle, ScaleSamples


def f32(rows) -> np.ndarray:
    return np.asarray(rows, dtype=np.float32)


def make_scale(
    rng: np.random.Generator,
    channels: int,
    num_classes: int,
    with_posteriors: bool,
    max_rows: int = 6,
) -> ScaleSamples:
    class_samples = {}
    present = [k for k in range(1, num_classes) if rng.random() < 0.8]
    if not present:
        present = [1]
    for k in present:
        rows = int(rng.integers(1, max_rows + 1))
        class_samples[k] = rng.standard_normal((rows, channels)).astype(np.float32)
    total = sum(m.shape[0] for m in class_samples.values())
    global_rows = int(rng.integers(0, max_rows + 1))
    global_samples = rng.standard_normal((global_rows, channels)).astype(np.float32)
    posteriors = None
    if with_posteriors:
        source_classes = int(rng.integers(1, 5))
        raw = rng.random((total, source_classes)) + 1e-3
        posteriors = (raw / raw.sum(axis=1, keepdims=True)).astype(np.float32)
    return ScaleSamples(
        channels=channels,
        class_samples=class_samples,
        global_samples=global_samples,
        source_posteriors=posteriors,
    )


def make_bundle(rng: np.random.Generator, case_id: str | None = None) -> CaseBundle:
    """A random bundle satisfying every format invariant."""
    num_classes = int(rng.integers(2, 6))
    n_scales = int(rng.integers(1, 4))
    channels = [int(rng.integers(1, 9)) for _ in range(n_scales)]
    with_posteriors = bool(rng.random() < 0.5)
    scales = [
        make_scale(rng, c, num_classes, with_posteriors and si == 0)
        for si, c in enumerate(channels)
    ]
    if case_id is None:
        case_id = f"case_{int(rng.integers(0, 10 ** 6)):06d}"
    return CaseBundle(case_id=case_id, num_classes=num_classes, scales=scales)


def scale_from_matrices(
    channels: int,
    class_samples: dict[int, np.ndarray],
    global_samples=None,
    posteriors=None,
    dtype=np.float32,
) -> ScaleSamples:
    # Serialized bundles always hold float32, but in-memory bundles may carry
    # float64; the exact-arithmetic fixtures need the extra precision.
    cast = lambda v: np.asarray(v, dtype=dtype)  # noqa: E731
    if global_samples is None:
        global_samples = np.empty((0, channels), dtype=dtype)
    return ScaleSamples(
        channels=channels,
        class_samples={k: cast(v) for k, v in class_samples.items()},
        global_samples=cast(global_samples),
        source_posteriors=None if posteriors is None else f32(posteriors),
    )


def bundle_from_scales(case_id: str, num_classes: int, scales) -> CaseBundle:
    return CaseBundle(case_id=case_id, num_classes=num_classes, scales=list(scales))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
