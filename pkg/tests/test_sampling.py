import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xferfv.sampling import (
    DenseFeatureVolume,
    SamplingConfig,
    apportion,
    class_sample_size,
    global_sample,
    sample_dense,
    sample_from_patches,
    scale_sample_budget,
    stratified_class_sample,
)

CFG = SamplingConfig()


def volume_with_counts(rng, counts: dict[int, int], channels: int = 4):
    labels = np.concatenate([np.full(n, k) for k, n in counts.items()])
    rng.shuffle(labels)
    features = rng.standard_normal((labels.size, channels)).astype(np.float32)
    return DenseFeatureVolume(features=features, labels=labels)


def test_class_sample_size_rule():
    cfg = SamplingConfig(rate=0.1, per_class_min=10, per_class_max=500)
    assert class_sample_size(1000, cfg) == 100
    assert class_sample_size(5, cfg) is None
    assert class_sample_size(10**5, cfg) == 500
    assert class_sample_size(9, cfg) is None
    assert class_sample_size(10, cfg) == 10


def test_class_sample_size_rounds_half_up():
    cfg = SamplingConfig(rate=0.05, per_class_min=1, per_class_max=500)
    assert class_sample_size(250, cfg) == 13  # 12.5 rounds up
    assert class_sample_size(249, cfg) == 12  # 12.45 rounds down
    assert class_sample_size(30, cfg) == 2  # 1.5 rounds up


@given(v=st.integers(0, 10**6), rate=st.floats(0.001, 1.0))
@settings(max_examples=60, deadline=None)
def test_class_sample_size_bounds(v, rate):
    cfg = SamplingConfig(rate=rate, per_class_min=10, per_class_max=500)
    n = class_sample_size(v, cfg)
    if v < cfg.per_class_min:
        assert n is None
    else:
        assert cfg.per_class_min <= n <= min(cfg.per_class_max, v)
        lo, hi = cfg.per_class_min, min(cfg.per_class_max, v)
        unclamped = rate * v
        if lo <= unclamped <= hi:
            assert abs(n - unclamped) <= 0.5 + 1e-9


def test_scale_sample_budget_halves_with_floor():
    cfg = SamplingConfig(global_base=300, global_min=32)
    assert scale_sample_budget(1, cfg) == 300
    assert scale_sample_budget(2, cfg) == 150
    assert scale_sample_budget(3, cfg) == 75
    assert scale_sample_budget(6, cfg) == 32
    with pytest.raises(ValueError):
        scale_sample_budget(0, cfg)


def test_stratified_sample_deterministic_and_replacement_free(rng):
    vol = volume_with_counts(rng, {0: 200, 1: 123})
    cfg = SamplingConfig(rate=0.2, per_class_min=5, per_class_max=500, seed=7)
    a = stratified_class_sample(vol, cfg, 1, case_id="c", scale_index=1)
    b = stratified_class_sample(vol, cfg, 1, case_id="c", scale_index=1)
    assert a.tobytes() == b.tobytes()
    assert a.shape == (25, 4)  # round(0.2 * 123) = 25
    # Feature rows are iid gaussian, so duplicate rows imply replacement.
    assert len({row.tobytes() for row in a}) == a.shape[0]
    c = stratified_class_sample(vol, cfg, 1, case_id="c2", scale_index=1)
    assert a.tobytes() != c.tobytes()


def test_stratified_sample_below_floor_absent(rng):
    vol = volume_with_counts(rng, {0: 50, 1: 5})
    assert stratified_class_sample(vol, CFG, 1) is None


def test_stratified_sample_rejects_background(rng):
    vol = volume_with_counts(rng, {0: 50, 1: 50})
    with pytest.raises(ValueError):
        stratified_class_sample(vol, CFG, 0)


def test_global_sample_exhausts_small_volumes(rng):
    vol = volume_with_counts(rng, {0: 10})
    rows = global_sample(vol, 300, CFG)
    assert rows.shape == (10, 4)
    assert sorted(r.tobytes() for r in rows) == sorted(
        r.tobytes() for r in vol.features
    )


def test_global_sample_seed_sensitivity(rng):
    vol = volume_with_counts(rng, {0: 10**4})
    a = global_sample(vol, 100, SamplingConfig(seed=1))
    b = global_sample(vol, 100, SamplingConfig(seed=1))
    c = global_sample(vol, 100, SamplingConfig(seed=2))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_global_sample_includes_background(rng):
    # All voxels are background; the global draw must still work.
    vol = volume_with_counts(rng, {0: 64})
    assert global_sample(vol, 32, CFG).shape == (32, 4)


def test_global_sample_count_floor(rng):
    vol = volume_with_counts(rng, {0: 10})
    with pytest.raises(ValueError):
        global_sample(vol, 1, CFG)


def test_apportion_largest_remainder():
    assert apportion(10, [50, 50]) == [5, 5]
    assert apportion(10, [60, 40]) == [6, 4]
    assert apportion(3, [1, 1, 1]) == [1, 1, 1]
    assert apportion(2, [1, 1, 1000]) == [0, 0, 2]
    assert sum(apportion(7, [3, 3, 3])) == 7
    with pytest.raises(ValueError):
        apportion(5, [2, 2])


def test_apportion_never_exceeds_pool_sizes():
    counts = apportion(9, [1, 8, 2])
    assert sum(counts) == 9
    assert all(c <= s for c, s in zip(counts, [1, 8, 2]))


def test_single_patch_equals_dense_counts(rng):
    vol = volume_with_counts(rng, {0: 400, 1: 150, 2: 80})
    cfg = SamplingConfig(rate=0.1, per_class_min=5, per_class_max=500, seed=11)
    dense = sample_dense(vol, cfg, case_id="c", scale_index=1)
    patched = sample_from_patches([vol], cfg, case_id="c", scale_index=1)
    assert sorted(dense.class_samples) == sorted(patched.class_samples)
    for k in dense.class_samples:
        assert dense.class_samples[k].shape == patched.class_samples[k].shape
    assert dense.global_samples.shape == patched.global_samples.shape


def test_two_half_patches_split_class_budget(rng):
    # Class 1 is split evenly; each half must contribute n_k/2 +- 1 rows.
    # Features in the first half are negative, second half positive, so a
    # row's sign identifies its source patch.
    n_half = 200
    cfg = SamplingConfig(rate=0.1, per_class_min=5, per_class_max=500, seed=3)
    left = DenseFeatureVolume(
        features=-1.0 - np.abs(rng.standard_normal((n_half, 2))).astype(np.float32),
        labels=np.ones(n_half, dtype=np.int64),
    )
    right = DenseFeatureVolume(
        features=1.0 + np.abs(rng.standard_normal((n_half, 2))).astype(np.float32),
        labels=np.ones(n_half, dtype=np.int64),
    )
    out = sample_from_patches([left, right], cfg, case_id="c", scale_index=1)
    n_k = class_sample_size(2 * n_half, cfg)
    rows = out.class_samples[1]
    assert rows.shape[0] == n_k
    from_left = int((rows[:, 0] < 0).sum())
    assert abs(from_left - n_k / 2) <= 1


def test_patch_channel_mismatch_rejected(rng):
    a = volume_with_counts(rng, {1: 30}, channels=2)
    b = volume_with_counts(rng, {1: 30}, channels=3)
    with pytest.raises(ValueError):
        sample_from_patches([a, b], CFG)


def test_empty_patch_stream_rejected():
    with pytest.raises(ValueError):
        sample_from_patches([], CFG)


def test_patch_global_budget_capped_by_voxels(rng):
    vol = volume_with_counts(rng, {0: 20})
    out = sample_from_patches([vol], SamplingConfig(global_base=300, global_min=32))
    assert out.global_samples.shape[0] == 20


def test_patch_sampling_deterministic(rng):
    halves = [volume_with_counts(rng, {0: 64, 1: 40}) for _ in range(2)]
    a = sample_from_patches(halves, CFG, case_id="c", scale_index=2)
    b = sample_from_patches(halves, CFG, case_id="c", scale_index=2)
    assert a == b


def test_sampling_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig(rate=0.0)
    with pytest.raises(ValueError):
        SamplingConfig(rate=1.5)
    with pytest.raises(ValueError):
        SamplingConfig(per_class_min=50, per_class_max=10)
    with pytest.raises(ValueError):
        SamplingConfig(global_min=500, global_base=300)
