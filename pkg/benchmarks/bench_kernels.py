#!/usr/bin/env python3
"""Times the two builds of the hot kernels (numba @njit vs pure numpy).

Run from the repository root:

    python3 benchmarks/bench_kernels.py

The numba build must be importable; XFERFV_NO_NUMBA must not be set, since
the point is to compare both builds in one process. Each workload is checked
for agreement between the builds before it is timed.
"""

import statistics
import time

import numpy as np

from xferfv._kernels import (
    BACKEND,
    hse_energy,
    hse_energy_numpy,
    w2_sq_pairs,
    w2_sq_pairs_numpy,
)

REPEATS = 5

print("=" * 64)
print("KERNEL BENCHMARK  (numba vs numpy)")
print("=" * 64)
print(f"active backend: {BACKEND}")

if BACKEND != "numba":
    raise SystemExit(
        "numba build inactive (XFERFV_NO_NUMBA set or numba missing); "
        "nothing to compare"
    )


def timed(fn, *args):
    samples = []
    for _ in range(REPEATS):
        start = time.perf_counter()
        result = fn(*args)
        samples.append(time.perf_counter() - start)
    return statistics.median(samples), result


def unit_rows(rng, n, c):
    rows = rng.standard_normal((n, c))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


rng = np.random.default_rng(0)

# Trigger JIT compilation outside the timed region.
hse_energy(unit_rows(rng, 4, 4), 1.0)
tiny_means = rng.standard_normal((2, 2))
tiny_covs = np.stack([np.eye(2), np.eye(2)])
w2_sq_pairs(tiny_means, tiny_covs, np.array([0]), np.array([1]))

print("\nhyperspherical energy (s = 1), median of %d runs" % REPEATS)
print(f"{'points':>8} {'dim':>5} {'numba':>10} {'numpy':>10} {'speedup':>8}")
for n, c in [(256, 32), (1024, 32), (2048, 16)]:
    pts = unit_rows(rng, n, c)
    got = hse_energy(pts, 1.0)
    ref = hse_energy_numpy(pts, 1.0)
    rel = abs(got - ref) / abs(ref)
    assert rel < 1e-9, f"builds disagree: rel error {rel:.3e}"
    t_nb, _ = timed(hse_energy, pts, 1.0)
    t_np, _ = timed(hse_energy_numpy, pts, 1.0)
    print(f"{n:>8} {c:>5} {t_nb * 1e3:>8.2f}ms {t_np * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x")

print("\nbatched squared W2 over all pairs, median of %d runs" % REPEATS)
print(f"{'summaries':>10} {'dim':>5} {'pairs':>7} {'numba':>10} {'numpy':>10} {'speedup':>8}")
for m, c in [(48, 8), (64, 16), (64, 32)]:
    means = rng.standard_normal((m, c))
    mats = rng.standard_normal((m, c, c))
    covs = mats @ mats.transpose(0, 2, 1) + 0.1 * np.eye(c)
    ia, ib = np.triu_indices(m, k=1)
    ia = ia.astype(np.int64)
    ib = ib.astype(np.int64)
    got = w2_sq_pairs(means, covs, ia, ib)
    ref = w2_sq_pairs_numpy(means, covs, ia, ib)
    rel = np.abs(got - ref).max() / np.abs(ref).max()
    assert rel < 1e-9, f"builds disagree: rel error {rel:.3e}"
    t_nb, _ = timed(w2_sq_pairs, means, covs, ia, ib)
    t_np, _ = timed(w2_sq_pairs_numpy, means, covs, ia, ib)
    print(
        f"{m:>10} {c:>5} {len(ia):>7} {t_nb * 1e3:>8.2f}ms "
        f"{t_np * 1e3:>8.2f}ms {t_np / t_nb:>7.1f}x"
    )

print("\nall agreement checks passed")
