"""Hot numeric kernels: pairwise hyperspherical energy and batched Gaussian
2-Wasserstein distances.

Both kernels exist twice: a numba @njit build and a pure-numpy build. The
numba build is used when numba imports and the XFERFV_NO_NUMBA environment
variable is unset; results agree with the numpy build to ~1e-12 relative
(floating-point reduction order is the only difference). `BACKEND` records
which build is active. `benchmarks/bench_kernels.py` times the two.
"""

from __future__ import annotations

import os

import numpy as np

HSE_DISTANCE_FLOOR = 1e-8

_FLAG = os.environ.get("XFERFV_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false")


def _hse_energy_numpy(points: np.ndarray, s: float) -> float:
    """Ordered-pair Riesz energy over unit-norm rows, distances floored.

    Row-blocked so the n x n x c difference tensor is never materialized;
    differences are formed directly (no Gram trick) to keep small distances
    accurate.
    """
    n = points.shape[0]
    total = 0.0
    for i in range(n - 1):
        diff = points[i + 1 :] - points[i]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        np.maximum(d, HSE_DISTANCE_FLOOR, out=d)
        if s == 0.0:
            total += float(-np.log(d).sum())
        else:
            total += float((d**-s).sum())
    return 2.0 * total


def _w2_sq_pairs_numpy(
    means: np.ndarray, covs: np.ndarray, ia: np.ndarray, ib: np.ndarray
) -> np.ndarray:
    """Squared W2 for index pairs (ia[p], ib[p]) over stacked summaries."""
    m = means.shape[0]
    roots = np.empty_like(covs)
    traces = np.empty(m)
    for i in range(m):
        w, v = np.linalg.eigh(covs[i])
        root = (v * np.sqrt(np.maximum(w, 0.0))) @ v.T
        roots[i] = 0.5 * (root + root.T)
        traces[i] = np.trace(covs[i])
    out = np.empty(ia.shape[0])
    for p in range(ia.shape[0]):
        a, b = ia[p], ib[p]
        inner = roots[a] @ covs[b] @ roots[a]
        w = np.linalg.eigvalsh(0.5 * (inner + inner.T))
        cross = np.sqrt(np.maximum(w, 0.0)).sum()
        delta = means[a] - means[b]
        out[p] = max(delta @ delta + traces[a] + traces[b] - 2.0 * cross, 0.0)
    return out


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def hse_energy(points, s):
        n, c = points.shape
        total = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                d2 = 0.0
                for k in range(c):
                    diff = points[i, k] - points[j, k]
                    d2 += diff * diff
                d = np.sqrt(d2)
                if d < HSE_DISTANCE_FLOOR:
                    d = HSE_DISTANCE_FLOOR
                if s == 0.0:
                    total += -np.log(d)
                else:
                    total += d ** (-s)
        return 2.0 * total

    @njit(cache=True)
    def w2_sq_pairs(means, covs, ia, ib):
        m, c = means.shape
        roots = np.empty((m, c, c))
        traces = np.empty(m)
        for i in range(m):
            w, v = np.linalg.eigh(covs[i])
            for k in range(c):
                w[k] = np.sqrt(max(w[k], 0.0))
            root = (v * w) @ v.T
            roots[i] = 0.5 * (root + root.T)
            traces[i] = np.trace(covs[i])
        out = np.empty(ia.shape[0])
        for p in range(ia.shape[0]):
            a, b = ia[p], ib[p]
            inner = roots[a] @ covs[b] @ roots[a]
            w = np.linalg.eigvalsh(0.5 * (inner + inner.T))
            cross = 0.0
            for k in range(c):
                if w[k] > 0.0:
                    cross += np.sqrt(w[k])
            dmu2 = 0.0
            for k in range(c):
                d = means[a, k] - means[b, k]
                dmu2 += d * d
            sq = dmu2 + traces[a] + traces[b] - 2.0 * cross
            out[p] = sq if sq > 0.0 else 0.0
        return out

    return hse_energy, w2_sq_pairs


if NUMBA_DISABLED:
    BACKEND = "numpy"
    hse_energy, w2_sq_pairs = _hse_energy_numpy, _w2_sq_pairs_numpy
else:
    try:
        hse_energy, w2_sq_pairs = _build_numba()
        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"
        hse_energy, w2_sq_pairs = _hse_energy_numpy, _w2_sq_pairs_numpy

# Always-importable references for cross-checks and benchmarks.
hse_energy_numpy = _hse_energy_numpy
w2_sq_pairs_numpy = _w2_sq_pairs_numpy
