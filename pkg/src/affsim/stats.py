"""Two-sample statistics and alcove binning for the experiment harness.

The distributional checks compare Monte Carlo samples that are exact in law,
so the statistics here are standard: Kolmogorov-Smirnov on 1-d projections,
rank-1 Wasserstein distance, and the energy distance with a permutation
p-value for joint laws.  Binning utilities partition the alcove into
equal-volume cells for conditional-expectation regressions.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import stats as sps

from .errors import StatisticsError
from .rng import stream
from .rootsys import RootSystem

# permutation test cost is quadratic in the sample size; larger inputs are
# deterministically subsampled to this many points per side
ENERGY_SUBSAMPLE = 2000
MIN_SAMPLES = 100


class SampleComparison(NamedTuple):
    ks_stat: float
    ks_p: float
    wasserstein1: float | None
    energy_stat: float
    energy_p: float


def _as_2d(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise StatisticsError("samples must be 1-d or (N, dim) arrays")
    return arr


def _check_samples(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] < MIN_SAMPLES or b.shape[0] < MIN_SAMPLES:
        raise StatisticsError(
            f"need at least {MIN_SAMPLES} samples per side, "
            f"got {a.shape[0]} and {b.shape[0]}"
        )
    if a.shape[1] != b.shape[1]:
        raise StatisticsError("samples have mismatched dimensions")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise StatisticsError("samples contain non-finite values")
    pooled = np.concatenate([a, b], axis=0)
    if np.all(np.ptp(pooled, axis=0) == 0.0):
        raise StatisticsError("degenerate samples: zero spread on every axis")


def _energy_statistic(dist: np.ndarray, idx_a: np.ndarray, idx_b: np.ndarray) -> float:
    # E-statistic 2 E|A-B| - E|A-A'| - E|B-B'| from a pooled distance matrix
    n, m = idx_a.size, idx_b.size
    d_ab = dist[np.ix_(idx_a, idx_b)].mean()
    d_aa = dist[np.ix_(idx_a, idx_a)].sum() / (n * n)
    d_bb = dist[np.ix_(idx_b, idx_b)].sum() / (m * m)
    return float(2.0 * d_ab - d_aa - d_bb)


def two_sample_stats(
    a,
    b,
    permutations: int = 200,
    rng: np.random.Generator | None = None,
) -> SampleComparison:
    """Compare two samples of a common law; see SampleComparison fields.

    1-d inputs get the exact two-sample KS statistic and the rank-1
    Wasserstein distance.  Multi-d inputs get per-coordinate KS with a
    Bonferroni-combined p-value (wasserstein1 is None there).  The energy
    distance always tests the joint law, with a permutation p-value from
    at least 200 relabelings.  Deterministic: without an explicit rng the
    permutations and any subsampling come from a fixed internal stream.
    """
    if permutations < 200:
        raise StatisticsError("need at least 200 permutations")
    a, b = _as_2d(a), _as_2d(b)
    _check_samples(a, b)
    if rng is None:
        rng = stream(0x5747, "two-sample", a.shape[0], b.shape[0], a.shape[1])

    if a.shape[1] == 1:
        ks = sps.ks_2samp(a[:, 0], b[:, 0])
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
        w1 = float(sps.wasserstein_distance(a[:, 0], b[:, 0]))
    else:
        per = [sps.ks_2samp(a[:, j], b[:, j]) for j in range(a.shape[1])]
        worst = min(range(len(per)), key=lambda j: per[j].pvalue)
        ks_stat = float(per[worst].statistic)
        ks_p = float(min(1.0, a.shape[1] * per[worst].pvalue))
        w1 = None

    # deterministic subsample keeps the pooled distance matrix bounded
    sub_a = a if a.shape[0] <= ENERGY_SUBSAMPLE else a[
        rng.choice(a.shape[0], ENERGY_SUBSAMPLE, replace=False)
    ]
    sub_b = b if b.shape[0] <= ENERGY_SUBSAMPLE else b[
        rng.choice(b.shape[0], ENERGY_SUBSAMPLE, replace=False)
    ]
    pooled = np.concatenate([sub_a, sub_b], axis=0)
    dist = np.sqrt(
        np.maximum(
            0.0,
            np.add.outer((pooled**2).sum(1), (pooled**2).sum(1))
            - 2.0 * (pooled @ pooled.T),
        )
    )
    n, total = sub_a.shape[0], pooled.shape[0]
    observed = _energy_statistic(dist, np.arange(n), np.arange(n, total))
    hits = 0
    for _ in range(permutations):
        perm = rng.permutation(total)
        if _energy_statistic(dist, perm[:n], perm[n:]) >= observed:
            hits += 1
    energy_p = (1.0 + hits) / (1.0 + permutations)
    return SampleComparison(ks_stat, ks_p, w1, observed, float(energy_p))


# ---------------------------------------------------------------------------
# alcove binning


def alcove_cells(rs: RootSystem, cells: int) -> np.ndarray:
    """Barycenters of an equal-volume partition of the alcove, (cells, rank).

    Rank 1: interval split into `cells` equal pieces.  Rank 2: the alcove
    triangle split into k^2 congruent triangles (cells must be a perfect
    square).  Higher ranks are not needed by the experiments.
    """
    if cells <= 0:
        raise StatisticsError("cells must be positive")
    if rs.rank == 1:
        width = rs.fundamental_weights[0, 0]
        return ((np.arange(cells) + 0.5) / cells * width)[:, None]
    if rs.rank == 2:
        k = math.isqrt(cells)
        if k * k != cells:
            raise StatisticsError("rank-2 binning needs a square cell count")
        v1, v2 = _triangle_vertices(rs)
        out = np.empty((cells, 2))
        for i, j, up, idx in _triangle_cells(k):
            # centroid in barycentric coordinates scaled back by k
            if up:
                cv, cw = (3 * i + 1) / (3 * k), (3 * j + 1) / (3 * k)
            else:
                cv, cw = (3 * i + 2) / (3 * k), (3 * j + 2) / (3 * k)
            out[idx] = cv * v1 + cw * v2
        return out
    raise StatisticsError(f"no alcove binning for rank {rs.rank}")


def alcove_bin_index(rs: RootSystem, xs: np.ndarray, cells: int) -> np.ndarray:
    """Cell index of each alcove point, aligned with alcove_cells ordering."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if rs.rank == 1:
        width = rs.fundamental_weights[0, 0]
        idx = np.floor(xs[:, 0] / width * cells).astype(int)
        return np.clip(idx, 0, cells - 1)
    if rs.rank == 2:
        k = math.isqrt(cells)
        if k * k != cells:
            raise StatisticsError("rank-2 binning needs a square cell count")
        v1, v2 = _triangle_vertices(rs)
        # barycentric coordinates w.r.t. (0, v1, v2)
        basis = np.stack([v1, v2], axis=1)
        vw = xs @ np.linalg.inv(basis).T
        kv, kw = vw[:, 0] * k, vw[:, 1] * k
        i = np.clip(np.floor(kv).astype(int), 0, k - 1)
        j = np.clip(np.floor(kw).astype(int), 0, k - 1)
        down = (kv - i) + (kw - j) > 1.0
        j = np.minimum(j, k - 1 - i)
        down &= i + j <= k - 2
        offset = 2 * k * j - j * j
        return offset + 2 * i + down.astype(int)
    raise StatisticsError(f"no alcove binning for rank {rs.rank}")


def _triangle_vertices(rs: RootSystem):
    # alcove vertices are 0 and omega_i / theta(omega_i); for A2 both
    # denominators are 1
    verts = []
    for i in range(rs.rank):
        w = rs.fundamental_weights[i]
        verts.append(w / float(w @ rs.theta))
    return verts


def _triangle_cells(k: int):
    idx = 0
    for j in range(k):
        for i in range(k - j):
            yield i, j, True, idx
            idx += 1
            if i < k - 1 - j:
                yield i, j, False, idx
                idx += 1
