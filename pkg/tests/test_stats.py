"""Two-sample comparison statistics and alcove binning."""

import numpy as np
import pytest

from affsim.errors import StatisticsError
from affsim.rng import stream
from affsim.stats import alcove_bin_index, alcove_cells, two_sample_stats


def test_identical_samples_are_indistinguishable():
    a = np.linspace(0.0, 1.0, 500)
    r = two_sample_stats(a, a.copy())
    assert r.ks_stat == 0.0
    assert r.ks_p == 1.0
    assert r.wasserstein1 == 0.0
    assert r.energy_p > 0.5


def test_same_law_passes():
    rng = stream(1, "same")
    r = two_sample_stats(rng.normal(size=1500), rng.normal(size=1500))
    assert r.ks_p > 0.01
    assert r.energy_p > 0.01


def test_shifted_law_fails_hard():
    rng = stream(2, "shift")
    r = two_sample_stats(rng.normal(size=1500), rng.normal(size=1500) + 0.5)
    assert r.ks_p < 1e-6
    assert r.energy_p < 0.01
    assert r.wasserstein1 == pytest.approx(0.5, abs=0.08)


def test_multivariate_marginals_and_energy():
    rng = stream(3, "multi")
    a = rng.normal(size=(1200, 2))
    b = rng.normal(size=(1200, 2))
    r = two_sample_stats(a, b)
    assert r.wasserstein1 is None
    assert r.ks_p > 0.01 and r.energy_p > 0.01
    # correlation change invisible to the marginals, caught by energy
    c = rng.normal(size=(1200, 1))
    corr = np.hstack([c, 0.9 * c + np.sqrt(1 - 0.81) * rng.normal(size=(1200, 1))])
    r2 = two_sample_stats(a, corr)
    assert r2.energy_p < 0.01


def test_two_sample_validation():
    with pytest.raises(StatisticsError):
        two_sample_stats(np.zeros(10), np.zeros(10))
    with pytest.raises(StatisticsError):
        two_sample_stats(np.ones(500), np.ones(500))
    with pytest.raises(StatisticsError):
        two_sample_stats(np.random.default_rng(0).normal(size=(200, 2)), np.zeros(200))
    with pytest.raises(StatisticsError):
        two_sample_stats(np.arange(300.0), np.arange(300.0), permutations=10)


def test_two_sample_deterministic_without_rng():
    rng = stream(5, "det")
    a, b = rng.normal(size=600), rng.normal(size=600)
    assert two_sample_stats(a, b) == two_sample_stats(a, b)


# ---------------------------------------------------------------------------
# alcove binning


def test_rank1_cells_partition_interval(rs1):
    width = float(rs1.fundamental_weights[0, 0])
    mids = alcove_cells(rs1, 4)
    np.testing.assert_allclose(mids[:, 0], (np.arange(4) + 0.5) / 4 * width)
    xs = np.linspace(1e-6, width - 1e-6, 1000)[:, None]
    idx = alcove_bin_index(rs1, xs, 4)
    assert idx.min() == 0 and idx.max() == 3
    # each point lands in the cell whose barycenter is nearest
    near = np.argmin(np.abs(xs - mids[:, 0][None, :]), axis=1)
    np.testing.assert_array_equal(idx, near)


def test_rank2_cells_cover_and_align(rs2):
    cells = 25
    mids = alcove_cells(rs2, cells)
    assert mids.shape == (cells, 2)
    # barycenters are interior and their own bin index
    vals = mids @ rs2.positive_roots.T
    assert np.all(vals > 0.0) and np.all(vals < 1.0)
    np.testing.assert_array_equal(alcove_bin_index(rs2, mids, cells), np.arange(cells))


def test_rank2_binning_is_exhaustive(rs2, rng):
    verts = np.vstack([np.zeros(2), rs2.fundamental_weights])
    pts = rng.dirichlet(np.ones(3), size=20_000) @ verts
    idx = alcove_bin_index(rs2, pts, 16)
    counts = np.bincount(idx, minlength=16)
    assert idx.min() >= 0 and idx.max() < 16
    # equal-volume cells: uniform points spread evenly
    expect = 20_000 / 16
    assert np.all(np.abs(counts - expect) < 6.0 * np.sqrt(expect))


def test_binning_validation(rs1, rs2):
    with pytest.raises(StatisticsError):
        alcove_cells(rs1, 0)
    with pytest.raises(StatisticsError):
        alcove_cells(rs2, 24)
    with pytest.raises(StatisticsError):
        alcove_bin_index(rs2, np.zeros((1, 2)), 10)
