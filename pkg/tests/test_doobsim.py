"""Conditioned space-time dynamics: entrance law, drift SDE, weight estimator."""

import math

import numpy as np
import pytest
from scipy import stats as st

from affsim.affinephi import grad_log_phi_d_batch
from affsim.doobsim import (
    ConditionedTrajectory,
    SpaceTimePoint,
    entrance_batch,
    entrance_sample,
    evolve_batch,
    free_paths,
    simulate_conditioned,
    weighted_expectation,
)
from affsim.errors import DegenerateEstimateError, DomainError, UsageError
from affsim.rng import stream
from affsim.rootsys import wall_distance_batch


def _alcove_width(rs1):
    return float(rs1.fundamental_weights[0, 0])


def _mid_start_rank1(rs1, tau):
    return SpaceTimePoint(tau=tau, b=np.array([0.5 * tau * _alcove_width(rs1)]))


# ---------------------------------------------------------------------------
# containers


def test_space_time_point_validation():
    with pytest.raises(DomainError):
        SpaceTimePoint(tau=0.0, b=np.array([0.1]))
    with pytest.raises(DomainError):
        SpaceTimePoint(tau=1.0, b=np.array([np.inf]))


def test_trajectory_validation():
    pts = (SpaceTimePoint(tau=1.0, b=np.zeros(1)), SpaceTimePoint(tau=2.0, b=np.zeros(1)))
    with pytest.raises(DomainError):
        ConditionedTrajectory(
            times=np.array([1.0, 0.5]),
            points=pts,
            drifts=np.zeros((1, 1)),
            min_wall_distance=0.1,
            halvings=0,
            redraws=0,
        )


# ---------------------------------------------------------------------------
# entrance law


def test_entrance_argument_errors(rs1, rng):
    with pytest.raises(DomainError):
        entrance_batch(rs1, -1.0, 10, rng)
    with pytest.raises(DomainError):
        entrance_batch(rs1, 0.5, 0, rng)
    with pytest.raises(UsageError):
        entrance_batch(rs1, 0.5, 10, rng, mode="exact")
    with pytest.raises(UsageError):
        entrance_sample(rs1, 0.5)


def test_entrance_sample_wraps_batch(rs1):
    pt = entrance_sample(rs1, 0.5, rng=stream(3, "one"))
    assert pt.tau == 0.5
    assert pt.b.shape == (1,)


def test_entrance_interior_and_shape(rs1, rs2):
    for rs in (rs1, rs2):
        bs = entrance_batch(rs, 0.5, 400, stream(5, "inter", rs.rank))
        assert bs.shape == (400, rs.rank)
        assert np.all(wall_distance_batch(rs, bs / 0.5) > 0.0)


def test_entrance_modes_agree_in_law(rs1):
    t0 = 0.5
    rej = entrance_batch(rs1, t0, 3000, stream(201, "rej"), mode="rejection")[:, 0]
    rad = entrance_batch(rs1, t0, 3000, stream(202, "rad"), mode="radial", steps=800)[:, 0]
    assert st.ks_2samp(rej, rad).pvalue > 0.01


def test_entrance_small_time_limit_shape(rs1):
    # as t0 -> 0 the rescaled entrance density approaches the squared
    # trigonometric denominator, here 2 sin^2(pi u) for u = (alpha, b/t0)
    t0 = 0.01
    bs = entrance_batch(rs1, t0, 4000, stream(203, "lim"))
    u = (bs / t0) @ rs1.positive_roots[0]
    cdf = lambda v: v - np.sin(2.0 * np.pi * v) / (2.0 * np.pi)
    assert st.ks_1samp(u, cdf).pvalue > 0.01


def test_entrance_determinism(rs2):
    a = entrance_batch(rs2, 0.3, 100, stream(7, "det"))
    b = entrance_batch(rs2, 0.3, 100, stream(7, "det"))
    np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------------------
# conditioned evolution


def test_evolve_rejects_bad_input(rs1, rng):
    mid = np.array([0.5 * 1.5 * _alcove_width(rs1)])
    with pytest.raises(DomainError):
        evolve_batch(rs1, 1.5, mid[None], -1.0, 1e-3, None, rng)
    with pytest.raises(DomainError):
        evolve_batch(rs1, 1.5, mid[None], 0.5, 0.7, None, rng)
    with pytest.raises(DomainError):  # start on the wall
        evolve_batch(rs1, 1.5, np.zeros((1, 1)), 0.5, 1e-3, None, rng)
    with pytest.raises(DomainError):  # unsorted recording offsets
        evolve_batch(rs1, 1.5, mid[None], 0.5, 1e-3, None, rng,
                     record_offsets=np.array([0.4, 0.2]))


def test_evolve_stays_interior_and_records(rs1):
    tau0, horizon = 1.0, 1.0
    bs = np.tile([0.3 * _alcove_width(rs1)], (200, 1))
    offsets = np.array([0.25, 0.5, 1.0])
    final, rec, diag = evolve_batch(
        rs1, tau0, bs, horizon, 1e-3, None, stream(11, "rec"), record_offsets=offsets
    )
    assert rec.shape == (3, 200, 1)
    np.testing.assert_array_equal(rec[-1], final)
    for j, off in enumerate(offsets):
        assert np.all(wall_distance_batch(rs1, rec[j] / (tau0 + off)) > 0.0)
    assert diag["min_wall_distance"] > 0.0
    assert diag["halvings"] >= 0 and diag["redraws"] >= 0


def test_evolve_deterministic(rs2):
    bs = np.tile(0.4 * rs2.rho, (16, 1))
    a, _, _ = evolve_batch(rs2, 1.0, bs, 0.3, 1e-3, None, stream(13, "det"))
    b, _, _ = evolve_batch(rs2, 1.0, bs, 0.3, 1e-3, None, stream(13, "det"))
    np.testing.assert_array_equal(a, b)


def test_simulate_conditioned_trajectory(rs1):
    start = _mid_start_rank1(rs1, 1.0)
    with pytest.raises(UsageError):
        simulate_conditioned(rs1, start, 0.5, 1e-2)
    traj = simulate_conditioned(rs1, start, 0.5, 1e-2, rng=stream(17, "traj"))
    assert traj.times[0] == start.tau
    assert traj.times[-1] == pytest.approx(start.tau + 0.5)
    assert np.all(np.diff(traj.times) > 0.0)
    for pt in traj.points:
        assert np.all(wall_distance_batch(rs1, pt.b[None] / pt.tau) > 0.0)
    # stored drifts are the gradient field at the pre-step nodes
    nodes = np.stack([pt.b for pt in traj.points])
    want = grad_log_phi_d_batch(rs1, traj.times[:-1], nodes[:-1])
    np.testing.assert_allclose(traj.drifts, want, rtol=1e-12, atol=1e-12)


# ---------------------------------------------------------------------------
# free paths and the weight estimator


def test_free_paths_gaussian_increments(rs1):
    start = _mid_start_rank1(rs1, 2.0)
    taus, nodes, exited = free_paths(rs1, start, 0.5, 0.05, 4000, stream(19, "free"))
    assert taus.shape == (11,)
    assert nodes.shape == (4000, 11, 1)
    steps = np.diff(nodes[:, :, 0], axis=1).ravel()
    assert abs(steps.mean()) < 4.0 * math.sqrt(0.05) / math.sqrt(steps.size)
    assert steps.var() == pytest.approx(0.05, rel=0.05)
    # flags cover every replica with a node outside the open cone
    out = np.zeros(4000, dtype=bool)
    for k in range(1, 11):
        out |= wall_distance_batch(rs1, nodes[:, k] / taus[k]) <= 0.0
    assert np.array_equal(exited, out)


def test_free_paths_exit_near_wall(rs1):
    # starting close to a wall, most free replicas leave the cone quickly
    tau0 = 1.0
    start = SpaceTimePoint(tau=tau0, b=np.array([0.02 * _alcove_width(rs1)]))
    _, _, exited = free_paths(rs1, start, 1.0, 1e-2, 500, stream(23, "exit"))
    assert exited.mean() > 0.8


def test_weighted_expectation_errors(rs1, rng):
    start = _mid_start_rank1(rs1, 1.5)
    with pytest.raises(UsageError):
        weighted_expectation(rs1, start, 0.5, 1e-3, lambda t, n: 1.0)
    with pytest.raises(DomainError):
        weighted_expectation(rs1, start, 0.0, 1e-3, lambda t, n: 1.0, rng=rng)


def test_weighted_expectation_degenerate(rs1):
    # from a near-wall start over a long horizon every replica is absorbed
    start = SpaceTimePoint(tau=0.1, b=np.array([0.002 * _alcove_width(rs1)]))
    with pytest.raises(DegenerateEstimateError):
        weighted_expectation(
            rs1, start, 2.0, 1e-2, lambda t, n: 1.0, rng=stream(29, "deg"), count=2000
        )


def test_weight_martingale_normalization(rs1):
    # E[h(end)/h(start); survive] = 1; exit-miss bias decays like sqrt(dt)
    start = _mid_start_rank1(rs1, 1.5)
    est, se = weighted_expectation(
        rs1, start, 0.75, 1e-4, lambda t, n: 1.0, rng=stream(211, "unit"), count=4000
    )
    assert abs(est - 1.0) < 3.0 * se + 0.02


def test_estimators_agree_on_endpoint_mean(rs1):
    # the drift SDE and the weighted free estimator target the same law
    u, horizon = 1.5, 0.75
    start = _mid_start_rank1(rs1, u)
    est_w, se_w = weighted_expectation(
        rs1,
        start,
        horizon,
        1e-4,
        lambda taus, nodes: float(nodes[-1, 0] / taus[-1]),
        rng=stream(212, "zw"),
        count=4000,
    )
    final, _, _ = evolve_batch(
        rs1, u, np.tile(start.b, (4000, 1)), horizon, 1e-3, None, stream(213, "zh")
    )
    zf = final[:, 0] / (u + horizon)
    se_h = zf.std(ddof=1) / math.sqrt(len(zf))
    assert abs(est_w - zf.mean()) < 3.0 * math.hypot(se_w, se_h)
