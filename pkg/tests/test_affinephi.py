"""Affine theta-series: both representations, Poisson pair, log-gradient."""

import math

import numpy as np
import pytest

from affsim.affinephi import (
    PhiArgs,
    calibration_constant,
    grad_log_phi_d,
    log_phi_d,
    phi_hat_charsum,
    phi_hat_lattice,
    phi_lattice_term,
    phi_ratio,
    positive_core_batch,
    theta_pair,
)
from affsim.errors import DomainError
from affsim.rootsys import build_root_system


def _phi_brute_rank1(rs, b, y, a, x, mmax=14):
    """Independent double sum over the rank-1 coroot lattice and sign group."""
    alpha = rs.positive_roots[0]
    coroot = rs.coroots[0]
    den_arg = float(alpha @ (-y / b))
    den = np.exp(1j * math.pi * den_arg) - np.exp(-1j * math.pi * den_arg)
    total = 0.0
    for m in range(-mmax, mmax + 1):
        g = m * coroot
        for sign in (1.0, -1.0):
            total += (
                sign
                * math.exp(float((sign * (x + a * g)) @ y))
                * math.exp(-b * (float(x @ g) + 0.5 * float(g @ g) * a))
            )
    return total / den


def test_lattice_matches_rank1_brute_force(rs1):
    alpha = rs1.positive_roots[0]
    y = 0.3 * alpha / 2.0
    x = 0.2 * rs1.coroots[0]
    got = phi_hat_lattice(rs1, PhiArgs(b=1.0, y=y, a=1.0, x=x))
    want = _phi_brute_rank1(rs1, 1.0, y, 1.0, x)
    assert got == pytest.approx(want, rel=1e-10)


def test_lattice_weyl_reindexing(rs2, rng):
    y = np.array([0.31, 0.12])
    x = np.array([0.17, 0.4])
    base = phi_hat_lattice(rs2, PhiArgs(b=1.0, y=y, a=1.0, x=x))
    for w, sg in zip(rs2.weyl_group, rs2.weyl_signs):
        val = phi_hat_lattice(rs2, PhiArgs(b=1.0, y=y, a=1.0, x=w @ x))
        assert sg * val == pytest.approx(base, rel=1e-10)


def test_phiargs_positivity_required(rs1):
    y = 0.1 * rs1.positive_roots[0]
    with pytest.raises(DomainError):
        PhiArgs(b=0.0, y=y, a=1.0, x=np.zeros(1))
    with pytest.raises(DomainError):
        PhiArgs(b=1.0, y=y, a=-0.5, x=np.zeros(1))


def test_two_representations_agree(rs1, rs2, rng):
    # the central cross-check, at a handful of regular points per rank
    for rs in (rs1, rs2):
        cal = calibration_constant(rs)
        for _ in range(5):
            x = rng.normal(scale=0.5, size=rs.rank)
            y = rng.normal(scale=0.4, size=rs.rank)
            sigma = float(rng.uniform(0.6, 1.8))
            lattice = phi_hat_lattice(
                rs, PhiArgs(b=1.0, y=y, a=1.0 / sigma, x=x / sigma)
            )
            charsum = cal * phi_hat_charsum(rs, sigma, x, y)
            assert charsum == pytest.approx(lattice, rel=1e-8)


def test_charsum_positive_interior(rs1):
    w = float(rs1.fundamental_weights[0, 0])
    for frac in (0.2, 0.5, 0.85):
        val = phi_hat_charsum(rs1, 1.0, np.array([frac * w]), np.zeros(1))
        assert val.real > 0.0
        assert abs(val.imag) < 1e-12 * val.real


def test_charsum_vanishes_on_walls(rs1, rs2):
    for rs in (rs1, rs2):
        scale = abs(phi_hat_charsum(rs, 1.0, 0.5 * rs.rho / rs.dual_coxeter, np.zeros(rs.rank)))
        for z in np.vstack([np.zeros(rs.rank), rs.fundamental_weights]):
            val = phi_hat_charsum(rs, 1.0, z, np.zeros(rs.rank))
            assert abs(val) <= 1e-8 * scale


def test_positive_core_matches_log_phi(rs1):
    # per-tau constants cancel in same-tau differences
    w = float(rs1.fundamental_weights[0, 0])
    for tau in (0.7, 1.3):
        z1 = np.array([0.3 * w])
        z2 = np.array([0.6 * w])
        core = positive_core_batch(rs1, np.array([tau, tau]), np.vstack([z1, z2]))
        lhs = log_phi_d(rs1, tau, tau * z1) - log_phi_d(rs1, tau, tau * z2)
        rhs = tau * float(z1 @ z1 - z2 @ z2) / 2.0 + math.log(core[0] / core[1])
        assert lhs == pytest.approx(rhs, abs=1e-9)


# ---------------------------------------------------------------------------
# Poisson pair


def test_theta_ratio_constant(rs1, rs2):
    for rs in (rs1, rs2):
        base = None
        for t in (0.3, 0.8, 1.7):
            for frac in (0.1, 0.45):
                x = frac * rs.fundamental_weights[0]
                lhs, rhs = theta_pair(rs, x, t)
                ratio = lhs / rhs
                if base is None:
                    base = ratio
                assert ratio == pytest.approx(base, rel=1e-9)


def test_theta_lattice_shift_periodicity(rs2):
    x = np.array([0.21, 0.13])
    lhs, _ = theta_pair(rs2, x, 0.6)
    lhs_shift, _ = theta_pair(rs2, x + rs2.coroots[2], 0.6)
    assert lhs_shift == pytest.approx(lhs, rel=1e-10)


def test_theta_rejects_bad_time(rs1):
    with pytest.raises(DomainError):
        theta_pair(rs1, np.zeros(1), 0.0)


# ---------------------------------------------------------------------------
# log-gradient of the positive space-time function


def test_grad_matches_finite_differences(rs1, rs2, rng):
    for rs in (rs1, rs2):
        verts = np.vstack([np.zeros(rs.rank), rs.fundamental_weights])
        for t in (0.5, 1.0, 2.0):
            for _ in range(4):
                wgt = rng.dirichlet(np.full(rs.rank + 1, 3.0))
                x = t * (wgt @ verts)
                if np.min((x / t) @ rs.positive_roots.T) < 0.05:
                    continue
                grad = grad_log_phi_d(rs, t, x)
                for k in range(rs.rank):
                    e = np.zeros(rs.rank)
                    e[k] = 1e-5
                    fd = (log_phi_d(rs, t, x + e) - log_phi_d(rs, t, x - e)) / 2e-5
                    assert grad[k] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_grad_pushes_inward_near_lower_wall(rs1):
    w = float(rs1.fundamental_weights[0, 0])
    g = grad_log_phi_d(rs1, 1.0, np.array([0.02 * w]))
    assert g[0] > 1.0


def test_grad_flip_symmetry_at_midpoint(rs1):
    # the quadratic prefactor contributes x/t; the remaining factor is even
    # under the alcove flip up to an exponentially damped odd part (the
    # first odd weight carries e^{-3(2pi)^2/(4t)}), so the centered gradient
    # vanishes at the midpoint to that scale
    w = float(rs1.fundamental_weights[0, 0])
    for t in (0.5, 1.0, 2.0):
        odd_scale = 100.0 * math.exp(-3.0 * (2 * math.pi) ** 2 / (4.0 * t)) + 1e-9
        mid = np.array([t * w / 2.0])
        g = grad_log_phi_d(rs1, t, mid)
        assert g[0] == pytest.approx(mid[0] / t, abs=odd_scale)
        for frac in (0.1, 0.3):
            delta = frac * t * w
            lo = grad_log_phi_d(rs1, t, mid - delta)[0] - (mid[0] - delta) / t
            hi = grad_log_phi_d(rs1, t, mid + delta)[0] - (mid[0] + delta) / t
            assert hi == pytest.approx(-lo, abs=odd_scale)


def test_single_term_is_space_time_harmonic(rs1, rs2, rng):
    # (d/dt + Laplacian/2) of each tilted lattice-sum term vanishes identically
    for rs in (rs1, rs2):
        gamma = rs.coroots[0]
        y = 0.2 * rs.rho
        y2 = float(y @ y)
        for w_index in (0, len(rs.weyl_signs) - 1):
            b = rng.normal(scale=0.3, size=rs.rank)
            tau = 0.9
            h = 1e-4

            def g(tt, bb):
                tilt = math.exp(-0.5 * y2 * tt)
                return tilt * phi_lattice_term(rs, w_index, gamma, y, tt, bb)

            dt = (g(tau + h, b) - g(tau - h, b)) / (2 * h)
            lap = 0.0
            for k in range(rs.rank):
                e = np.zeros(rs.rank)
                e[k] = h
                lap += (g(tau, b + e) - 2 * g(tau, b) + g(tau, b - e)) / h**2
            scale = max(1.0, abs(g(tau, b)))
            assert abs(dt + 0.5 * lap) <= 1e-4 * scale


def test_phi_ratio_trivial_direction(rs1):
    w = float(rs1.fundamental_weights[0, 0])
    val = phi_ratio(rs1, 1.0, np.array([0.4 * w]), np.zeros(1))
    assert val == pytest.approx(1.0, rel=1e-12)
