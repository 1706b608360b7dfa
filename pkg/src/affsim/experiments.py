"""Experiment battery tying the simulators to their closed-form laws.

Each experiment function takes a configuration and a seed, draws everything
it needs from seed-derived substreams, and returns a list of CheckResult
plus CSV tables as {basename: (columns, rows)} with numeric cells only.
The harness owns seed repetition, timing and file output; functions here
are deterministic given (config, seed).

Tolerance conventions follow the design rules: p > 0.01 for equality-in-law
checks, 3-4 standard errors for moment checks.  Moment checks are reported
as a normalized worst-case statistic (max |difference| / allowance), so the
tolerance column is 1.0 and smaller is better.  Closed forms that are
analytically degenerate at an anchor (damping drives the identity to 1 with
error below machine precision) carry a relative floor on the allowance so
the check cannot fail on pure roundoff; each such anchor is paired with a
second, well-powered one.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as st
from scipy.linalg import expm

from .affinephi import (
    PhiArgs,
    calibration_constant,
    phi_hat_charsum,
    phi_hat_lattice,
    phi_d_tilted_batch,
    phi_ratio,
    phi_ratio_batch,
    positive_core_batch,
    theta_pair,
)
from .charfun import (
    Truncation,
    _heat_terms,
    alternant,
    heat_kernel,
    kirillov_ratio,
    pi_value,
    radial_density,
)
from .config import ExperimentConfig
from .doobsim import SpaceTimePoint, entrance_batch, evolve_batch, weighted_expectation
from .errors import DomainError, SamplingEfficiencyError
from .groupsim import (
    PathSample,
    algebra_coords,
    algebra_matrix,
    bm_marked_batch,
    cartan_exp,
    gauge_act,
    haar_batch,
    rad_of_bm_batch,
    radial_batch,
    sheet_radial_batch,
    stochastic_endpoints,
)
from .report import CheckResult
from .rng import stream
from .rootsys import build_root_system, wall_distance_batch
from .stats import alcove_bin_index, alcove_cells, two_sample_stats

__all__ = ["EXPERIMENT_FUNCS", "run_experiment_once"]


# ---------------------------------------------------------------------------
# shared helpers


def _trunc(cfg: ExperimentConfig) -> Truncation:
    return Truncation(tail_tol=cfg.tail_tol)


def _alcove_vertices(rs) -> np.ndarray:
    """Vertices of the fundamental alcove: 0 and w_i / theta(w_i)."""
    verts = [np.zeros(rs.rank)]
    theta = rs.positive_roots[np.argmax(np.linalg.norm(rs.positive_roots, axis=1) ** 2 + (rs.positive_roots @ rs.rho))]
    # highest root = the one with maximal pairing against rho
    pair = rs.fundamental_weights @ theta
    for i in range(rs.rank):
        verts.append(rs.fundamental_weights[i] / pair[i])
    return np.array(verts)


def _alcove_mid(rs) -> np.ndarray:
    return _alcove_vertices(rs).mean(axis=0)


def _pi_batch(rs, zs: np.ndarray) -> np.ndarray:
    """Weyl denominator at each row of zs, complex (B,)."""
    vals = zs @ rs.positive_roots.T
    return np.prod(np.exp(1j * math.pi * vals) - np.exp(-1j * math.pi * vals), axis=1)


def _heat_batch(rs, zs: np.ndarray, a: float, trunc: Truncation) -> np.ndarray:
    """Heat-type character sum at alcove rows zs with damping e^{-a(|mu|^2-|rho|^2)}."""
    _, mu_rho, dims, damp = _heat_terms(rs, a, trunc)
    coeff = dims * damp
    num = np.zeros(zs.shape[0], dtype=complex)
    for w, sg in zip(rs.weyl_group, rs.weyl_signs):
        num += sg * (np.exp(2j * math.pi * ((zs @ w) @ mu_rho.T)) @ coeff)
    return np.real(num / _pi_batch(rs, zs))


def _char_rows(rs, x: np.ndarray, mu_rho: np.ndarray) -> np.ndarray:
    """Characters ch_mu(e^x) for every shifted weight row, complex (K,)."""
    return alternant(rs, mu_rho, x) / pi_value(rs, x)


def _char_pair_sum(rs, a: float, x1: np.ndarray, x2: np.ndarray, trunc: Truncation) -> float:
    """Sum over dominant weights of ch(e^{x1}) ch(e^{x2}) e^{-a(|mu|^2-|rho|^2)}."""
    _, mu_rho, _, damp = _heat_terms(rs, a, trunc)
    ch1 = _char_rows(rs, x1, mu_rho)
    ch2 = _char_rows(rs, x2, mu_rho)
    return float(np.real(np.sum(ch1 * ch2 * damp)))


def _regular_vector(rs, rng: np.random.Generator, scale: float, margin: float = 0.06) -> np.ndarray:
    """Random vector whose root pairings all sit at least `margin` away from Z."""
    for _ in range(1000):
        y = rng.uniform(-scale, scale, size=rs.rank)
        pair = rs.positive_roots @ y
        if np.all(np.abs(pair - np.rint(pair)) >= margin):
            return y
    raise SamplingEfficiencyError("could not draw a lattice-regular vector")


def _interior_point(rs, rng: np.random.Generator, margin: float) -> np.ndarray:
    """Uniform alcove point at wall distance >= margin (rejection)."""
    verts = _alcove_vertices(rs)
    for _ in range(10000):
        w = rng.dirichlet(np.ones(rs.rank + 1))
        x = w @ verts
        if wall_distance_batch(rs, x[None])[0] >= margin:
            return x
    raise SamplingEfficiencyError("could not draw an interior alcove point")


def _moment_check(name: str, diffs, allowances, detail: str = "") -> CheckResult:
    """Normalized worst-case moment check: max |diff|/allowance vs 1."""
    diffs = np.atleast_1d(np.asarray(diffs, dtype=float))
    allow = np.atleast_1d(np.asarray(allowances, dtype=float))
    ratios = np.abs(diffs) / allow
    worst = float(np.max(ratios))
    k = int(np.argmax(ratios))
    txt = f"worst case {k}: |{diffs.flat[k]:.3e}| vs allowance {allow.flat[k]:.3e}"
    if detail:
        txt = f"{detail}; {txt}"
    return CheckResult(name=name, statistic=worst, tolerance=1.0, passed=worst <= 1.0, detail=txt)


def _p_check(name: str, p: float, detail: str = "") -> CheckResult:
    p = float(p)
    return CheckResult(name=name, statistic=p, tolerance=0.01, passed=p > 0.01, detail=detail)


# ---------------------------------------------------------------------------
# identities: deterministic special-function cross-checks


def run_identities(cfg: ExperimentConfig, seed: int):
    trunc = _trunc(cfg)
    checks = []
    rows = []
    worst_two_form = 0.0
    for rank in (1, 2):
        rs = build_root_system(cfg.family, rank)
        rng = stream(seed, "identities", "two-form", rank)
        cal = calibration_constant(rs, trunc)
        rho2 = float(rs.rho @ rs.rho)
        for k in range(cfg.replicas):
            sigma = float(rng.uniform(0.6, 2.4) * 0.25 / rho2)
            x = _interior_point(rs, rng, margin=0.04 * rs.alcove_radius)
            y = _regular_vector(rs, rng, scale=1.2)
            lhs = phi_hat_lattice(rs, PhiArgs(b=1.0, y=y, a=1.0 / sigma, x=x / sigma), trunc)
            rhs = cal * phi_hat_charsum(rs, sigma, x, y, trunc)
            rel = abs(lhs - rhs) / abs(rhs)
            worst_two_form = max(worst_two_form, rel)
            rows.append((rank, k, sigma, rel))
    checks.append(
        CheckResult(
            name="identities.two_form",
            statistic=worst_two_form,
            tolerance=1e-8,
            passed=worst_two_form <= 1e-8,
            detail=f"{2 * cfg.replicas} random regular draws, ranks 1 and 2",
        )
    )

    theta_rows = []
    worst_spread = 0.0
    # deterministic identity: evaluate well below the 1e-10 acceptance spread
    trunc_theta = Truncation(weight_radius=14.0, lattice_radius=20.0, tail_tol=min(cfg.tail_tol, 1e-12))
    for rank in (1, 2):
        rs = build_root_system(cfg.family, rank)
        rng = stream(seed, "identities", "theta", rank)
        ratios = []
        for i in range(5):
            x = rng.uniform(-1.5, 1.5, size=rank)
            for t in (0.12, 0.3, 0.7, 1.4, 2.6):
                lhs, rhs = theta_pair(rs, x, t, trunc_theta)
                ratios.append(lhs / rhs)
                theta_rows.append((rank, i, t, lhs / rhs))
        ratios = np.array(ratios)
        spread = float((ratios.max() - ratios.min()) / abs(ratios.mean()))
        worst_spread = max(worst_spread, spread)
    checks.append(
        CheckResult(
            name="identities.theta_ratio",
            statistic=worst_spread,
            tolerance=1e-10,
            passed=worst_spread <= 1e-10,
            detail="relative spread of the lattice-pair ratio over a 5x5 (x,t) grid",
        )
    )

    worst_wall = 0.0
    min_interior = math.inf
    for rank in (1, 2):
        rs = build_root_system(cfg.family, rank)
        verts = _alcove_vertices(rs)
        mid = verts.mean(axis=0)
        # facets of the alcove simplex: drop one vertex, span the rest
        wall_pts = []
        for i in range(len(verts)):
            others = np.delete(verts, i, axis=0)
            if rank == 1:
                wall_pts.append(others[0])
            else:
                for t in (0.31, 0.68):
                    wall_pts.append(t * others[0] + (1.0 - t) * others[1])
        wall_pts = np.array(wall_pts)
        interior = np.array([mid + f * (v - mid) for v in verts for f in (0.0, 0.35, 0.7)])
        for tau in (0.6, 1.0, 2.1):
            scale = float(positive_core_batch(rs, np.full(1, tau), mid[None], trunc)[0])
            wall_vals = positive_core_batch(rs, np.full(len(wall_pts), tau), wall_pts, trunc)
            worst_wall = max(worst_wall, float(np.max(np.abs(wall_vals)) / scale))
            ivals = positive_core_batch(rs, np.full(len(interior), tau), interior, trunc)
            min_interior = min(min_interior, float(np.min(ivals)))
    checks.append(
        CheckResult(
            name="identities.wall_vanishing",
            statistic=worst_wall,
            tolerance=1e-8,
            passed=worst_wall <= 1e-8,
            detail="positive core at wall points, relative to the alcove-center value",
        )
    )
    checks.append(
        CheckResult(
            name="identities.positivity",
            statistic=min_interior,
            tolerance=0.0,
            passed=min_interior > 0.0,
            detail="minimum of the positive core over interior grid points (must be > 0)",
        )
    )
    tables = {
        "two_form": (["rank[1]", "draw[1]", "sigma[rate]", "rel_err[1]"], rows),
        "theta_ratio": (["rank[1]", "point[1]", "t[time]", "ratio[1]"], theta_rows),
    }
    return checks, tables


# ---------------------------------------------------------------------------
# radial: endpoint law of the group Brownian motion vs its density


def run_radial(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    rng = stream(seed, "radial", "paths")
    zs = rad_of_bm_batch(rs, 1.0, cfg.steps, cfg.replicas, rng)[:, 0]

    width = float(rs.fundamental_weights[0, 0])
    grid = np.linspace(0.0, width, 4001)
    pdf = radial_density(rs, grid[:, None], 1.0, trunc)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
    cdf /= cdf[-1]
    res = st.ks_1samp(zs, lambda q: np.interp(q, grid, cdf))
    checks = [
        _p_check(
            "radial.ks",
            res.pvalue,
            detail=f"KS D={res.statistic:.4f} against the quadrature CDF, N={cfg.replicas}",
        )
    ]
    rows = [(i, float(z)) for i, z in enumerate(zs)]
    return checks, {"samples": (["replica[1]", "z[alcove]"], rows)}


# ---------------------------------------------------------------------------
# endorbit: Haar-averaged heat kernel vs two-sided character sum


def run_endorbit(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    width = float(rs.fundamental_weights[0, 0])
    grid = [width * f for f in (0.25, 0.5, 0.75)]
    checks = []
    rows = []
    # (damping rate, SE multiple, relative floor): the unit-rate anchor is
    # machine-degenerate (every nontrivial term is damped below 1e-12), the
    # small-rate anchor carries the statistical power
    for s_sigma, n_se, floor in ((1.0, 4.0, 1e-12), (0.05, 4.0, 1e-12)):
        a = s_sigma * (2.0 * math.pi) ** 2 / 2.0
        rng = stream(seed, "endorbit", "haar", s_sigma)
        us = haar_batch(rs, cfg.replicas, rng)
        diffs = []
        allows = []
        for i, k1 in enumerate(grid):
            e_minus = cartan_exp(rs, np.array([-k1])).matrix
            for j, k2 in enumerate(grid):
                e_plus = cartan_exp(rs, np.array([k2])).matrix
                conj = us @ e_plus @ np.conj(np.swapaxes(us, -1, -2))
                zs = radial_batch(rs, e_minus[None] @ conj)
                vals = _heat_batch(rs, zs, a, trunc)
                mc = float(np.mean(vals))
                se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
                closed = _char_pair_sum(rs, a, np.array([-k1]), np.array([k2]), trunc)
                diffs.append(mc - closed)
                allows.append(n_se * se + floor * abs(closed))
                rows.append((s_sigma, k1, k2, mc, se, closed, mc - closed))
        checks.append(
            _moment_check(
                f"endorbit.grid_ssigma_{s_sigma:g}",
                diffs,
                allows,
                detail=f"3x3 alcove grid, N={cfg.replicas}, {n_se:g} SE + {floor:g} rel floor",
            )
        )
    cols = ["s_sigma[rate]", "k1[alcove]", "k2[alcove]", "mc_mean[1]", "mc_se[1]", "closed[1]", "diff[1]"]
    return checks, {"grid": (cols, rows)}


# ---------------------------------------------------------------------------
# kirillov: orbit average of the exponential pairing vs spherical ratio


_KIRILLOV_PAIRS = {
    1: [((0.21,), (0.63,)), ((0.47,), (1.17,)), ((0.11,), (2.31,)), ((0.33,), (0.89,)), ((0.52,), (1.73,))],
    2: [
        ((0.21, 0.08), (0.63, 0.27)),
        ((0.13, 0.29), (1.17, 0.41)),
        ((0.07, 0.11), (0.89, 1.13)),
        ((0.31, 0.05), (0.57, 0.23)),
        ((0.11, 0.17), (1.41, 0.37)),
    ],
}


def run_kirillov(cfg: ExperimentConfig, seed: int):
    checks = []
    rows = []
    for rank in (1, 2):
        rs = build_root_system(cfg.family, rank)
        diffs = []
        allows = []
        for k, (x, lam) in enumerate(_KIRILLOV_PAIRS[rank]):
            rng = stream(seed, "kirillov", "haar", rank, k)
            us = haar_batch(rs, cfg.replicas, rng)
            ust = np.conj(np.swapaxes(us, -1, -2))
            x = np.asarray(x, dtype=float)
            lam = np.asarray(lam, dtype=float)
            lam_mat = algebra_matrix(rs, np.concatenate([lam, np.zeros(rs.dim_algebra - rank)]))
            orbit = algebra_coords(rs, us @ lam_mat @ ust)[:, :rank]
            # the orbit law is conjugation-invariant, so averaging the pairing
            # over the Weyl images of x is exact variance reduction
            vals = np.mean([np.exp(orbit @ (w @ x)) for w in rs.weyl_group], axis=0)
            mc = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
            closed = float(kirillov_ratio(rs, x, lam))
            diffs.append(mc - closed)
            allows.append(3.0 * se)
            rows.append((rank, k, mc, se, closed, mc - closed))
        checks.append(
            _moment_check(
                f"kirillov.orbit_rank{rank}",
                diffs,
                allows,
                detail=f"5 (x, lam) pairs, N={cfg.replicas}, 3 SE",
            )
        )
    cols = ["rank[1]", "pair[1]", "mc_mean[1]", "mc_se[1]", "closed[1]", "diff[1]"]
    return checks, {"pairs": (cols, rows)}


# ---------------------------------------------------------------------------
# endpoint: binned conditional of the tilted endpoint vs the phi-hat ratio


def _cell_eval(rs, rads, vals, cells, tau, y, trunc, min_count):
    """Per-cell mean/SE of vals given rads, against the phi ratio at barycenters.

    Returns (rows, diffs, allowances, n_used); the allowance combines the
    Monte Carlo SE with a half-width discretization term from the closed
    form's spread across the cell (uniform-distribution standard deviation).
    """
    bary = alcove_cells(rs, cells)
    idx = alcove_bin_index(rs, rads, cells)
    closed = np.real(phi_ratio_batch(rs, tau, bary, y, trunc))
    width = float(rs.fundamental_weights[0, 0]) / cells
    edges = np.concatenate([bary[:, 0] - 0.5 * width, bary[:, 0] + 0.5 * width])
    closed_edges = np.real(phi_ratio_batch(rs, tau, np.maximum(edges, 1e-9)[:, None], y, trunc))
    disc = np.abs(closed_edges[cells:] - closed_edges[:cells]) / math.sqrt(12.0)
    rows = []
    diffs = []
    allows = []
    used = 0
    for c in range(cells):
        sel = idx == c
        n = int(np.count_nonzero(sel))
        if n < min_count:
            continue
        used += 1
        mc = float(np.mean(vals[sel]))
        se = float(np.std(vals[sel], ddof=1) / math.sqrt(n))
        allow = 3.0 * math.sqrt(se * se + float(disc[c]) ** 2)
        rows.append((cells, c, float(bary[c, 0]), n, mc, se, float(closed[c]), allow))
        diffs.append(mc - float(closed[c]))
        allows.append(allow)
    return rows, np.array(diffs), np.array(allows), used


def run_endpoint(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    y = np.array([0.35])
    rng = stream(seed, "endpoint", "paths")
    carts, rads = bm_marked_batch(rs, 1.0, cfg.steps, cfg.replicas, rng, (1.0,))
    vals = np.exp(carts[0] @ y)

    checks = []
    all_rows = []
    for cells in (50, 100):
        rows, diffs, allows, used = _cell_eval(rs, rads, vals, cells, 1.0, y, trunc, min_count=100)
        all_rows.extend(rows)
        frac = float(np.mean(np.abs(diffs) <= allows))
        checks.append(
            CheckResult(
                name=f"endpoint.cells_{cells}",
                statistic=frac,
                tolerance=0.9,
                passed=frac >= 0.9,
                detail=f"{used} occupied cells, fraction within 3 combined SE (MC + discretization)",
            )
        )
    cols = [
        "cells[1]",
        "cell[1]",
        "barycenter[alcove]",
        "count[1]",
        "mc_mean[1]",
        "mc_se[1]",
        "closed[1]",
        "allowance[1]",
    ]
    return checks, {"cells": (cols, all_rows)}


# ---------------------------------------------------------------------------
# condorbit: binned mid-path tilt vs the two-sided character quotient


def run_condorbit(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    t = float(cfg.t_grid[0])
    y0 = np.array([0.35])
    a = (2.0 * math.pi) ** 2 / 2.0
    rng = stream(seed, "condorbit", "paths")
    carts, rads = bm_marked_batch(rs, 1.0, cfg.steps, cfg.replicas, rng, (t,))
    vals = np.exp(carts[0] @ y0) * math.exp(-0.5 * t * float(y0 @ y0))

    cells = 25
    bary = alcove_cells(rs, cells)
    idx = alcove_bin_index(rs, rads, cells)
    closed = np.empty(cells)
    for c in range(cells):
        pair = _char_pair_sum(rs, a, -t * y0, bary[c], trunc)
        closed[c] = pair / heat_kernel(rs, bary[c], 1.0, 1.0, trunc)
    width = float(rs.fundamental_weights[0, 0]) / cells
    disc = np.empty(cells)
    for c in range(cells):
        lo = max(bary[c, 0] - 0.5 * width, 1e-9)
        hi = bary[c, 0] + 0.5 * width
        v_lo = _char_pair_sum(rs, a, -t * y0, np.array([lo]), trunc) / heat_kernel(rs, np.array([lo]), 1.0, 1.0, trunc)
        v_hi = _char_pair_sum(rs, a, -t * y0, np.array([hi]), trunc) / heat_kernel(rs, np.array([hi]), 1.0, 1.0, trunc)
        disc[c] = abs(v_hi - v_lo) / math.sqrt(12.0)

    rows = []
    diffs = []
    allows = []
    for c in range(cells):
        sel = idx == c
        n = int(np.count_nonzero(sel))
        if n < 2000:
            continue
        mc = float(np.mean(vals[sel]))
        se = float(np.std(vals[sel], ddof=1) / math.sqrt(n))
        allow = 4.0 * math.sqrt(se * se + disc[c] ** 2)
        rows.append((c, float(bary[c, 0]), n, mc, se, float(closed[c]), allow))
        diffs.append(mc - closed[c])
        allows.append(allow)
    if diffs:
        frac = float(np.mean(np.abs(np.array(diffs)) <= np.array(allows)))
        detail = f"{len(diffs)} occupied cells, fraction within 4 combined SE, t={t:g}"
    else:
        frac = 0.0
        detail = "no cell reached the 2000-sample occupancy floor; increase replicas"
    checks = [
        CheckResult(
            name="condorbit.cells",
            statistic=frac,
            tolerance=0.85,
            passed=frac >= 0.85,
            detail=detail,
        )
    ]
    cols = ["cell[1]", "barycenter[alcove]", "count[1]", "mc_mean[1]", "mc_se[1]", "closed[1]", "allowance[1]"]
    return checks, {"cells": (cols, rows)}


# ---------------------------------------------------------------------------
# martingale: constancy of the tilted positive-core process


def run_martingale(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    u = 1.5
    x0 = _alcove_mid(rs) * u
    y = np.array([0.4])
    y2 = float(y @ y)
    rng = stream(seed, "martingale", "nodes")
    start = float(np.real(phi_d_tilted_batch(rs, u, x0[None], y, trunc)[0]))
    rows = []
    diffs = []
    allows = []
    b = np.tile(x0, (cfg.replicas, 1))
    t_prev = 0.0
    for t in cfg.t_grid:
        b = b + math.sqrt(t - t_prev) * rng.standard_normal((cfg.replicas, rs.rank))
        t_prev = t
        vals = math.exp(-0.5 * y2 * t) * np.real(phi_d_tilted_batch(rs, u + t, b, y, trunc))
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(cfg.replicas))
        rows.append((t, mean, se, start, (mean - start) / se))
        diffs.append(mean - start)
        allows.append(3.0 * se)
    checks = [
        _moment_check(
            "martingale.constancy",
            diffs,
            allows,
            detail=f"free-motion tilted core at t in {tuple(cfg.t_grid)}, vs start value {start:.6g}",
        )
    ]
    cols = ["t[time]", "mc_mean[1]", "mc_se[1]", "start[1]", "z[1]"]
    return checks, {"levels": (cols, rows)}


# ---------------------------------------------------------------------------
# phiQ: conditioned-evolution expectation of the phi ratio vs closed form


def _phi_q_anchor(rs, trunc, cfg, seed, tag, u, t, ys, n_se, floor):
    x = _alcove_mid(rs) * u
    rng = stream(seed, "phiQ", tag)
    bs, _, _ = evolve_batch(rs, u, np.tile(x, (cfg.replicas, 1)), t, cfg.dt, trunc, rng)
    rows = []
    diffs = []
    allows = []
    for y in ys:
        yv = np.array([y])
        vals = np.real(phi_ratio_batch(rs, u + t, bs, yv, trunc))
        mc = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
        closed = float(np.real(phi_ratio(rs, u, x, yv, trunc))) * math.exp(0.5 * t * y * y)
        rows.append((u, t, y, mc, se, closed))
        diffs.append(mc - closed)
        allows.append(n_se * se + floor * abs(closed))
    return rows, diffs, allows


def run_phi_q(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    checks = []
    # spec anchor: the ratio is analytically 1 + O(1e-18) here, hence the
    # relative floor; the second anchor has a genuinely nontrivial ratio
    rows_a, diffs_a, allows_a = _phi_q_anchor(
        rs, trunc, cfg, seed, "anchor-small", 0.2, float(cfg.t_grid[0]), (0.3, 0.7, -0.5), 3.0, 1e-10
    )
    checks.append(
        _moment_check("phiQ.anchor_small", diffs_a, allows_a, detail="u=0.2, 3 tilt values, 3 SE + 1e-10 rel floor")
    )
    rows_b, diffs_b, allows_b = _phi_q_anchor(
        rs, trunc, cfg, seed, "anchor-powered", 3.0, 2.0, (0.4,), 3.0, 1e-12
    )
    checks.append(
        _moment_check("phiQ.anchor_powered", diffs_b, allows_b, detail="u=3, t=2, well-powered tilt")
    )

    # estimator agreement at a survival-feasible start: conditioned mean of
    # the rescaled endpoint via the drift evolution vs the weighted free
    # estimator on its finer grid (exit bias decays like sqrt(dt))
    u, horizon = 1.5, 0.75
    x = _alcove_mid(rs) * u
    rng_h = stream(seed, "phiQ", "agree-h")
    bs, _, _ = evolve_batch(rs, u, np.tile(x, (cfg.replicas, 1)), horizon, cfg.dt, trunc, rng_h)
    zf = bs[:, 0] / (u + horizon)
    est_h = float(np.mean(zf))
    se_h = float(np.std(zf, ddof=1) / math.sqrt(len(zf)))
    rng_w = stream(seed, "phiQ", "agree-w")
    est_w, se_w = weighted_expectation(
        rs,
        SpaceTimePoint(tau=u, b=x),
        horizon,
        1e-4,
        lambda taus, nodes: nodes[-1, 0] / taus[-1],
        trunc,
        rng_w,
        count=cfg.replicas // 2,
    )
    comb = math.sqrt(se_h * se_h + se_w * se_w)
    checks.append(
        _moment_check(
            "phiQ.estimator_agreement",
            [est_h - est_w],
            [3.0 * comb],
            detail=f"drift vs weighted, {est_h:.5f} vs {est_w:.5f}, combined SE {comb:.2e}",
        )
    )
    rows = rows_a + rows_b
    cols = ["u[time]", "t[time]", "y[tilt]", "mc_mean[1]", "mc_se[1]", "closed[1]"]
    agree = [(est_h, se_h, est_w, se_w)]
    return checks, {
        "anchors": (cols, rows),
        "agreement": (["drift_est[1]", "drift_se[1]", "weighted_est[1]", "weighted_se[1]"], agree),
    }


# ---------------------------------------------------------------------------
# entrance: small-time entrance law against its squared-denominator limit


def run_entrance(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    checks = []
    # limit shape at t0 = 0.01: chi^2 against the squared trigonometric
    # denominator, 20 equal bins over the alcove
    t0 = 0.01
    rng = stream(seed, "entrance", "limit")
    zs = entrance_batch(rs, t0, cfg.replicas, rng, mode="rejection", trunc=trunc) / t0
    width = float(rs.fundamental_weights[0, 0])
    nbins = 20
    edges = np.linspace(0.0, width, nbins + 1)
    counts, _ = np.histogram(zs[:, 0], bins=edges)
    alpha = math.sqrt(2.0)

    def mass(a_, b_):
        prim = lambda x: 0.5 * x - math.sin(2.0 * math.pi * alpha * x) / (4.0 * math.pi * alpha)
        return prim(b_) - prim(a_)

    probs = np.array([mass(edges[i], edges[i + 1]) for i in range(nbins)])
    probs /= probs.sum()
    chi2 = st.chisquare(counts, cfg.replicas * probs)
    checks.append(
        _p_check(
            "entrance.limit_shape",
            chi2.pvalue,
            detail=f"chi2({nbins - 1})={chi2.statistic:.2f} at t0={t0}, N={cfg.replicas}",
        )
    )
    bin_rows = [
        (float(edges[i]), float(edges[i + 1]), int(counts[i]), float(cfg.replicas * probs[i]))
        for i in range(nbins)
    ]

    # exact rejection vs the simulated radial entrance proxy, rank 1
    t1 = 0.05
    n1 = cfg.replicas // 2
    rng_a = stream(seed, "entrance", "agree-rej")
    z_rej = entrance_batch(rs, t1, n1, rng_a, mode="rejection", trunc=trunc) / t1
    rng_b = stream(seed, "entrance", "agree-rad")
    z_rad = entrance_batch(rs, t1, n1, rng_b, mode="radial", trunc=trunc, steps=cfg.steps) / t1
    cmp1 = two_sample_stats(z_rej[:, 0], z_rad[:, 0], rng=stream(seed, "entrance", "perm1"))
    checks.append(_p_check("entrance.modes_ks", cmp1.ks_p, detail=f"rank 1, t0={t1}, N={n1} per mode"))
    checks.append(_p_check("entrance.modes_energy", cmp1.energy_p, detail=f"rank 1, t0={t1}"))

    # rank-2 agreement at a coarser entrance time (eigen-decomposition path)
    rs2 = build_root_system(cfg.family, 2)
    t2 = 0.1
    n2 = 2000
    rng_c = stream(seed, "entrance", "agree2-rej")
    z2_rej = entrance_batch(rs2, t2, n2, rng_c, mode="rejection", trunc=trunc) / t2
    rng_d = stream(seed, "entrance", "agree2-rad")
    z2_rad = entrance_batch(rs2, t2, n2, rng_d, mode="radial", trunc=trunc, steps=1500) / t2
    cmp2 = two_sample_stats(z2_rej, z2_rad, rng=stream(seed, "entrance", "perm2"))
    checks.append(_p_check("entrance.modes2_ks", cmp2.ks_p, detail=f"rank 2, t0={t2}, per-coordinate KS"))
    checks.append(_p_check("entrance.modes2_energy", cmp2.energy_p, detail=f"rank 2, t0={t2}"))

    return checks, {"limit_bins": (["lo[alcove]", "hi[alcove]", "count[1]", "expected[1]"], bin_rows)}


# ---------------------------------------------------------------------------
# gauge: dyadic decay of the loop-action equivariance residual


def _gauge_loop(grid: np.ndarray, dim: int) -> np.ndarray:
    """Closed generic algebra loop on the given grid, (len(grid), dim)."""
    out = np.zeros((grid.size, dim))
    out[:, 0] = 0.3 * np.sin(2.0 * math.pi * grid) + 0.15
    if dim > 1:
        out[:, 1] = 0.2 * (1.0 - np.cos(2.0 * math.pi * grid)) - 0.1
    if dim > 2:
        out[:, 2] = 0.15 * np.cos(2.0 * math.pi * grid) + 0.05
    return out


def run_gauge(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    s_fine = cfg.steps
    levels = [s_fine // 8, s_fine // 4, s_fine // 2, s_fine]
    gam0 = expm(algebra_matrix(rs, _gauge_loop(np.zeros(1), rs.dim_algebra)[0]))
    gam0_inv = np.conj(gam0.T)
    resid = np.zeros((len(levels), cfg.replicas))
    rng = stream(seed, "gauge", "paths")
    for rep in range(cfg.replicas):
        inc_fine = math.sqrt(1.0 / s_fine) * rng.standard_normal((s_fine, rs.dim_algebra))
        for li, lvl in enumerate(levels):
            m = s_fine // lvl
            inc = inc_fine.reshape(lvl, m, rs.dim_algebra).sum(axis=1)
            path = PathSample(sigma=1.0, steps=lvl, increments=inc)
            loop = _gauge_loop(np.linspace(0.0, 1.0, lvl + 1), rs.dim_algebra)
            acted = gauge_act(rs, loop, path, 1.0)
            end_acted = stochastic_endpoints(rs, acted.increments[None], 1.0)[0]
            end_plain = stochastic_endpoints(rs, inc[None], 1.0)[0]
            ref = gam0 @ end_plain @ gam0_inv
            resid[li, rep] = float(np.linalg.norm(end_acted - ref))
    means = resid.mean(axis=1)
    ses = resid.std(axis=1, ddof=1) / math.sqrt(cfg.replicas)
    checks = []
    rows = [(lvl, float(mu), float(se)) for lvl, mu, se in zip(levels, means, ses)]
    for li in range(len(levels) - 1):
        ratio = float(means[li + 1] / means[li])
        checks.append(
            CheckResult(
                name=f"gauge.halving_{levels[li]}_{levels[li + 1]}",
                statistic=ratio,
                tolerance=1.0 / 1.4,
                passed=1.0 / 2.6 <= ratio <= 1.0 / 1.4,
                detail=f"residual ratio must lie in [{1.0 / 2.6:.3f}, {1.0 / 1.4:.3f}]",
            )
        )
    return checks, {"residuals": (["steps[1]", "mean_residual[frobenius]", "se[frobenius]"], rows)}


# ---------------------------------------------------------------------------
# intertwine: conditioning kernel commutes with the two evolutions


def _library(rs, sigma, steps, count, rng, frac, cells):
    """Paths of total variance sigma binned by their level-sigma radial part.

    Returns (cell index per path, pairing coordinate at the marked fraction).
    """
    carts, rads = bm_marked_batch(rs, sigma, steps, count, rng, (frac,), lam=sigma)
    return alcove_bin_index(rs, rads, cells), carts[0]


def run_intertwine(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    u0, t, r = 1.0, 0.5, 0.5
    tau = u0 + t
    x0 = _alcove_mid(rs)
    y0 = np.array([0.35])
    a = r * y0  # folded pairing profile integral; already inside the alcove
    cells = 50
    closed = float(np.real(phi_ratio(rs, u0, u0 * x0, a, trunc))) * math.exp(
        0.5 * tau * r * float(y0 @ y0) - 0.5 * u0 * float(a @ a)
    )

    # pipeline A: conditioned evolution to time tau, then a library path
    # of variance tau conditioned (by binning) on the observed radial part
    rng_lib = stream(seed, "intertwine", "lib-tau")
    lib_idx, lib_cart = _library(rs, tau, cfg.steps, 15 * cfg.replicas, rng_lib, r, cells)
    members = [np.nonzero(lib_idx == c)[0] for c in range(cells)]
    rng_q = stream(seed, "intertwine", "evolve")
    bs, _, _ = evolve_batch(rs, u0, np.tile(u0 * x0, (cfg.replicas, 1)), t, cfg.dt, trunc, rng_q)
    z_cells = alcove_bin_index(rs, bs / tau, cells)
    pick = stream(seed, "intertwine", "pick")
    nonempty = [c for c in range(cells) if members[c].size]
    fallback = 0
    vals_a = np.empty(cfg.replicas)
    for i, c in enumerate(z_cells):
        if not members[c].size:
            fallback += 1
            c = min(nonempty, key=lambda q: abs(q - c))
        j = members[c][pick.integers(members[c].size)]
        vals_a[i] = math.exp(float(lib_cart[j] @ y0))
    est_a = float(np.mean(vals_a))
    se_a = float(np.std(vals_a, ddof=1) / math.sqrt(cfg.replicas))

    # pipeline B: a library path of variance u0 conditioned on the start
    # cell, extended by the exact Gaussian factor of the later sheet slice
    want = alcove_bin_index(rs, x0[None], cells)[0]
    rng_u = stream(seed, "intertwine", "lib-u0")
    base = []
    for _ in range(20):
        idx_u, cart_u = _library(rs, u0, cfg.steps, 50_000, rng_u, r, cells)
        base.append(cart_u[idx_u == want])
        if sum(len(b) for b in base) >= 3000:
            break
    base = np.concatenate(base)
    if len(base) < 3000:
        raise SamplingEfficiencyError(f"only {len(base)} start-cell library paths")
    vals_b = np.exp(base @ y0) * math.exp(0.5 * t * r * float(y0 @ y0))
    est_b = float(np.mean(vals_b))
    se_b = float(np.std(vals_b, ddof=1) / math.sqrt(len(vals_b)))

    comb = math.sqrt(se_a**2 + se_b**2)
    checks = [
        _moment_check(
            "intertwine.pipelines_agree",
            [est_a - est_b],
            [3.0 * comb + 0.02 * abs(closed)],
            detail=f"A={est_a:.5f} B={est_b:.5f}, {fallback} empty-cell fallbacks",
        ),
        _moment_check(
            "intertwine.closed_form_a",
            [est_a - closed],
            [4.0 * se_a + 0.02 * abs(closed)],
            detail=f"conditioning-cell width allowance, closed={closed:.5f}",
        ),
        _moment_check(
            "intertwine.closed_form_b",
            [est_b - closed],
            [4.0 * se_b + 0.02 * abs(closed)],
            detail=f"closed={closed:.5f}, library size {len(base)}",
        ),
    ]
    rows = [(est_a, se_a, est_b, se_b, closed, float(fallback))]
    cols = ["pipeline_a[1]", "se_a[1]", "pipeline_b[1]", "se_b[1]", "closed[1]", "fallbacks[1]"]
    return checks, {"estimates": (cols, rows)}


# ---------------------------------------------------------------------------
# main: entrance-conditioned evolution matches the rescaled sheet radial law


def run_main(cfg: ExperimentConfig, seed: int):
    rs = build_root_system(cfg.family, cfg.rank)
    trunc = _trunc(cfg)
    t0 = 0.05
    t_grid = np.asarray(cfg.t_grid, dtype=float)
    rng_e = stream(seed, "main", "entrance")
    b0 = entrance_batch(rs, t0, cfg.replicas, rng_e, mode="rejection", trunc=trunc)
    rng_q = stream(seed, "main", "evolve")
    _, recorded, _ = evolve_batch(
        rs, t0, b0, float(t_grid[-1]) - t0, cfg.dt, trunc, rng_q, record_offsets=t_grid - t0
    )
    z_cond = np.stack([recorded[k] / t for k, t in enumerate(t_grid)], axis=1)[:, :, 0]

    rng_s = stream(seed, "main", "sheet")
    z_sheet = sheet_radial_batch(rs, cfg.steps, tuple(t_grid), cfg.replicas, rng_s)[:, :, 0]

    checks = []
    rows = []
    for k, t in enumerate(t_grid):
        cmp_t = two_sample_stats(z_cond[:, k], z_sheet[:, k], rng=stream(seed, "main", "perm", k))
        checks.append(
            _p_check(f"main.ks_t{t:g}", cmp_t.ks_p, detail=f"KS D={cmp_t.ks_stat:.4f}, N={cfg.replicas} per side")
        )
        rows.append((t, cmp_t.ks_stat, cmp_t.ks_p, cmp_t.wasserstein1))
    joint = two_sample_stats(z_cond[:, :2], z_sheet[:, :2], rng=stream(seed, "main", "perm-joint"))
    checks.append(
        _p_check(
            "main.joint_energy",
            joint.energy_p,
            detail=f"energy statistic {joint.energy_stat:.3e} at (t1, t2) = ({t_grid[0]:g}, {t_grid[1]:g})",
        )
    )
    sample_rows = [
        tuple(z_cond[i]) + tuple(z_sheet[i]) for i in range(cfg.replicas)
    ]
    sample_cols = [f"cond_t{t:g}[alcove]" for t in t_grid] + [f"sheet_t{t:g}[alcove]" for t in t_grid]
    return checks, {
        "stats": (["t[time]", "ks[1]", "ks_p[1]", "w1[alcove]"], rows),
        "samples": (sample_cols, sample_rows),
    }


# ---------------------------------------------------------------------------
# registry


EXPERIMENT_FUNCS = {
    "identities": run_identities,
    "radial": run_radial,
    "endorbit": run_endorbit,
    "kirillov": run_kirillov,
    "endpoint": run_endpoint,
    "condorbit": run_condorbit,
    "martingale": run_martingale,
    "phiQ": run_phi_q,
    "entrance": run_entrance,
    "gauge": run_gauge,
    "intertwine": run_intertwine,
    "main": run_main,
}


def run_experiment_once(cfg: ExperimentConfig, seed: int):
    """Dispatch one (config, seed) run; returns (checks, tables)."""
    try:
        fn = EXPERIMENT_FUNCS[cfg.experiment]
    except KeyError:
        raise DomainError(f"no experiment named {cfg.experiment!r}") from None
    return fn(cfg, seed)
