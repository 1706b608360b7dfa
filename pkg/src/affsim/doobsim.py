"""Space-time Brownian motion conditioned on the affine chamber.

The conditioning function is the positive space-time harmonic series of
affinephi: h(tau, b) = exp(log_phi_d(tau, b)), which vanishes on the cone
boundary {b/tau on an alcove wall}.  Three entry points:

  * entrance_sample / entrance_batch: the time-t0 marginal of the process
    started at the cone tip.  The rejection mode uses the exact cancellation
    of the Gaussian transition density against h's Gaussian prefactor, so
    the residual target on the alcove is bounded: core(t0, x) * prod of
    root pairings, proposed uniformly.
  * simulate_conditioned: Euler-Maruyama with drift grad log h, adaptive
    step halving near walls.
  * weighted_expectation: the exact-weight estimator under the free motion,
    kept as an independent cross-check of the drift simulation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .affinephi import (
    Truncation,
    _DEFAULT_TRUNC,
    core_upper_bound,
    grad_log_phi_d_batch,
    log_phi_d_batch,
    positive_core_batch,
)
from .errors import (
    DegenerateEstimateError,
    DomainError,
    SamplingEfficiencyError,
    StepFailureError,
    UsageError,
)
from .groupsim import rad_of_bm_batch
from .numerics import neumaier_sum
from .rootsys import RootSystem, wall_distance_batch

logger = logging.getLogger(__name__)

_STEP_FLOOR_HALVINGS = 20
_MAX_REDRAWS = 100
_WALL_MARGIN = 1e-8  # strict interiority kept by every accepted node


@dataclass(frozen=True)
class SpaceTimePoint:
    """Point tau*d + b of the affine chamber; interior iff b/tau is interior."""

    tau: float
    b: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0.0):
            raise DomainError(f"time coordinate must be positive, got {self.tau}")
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 1 or not np.all(np.isfinite(b)):
            raise DomainError("space coordinate must be a finite vector")
        object.__setattr__(self, "b", b)

    def rescaled(self) -> np.ndarray:
        """Alcove position b/tau."""
        return self.b / self.tau


@dataclass(frozen=True)
class ConditionedTrajectory:
    """Recorded nodes of one conditioned path, plus stepping diagnostics."""

    times: np.ndarray
    points: tuple
    drifts: np.ndarray
    min_wall_distance: float
    halvings: int
    redraws: int

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0.0):
            raise DomainError("trajectory time grid must be strictly increasing")
        if len(self.points) != t.size:
            raise DomainError("one point per grid node required")
        object.__setattr__(self, "times", t)

    def positions(self) -> np.ndarray:
        """Space coordinates stacked as (nodes, rank)."""
        return np.stack([p.b for p in self.points])


# ---------------------------------------------------------------------------
# entrance law at the tip


def _uniform_alcove(rs: RootSystem, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points of the closed alcove = hull of 0 and the fundamental weights."""
    w = rng.dirichlet(np.ones(rs.rank + 1), size=count)
    return w[:, : rs.rank] @ rs.fundamental_weights


def entrance_batch(
    rs: RootSystem,
    t0: float,
    count: int,
    rng: np.random.Generator,
    mode: str = "rejection",
    trunc: Truncation | None = None,
    steps: int = 2000,
) -> np.ndarray:
    """Space coordinates b of `count` entrance samples at time t0, shape (count, rank).

    mode="rejection" draws exactly from the time-t0 entrance density: after
    cancelling the free Gaussian factor, the target on the alcove is
    core(t0, x) * prod_{alpha>0} 2 sin(pi (alpha, x)), bounded by the
    certified core bound times 2^{n_pos}.
    mode="radial" returns t0 times the radial part of a Brownian endpoint of
    variance 1/t0 (the law the rejection mode is tested against).
    """
    trunc = trunc or _DEFAULT_TRUNC
    if t0 <= 0.0:
        raise DomainError(f"entrance time must be positive, got {t0}")
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    if mode == "radial":
        out = t0 * rad_of_bm_batch(rs, 1.0 / t0, steps, count, rng)
        # walls have probability zero; redraw the measure-zero touches
        for _ in range(8):
            bad = wall_distance_batch(rs, out / t0) <= 1e-12
            if not np.any(bad):
                return out
            out[bad] = t0 * rad_of_bm_batch(rs, 1.0 / t0, steps, int(bad.sum()), rng)
        raise SamplingEfficiencyError("radial entrance keeps landing on a wall")
    if mode != "rejection":
        raise UsageError(f"unknown entrance mode {mode!r}")

    bound = core_upper_bound(rs, t0, trunc) * 2.0**rs.n_positive
    out = np.empty((count, rs.rank))
    got = 0
    proposed = 0
    batch = max(1024, 2 * count)
    while got < count:
        xs = _uniform_alcove(rs, batch, rng)
        u = rng.random(batch)
        proposed += batch
        interior = wall_distance_batch(rs, xs) > 1e-9
        weights = np.zeros(batch)
        if np.any(interior):
            core = positive_core_batch(rs, np.full(int(interior.sum()), t0), xs[interior], trunc)
            denom = np.prod(2.0 * np.sin(np.pi * (xs[interior] @ rs.positive_roots.T)), axis=1)
            weights[interior] = np.maximum(core, 0.0) * denom
        keep = u * bound <= weights
        take = min(int(keep.sum()), count - got)
        if take:
            out[got : got + take] = t0 * xs[keep][:take]
            got += take
        if proposed >= 20000 and got < max(1, proposed * 1e-4):
            raise SamplingEfficiencyError(
                f"entrance rejection acceptance {got}/{proposed} below 1e-4; "
                "increase t0 or use the radial mode"
            )
    logger.debug("entrance rejection acceptance %.3f", got / proposed)
    return out


def entrance_sample(
    rs: RootSystem,
    t0: float,
    mode: str = "rejection",
    trunc: Truncation | None = None,
    rng: np.random.Generator | None = None,
    steps: int = 2000,
) -> SpaceTimePoint:
    """One sample of the entrance law at time t0; see entrance_batch."""
    if rng is None:
        raise UsageError("entrance_sample needs an explicit rng")
    b = entrance_batch(rs, t0, 1, rng, mode=mode, trunc=trunc, steps=steps)[0]
    return SpaceTimePoint(tau=t0, b=b)


# ---------------------------------------------------------------------------
# conditioned evolution (h-transform SDE)


def evolve_batch(
    rs: RootSystem,
    tau0: float,
    bs: np.ndarray,
    horizon: float,
    dt: float,
    trunc: Truncation | None,
    rng: np.random.Generator,
    record_offsets: np.ndarray | None = None,
):
    """Advance conditioned replicas from common time tau0 over `horizon`.

    bs has shape (B, rank), every b/tau0 strictly interior.  Steps are
    Euler-Maruyama with drift grad log h, capped at dt, halved so that
    5*sqrt(step) stays below the wall distance of b (down to dt/2^20), and
    proposals that would leave the open cone are retried with halved step,
    then with fresh noise, at most 100 times each.

    Returns (final positions (B, rank), recorded (R, B, rank) at
    tau0 + record_offsets, diagnostics dict).  Replicas desynchronize
    internally but all stop exactly at the recording times.
    """
    trunc = trunc or _DEFAULT_TRUNC
    if horizon <= 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    if dt <= 0.0 or dt > horizon:
        raise DomainError(f"dt must lie in (0, horizon], got {dt}")
    bs = np.array(np.atleast_2d(np.asarray(bs, dtype=float)))
    n_rep = bs.shape[0]
    if np.any(wall_distance_batch(rs, bs / tau0) <= _WALL_MARGIN):
        raise DomainError("every start must be strictly inside the cone")

    offsets = np.asarray(record_offsets, dtype=float) if record_offsets is not None else np.empty(0)
    if offsets.size and (
        np.any(offsets <= 0.0) or np.any(offsets > horizon + 1e-12) or np.any(np.diff(offsets) <= 0.0)
    ):
        raise DomainError("record offsets must be increasing in (0, horizon]")
    # stopping times: the macro grid of spacing dt, plus every recording time
    grid = np.arange(1, math.ceil(horizon / dt) + 1) * dt
    grid[-1] = horizon
    stops = np.unique(np.concatenate([grid, offsets, [horizon]]))
    rec_index = {}
    for r, off in enumerate(offsets):
        k = int(np.argmin(np.abs(stops - off)))
        rec_index[k] = r
    recorded = np.empty((offsets.size, n_rep, rs.rank))

    floor = dt * 2.0**-_STEP_FLOOR_HALVINGS
    taus = np.zeros(n_rep)  # elapsed time since tau0
    ptr = np.zeros(n_rep, dtype=int)  # index of the next stop per replica
    halvings = 0
    redraws = 0
    min_wall = math.inf

    while True:
        active = ptr < stops.size
        if not np.any(active):
            break
        ia = np.nonzero(active)[0]
        tau_a = tau0 + taus[ia]
        b_a = bs[ia]
        dist = tau_a * wall_distance_batch(rs, b_a / tau_a[:, None])
        min_wall = min(min_wall, float(dist.min()))

        base = stops[ptr[ia]] - taus[ia]
        allowed = (dist / 5.0) ** 2
        ratio = base / np.maximum(allowed, 1e-300)
        k = np.ceil(np.log2(np.maximum(ratio, 1.0)))
        k = np.minimum(k, _STEP_FLOOR_HALVINGS)
        h = np.maximum(base * 0.5**k, np.minimum(base, floor))
        halvings += int(np.count_nonzero(k))

        drift = grad_log_phi_d_batch(rs, tau_a, b_a, trunc)
        pending = np.arange(ia.size)
        prop = np.empty_like(b_a)
        attempts = 0
        while pending.size:
            attempts += 1
            if attempts > _MAX_REDRAWS:
                worst = pending[0]
                raise StepFailureError(
                    f"step failed after {_MAX_REDRAWS} retries at tau="
                    f"{tau_a[worst]:.6g}, wall distance {dist[worst]:.3g}, "
                    f"step {h[worst]:.3g} (rate {pending.size}/{ia.size} this step)"
                )
            noise = rng.standard_normal((pending.size, rs.rank))
            cand = (
                b_a[pending]
                + drift[pending] * h[pending, None]
                + np.sqrt(h[pending, None]) * noise
            )
            tau_new = tau_a[pending] + h[pending]
            ok = wall_distance_batch(rs, cand / tau_new[:, None]) > _WALL_MARGIN
            prop[pending[ok]] = cand[ok]
            rejected = pending[~ok]
            if rejected.size:
                shrinkable = h[rejected] > floor
                h[rejected[shrinkable]] *= 0.5
                halvings += int(shrinkable.sum())
                redraws += int((~shrinkable).sum())
            pending = rejected

        bs[ia] = prop
        taus[ia] += h
        arrived = np.abs(taus[ia] - stops[ptr[ia]]) < 1e-12
        for j in np.nonzero(arrived)[0]:
            rep = ia[j]
            k_stop = ptr[rep]
            if k_stop in rec_index:
                recorded[rec_index[k_stop], rep] = bs[rep]
            ptr[rep] += 1

    diagnostics = {
        "min_wall_distance": min_wall,
        "halvings": halvings,
        "redraws": redraws,
    }
    if redraws:
        logger.debug("evolve_batch redrew %d proposals over %d replicas", redraws, n_rep)
    return bs, recorded, diagnostics


def simulate_conditioned(
    rs: RootSystem,
    start: SpaceTimePoint,
    horizon: float,
    dt: float,
    trunc: Truncation | None = None,
    rng: np.random.Generator | None = None,
) -> ConditionedTrajectory:
    """One conditioned trajectory recorded on the macro grid of spacing dt."""
    if rng is None:
        raise UsageError("simulate_conditioned needs an explicit rng")
    trunc = trunc or _DEFAULT_TRUNC
    n_macro = math.ceil(horizon / dt)
    offsets = np.minimum(np.arange(1, n_macro + 1) * dt, horizon)
    _, recorded, diag = evolve_batch(
        rs, start.tau, start.b[None], horizon, dt, trunc, rng, record_offsets=offsets
    )
    times = np.concatenate([[start.tau], start.tau + offsets])
    nodes = np.concatenate([start.b[None], recorded[:, 0, :]])
    points = tuple(SpaceTimePoint(tau=float(t), b=row) for t, row in zip(times, nodes))
    drifts = grad_log_phi_d_batch(rs, times[:-1], nodes[:-1], trunc)
    return ConditionedTrajectory(
        times=times,
        points=points,
        drifts=drifts,
        min_wall_distance=diag["min_wall_distance"],
        halvings=diag["halvings"],
        redraws=diag["redraws"],
    )


# ---------------------------------------------------------------------------
# exact-weight estimator under the free motion


def free_paths(
    rs: RootSystem,
    start: SpaceTimePoint,
    horizon: float,
    dt: float,
    count: int,
    rng: np.random.Generator,
):
    """Free Brownian replicas from start: nodes (count, K+1, rank), exit flags.

    Exit is detected by alcove membership of b/tau per node; exited replicas
    keep evolving (their later nodes are reported) but stay flagged.  The
    time grid is start.tau + k*dt, last node exactly at start.tau + horizon.
    """
    if horizon <= 0.0 or dt <= 0.0 or dt > horizon:
        raise DomainError("need 0 < dt <= horizon")
    n_macro = math.ceil(horizon / dt)
    offsets = np.concatenate([[0.0], np.minimum(np.arange(1, n_macro + 1) * dt, horizon)])
    taus = start.tau + offsets
    nodes = np.empty((count, taus.size, rs.rank))
    nodes[:, 0] = start.b
    exited = np.zeros(count, dtype=bool)
    chunk = 4096
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        b = np.tile(start.b, (hi - lo, 1))
        for k in range(1, taus.size):
            h = taus[k] - taus[k - 1]
            b = b + math.sqrt(h) * rng.standard_normal((hi - lo, rs.rank))
            nodes[lo:hi, k] = b
            exited[lo:hi] |= wall_distance_batch(rs, b / taus[k]) <= 0.0
    return taus, nodes, exited


def weighted_expectation(
    rs: RootSystem,
    start: SpaceTimePoint,
    horizon: float,
    dt: float,
    functional,
    trunc: Truncation | None = None,
    rng: np.random.Generator | None = None,
    count: int = 4000,
):
    """Estimate the conditioned expectation of a path functional by weighting.

    Simulates free Brownian paths, discards those whose rescaled position
    leaves the alcove, and averages functional(times, nodes) times the
    martingale weight h(end)/h(start).  Returns (estimate, stderr).  The
    functional receives the node times (K+1,) and positions (K+1, rank) of
    one surviving replica and must return a float.
    """
    if rng is None:
        raise UsageError("weighted_expectation needs an explicit rng")
    if horizon <= 0.0 or dt <= 0.0 or dt > horizon:
        raise DomainError("need 0 < dt <= horizon")
    trunc = trunc or _DEFAULT_TRUNC
    n_macro = math.ceil(horizon / dt)
    offsets = np.concatenate([[0.0], np.minimum(np.arange(1, n_macro + 1) * dt, horizon)])
    taus = start.tau + offsets
    log_h0 = log_phi_d_batch(rs, np.array([start.tau]), start.b[None], trunc)[0]

    # replicas are generated and weighted chunkwise so fine grids (K ~ 1e4)
    # never hold all node arrays at once; chunk depends only on shapes, so
    # results are reproducible for a given rng
    chunk = min(count, max(16, int(4e7 / (taus.size * rs.rank * 8))))
    prods = np.zeros(count)
    n_alive = 0
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        m = hi - lo
        nodes = np.empty((m, taus.size, rs.rank))
        nodes[:, 0] = start.b
        exited = np.zeros(m, dtype=bool)
        b = np.tile(start.b, (m, 1))
        for k in range(1, taus.size):
            h = taus[k] - taus[k - 1]
            b = b + math.sqrt(h) * rng.standard_normal((m, rs.rank))
            nodes[:, k] = b
            exited |= wall_distance_batch(rs, b / taus[k]) <= 0.0
        # weights would vanish within roundoff at the wall; treat as absorbed
        end_ok = wall_distance_batch(rs, nodes[:, -1] / taus[-1]) > 1e-10
        alive = ~exited & end_ok
        n_alive += int(alive.sum())
        if not np.any(alive):
            continue
        log_ht = log_phi_d_batch(
            rs, np.full(int(alive.sum()), taus[-1]), nodes[alive, -1], trunc
        )
        weights = np.exp(log_ht - log_h0)
        for w, i in zip(weights, np.nonzero(alive)[0]):
            prods[lo + i] = w * float(functional(taus, nodes[i]))
    if n_alive == 0:
        raise DegenerateEstimateError(
            f"all {count} replicas were absorbed before the horizon"
        )
    estimate = float(neumaier_sum(prods) / count)
    stderr = float(np.std(prods, ddof=1) / math.sqrt(count))
    return estimate, stderr
