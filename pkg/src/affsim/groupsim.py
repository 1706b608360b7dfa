"""Stochastic simulation on the compact group and its Lie algebra.

The algebra su(rank+1) carries the inner product <X, Y> = -tr(XY)/(2pi)^2,
chosen so that the Cartan directions 2*pi*i*diag(trace_basis[k]) form an
orthonormal set whose coordinates agree with the alcove coordinates used
everywhere else in the package.  Under this normalization the group
Laplacian acts on the character of highest weight lam with eigenvalue
-(2pi)^2 * (|lam+rho|^2 - |rho|^2), which is exactly the decay rate the
closed-form heat kernel expects.

Algebra elements are stored as coordinate vectors in a fixed orthonormal
basis (Cartan block first, then one cosine/sine pair per positive root
position); matrices are materialized only inside exponentials.  Brownian
sheets are stored increment-per-rectangle, never as values, so evaluations
at different times share increments exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError
from .rootsys import AlcovePoint, RootSystem, in_alcove

logger = logging.getLogger(__name__)

_TWO_PI = 2.0 * np.pi
_OFF_SCALE = np.pi * np.sqrt(2.0)  # makes off-diagonal basis vectors unit length
_UNITARY_TOL = 1e-10
_REORTH_TRIGGER = 1e-12
_REORTH_EVERY = 64


# ---------------------------------------------------------------------------
# orthonormal basis of the algebra


def _pair_table(rs: RootSystem) -> np.ndarray:
    """Index pairs (i, j), i < j, in the fixed lexicographic order."""
    with rs._lock:
        cached = rs._cache.get("algebra_pairs")
        if cached is None:
            m = rs.rank + 1
            cached = np.array([(i, j) for i in range(m) for j in range(i + 1, m)])
            rs._cache["algebra_pairs"] = cached
    return cached


def algebra_matrix(rs: RootSystem, coords: np.ndarray) -> np.ndarray:
    """Anti-Hermitian traceless matrix of an algebra coordinate vector.

    Layout: coords[..., :rank] are Cartan coordinates, then for each pair
    (i, j) with i < j two coordinates (a, b) contributing
    pi*sqrt(2) * (a*(E_ij - E_ji) + b*i*(E_ij + E_ji)).
    Accepts any batch shape (..., dim_algebra).
    """
    coords = np.asarray(coords, dtype=float)
    n = rs.rank
    m = n + 1
    if coords.shape[-1] != rs.dim_algebra:
        raise DomainError(
            f"expected {rs.dim_algebra} algebra coordinates, got {coords.shape[-1]}"
        )
    pairs = _pair_table(rs)
    diag = coords[..., :n] @ rs.trace_basis  # (..., m)
    out = np.zeros(coords.shape[:-1] + (m, m), dtype=complex)
    idx = np.arange(m)
    out[..., idx, idx] = _TWO_PI * 1j * diag
    a = coords[..., n::2]
    b = coords[..., n + 1 :: 2]
    upper = _OFF_SCALE * (a + 1j * b)
    out[..., pairs[:, 0], pairs[:, 1]] = upper
    out[..., pairs[:, 1], pairs[:, 0]] = _OFF_SCALE * (-a + 1j * b)
    return out


def algebra_coords(rs: RootSystem, mats: np.ndarray) -> np.ndarray:
    """Coordinates of anti-Hermitian traceless matrices; inverse of algebra_matrix."""
    mats = np.asarray(mats, dtype=complex)
    n = rs.rank
    pairs = _pair_table(rs)
    idx = np.arange(n + 1)
    diag = mats[..., idx, idx].imag / _TWO_PI
    out = np.empty(mats.shape[:-2] + (rs.dim_algebra,), dtype=float)
    out[..., :n] = diag @ rs.trace_basis.T
    upper = mats[..., pairs[:, 0], pairs[:, 1]] / _OFF_SCALE
    out[..., n::2] = upper.real
    out[..., n + 1 :: 2] = upper.imag
    return out


def _expm_anti_hermitian(mats: np.ndarray) -> np.ndarray:
    """Batched exp of anti-Hermitian matrices via a Hermitian eigendecomposition."""
    herm = -1j * np.asarray(mats)
    try:
        w, v = np.linalg.eigh(herm)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigendecomposition failed in matrix exponential: {exc}")
    phases = np.exp(1j * w)
    return (v * phases[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def cartan_exp(rs: RootSystem, x: np.ndarray) -> "GroupElement":
    """Group element exp(2*pi*i*diag(.)) of a Cartan vector in alcove coordinates."""
    x = np.asarray(x, dtype=float)
    if x.shape != (rs.rank,):
        raise DomainError(f"expected a rank-{rs.rank} Cartan vector, got {x.shape}")
    diag = np.exp(_TWO_PI * 1j * (rs.trace_basis.T @ x))
    return GroupElement(np.diag(diag))


# ---------------------------------------------------------------------------
# sample containers


@dataclass(frozen=True)
class PathSample:
    """Discretized algebra-valued Brownian path, stored as increments.

    increments[k] is the step over [k/S, (k+1)/S] in orthonormal algebra
    coordinates, N(0, sigma/S * Id) at generation time.  provenance records
    the (seed, tags) key that produced the sample.
    """

    sigma: float
    steps: int
    increments: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        if self.sigma <= 0.0 or not np.isfinite(self.sigma):
            raise DomainError(f"path variance must be positive, got {self.sigma}")
        if self.steps < 1:
            raise DomainError(f"need at least one step, got {self.steps}")
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 2 or inc.shape[0] != self.steps:
            raise DomainError(
                f"increments must have shape ({self.steps}, dim), got {inc.shape}"
            )
        if not np.all(np.isfinite(inc)):
            raise DomainError("non-finite path increments")
        object.__setattr__(self, "increments", inc)

    def cumulative(self) -> np.ndarray:
        """Path values at grid nodes, shape (steps+1, dim), starting at 0."""
        out = np.zeros((self.steps + 1, self.increments.shape[1]))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


@dataclass(frozen=True)
class GroupElement:
    """Special unitary matrix; construction enforces the group membership."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise DomainError(f"group element must be square, got shape {u.shape}")
        if not np.all(np.isfinite(u.view(float))):
            raise DomainError("non-finite matrix entries")
        m = u.shape[0]
        err_u = np.max(np.abs(np.conj(u.T) @ u - np.eye(m)))
        err_d = abs(np.linalg.det(u) - 1.0)
        if err_u > _UNITARY_TOL or err_d > _UNITARY_TOL:
            raise NumericalError(
                f"matrix is not special unitary: unitarity {err_u:.2e}, det {err_d:.2e}"
            )
        object.__setattr__(self, "matrix", u)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SheetSample:
    """Two-parameter Gaussian sheet, stored rectangle-increment first.

    increments[j, k] is the mass on [k/S, (k+1)/S] x (t_{j-1}, t_j] (with
    t_0 = 0), N(0, ds*dt * Id) per algebra coordinate, so sums over any
    sub-rectangle have variance equal to its area and evaluations at the
    grid times t_j share increments exactly.
    """

    s_steps: int
    t_grid: np.ndarray
    increments: np.ndarray
    provenance: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise DomainError("t_grid must be a nonempty 1-d array")
        if t[0] <= 0.0 or np.any(np.diff(t) <= 0.0) or not np.all(np.isfinite(t)):
            raise DomainError("t_grid must be strictly increasing and positive")
        if self.s_steps < 1:
            raise DomainError(f"need at least one s-step, got {self.s_steps}")
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 3 or inc.shape[:2] != (t.size, self.s_steps):
            raise DomainError(
                f"increments must have shape ({t.size}, {self.s_steps}, dim), "
                f"got {inc.shape}"
            )
        if not np.all(np.isfinite(inc)):
            raise DomainError("non-finite sheet increments")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "increments", inc)

    @property
    def t_steps(self) -> int:
        return self.t_grid.size


# ---------------------------------------------------------------------------
# sampling


def sample_bm_path(
    rs: RootSystem,
    sigma: float,
    steps: int,
    rng: np.random.Generator,
    provenance: tuple = (),
) -> PathSample:
    """Brownian path on the algebra with total variance sigma at s = 1."""
    if sigma <= 0.0:
        raise DomainError(f"variance must be positive, got {sigma}")
    if steps < 1:
        raise DomainError(f"need at least one step, got {steps}")
    scale = np.sqrt(sigma / steps)
    inc = scale * rng.standard_normal((steps, rs.dim_algebra))
    return PathSample(sigma=sigma, steps=steps, increments=inc, provenance=provenance)


def sample_sheet(
    rs: RootSystem,
    s_steps: int,
    t_grid: np.ndarray,
    rng: np.random.Generator,
    provenance: tuple = (),
) -> SheetSample:
    """Standard Brownian sheet sampled on [0,1] x (0, max t], increment form."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1 or t[0] <= 0.0 or np.any(np.diff(t) <= 0.0):
        raise DomainError("t_grid must be strictly increasing and positive")
    if s_steps < 1:
        raise DomainError(f"need at least one s-step, got {s_steps}")
    dt = np.diff(np.concatenate(([0.0], t)))
    scale = np.sqrt(dt / s_steps)  # per-rectangle std, ds = 1/S
    inc = scale[:, None, None] * rng.standard_normal(
        (t.size, s_steps, rs.dim_algebra)
    )
    return SheetSample(s_steps=s_steps, t_grid=t, increments=inc, provenance=provenance)


def haar_sample(rs: RootSystem, rng: np.random.Generator) -> GroupElement:
    """One Haar-distributed special unitary matrix."""
    return GroupElement(haar_batch(rs, 1, rng)[0])


def haar_batch(rs: RootSystem, count: int, rng: np.random.Generator) -> np.ndarray:
    """Haar samples on SU(rank+1), shape (count, m, m).

    Gaussian matrix -> QR with the R-diagonal made positive (Haar on the
    unitary group), then the determinant phase is spread evenly over the
    matrix to land in the special unitary subgroup.
    """
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    m = rs.rank + 1
    g = rng.standard_normal((count, m, m)) + 1j * rng.standard_normal((count, m, m))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1).copy()
    d /= np.abs(d)
    q = q * d[:, None, :]
    det = np.linalg.det(q)
    q = q * (det ** (-1.0 / m))[:, None, None]
    return q


# ---------------------------------------------------------------------------
# stochastic exponential


def _quat_mul(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Product of unit quaternions (w, v) representing w*Id + i*(v . sigma)."""
    w1, v1 = q[..., 0], q[..., 1:]
    w2, v2 = p[..., 0], p[..., 1:]
    out = np.empty(np.broadcast_shapes(q.shape, p.shape))
    out[..., 0] = w1 * w2 - np.sum(v1 * v2, axis=-1)
    out[..., 1:] = (
        w1[..., None] * v2 + w2[..., None] * v1 - np.cross(v1, v2)
    )
    return out


def _quat_steps(increments: np.ndarray, lam: float) -> np.ndarray:
    """Per-step SU(2) factors exp(M/lam) as quaternions, increments (..., 3)."""
    # coordinate layout [cartan, a, b] pairs with (sigma_z, sigma_y, sigma_x)
    c = increments[..., ::-1] * (_OFF_SCALE / lam)
    r = np.sqrt(np.sum(c * c, axis=-1))
    out = np.empty(increments.shape[:-1] + (4,))
    out[..., 0] = np.cos(r)
    sinc = np.where(r > 1e-30, np.sin(np.maximum(r, 1e-300)) / np.maximum(r, 1e-300), 1.0)
    out[..., 1:] = c * sinc[..., None]
    return out


def _quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """SU(2) matrices of quaternions (..., 4) -> (..., 2, 2)."""
    w, ux, uy, uz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = w + 1j * uz
    out[..., 0, 1] = uy + 1j * ux
    out[..., 1, 0] = -uy + 1j * ux
    out[..., 1, 1] = w - 1j * uz
    return out


def _endpoint_quat(increments: np.ndarray, lam: float) -> np.ndarray:
    """Endpoint quaternions of the left-product scheme, increments (B, S, 3)."""
    steps = _quat_steps(increments, lam)
    q = steps[:, 0]
    n_steps = increments.shape[1]
    for k in range(1, n_steps):
        q = _quat_mul(q, steps[:, k])
        if (k + 1) % _REORTH_EVERY == 0:
            norm = np.sqrt(np.sum(q * q, axis=-1, keepdims=True))
            q = q / norm
    q = q / np.sqrt(np.sum(q * q, axis=-1, keepdims=True))
    return q


def _polar_fix(x: np.ndarray) -> np.ndarray:
    """One Newton polar step pulling near-unitary matrices back to the group."""
    m = x.shape[-1]
    gram = np.conj(np.swapaxes(x, -1, -2)) @ x
    return 0.5 * (x @ (3.0 * np.eye(m) - gram))


def stochastic_endpoints(
    rs: RootSystem, increments: np.ndarray, lam: float
) -> np.ndarray:
    """Endpoints of the left-multiplicative exponential scheme, batched.

    increments has shape (B, S, dim_algebra); the result is (B, m, m) with
    X_{k+1} = X_k exp(step_k / lam).  Rank 1 runs on unit quaternions; higher
    ranks exponentiate through batched Hermitian eigendecompositions, with a
    polar correction whenever the product drifts from unitarity.
    """
    if lam <= 0.0:
        raise DomainError(f"level must be positive, got {lam}")
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 3 or increments.shape[2] != rs.dim_algebra:
        raise DomainError(
            f"expected increments of shape (B, S, {rs.dim_algebra}), "
            f"got {increments.shape}"
        )
    if not np.all(np.isfinite(increments)):
        raise DomainError("non-finite path increments")
    if rs.rank == 1:
        return _quat_to_matrix(_endpoint_quat(increments, lam))

    n_paths, n_steps, _ = increments.shape
    m = rs.rank + 1
    x = np.broadcast_to(np.eye(m, dtype=complex), (n_paths, m, m)).copy()
    fixes = 0
    for k in range(n_steps):
        step = _expm_anti_hermitian(algebra_matrix(rs, increments[:, k] / lam))
        x = x @ step
        if (k + 1) % _REORTH_EVERY == 0:
            drift = np.max(
                np.abs(np.conj(np.swapaxes(x, -1, -2)) @ x - np.eye(m))
            )
            if drift > _REORTH_TRIGGER:
                x = _polar_fix(x)
                fixes += 1
    drift = np.max(np.abs(np.conj(np.swapaxes(x, -1, -2)) @ x - np.eye(m)))
    if drift > _REORTH_TRIGGER:
        x = _polar_fix(x)
        fixes += 1
    if fixes:
        logger.debug(
            "reorthonormalized %d times over %d steps (batch %d)",
            fixes,
            n_steps,
            n_paths,
        )
    return x


def stochastic_exponential(
    rs: RootSystem, path: PathSample, lam: float, return_path: bool = False
):
    """Stratonovich stochastic exponential of one path at level lam.

    Returns the endpoint GroupElement, or (endpoint, values) with values of
    shape (steps+1, m, m) holding the whole discrete trajectory when
    return_path is set.
    """
    if lam <= 0.0:
        raise DomainError(f"level must be positive, got {lam}")
    if not return_path:
        return GroupElement(stochastic_endpoints(rs, path.increments[None], lam)[0])

    m = rs.rank + 1
    values = np.empty((path.steps + 1, m, m), dtype=complex)
    values[0] = np.eye(m)
    if rs.rank == 1:
        steps = _quat_steps(path.increments, lam)
        q = np.array([1.0, 0.0, 0.0, 0.0])
        for k in range(path.steps):
            q = _quat_mul(q, steps[k])
            q = q / np.sqrt(np.sum(q * q))
            values[k + 1] = _quat_to_matrix(q)
    else:
        factors = _expm_anti_hermitian(algebra_matrix(rs, path.increments / lam))
        x = np.eye(m, dtype=complex)
        for k in range(path.steps):
            x = x @ factors[k]
            if (k + 1) % _REORTH_EVERY == 0:
                drift = np.max(np.abs(np.conj(x.T) @ x - np.eye(m)))
                if drift > _REORTH_TRIGGER:
                    x = _polar_fix(x)
                    logger.debug("reorthonormalized path at step %d", k + 1)
            values[k + 1] = x
    return GroupElement(values[-1]), values


# ---------------------------------------------------------------------------
# radial part


def radial_batch(rs: RootSystem, mats: np.ndarray) -> np.ndarray:
    """Alcove coordinates of the radial parts of unitary matrices (B, m, m)."""
    mats = np.asarray(mats, dtype=complex)
    if mats.ndim == 2:
        mats = mats[None]
    m = rs.rank + 1
    if mats.shape[-2:] != (m, m):
        raise DomainError(f"expected matrices of size {m}, got {mats.shape[-2:]}")
    try:
        ev = np.linalg.eigvals(mats)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}")
    phases = np.angle(ev) / _TWO_PI
    phases -= np.floor(phases)  # fractional eigenphases in [0, 1)

    # zero-sum integer correction: det = 1 forces the phase sum to an integer;
    # subtracting 1 from the largest entries keeps the spectrum and lands the
    # sorted vector directly in the fundamental alcove.
    total = np.rint(np.sum(phases, axis=1)).astype(int)
    if np.any(np.abs(np.sum(phases, axis=1) - total) > 1e-6):
        raise NumericalError("eigenphase sum is not an integer; matrix not det 1")
    f = -np.sort(-phases, axis=1)
    n1 = m
    cols = np.arange(n1)
    folded = np.take_along_axis(f, (cols + total[:, None]) % n1, axis=1)
    folded = folded - (cols >= (n1 - total[:, None]))

    rec = np.sort(folded - np.floor(folded), axis=1)
    chk = np.sort(phases, axis=1)
    gap = np.abs(rec - chk)
    gap = np.minimum(gap, 1.0 - gap)
    if np.max(gap) * _TWO_PI > 1e-9:
        raise NumericalError(
            f"folded spectrum mismatch {np.max(gap) * _TWO_PI:.2e}"
        )
    return folded @ rs.trace_basis.T


def radial_part(rs: RootSystem, u) -> AlcovePoint:
    """Unique alcove point whose exponential shares the spectrum of u."""
    mat = u.matrix if isinstance(u, GroupElement) else np.asarray(u, dtype=complex)
    coords = radial_batch(rs, mat[None])[0]
    if not in_alcove(rs, coords, tol=1e-9):
        raise NumericalError("radial fold landed outside the closed alcove")
    return AlcovePoint(coords=coords)


def rad_of_bm(
    rs: RootSystem, sigma: float, steps: int, rng: np.random.Generator
) -> AlcovePoint:
    """Radial part of the stochastic exponential of one Brownian path."""
    path = sample_bm_path(rs, sigma, steps, rng)
    return radial_part(rs, stochastic_exponential(rs, path, 1.0))


def rad_of_bm_batch(
    rs: RootSystem,
    sigma: float,
    steps: int,
    count: int,
    rng: np.random.Generator,
    lam: float = 1.0,
) -> np.ndarray:
    """Radial endpoints of count independent Brownian paths, shape (count, rank).

    Replicas are generated and evolved in bounded chunks; the stream is
    consumed in replica order, so results do not depend on the chunking.
    """
    if sigma <= 0.0:
        raise DomainError(f"variance must be positive, got {sigma}")
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    chunk = max(1, int(3.0e7 / (steps * rs.dim_algebra + 1)))
    scale = np.sqrt(sigma / steps)
    out = np.empty((count, rs.rank))
    done = 0
    while done < count:
        c = min(chunk, count - done)
        inc = scale * rng.standard_normal((c, steps, rs.dim_algebra))
        ends = stochastic_endpoints(rs, inc, lam)
        out[done : done + c] = radial_batch(rs, ends)
        done += c
    return out


def bm_marked_batch(
    rs: RootSystem,
    sigma: float,
    steps: int,
    count: int,
    rng: np.random.Generator,
    mark_fracs=(),
    lam: float = 1.0,
):
    """Radial endpoints plus flat-path Cartan coordinates at marked fractions.

    Runs count Brownian paths of total variance sigma through the stochastic
    exponential and records, at each fraction f in mark_fracs, the Cartan
    block of the flat cumulative sum (the algebra-valued path at time
    f * sigma).  Returns (carts, rads) with carts of shape
    (len(mark_fracs), count, rank) in the order given and rads (count, rank).

    Rank 1 streams the quaternion recursion one step at a time so memory
    stays O(count) regardless of steps; higher ranks fall back to bounded
    replica chunks.  Stream consumption differs between the two regimes, so
    fixing rank and shapes fixes the draw.
    """
    if sigma <= 0.0:
        raise DomainError(f"variance must be positive, got {sigma}")
    if steps < 1 or count < 1:
        raise DomainError("steps and count must be positive")
    fracs = np.atleast_1d(np.asarray(mark_fracs, dtype=float))
    if fracs.size and (np.min(fracs) <= 0.0 or np.max(fracs) > 1.0 + 1e-12):
        raise DomainError("mark fractions must lie in (0, 1]")
    mark_idx = np.clip(np.rint(fracs * steps).astype(int), 1, steps)
    carts = np.empty((fracs.size, count, rs.rank))
    rads = np.empty((count, rs.rank))
    scale = np.sqrt(sigma / steps)
    if rs.rank == 1:
        marks_at = {}
        for pos, k in enumerate(mark_idx):
            marks_at.setdefault(int(k), []).append(pos)
        off = _OFF_SCALE / lam
        block = 100_000  # cache-friendly row count for the step kernels
        done = 0
        while done < count:
            nb = min(block, count - done)
            csum = np.zeros(nb)
            # preallocated workspace; the step loop runs allocation-free
            inc = np.empty((nb, 3))
            cvec = np.empty((nb, 3))
            r = np.empty(nb)
            s = np.empty((nb, 4))
            q = np.empty((nb, 4))
            qw = np.empty((nb, 4))
            for k in range(1, steps + 1):
                rng.standard_normal(out=inc)
                inc *= scale
                csum += inc[:, 0]
                # exp of the step in quaternion form, layout [cart, a, b]
                np.multiply(inc[:, ::-1], off, out=cvec)
                np.sqrt(np.einsum("ij,ij->i", cvec, cvec), out=r)
                np.cos(r, out=s[:, 0])
                np.clip(r, 1e-300, None, out=r)
                np.divide(np.sin(r), r, out=r)
                np.multiply(cvec, r[:, None], out=s[:, 1:])
                if k == 1:
                    q[:] = s
                else:
                    w1, v1 = q[:, 0], q[:, 1:]
                    w2, v2 = s[:, 0], s[:, 1:]
                    np.multiply(w1, w2, out=qw[:, 0])
                    qw[:, 0] -= np.einsum("ij,ij->i", v1, v2)
                    np.multiply(w1[:, None], v2, out=qw[:, 1:])
                    qw[:, 1:] += w2[:, None] * v1
                    qw[:, 1] -= v1[:, 1] * v2[:, 2] - v1[:, 2] * v2[:, 1]
                    qw[:, 2] -= v1[:, 2] * v2[:, 0] - v1[:, 0] * v2[:, 2]
                    qw[:, 3] -= v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
                    q, qw = qw, q
                if k % _REORTH_EVERY == 0:
                    q /= np.sqrt(np.einsum("ij,ij->i", q, q))[:, None]
                for pos in marks_at.get(k, ()):
                    carts[pos, done : done + nb, 0] = csum
            q /= np.sqrt(np.einsum("ij,ij->i", q, q))[:, None]
            rads[done : done + nb] = radial_batch(rs, _quat_to_matrix(q))
            done += nb
        return carts, rads
    chunk = max(1, int(3.0e7 / (steps * rs.dim_algebra + 1)))
    done = 0
    while done < count:
        c = min(chunk, count - done)
        inc = scale * rng.standard_normal((c, steps, rs.dim_algebra))
        csum = np.cumsum(inc[:, :, : rs.rank], axis=1)
        for pos, k in enumerate(mark_idx):
            carts[pos, done : done + c] = csum[:, k - 1]
        ends = stochastic_endpoints(rs, inc, lam)
        rads[done : done + c] = radial_batch(rs, ends)
        done += c
    return carts, rads


# ---------------------------------------------------------------------------
# sheet evaluation


def _sheet_paths(sheet: SheetSample) -> np.ndarray:
    """Increment arrays of the rescaled paths s -> x(s, t_j)/t_j, (T, S, dim)."""
    cum = np.cumsum(sheet.increments, axis=0)
    return cum / sheet.t_grid[:, None, None]


def sheet_radial_process(rs: RootSystem, sheet: SheetSample):
    """Radial part of the time-rescaled sheet at each grid time.

    For each t in the grid, the path s -> x(s, t)/t is run through the
    stochastic exponential at level 1 and the endpoint radial part is
    taken.  Returns a list of (t, AlcovePoint).
    """
    paths = _sheet_paths(sheet)
    ends = stochastic_endpoints(rs, paths, 1.0)
    coords = radial_batch(rs, ends)
    out = []
    for j, t in enumerate(sheet.t_grid):
        if not in_alcove(rs, coords[j], tol=1e-9):
            raise NumericalError("radial fold landed outside the closed alcove")
        out.append((float(t), AlcovePoint(coords=coords[j])))
    return out


def sheet_radial_batch(
    rs: RootSystem,
    s_steps: int,
    t_grid: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Radial sheet trajectories for count independent sheets, (count, T, rank).

    Equivalent to stacking sheet_radial_process over fresh SheetSamples, but
    evolves all grid times of a chunk of replicas in one batch.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1 or t[0] <= 0.0 or np.any(np.diff(t) <= 0.0):
        raise DomainError("t_grid must be strictly increasing and positive")
    if count < 1:
        raise DomainError(f"count must be positive, got {count}")
    n_t = t.size
    dt = np.diff(np.concatenate(([0.0], t)))
    scale = np.sqrt(dt / s_steps)
    chunk = max(1, int(3.0e7 / (n_t * s_steps * rs.dim_algebra + 1)))
    out = np.empty((count, n_t, rs.rank))
    done = 0
    while done < count:
        c = min(chunk, count - done)
        inc = scale[None, :, None, None] * rng.standard_normal(
            (c, n_t, s_steps, rs.dim_algebra)
        )
        np.cumsum(inc, axis=1, out=inc)
        inc /= t[None, :, None, None]
        ends = stochastic_endpoints(
            rs, inc.reshape(c * n_t, s_steps, rs.dim_algebra), 1.0
        )
        out[done : done + c] = radial_batch(rs, ends).reshape(c, n_t, rs.rank)
        done += c
    return out


# ---------------------------------------------------------------------------
# gauge action


def _log_near_identity(mats: np.ndarray, order: int = 8) -> np.ndarray:
    """Matrix logarithm by the Mercator series, valid near the identity."""
    m = mats.shape[-1]
    e = mats - np.eye(m)
    if np.max(np.abs(e)) > 0.5:
        raise DomainError(
            "loop grid too coarse: consecutive loop factors are not close"
        )
    power = e.copy()
    out = e.copy()
    for j in range(2, order + 1):
        power = power @ e
        out = out + ((-1.0) ** (j + 1) / j) * power
    # project back to the algebra: anti-Hermitian, traceless
    out = 0.5 * (out - np.conj(np.swapaxes(out, -1, -2)))
    idx = np.arange(m)
    tr = np.trace(out, axis1=-2, axis2=-1) / m
    out[..., idx, idx] -= tr[..., None]
    return out


def gauge_act(
    rs: RootSystem, loopgen: np.ndarray, path: PathSample, lam: float
) -> PathSample:
    """Action of a closed algebra-valued loop on a discretized path.

    loopgen holds algebra coordinates of the loop generator at the path's
    grid nodes, shape (steps+1, dim_algebra), with equal first and last
    rows; the loop itself is its pointwise exponential.  The transformed
    increments are Ad(gamma_mid) dx - lam * log(gamma_{k+1} gamma_k^{-1}),
    which matches the continuous gauge action to first order in the step.
    """
    if lam <= 0.0:
        raise DomainError(f"level must be positive, got {lam}")
    nodes = np.asarray(loopgen, dtype=float)
    if nodes.shape != (path.steps + 1, rs.dim_algebra):
        raise DomainError(
            f"loop grid must have shape ({path.steps + 1}, {rs.dim_algebra}), "
            f"got {nodes.shape}"
        )
    if not np.all(np.isfinite(nodes)):
        raise DomainError("non-finite loop coordinates")
    if np.max(np.abs(nodes[0] - nodes[-1])) > 1e-12:
        raise DomainError("loop endpoints differ: the gauge loop must close")

    gam = _expm_anti_hermitian(algebra_matrix(rs, nodes))
    mid = _expm_anti_hermitian(
        algebra_matrix(rs, 0.5 * (nodes[:-1] + nodes[1:]))
    )
    mid_inv = np.conj(np.swapaxes(mid, -1, -2))
    rot = _log_near_identity(gam[1:] @ np.conj(np.swapaxes(gam[:-1], -1, -2)))
    dx = algebra_matrix(rs, path.increments)
    new_inc = algebra_coords(rs, mid @ dx @ mid_inv - lam * rot)
    return PathSample(
        sigma=path.sigma,
        steps=path.steps,
        increments=new_inc,
        provenance=path.provenance + ("gauge",),
    )
