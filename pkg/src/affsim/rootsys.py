"""Type-A root systems in orthonormal coordinates.

Conventions used across the package:

* Cartan vectors are plain length-n numpy arrays (complex entries allowed
  where an operation says so).  The algebra and its dual share one
  orthonormal basis under the invariant form normalized so the highest
  root has squared length 2, and the usual identification map is the
  identity on coordinates.  Pairings are numpy dot products.
* The realization is built in (n+1)-dimensional trace coordinates: the
  Cartan subalgebra of su(n+1) is the trace-zero hyperplane, orthonormalized
  into R^n by the rows of `trace_basis`.  A Cartan vector x corresponds to
  the diagonal matrix 2*pi*i*diag(trace_basis.T @ x), and the group point
  written exp(x) has eigenvalues exp(2*pi*i*(trace coordinates)).
* The fundamental alcove is A = {x : 0 <= alpha(x) <= 1 for all positive
  roots alpha}; in trace coordinates it is the set of weakly decreasing
  vectors with spread at most 1.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import ConfigError, DomainError, NumericalError, ResourceLimitError

_SUPPORTED_FAMILIES = ("A",)
_MIN_RANK, _MAX_RANK = 1, 4
_LATTICE_POINT_CAP = 2_000_000
_FOLD_ITER_CAP = 10_000
_WALL_TOL = 1e-10


@dataclass(frozen=True)
class AlcovePoint:
    """A point of the fundamental alcove (coords in the orthonormal basis)."""

    coords: np.ndarray

    def __iter__(self):
        return iter(self.coords)


@dataclass(frozen=True, eq=False)
class RootSystem:
    family: str
    rank: int
    simple_roots: np.ndarray  # (n, n) rows
    positive_roots: np.ndarray  # (n_pos, n) rows
    coroots: np.ndarray  # (n_pos, n) rows, aligned with positive_roots
    rho: np.ndarray  # (n,)
    theta: np.ndarray  # (n,) highest root
    dual_coxeter: int
    weyl_group: np.ndarray  # (|W|, n, n) orthogonal matrices
    weyl_signs: np.ndarray  # (|W|,) determinants, +-1
    gram: np.ndarray  # identity (n, n), recorded for audit
    fundamental_weights: np.ndarray  # (n, n) rows, dual to simple coroots
    trace_basis: np.ndarray  # (n, n+1) orthonormal rows spanning trace-zero

    @property
    def n_positive(self) -> int:
        return self.positive_roots.shape[0]

    @property
    def dim_algebra(self) -> int:
        """Real dimension of su(rank+1)."""
        m = self.rank + 1
        return m * m - 1

    @cached_property
    def covol_weight(self) -> float:
        """Covolume of the weight lattice (basis: fundamental weights)."""
        return abs(float(np.linalg.det(self.fundamental_weights)))

    @cached_property
    def covol_coroot(self) -> float:
        """Covolume of the coroot lattice (basis: simple coroots)."""
        return abs(float(np.linalg.det(self.simple_roots)))

    @cached_property
    def cover_weight(self) -> float:
        """Covering-radius bound for the weight lattice: half the basis-norm sum."""
        return 0.5 * float(np.linalg.norm(self.fundamental_weights, axis=1).sum())

    @cached_property
    def cover_coroot(self) -> float:
        return 0.5 * float(np.linalg.norm(self.simple_roots, axis=1).sum())

    @cached_property
    def alcove_radius(self) -> float:
        """max ||x|| over the alcove (attained at a vertex: 0 or a fundamental weight)."""
        return float(np.linalg.norm(self.fundamental_weights, axis=1).max())

    @cached_property
    def _lock(self) -> threading.Lock:
        return threading.Lock()

    @cached_property
    def _cache(self) -> dict:
        """Shared memo for derived tables (weight balls, series terms, constants)."""
        return {}


def build_root_system(family: str, rank: int) -> RootSystem:
    fam = str(family).strip().upper()
    if fam not in _SUPPORTED_FAMILIES:
        raise ConfigError(f"unsupported family {family!r}; supported: {_SUPPORTED_FAMILIES}")
    if not (_MIN_RANK <= int(rank) <= _MAX_RANK):
        raise ConfigError(f"unsupported rank {rank!r}; supported range: {_MIN_RANK}..{_MAX_RANK}")
    n = int(rank)
    m = n + 1

    basis = np.zeros((n, m))
    for k in range(1, m):
        v = np.zeros(m)
        v[:k] = 1.0
        v[k] = -float(k)
        basis[k - 1] = v / math.sqrt(k * (k + 1))

    eye = np.eye(m)
    simple = np.array([basis @ (eye[i] - eye[i + 1]) for i in range(n)])
    positive = np.array([basis @ (eye[i] - eye[j]) for i in range(m) for j in range(i + 1, m)])
    rho = 0.5 * positive.sum(axis=0)
    theta = basis @ (eye[0] - eye[m - 1])

    perms = list(itertools.permutations(range(m)))
    mats = np.empty((len(perms), n, n))
    signs = np.empty(len(perms))
    for idx, perm in enumerate(perms):
        pmat = np.zeros((m, m))
        for col, row in enumerate(perm):
            pmat[row, col] = 1.0
        mats[idx] = basis @ pmat @ basis.T
        signs[idx] = _perm_parity(perm)

    # rows omega_i with (omega_i, alpha_j-check) = delta_ij; coroots = roots here
    omega = np.linalg.solve(simple @ simple.T, simple)
    dual_cox = 1 + int(round(float(rho @ theta)))  # theta-check = theta

    return RootSystem(
        family=fam,
        rank=n,
        simple_roots=simple,
        positive_roots=positive,
        coroots=positive.copy(),
        rho=rho,
        theta=theta,
        dual_coxeter=dual_cox,
        weyl_group=mats,
        weyl_signs=signs,
        gram=np.eye(n),
        fundamental_weights=omega,
        trace_basis=basis,
    )


def _perm_parity(perm: tuple[int, ...]) -> float:
    seen = [False] * len(perm)
    parity = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            parity = -parity
    return float(parity)


# ---------------------------------------------------------------------------
# alcove membership and folding


def alpha_values(rs: RootSystem, x: np.ndarray) -> np.ndarray:
    """Values alpha(x) over positive roots, in stored root order."""
    return rs.positive_roots @ np.asarray(x)


def in_alcove(rs: RootSystem, x: np.ndarray, tol: float = 1e-12) -> bool:
    vals = alpha_values(rs, x)
    return bool(np.all(vals >= -tol) and np.all(vals <= 1.0 + tol))


def wall_distance(rs: RootSystem, x: np.ndarray) -> float:
    """Euclidean distance from x to the nearest alcove wall (negative outside)."""
    vals = rs.simple_roots @ np.asarray(x)
    margins = np.concatenate([vals, [1.0 - float(rs.theta @ x)]])
    return float(margins.min()) / math.sqrt(2.0)


def wall_distance_batch(rs: RootSystem, xs: np.ndarray) -> np.ndarray:
    """Row-wise wall_distance for points of shape (N, rank)."""
    xs = np.asarray(xs, dtype=float)
    vals = xs @ rs.simple_roots.T
    theta_margin = 1.0 - xs @ rs.theta
    return np.minimum(vals.min(axis=1), theta_margin) / math.sqrt(2.0)


def fold_batch(rs: RootSystem, xs: np.ndarray) -> np.ndarray:
    """Fold rows of xs into the alcove under reflections and coroot shifts.

    Type-A normal form in trace coordinates: reduce entries mod 1, restore
    the zero-sum by subtracting 1 from the m largest fractional parts
    (m = the integer the fractional parts sum to), and sort decreasingly.
    The net effect is a permutation plus a zero-sum integer translation,
    i.e. an element of the group generated by the simple reflections and
    coroot translations, and the output spread is at most 1 by construction.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    # rows already in the closed alcove (within the documented 1e-12 slack,
    # which covers every output of this function) are fixed points
    # bit-for-bit; the normal form below could jitter their ties by one ulp
    vals = xs @ rs.positive_roots.T
    settled = np.all((vals >= -1e-12) & (vals <= 1.0 + 1e-12), axis=1)
    if np.all(settled):
        return np.array(xs)
    y = xs @ rs.trace_basis  # (N, n+1) trace coordinates
    f = y - np.floor(y)
    sums = f.sum(axis=1)
    m = np.rint(sums).astype(int)
    # spread the (tiny) float residue evenly so each row sums to its integer
    f -= ((sums - m) / f.shape[1])[:, None]
    srt = -np.sort(-f, axis=1)  # descending
    n1 = f.shape[1]
    cols = np.arange(n1)
    gather = (cols[None, :] + m[:, None]) % n1
    folded = np.take_along_axis(srt, gather, axis=1)
    folded -= cols[None, :] >= (n1 - m[:, None])
    out = folded @ rs.trace_basis.T
    out[settled] = xs[settled]
    return out


def fold_to_alcove(rs: RootSystem, x: np.ndarray) -> tuple[AlcovePoint, bool]:
    """Unique alcove representative of x and an interiority flag.

    The flag is False exactly when some positive root takes a value within
    1e-10 of 0 or 1 at the result.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (rs.rank,):
        raise DomainError(f"expected shape ({rs.rank},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite input to fold_to_alcove")
    out = fold_batch(rs, x[None, :])[0]
    vals = alpha_values(rs, out)
    if vals.min() < -1e-12 or vals.max() > 1.0 + 1e-12:
        raise NumericalError(f"fold landed outside the alcove: margins {vals}")
    interior = bool(np.all(vals > _WALL_TOL) and np.all(vals < 1.0 - _WALL_TOL))
    return AlcovePoint(out), interior


def fold_by_reflections(rs: RootSystem, x: np.ndarray, cap: int = _FOLD_ITER_CAP) -> np.ndarray:
    """Folding by repeated wall reflections (slow general fallback).

    Kept as an independent implementation of the same orbit map; the unit
    tests cross-check it against the normal form.
    """
    z = np.asarray(x, dtype=float).copy()
    for _ in range(cap):
        vals = rs.simple_roots @ z
        i = int(np.argmin(vals))
        if vals[i] < 0.0:
            z = z - vals[i] * rs.simple_roots[i]
            continue
        tv = float(rs.theta @ z)
        if tv > 1.0:
            z = z - (tv - 1.0) * rs.theta
            continue
        return z
    raise NumericalError("reflection fold exceeded iteration cap")


# ---------------------------------------------------------------------------
# lattice enumeration


def coroot_lattice_ball(rs: RootSystem, radius: float) -> list[np.ndarray]:
    """All coroot-lattice points with norm <= radius, sorted by (norm, coords)."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    # coefficient of gamma on simple coroot i is (gamma, omega_i)
    bounds = np.floor(radius * np.linalg.norm(rs.fundamental_weights, axis=1) + 1e-9).astype(int)
    _check_box(bounds * 2 + 1)
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    coeffs = np.stack([g.ravel() for g in grids], axis=1)
    pts = coeffs @ rs.simple_roots
    norms = np.linalg.norm(pts, axis=1)
    keep = norms <= radius + 1e-12
    pts, norms = pts[keep], norms[keep]
    order = np.lexsort(tuple(pts[:, k] for k in range(rs.rank - 1, -1, -1)) + (norms,))
    return [pts[i] for i in order]


def weight_lattice_ball(rs: RootSystem, radius: float) -> np.ndarray:
    """All weight-lattice points with norm <= radius, as rows sorted by (norm, coords)."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    # coefficient of mu on omega_i is <mu, alpha_i-check>, bounded by radius*||alpha_i||
    bounds = np.floor(radius * np.linalg.norm(rs.simple_roots, axis=1) + 1e-9).astype(int)
    _check_box(bounds * 2 + 1)
    grids = np.meshgrid(*[np.arange(-b, b + 1) for b in bounds], indexing="ij")
    coeffs = np.stack([g.ravel() for g in grids], axis=1)
    pts = coeffs @ rs.fundamental_weights
    norms = np.linalg.norm(pts, axis=1)
    keep = norms <= radius + 1e-12
    pts, norms = pts[keep], norms[keep]
    order = np.lexsort(tuple(pts[:, k] for k in range(rs.rank - 1, -1, -1)) + (norms,))
    return pts[order]


def dominant_weights_ball(rs: RootSystem, radius: float) -> list[np.ndarray]:
    """Dominant weights lam with ||lam + rho|| <= radius, ascending in that norm."""
    if radius < 0:
        raise DomainError("radius must be nonnegative")
    arr, _, _, _ = _weight_ball_arrays(rs, radius)
    return [arr[i] for i in range(arr.shape[0])]


def _check_box(sides: np.ndarray) -> None:
    total = int(np.prod(sides.astype(np.int64)))
    if total > _LATTICE_POINT_CAP:
        raise ResourceLimitError(
            f"lattice enumeration box of {total} points exceeds cap {_LATTICE_POINT_CAP}"
        )


def _weight_ball_arrays(
    rs: RootSystem, radius: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(weights, weights+rho, ||weights+rho||, exact dims), cached per radius."""
    key = ("weight_ball", round(float(radius), 9))
    with rs._lock:
        hit = rs._cache.get(key)
    if hit is not None:
        return hit
    # labels k_i = <lam+rho, alpha_i-check> >= 1; k_i <= radius*||alpha_i||
    kmax = int(math.floor(radius * math.sqrt(2.0) + 1e-9))
    if kmax < 1:
        empty = np.zeros((0, rs.rank))
        result = (empty, empty, np.zeros(0), np.zeros(0, dtype=np.int64))
    else:
        _check_box(np.full(rs.rank, kmax))
        grids = np.meshgrid(*[np.arange(1, kmax + 1)] * rs.rank, indexing="ij")
        labels = np.stack([g.ravel() for g in grids], axis=1)
        mu_rho = labels @ rs.fundamental_weights
        norms = np.linalg.norm(mu_rho, axis=1)
        keep = norms <= radius + 1e-12
        labels, mu_rho, norms = labels[keep], mu_rho[keep], norms[keep]
        order = np.lexsort(tuple(labels[:, k] for k in range(rs.rank - 1, -1, -1)) + (norms,))
        labels, mu_rho, norms = labels[order], mu_rho[order], norms[order]
        weights = (labels - 1) @ rs.fundamental_weights
        dims = np.array([_dim_from_labels(rs, row) for row in labels], dtype=np.int64)
        result = (weights, mu_rho, norms, dims)
    with rs._lock:
        rs._cache[key] = result
    return result


# ---------------------------------------------------------------------------
# exact dimensions and dominance


def _coroot_coeff_table(rs: RootSystem) -> np.ndarray:
    """Integer coefficients of each positive coroot on the simple coroots."""
    key = "coroot_coeffs"
    with rs._lock:
        hit = rs._cache.get(key)
    if hit is not None:
        return hit
    raw = np.linalg.solve(rs.simple_roots.T, rs.coroots.T).T
    table = np.rint(raw).astype(np.int64)
    if not np.allclose(raw, table, atol=1e-9):
        raise NumericalError("coroot coefficients are not integral")
    with rs._lock:
        rs._cache[key] = table
    return table


def _dim_from_labels(rs: RootSystem, labels: np.ndarray) -> int:
    """Exact Weyl dimension from the labels k_i = <lam+rho, alpha_i-check>."""
    table = _coroot_coeff_table(rs)
    num = table @ np.asarray(labels, dtype=np.int64)
    den = table.sum(axis=1)  # pairings of rho: all labels 1
    val = Fraction(1)
    for a, b in zip(num.tolist(), den.tolist()):
        val *= Fraction(int(a), int(b))
    if val.denominator != 1:
        raise NumericalError("dimension did not reduce to an integer")
    return int(val)


def dominant_labels(rs: RootSystem, lam: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Integer labels <lam, alpha_i-check> of a dominant weight, validated."""
    lam = np.asarray(lam, dtype=float)
    raw = rs.simple_roots @ lam
    labels = np.rint(raw)
    if np.any(np.abs(raw - labels) > tol) or np.any(labels < -tol):
        raise DomainError(f"not a dominant weight: simple pairings {raw}")
    return labels.astype(np.int64)


def weyl_dimension(rs: RootSystem, lam: np.ndarray) -> int:
    """Exact dimension of the irreducible with highest weight lam."""
    return _dim_from_labels(rs, dominant_labels(rs, lam) + 1)
