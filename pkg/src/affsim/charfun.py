"""Weyl characters, compact-group heat kernels, and radial densities.

All lattice sums are truncated by certified Gaussian tail bounds: the
`Truncation` caps are budgets, and every sum first computes the radius its
tolerance actually needs, failing with `PrecisionError` (carrying the bound
achievable at the cap) rather than silently truncating.

Alternating sums over the Weyl group hit removable singularities on root
hyperplanes.  Near a hyperplane (detected by the denominator dropping below
1e-8 of its natural scale) values are recovered by symmetric evaluation at
x +- eps*u for a fixed generic direction u, Richardson-extrapolated over
eps and eps/2, which leaves an O(eps^4) error around 1e-16 of curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConfigError, DomainError, NumericalError
from .numerics import neumaier_sum, radius_for_tail
from .rootsys import (
    RootSystem,
    dominant_labels,
    in_alcove,
    weyl_dimension,
    _weight_ball_arrays,
)

TWO_PI = 2.0 * math.pi
_SING_REL = 1e-8
_REG_EPS = 1e-5


@dataclass(frozen=True)
class Truncation:
    """Budget caps for infinite sums: radii are upper limits, not the radii used."""

    weight_radius: float = 10.0
    lattice_radius: float = 14.0
    tail_tol: float = 1e-10

    def __post_init__(self):
        if not (self.weight_radius > 0 and self.lattice_radius > 0):
            raise ConfigError("truncation radii must be positive")
        if not (0 < self.tail_tol < 1e-6):
            raise ConfigError("tail_tol must lie in (0, 1e-6)")


_DEFAULT_TRUNC = Truncation()


def _as_vector(rs: RootSystem, x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.shape != (rs.rank,):
        raise DomainError(f"expected a length-{rs.rank} vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite coordinates")
    if np.iscomplexobj(arr) and not np.any(arr.imag):
        arr = arr.real
    return arr


def _generic_direction(n: int) -> np.ndarray:
    # fixed direction with irrational coordinate ratios, off every wall
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    u = np.array([phi ** (-k) + 0.05 * k for k in range(1, n + 1)])
    return u / np.linalg.norm(u)


def pi_value(rs: RootSystem, x) -> complex:
    """Product over positive roots of e^{i*pi*alpha(x)} - e^{-i*pi*alpha(x)}."""
    vals = rs.positive_roots @ _as_vector(rs, x)
    return complex(np.prod(np.exp(1j * math.pi * vals) - np.exp(-1j * math.pi * vals)))


def h_value(rs: RootSystem, x) -> complex:
    """Product over positive roots of 2*i*pi*alpha(x) (the pi_value linearization)."""
    vals = rs.positive_roots @ _as_vector(rs, x)
    return complex(np.prod(2j * math.pi * vals))


def alternant(rs: RootSystem, mus: np.ndarray, x) -> np.ndarray:
    """sum_w det(w) e^{2 i pi (w mu, x)} for each row mu, as a (K,) complex array."""
    x = _as_vector(rs, x)
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    out = np.zeros(mus.shape[0], dtype=complex)
    for w, sg in zip(rs.weyl_group, rs.weyl_signs):
        out += sg * np.exp(2j * math.pi * (mus @ (w.T @ x)))
    return out


def _regularized(rs: RootSystem, f, x, *, eps: float = _REG_EPS):
    """Richardson-extrapolated symmetric average of f around a wall point x."""
    u = _generic_direction(rs.rank).astype(complex if np.iscomplexobj(x) else float)
    coarse = 0.5 * (f(x + eps * u) + f(x - eps * u))
    fine = 0.5 * (f(x + 0.5 * eps * u) + f(x - 0.5 * eps * u))
    return (4.0 * fine - coarse) / 3.0


def weyl_character(rs: RootSystem, lam, x) -> complex:
    """Character of the highest-weight-lam irreducible at the group point exp(x).

    lam must be dominant integral.  x = 0 returns the exact dimension.
    """
    labels = dominant_labels(rs, lam)
    x = _as_vector(rs, x)
    dim = float(_dim_from_label_row(rs, labels + 1))
    if not np.iscomplexobj(x) and np.linalg.norm(x) < 1e-14:
        return complex(dim)
    mu = np.asarray(lam, dtype=float) + rs.rho

    def value(xx):
        return complex(alternant(rs, mu, xx)[0] / pi_value(rs, xx))

    if abs(pi_value(rs, x)) >= _SING_REL * 2.0 ** rs.n_positive:
        return value(x)
    return complex(_regularized(rs, value, x))


def _dim_from_label_row(rs: RootSystem, labels) -> int:
    from .rootsys import _dim_from_labels

    return _dim_from_labels(rs, np.asarray(labels))


# ---------------------------------------------------------------------------
# heat kernel


def _heat_terms(rs: RootSystem, a: float, trunc: Truncation):
    """Weight data and damping factors for sum_lam dim * (...) * e^{-a(|mu|^2-|rho|^2)}.

    The tail certificate uses dim(mu) <= D |mu|^{n_pos} and |ch| <= dim, so a
    per-term bound c * r^{2 n_pos} e^{-a r^2} summed over the weight lattice.
    """
    rho2 = float(rs.rho @ rs.rho)
    dim_const = float(
        np.prod(np.linalg.norm(rs.positive_roots, axis=1))
        / np.prod(rs.positive_roots @ rs.rho)
    )
    r_needed = radius_for_tail(
        rs.rank,
        rs.covol_weight,
        rs.cover_weight,
        a=a,
        b=0.0,
        log_c=2.0 * math.log(dim_const) + a * rho2,
        p=2.0 * rs.n_positive,
        tol=trunc.tail_tol,
        r_cap=trunc.weight_radius,
    )
    weights, mu_rho, norms, dims = _weight_ball_arrays(rs, r_needed)
    # reference the shift to the first (trivial-weight) row so its damping
    # factor is exactly one: the constant term carries the total mass
    damp = np.exp(-a * (norms**2 - norms[0] ** 2))
    return weights, mu_rho, dims.astype(float), damp


def heat_kernel(rs: RootSystem, x, s: float, sigma: float, trunc: Truncation | None = None) -> float:
    """Heat-kernel density at exp(x), time s, diffusion rate sigma.

    sum over dominant weights of dim * character * e^{-s*sigma*(2pi)^2*(|lam+rho|^2-|rho|^2)/2},
    normalized so the x-average against Haar measure is 1.
    """
    trunc = trunc or _DEFAULT_TRUNC
    if s <= 0 or sigma <= 0:
        raise DomainError("heat kernel needs s > 0 and sigma > 0")
    x = _as_vector(rs, x)
    if np.iscomplexobj(x):
        raise DomainError("heat kernel is defined at real group points")
    a = s * sigma * TWO_PI**2 / 2.0
    _, mu_rho, dims, damp = _heat_terms(rs, a, trunc)
    coeff = dims * damp

    if np.linalg.norm(x) < 1e-14:
        return float(neumaier_sum(dims * coeff).real)

    def total(xx):
        return complex(neumaier_sum(coeff * alternant(rs, mu_rho, xx)) / pi_value(rs, xx))

    if abs(pi_value(rs, x)) >= _SING_REL * 2.0 ** rs.n_positive:
        val = total(x)
    else:
        val = complex(_regularized(rs, total, x))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericalError(f"heat kernel imaginary residue {val.imag:.3e}")
    return float(val.real)


# ---------------------------------------------------------------------------
# time-1 radial density of the group Brownian motion


def _radial_unnorm_batch(rs: RootSystem, zs: np.ndarray, sigma: float, trunc: Truncation) -> np.ndarray:
    """Unnormalized alcove density: conj(pi(z)) * sum_lam dim A_{lam+rho}(z) damp.

    Division-free reading of (heat kernel) * |pi(z)|^2; exactly real up to
    roundoff, asserted and discarded.
    """
    a = sigma * TWO_PI**2 / 2.0
    _, mu_rho, dims, damp = _heat_terms(rs, a, trunc)
    coeff = dims * damp
    acc = np.zeros(zs.shape[0], dtype=complex)
    for w, sg in zip(rs.weyl_group, rs.weyl_signs):
        phases = np.exp(2j * math.pi * (zs @ (mu_rho @ w.T).T))  # (B, K)
        acc += sg * (phases @ coeff)
    root_vals = zs @ rs.positive_roots.T  # (B, n_pos)
    pi_conj = np.prod(np.exp(-1j * math.pi * root_vals) - np.exp(1j * math.pi * root_vals), axis=1)
    vals = pi_conj * acc
    bad = np.abs(vals.imag) > 1e-10 * np.maximum(1.0, np.abs(vals.real))
    if np.any(bad):
        raise NumericalError("radial density produced a complex value")
    return vals.real


def radial_normalizer(rs: RootSystem, sigma: float, trunc: Truncation | None = None) -> float:
    """Integral over the alcove of the unnormalized radial density.

    Adaptive quadrature in simplex coordinates (alcove vertices are 0 and the
    fundamental weights), relative tolerance 1e-6; cached per (sigma, radius).
    """
    trunc = trunc or _DEFAULT_TRUNC
    key = ("radial_norm", round(float(sigma), 12), trunc)
    with rs._lock:
        hit = rs._cache.get(key)
    if hit is not None:
        return hit

    omega = rs.fundamental_weights

    def integrand(*coords):
        z = np.asarray(coords) @ omega
        return _radial_unnorm_batch(rs, z[None, :], sigma, trunc)[0]

    bounds = []
    for i in range(rs.rank):
        bounds.append(lambda *prior: (0.0, 1.0 - sum(prior)))
    val, _ = integrate.nquad(integrand, bounds, opts={"epsrel": 1e-6, "epsabs": 0.0})
    total = float(val * rs.covol_weight)
    if total <= 0:
        raise NumericalError("radial normalizer is not positive")
    with rs._lock:
        rs._cache[key] = total
    return total


def radial_density(rs: RootSystem, z, sigma: float, trunc: Truncation | None = None):
    """Probability density on the alcove of the folded time-1 group Brownian motion.

    Accepts a single point (n,) or a batch (B, n); points outside the closed
    alcove get density 0.
    """
    trunc = trunc or _DEFAULT_TRUNC
    arr = np.asarray(z, dtype=float)
    single = arr.ndim == 1
    zs = np.atleast_2d(arr)
    if zs.shape[1] != rs.rank:
        raise DomainError(f"expected points of dimension {rs.rank}")
    norm = radial_normalizer(rs, sigma, trunc)
    vals = _radial_unnorm_batch(rs, zs, sigma, trunc) / norm
    inside = np.array([in_alcove(rs, row, 1e-12) for row in zs])
    vals = np.where(inside, np.maximum(vals, 0.0), 0.0)
    return float(vals[0]) if single else vals


# ---------------------------------------------------------------------------
# normalized spherical ratio (compact-picture orbit integral)


def kirillov_ratio(rs: RootSystem, x, lam) -> float:
    """Value of the normalized alternating-sum ratio tending to 1 at x = 0.

    sum_w det(w) e^{(w lam, x)} * prod(rho, alpha) / (prod(x, alpha) * prod(lam, alpha));
    equals the unitary-orbit average of e^{(Ad(k) lam, x)}.  lam must be off
    every root hyperplane.
    """
    x = _as_vector(rs, x)
    lam = _as_vector(rs, lam)
    if np.iscomplexobj(lam):
        raise DomainError("lam must be real")
    dlam = float(np.prod(rs.positive_roots @ lam))
    dnorm = float(np.prod(rs.positive_roots @ rs.rho))
    lam_scale = float(np.prod(np.linalg.norm(rs.positive_roots, axis=1) * np.linalg.norm(lam)))
    if abs(dlam) < 1e-10 * max(lam_scale, 1e-300):
        raise DomainError("lam lies on a root hyperplane; the ratio is undefined there")
    if not np.iscomplexobj(x) and np.linalg.norm(x) < 1e-14:
        return 1.0

    def value(xx):
        dots = rs.weyl_group.transpose(0, 2, 1) @ lam @ xx  # (|W|,)
        num = complex(np.sum(rs.weyl_signs * np.exp(dots)))
        return num * dnorm / (complex(np.prod(rs.positive_roots @ xx)) * dlam)

    dx = float(np.prod(rs.positive_roots @ x.real)) if not np.iscomplexobj(x) else None
    x_scale = float(np.prod(np.linalg.norm(rs.positive_roots, axis=1)) * max(np.linalg.norm(x), 1e-30) ** rs.n_positive)
    if dx is not None and abs(dx) < _SING_REL * x_scale:
        eps = _REG_EPS * max(1.0, float(np.linalg.norm(x)))
        val = _regularized(rs, value, x, eps=eps)
    else:
        val = value(x)
    val = complex(val)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise NumericalError(f"ratio came out complex: {val!r}")
    return float(val.real)
