"""Small numerical utilities: compensated summation and lattice tail bounds."""

from __future__ import annotations

import math

import numpy as np

from .errors import PrecisionError


def neumaier_sum(values: np.ndarray) -> complex:
    """Compensated (Neumaier) summation in the given order.

    Used where an operation promises order-stable, compensated accumulation;
    the order of `values` is the caller's contract.
    """
    values = np.asarray(values)
    if values.dtype.kind == "c":
        return complex(
            neumaier_sum(values.real),  # type: ignore[arg-type]
            neumaier_sum(values.imag),  # type: ignore[arg-type]
        )
    s = 0.0
    comp = 0.0
    for v in values:
        v = float(v)
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
    return s + comp


def gaussian_shell_tail(
    dim: int,
    covol: float,
    cover_radius: float,
    r_min: float,
    a: float,
    b: float = 0.0,
    log_c: float = 0.0,
    p: float = 0.0,
) -> float:
    """Upper bound on sum of e^{log_c} * r^p * exp(-a r^2 + b r) over
    lattice-coset points with norm r >= r_min.  Requires a > 0.

    The profile constant is passed as a log so certificates stay usable when
    the natural constant (e.g. exp(a*|rho|^2) factors) overflows a float.

    Counting: points of a lattice coset with norm in [k, k+1) have disjoint
    Voronoi cells contained in the annulus [k - mu, k + 1 + mu] with
    mu = cover_radius, so their number is at most
        V_dim * ((k + 1 + mu)^dim - max(0, k - mu)^dim) / covol.
    Each point's value is bounded by the unimodal shell profile
        f(r) = c r^p exp(-a r^2 + b r)
    evaluated at the in-shell point closest to its maximizer r*.  Once past
    r* (and past the small-k count irregularity) the shell bounds decrease;
    when one step decays by at least 1/2 the remainder is at most the last
    term (geometric closure), which keeps the bound finite and auditable.
    """
    if a <= 0:
        raise ValueError("need a > 0 for a Gaussian tail")
    vball = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    mu = cover_radius
    r_star = (b + math.sqrt(b * b + 4.0 * a * p)) / (2.0 * a) if (b > 0 or p > 0) else 0.0

    def f_log(r: float) -> float:
        r = max(r, 1e-300)
        return log_c + p * math.log(r) - a * r * r + b * r

    total = 0.0
    prev: float | None = None
    k = max(0, math.floor(r_min))
    for _ in range(100_000):
        lo = max(float(k), r_min)
        hi = float(k + 1)
        count = vball * ((hi + mu) ** dim - max(0.0, lo - mu) ** dim) / covol
        term_log = f_log(min(max(r_star, lo), hi)) + math.log(max(count, 1e-300))
        term = math.inf if term_log > 700.0 else math.exp(term_log)
        total += term
        if term == 0.0:
            return total
        if prev is not None and k > r_star + mu + 1 and term <= 0.5 * prev:
            return total + term
        prev = term
        k += 1
    raise PrecisionError("shell tail bound did not converge", achievable=total)


def radius_for_tail(
    dim: int,
    covol: float,
    cover_radius: float,
    a: float,
    b: float,
    log_c: float,
    p: float,
    tol: float,
    r_cap: float,
) -> float:
    """Smallest shell radius <= r_cap whose certified tail is below tol.

    Raises PrecisionError carrying the achievable bound when even r_cap
    cannot certify tol.
    """
    at_cap = gaussian_shell_tail(dim, covol, cover_radius, r_cap, a, b, log_c, p)
    if at_cap > tol:
        raise PrecisionError(
            f"certified tail {at_cap:.3e} above target {tol:.3e} at radius cap {r_cap:g}",
            achievable=at_cap,
        )
    lo, hi = 0.0, r_cap
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if gaussian_shell_tail(dim, covol, cover_radius, mid, a, b, log_c, p) <= tol:
            hi = mid
        else:
            lo = mid
    return hi
