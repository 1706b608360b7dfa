"""The affine theta series in its two representations, and the space-time
harmonic function driving the conditioned process.

Two expressions are implemented for the same object phi(b*level + y)(a, x):

* `phi_hat_lattice` — an absolutely convergent sum over the coroot lattice
  and the Weyl group, divided by pi(-y/b).  Valid whenever that denominator
  is nonzero.
* `phi_hat_charsum` — a heat-type sum over dominant weights, valid for every
  y, known only up to one positive constant per root system.  This form
  carries a systematic factor i^{n_pos} at real arguments (each alternating
  factor is i times a real number); the function divides that factor out so
  real arguments give real values and the y = 0 value is positive on the
  interior.  The leftover constant is fixed by `calibration_constant`, and
  every quantity consumed downstream is a ratio in which it cancels.

Truncation radii are computed from certified Gaussian tail bounds
(`numerics.radius_for_tail`); the radii stored in `Truncation` are caps.
Exponential sums factor out their extreme exponent before summing, so the
small-time regime (exponents of order 1/t) stays in range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .charfun import TWO_PI, Truncation, _DEFAULT_TRUNC, alternant, pi_value, weyl_character
from .errors import (
    BoundaryError,
    DomainError,
    NumericalError,
    PrecisionError,
    SingularInputError,
)
from .numerics import neumaier_sum, radius_for_tail
from .rootsys import (
    RootSystem,
    coroot_lattice_ball,
    wall_distance,
    weight_lattice_ball,
    _weight_ball_arrays,
)

_SING_REL = 1e-10


@dataclass(frozen=True)
class PhiArgs:
    """Arguments of phi(b*level + y)(a, x): two positive scale slots, a
    (possibly complex) left vector y, and a real right vector x."""

    b: float
    y: np.ndarray
    a: float
    x: np.ndarray

    def __post_init__(self):
        if not (self.b > 0 and self.a > 0):
            raise DomainError("both scale slots of PhiArgs must be positive")
        y = np.asarray(self.y)
        x = np.asarray(self.x, dtype=float)
        if np.iscomplexobj(y) and not np.any(y.imag):
            y = y.real.astype(float)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if x.ndim != 1 or y.shape != x.shape:
            raise DomainError("x and y must be vectors of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("non-finite PhiArgs")


def _pi_scale(rs: RootSystem, v: np.ndarray) -> float:
    """Magnitude scale of pi(v): product of per-factor maxima 2*cosh(pi*Im alpha(v))."""
    im = rs.positive_roots @ (v.imag if np.iscomplexobj(v) else np.zeros_like(v))
    return float(np.prod(2.0 * np.cosh(math.pi * im)))


def phi_hat_lattice(rs: RootSystem, args: PhiArgs, trunc: Truncation | None = None) -> complex:
    """Coroot-lattice representation of the affine theta series.

    (1/pi(-y/b)) * sum over gamma in the coroot lattice and w in W of
    det(w) e^{(w(x + a*gamma), y)} e^{-b((x,gamma) + (gamma,gamma) a/2)}.
    """
    trunc = trunc or _DEFAULT_TRUNC
    if args.x.shape != (rs.rank,):
        raise DomainError(f"PhiArgs dimension {args.x.shape} does not match rank {rs.rank}")
    y, x, a, b = args.y, args.x, args.a, args.b
    yb = y / b
    den = pi_value(rs, -yb)
    if abs(den) <= _SING_REL * _pi_scale(rs, yb):
        raise SingularInputError(
            "pi(-y/b) is numerically zero; evaluate via phi_hat_charsum instead"
        )
    rey = np.asarray(y.real if np.iscomplexobj(y) else y, dtype=float)
    # |gamma-term| <= |W| e^{|x||Re y|} e^{(a|Re y| + b|x|)|gamma|} e^{-(ab/2)|gamma|^2}
    nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(rey))
    a_cert = a * b / 2.0
    b_cert = a * ny + b * nx
    log_c = math.log(len(rs.weyl_signs)) + nx * ny

    def evaluate(radius: float):
        pts = np.array(coroot_lattice_ball(rs, radius))  # (G, n), ascending norm
        damp_log = -b * (pts @ x + 0.5 * a * np.einsum("ij,ij->i", pts, pts))
        shifts = x[None, :] + a * pts  # (G, n)
        dtype = complex if np.iscomplexobj(y) else float
        exps = np.empty((len(rs.weyl_signs), pts.shape[0]), dtype=dtype)
        for i, w in enumerate(rs.weyl_group):
            exps[i] = shifts @ (w.T @ y) + damp_log
        shift_max = float(np.max(exps.real))
        total = 0.0 + 0.0j
        for i, sg in enumerate(rs.weyl_signs):
            total += sg * neumaier_sum(np.exp(exps[i] - shift_max))
        return total, shift_max

    # The cancellation across w makes the sum much smaller than its terms, so
    # the guaranteed absolute tail (<= tail_tol, spec contract) is refined
    # best-effort toward tail_tol relative to the observed magnitude; the
    # refinement stops quietly at the radius cap since the absolute guarantee
    # already holds there (a couple of rounds suffice, the tail is Gaussian).
    target = trunc.tail_tol
    radius = radius_for_tail(
        rs.rank, rs.covol_coroot, rs.cover_coroot,
        a=a_cert, b=b_cert, log_c=log_c, p=0.0, tol=target, r_cap=trunc.lattice_radius,
    )
    total, shift_max = evaluate(radius)
    for _ in range(4):
        observed = abs(total) * math.exp(shift_max)
        new_target = trunc.tail_tol * max(observed, 1e-280)
        if new_target >= target:
            break
        target = new_target
        try:
            new_radius = radius_for_tail(
                rs.rank, rs.covol_coroot, rs.cover_coroot,
                a=a_cert, b=b_cert, log_c=log_c, p=0.0, tol=target, r_cap=trunc.lattice_radius,
            )
        except PrecisionError:
            new_radius = trunc.lattice_radius
        if new_radius <= radius:
            break
        radius = new_radius
        total, shift_max = evaluate(radius)
    return complex(math.exp(shift_max) * total / den)


# ---------------------------------------------------------------------------
# heat-type (character sum) representation


def _charsum_radius(rs: RootSystem, a_damp: float, b_cert: float, log_c: float, p: float, trunc: Truncation) -> float:
    return radius_for_tail(
        rs.rank,
        rs.covol_weight,
        rs.cover_weight,
        a=a_damp,
        b=b_cert,
        log_c=log_c,
        p=p,
        tol=trunc.tail_tol,
        r_cap=trunc.weight_radius,
    )


def _realify(rs: RootSystem, values: np.ndarray | complex):
    """Divide out the systematic i^{n_pos} of alternating sums at real arguments."""
    return np.asarray(values) * (-1j) ** rs.n_positive


def phi_hat_charsum(
    rs: RootSystem, sigma: float, x, y, trunc: Truncation | None = None
) -> complex:
    """phi((level) + y)(1/sigma, x/sigma) up to one positive constant.

    e^{((y,y)+(x,x))/(2 sigma)} (2 pi sigma)^{n/2} * sum over dominant mu of
    pi(x) ch_mu(e^x) ch_mu(e^{-y}) e^{-sigma (2pi)^2 |mu+rho|^2 / 2},
    with the systematic unimodular factor of the alternating sums removed
    (see module docstring).  Defined for every y, including singular ones.
    """
    trunc = trunc or _DEFAULT_TRUNC
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if np.iscomplexobj(y) and not np.any(y.imag):
        y = y.real.astype(float)
    if x.shape != (rs.rank,) or y.shape != (rs.rank,):
        raise DomainError(f"expected length-{rs.rank} vectors")

    a_damp = sigma * TWO_PI**2 / 2.0
    rho2 = float(rs.rho @ rs.rho)
    imy = np.linalg.norm(y.imag) if np.iscomplexobj(y) else 0.0
    nW = len(rs.weyl_signs)
    den_y = pi_value(rs, -y)
    singular_y = abs(den_y) <= 1e-8 * _pi_scale(rs, y)
    dim_const = float(
        np.prod(np.linalg.norm(rs.positive_roots, axis=1)) / np.prod(rs.positive_roots @ rs.rho)
    )
    if singular_y:
        log_c = math.log(nW * dim_const) + a_damp * rho2
        p = float(rs.n_positive)
    else:
        log_c = 2.0 * math.log(nW) + a_damp * rho2 - math.log(abs(den_y))
        p = 0.0
    radius = _charsum_radius(rs, a_damp, TWO_PI * imy, log_c, p, trunc)
    _, mu_rho, norms, dims = _weight_ball_arrays(rs, radius)
    lams = mu_rho - rs.rho
    damp = np.exp(-a_damp * (norms**2 - rho2))

    ax = alternant(rs, mu_rho, x)  # pi(x) ch_mu(e^x)
    if singular_y:
        chy = np.array([weyl_character(rs, lam, -y) for lam in lams])
    else:
        chy = alternant(rs, mu_rho, -y) / den_y
    sum_rel = complex(neumaier_sum(_realify(rs, ax) * chy * damp))

    log_pref = (
        0.5 * rs.rank * math.log(TWO_PI * sigma)
        + (complex(np.dot(y, y)) + float(x @ x)) / (2.0 * sigma)
        - a_damp * rho2
    )
    val = np.exp(log_pref) * sum_rel
    if not np.iscomplexobj(y) and abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise NumericalError(f"real-argument value came out complex: {val!r}")
    return complex(val)


def calibration_constant(rs: RootSystem, trunc: Truncation | None = None) -> complex:
    """Ratio lattice/charsum at one fixed regular point (cached per root system).

    Multiplying `phi_hat_charsum` by this constant reproduces
    `phi_hat_lattice` wherever both converge; downstream formulas only ever
    use ratios, so the constant matters to cross-checks alone.
    """
    trunc = trunc or _DEFAULT_TRUNC
    key = ("phi_calibration", trunc)
    with rs._lock:
        hit = rs._cache.get(key)
    if hit is not None:
        return hit
    # a point where every root pairing is O(1) and sigma small enough that the
    # leading damping e^{-sigma(2pi)^2|rho|^2/2} stays ~1e-2: both forms are
    # then far from their cancellation floors and the ratio carries ~12 digits
    x = 0.29 * rs.rho + 0.07 * rs.fundamental_weights[0]
    y = 0.83 * rs.rho + 0.11 * rs.fundamental_weights[rs.rank - 1]
    # the floor keeps the certified weight-ball radius inside the default cap
    # at rank 4, where 0.25/|rho|^2 would demand a very large ball
    sigma = max(0.25 / float(rs.rho @ rs.rho), 0.045)
    lat = phi_hat_lattice(rs, PhiArgs(b=1.0, y=y, a=1.0 / sigma, x=x / sigma), trunc)
    cs = phi_hat_charsum(rs, sigma, x, y, trunc)
    const = complex(lat / cs)
    if not (1e-3 < abs(const) < 1e3):
        raise NumericalError(f"implausible calibration constant {const!r}")
    with rs._lock:
        rs._cache[key] = const
    return const


# ---------------------------------------------------------------------------
# Poisson pair


def theta_pair(rs: RootSystem, x, t: float, trunc: Truncation | None = None) -> tuple[float, float]:
    """The two sides of the weight-lattice/coroot-lattice Poisson pair.

    lhs = sum over the weight lattice of e^{2 i pi mu(x) - (t/2)(2pi)^2 (mu,mu)};
    rhs = (1/(2 pi t))^{n/2} sum over the coroot lattice of e^{-(x+z,x+z)/(2t)}.
    Their ratio is a lattice constant, independent of x and t.
    """
    trunc = trunc or _DEFAULT_TRUNC
    if t <= 0:
        raise DomainError("t must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape != (rs.rank,):
        raise DomainError(f"expected a length-{rs.rank} vector")

    a_lhs = t * TWO_PI**2 / 2.0
    r1 = radius_for_tail(
        rs.rank, rs.covol_weight, rs.cover_weight,
        a=a_lhs, b=0.0, log_c=0.0, p=0.0, tol=trunc.tail_tol, r_cap=trunc.weight_radius,
    )
    mus = weight_lattice_ball(rs, r1)
    lhs_c = neumaier_sum(
        np.exp(2j * math.pi * (mus @ x) - a_lhs * np.einsum("ij,ij->i", mus, mus))
    )
    if abs(lhs_c.imag) > 1e-10 * max(1.0, abs(lhs_c.real)):
        raise NumericalError("weight-side theta sum has an imaginary residue")

    nx = float(np.linalg.norm(x))
    pref = (1.0 / (TWO_PI * t)) ** (rs.rank / 2.0)
    r2 = radius_for_tail(
        rs.rank, rs.covol_coroot, rs.cover_coroot,
        a=0.5 / t, b=nx / t, log_c=-nx * nx / (2.0 * t), p=0.0,
        tol=trunc.tail_tol / pref, r_cap=trunc.lattice_radius,
    )
    zs = np.array(coroot_lattice_ball(rs, r2))
    diffs = x[None, :] + zs
    rhs = pref * float(neumaier_sum(np.exp(-0.5 * np.einsum("ij,ij->i", diffs, diffs) / t)))
    return float(lhs_c.real), rhs


# ---------------------------------------------------------------------------
# the positive space-time function and its log-gradient


def _stilde_batch(
    rs: RootSystem,
    taus: np.ndarray,
    zs: np.ndarray,
    trunc: Truncation,
    want_grad: bool,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Rescaled positive core of the level slot at unit scale.

    Returns S(tau, z) = (+-) sum over dominant mu of
        dim(mu) * [i^{-n_pos} A_{mu+rho}(z)] * e^{-(2pi)^2(|mu+rho|^2-|rho|^2)/(2 tau)}
    per row, plus optionally its z-gradient.  The leading e^{-(2pi)^2|rho|^2/(2 tau)}
    is factored out so small tau stays representable; callers work with logs.
    """
    taus = np.asarray(taus, dtype=float)
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    tau_min = float(taus.min())
    if tau_min <= 0:
        raise DomainError("time slot must be positive")
    rho2 = float(rs.rho @ rs.rho)
    a_min = TWO_PI**2 / (2.0 * taus.max())  # weakest damping decides the radius
    dim_const = float(
        np.prod(np.linalg.norm(rs.positive_roots, axis=1)) / np.prod(rs.positive_roots @ rs.rho)
    )
    radius = _charsum_radius(
        rs,
        a_min,
        0.0,
        math.log(len(rs.weyl_signs) * dim_const) + a_min * rho2,
        float(rs.n_positive),
        trunc,
    )
    _, mu_rho, norms, dims = _weight_ball_arrays(rs, radius)
    damp = np.exp(-(TWO_PI**2) * (norms[None, :] ** 2 - rho2) / (2.0 * taus[:, None]))  # (B,K)

    vals = np.zeros(zs.shape[0], dtype=complex)
    grads = np.zeros(zs.shape, dtype=complex) if want_grad else None
    for w, sg in zip(rs.weyl_group, rs.weyl_signs):
        wmu = mu_rho @ w.T  # rows w(mu+rho)
        phases = np.exp(2j * math.pi * (zs @ wmu.T))  # (B,K)
        weighted = phases * damp * dims[None, :]
        vals += sg * weighted.sum(axis=1)
        if want_grad:
            grads += sg * (weighted @ (2j * math.pi * wmu))
    vals = _realify(rs, vals)
    bad = np.abs(vals.imag) > 1e-9 * np.maximum(1.0, np.abs(vals.real))
    if np.any(bad):
        raise NumericalError("positive core has an imaginary residue")
    if want_grad:
        grads = _realify(rs, grads)
        return vals.real, grads.real
    return vals.real, None


def positive_core_batch(rs: RootSystem, taus, zs, trunc: Truncation | None = None) -> np.ndarray:
    """Values of the positive core S(tau_i, z_i); positive iff z_i is interior."""
    trunc = trunc or _DEFAULT_TRUNC
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    vals, _ = _stilde_batch(rs, taus, zs, trunc, want_grad=False)
    return vals


def core_upper_bound(rs: RootSystem, tau: float, trunc: Truncation | None = None) -> float:
    """Certified bound on |S(tau, z)| over real z: |W| * sum dim * damp + tail."""
    trunc = trunc or _DEFAULT_TRUNC
    if tau <= 0:
        raise DomainError("time slot must be positive")
    a_damp = TWO_PI**2 / (2.0 * tau)
    rho2 = float(rs.rho @ rs.rho)
    dim_const = float(
        np.prod(np.linalg.norm(rs.positive_roots, axis=1)) / np.prod(rs.positive_roots @ rs.rho)
    )
    nW = len(rs.weyl_signs)
    radius = _charsum_radius(
        rs, a_damp, 0.0, math.log(nW * dim_const) + a_damp * rho2, float(rs.n_positive), trunc
    )
    _, _, norms, dims = _weight_ball_arrays(rs, radius)
    total = nW * float(np.sum(dims * np.exp(-a_damp * (norms**2 - rho2))))
    return total + trunc.tail_tol


def log_phi_d_batch(rs: RootSystem, taus, bs, trunc: Truncation | None = None) -> np.ndarray:
    """log of the positive y=0 series at space-time points (tau_i, b_i), up to
    one additive constant per root system (the calibration constant's log).

    log phi = (n/2) log(2 pi / tau) + |b|^2/(2 tau) - (2pi)^2 |rho|^2/(2 tau) + log S.
    Requires every b_i/tau_i strictly inside the alcove (where S > 0).
    """
    trunc = trunc or _DEFAULT_TRUNC
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    bs = np.atleast_2d(np.asarray(bs, dtype=float))
    vals, _ = _stilde_batch(rs, taus, bs / taus[:, None], trunc, want_grad=False)
    if np.any(vals <= 0.0):
        raise BoundaryError("nonpositive core value; point is outside the open cone")
    rho2 = float(rs.rho @ rs.rho)
    return (
        0.5 * rs.rank * np.log(TWO_PI / taus)
        + 0.5 * np.einsum("ij,ij->i", bs, bs) / taus
        - TWO_PI**2 * rho2 / (2.0 * taus)
        + np.log(vals)
    )


def log_phi_d(rs: RootSystem, tau: float, b, trunc: Truncation | None = None) -> float:
    return float(log_phi_d_batch(rs, [tau], np.asarray(b, dtype=float)[None, :], trunc)[0])


def grad_log_phi_d_batch(rs: RootSystem, taus, bs, trunc: Truncation | None = None) -> np.ndarray:
    """Space-slot gradient of log phi at rows (tau_i, b_i): b/tau + (grad S / S)/tau."""
    trunc = trunc or _DEFAULT_TRUNC
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    bs = np.atleast_2d(np.asarray(bs, dtype=float))
    zs = bs / taus[:, None]
    vals, grads = _stilde_batch(rs, taus, zs, trunc, want_grad=True)
    if np.any(vals <= 0.0):
        raise BoundaryError("nonpositive core value; point is outside the open cone")
    return bs / taus[:, None] + grads / (vals[:, None] * taus[:, None])


def grad_log_phi_d(rs: RootSystem, t: float, x, trunc: Truncation | None = None) -> np.ndarray:
    """Gradient of log phi(level slot t + ., space slot .) at (t, x).

    Requires x/t to sit strictly inside the alcove, wall distance > 1e-8.
    """
    x = np.asarray(x, dtype=float)
    if t <= 0:
        raise DomainError("t must be positive")
    if wall_distance(rs, x / t) <= 1e-8:
        raise BoundaryError("point is within 1e-8 of an alcove wall; shrink the step")
    return grad_log_phi_d_batch(rs, [t], x[None, :], trunc)[0]


def phi_lattice_term(rs: RootSystem, w_index: int, gamma, y, tau: float, b) -> complex:
    """One (w, gamma) summand of the lattice form at unit level:
    det(w) e^{(w(b + tau*gamma), y)} e^{-(b,gamma) - (gamma,gamma) tau/2}.

    Exposed so the space-time harmonicity of individual summands can be
    probed directly (each one satisfies (d/dtau + Laplacian/2) f = 0 after
    the e^{-(y,y) tau/2} tilt).
    """
    gamma = np.asarray(gamma, dtype=float)
    b = np.asarray(b, dtype=float)
    y = np.asarray(y)
    w = rs.weyl_group[w_index]
    sg = rs.weyl_signs[w_index]
    expo = (w @ (b + tau * gamma)) @ y - float(b @ gamma) - 0.5 * float(gamma @ gamma) * tau
    return complex(sg * np.exp(expo))


# ---------------------------------------------------------------------------
# ratios of tilted to untilted series (endpoint functionals)


def phi_ratio(rs: RootSystem, tau: float, b, y, trunc: Truncation | None = None) -> complex:
    """phi(level + y)(tau, b) / phi(level)(tau, b), with the constant cancelled.

    Equals e^{tau (y,y)/2} * sum(A(z) ch_mu(e^{-y}) damp) / sum(A(z) dim damp)
    at z = b/tau; finite for every y, positive denominator for interior z.
    """
    trunc = trunc or _DEFAULT_TRUNC
    return complex(phi_ratio_batch(rs, tau, np.asarray(b, dtype=float)[None, :], y, trunc)[0])


def _tilted_core(rs: RootSystem, tau: float, zs: np.ndarray, y, trunc: Truncation) -> np.ndarray:
    """Realified sum over dominant mu of A_{mu+rho}(z) ch_mu(e^{-y}) damp(tau).

    The y = 0 specialization of this sum is the positive core; general y
    replaces the dimension by the character value.  Defined for every real
    z, no interiority requirement.
    """
    a_damp = TWO_PI**2 / (2.0 * tau)
    rho2 = float(rs.rho @ rs.rho)
    imy = np.linalg.norm(y.imag) if np.iscomplexobj(y) else 0.0
    nW = len(rs.weyl_signs)
    den_y = pi_value(rs, -y)
    singular_y = abs(den_y) <= 1e-8 * _pi_scale(rs, y)
    dim_const = float(
        np.prod(np.linalg.norm(rs.positive_roots, axis=1)) / np.prod(rs.positive_roots @ rs.rho)
    )
    if singular_y:
        log_c = math.log(nW * dim_const) + a_damp * rho2
        p = float(rs.n_positive)
    else:
        log_c = 2.0 * math.log(nW) + a_damp * rho2 - math.log(abs(den_y))
        p = 0.0
    radius = _charsum_radius(rs, a_damp, TWO_PI * imy, log_c, p, trunc)
    _, mu_rho, norms, dims = _weight_ball_arrays(rs, radius)
    lams = mu_rho - rs.rho
    damp = np.exp(-a_damp * (norms**2 - rho2))
    if singular_y:
        chy = np.array([weyl_character(rs, lam, -y) for lam in lams])
    else:
        chy = alternant(rs, mu_rho, -y) / den_y

    num = np.zeros(zs.shape[0], dtype=complex)
    coeff = chy * damp
    for w, sg in zip(rs.weyl_group, rs.weyl_signs):
        phases = np.exp(2j * math.pi * (zs @ (mu_rho @ w.T).T))
        num += sg * (phases @ coeff)
    return _realify(rs, num)


def phi_ratio_batch(rs: RootSystem, tau: float, bs, y, trunc: Truncation | None = None) -> np.ndarray:
    trunc = trunc or _DEFAULT_TRUNC
    if tau <= 0:
        raise DomainError("tau must be positive")
    bs = np.atleast_2d(np.asarray(bs, dtype=float))
    y = np.asarray(y)
    if np.iscomplexobj(y) and not np.any(y.imag):
        y = y.real.astype(float)
    zs = bs / tau
    taus = np.full(bs.shape[0], float(tau))

    den, _ = _stilde_batch(rs, taus, zs, trunc, want_grad=False)
    if np.any(den <= 0.0):
        raise BoundaryError("denominator series nonpositive; b/tau must be interior")

    num = _tilted_core(rs, tau, zs, y, trunc)
    return np.exp(0.5 * tau * complex(np.dot(y, y))) * num / den


def phi_d_tilted_batch(
    rs: RootSystem, tau: float, bs, y, trunc: Truncation | None = None
) -> np.ndarray:
    """Tilted series value at rows (tau, b_i), up to one global constant.

    Computes (2 pi / tau)^{n/2} e^{(b,b)/(2 tau) + tau (y,y)/2
    - (2 pi)^2 |rho|^2/(2 tau)} times the realified character-weighted core
    at z = b/tau.  Unlike the log form this is sign-free and accepts points
    outside the cone, which is what an unconditioned-measure probe needs.
    Real output for real y.
    """
    trunc = trunc or _DEFAULT_TRUNC
    if tau <= 0:
        raise DomainError("tau must be positive")
    bs = np.atleast_2d(np.asarray(bs, dtype=float))
    y = np.asarray(y)
    if np.iscomplexobj(y) and not np.any(y.imag):
        y = y.real.astype(float)
    core = _tilted_core(rs, tau, bs / tau, y, trunc)
    rho2 = float(rs.rho @ rs.rho)
    log_pref = (
        0.5 * rs.rank * math.log(TWO_PI / tau)
        + 0.5 * np.einsum("ij,ij->i", bs, bs) / tau
        - TWO_PI**2 * rho2 / (2.0 * tau)
    )
    vals = np.exp(log_pref + 0.5 * tau * complex(np.dot(y, y))) * core
    if not np.iscomplexobj(y):
        bad = np.max(np.abs(vals.imag)) if np.iscomplexobj(vals) else 0.0
        if bad > 1e-9 * max(1.0, float(np.max(np.abs(vals.real)))):
            raise NumericalError(f"tilted series has residual imaginary part {bad:.2e}")
        return vals.real.copy() if np.iscomplexobj(vals) else vals
    return vals
