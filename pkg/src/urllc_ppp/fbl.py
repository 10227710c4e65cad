"""Finite-blocklength error probability in a Poisson field.

Three routes to the decoding error probability of the typical link:

* :func:`error_probability_integral` integrates the normal-approximation
  conditional error against the SIR density;
* :func:`error_probability_closed_form` replaces the conditional error by a
  piecewise-linear surrogate (:func:`q_piecewise`) and integrates it exactly;
* the Monte Carlo estimator in :mod:`urllc_ppp.mcsim`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import DomainError, NumericalError, UnsupportedRegimeError
from .sirdist import LOG2E, DispersionModel, NetworkParams, dispersion
from .specfun import exp_integral, q, q_inv

DEFAULT_QUAD_TOL = 1e-9

# Q(9) ~ 1e-19: beyond these SIR values the conditional error is saturated.
_TRANSITION_Z = 9.0


@dataclass(frozen=True)
class CodingParams:
    blocklength: int
    rate: float

    def __post_init__(self):
        if isinstance(self.blocklength, bool) or int(self.blocklength) != self.blocklength or self.blocklength < 1:
            raise DomainError(f"blocklength must be an integer >= 1, got {self.blocklength!r}")
        object.__setattr__(self, "blocklength", int(self.blocklength))
        if not (math.isfinite(self.rate) and self.rate >= 0.0):
            raise DomainError(f"rate must be >= 0, got {self.rate!r}")

    @property
    def threshold(self):
        """SIR at which the rate equals the Shannon capacity, ``2^R - 1``."""
        return math.expm1(self.rate * math.log(2.0))


@dataclass(frozen=True)
class QBreakpoints:
    """Breakpoints and slope of the piecewise-linear conditional error.

    ``lower`` is clamped at 0; ``raw_lower`` keeps the unclamped value.
    """

    lower: float
    upper: float
    slope: float
    center: float
    raw_lower: float

    @property
    def clamped(self):
        return self.raw_lower < 0.0


def achievable_rate(gamma, blocklength, epsilon, model=DispersionModel.IID_GAUSSIAN):
    """Normal-approximation rate at SIR ``gamma``, floored at zero."""
    if blocklength < 1:
        raise DomainError("blocklength must be >= 1")
    penalty = math.sqrt(dispersion(gamma, model) / blocklength) * q_inv(epsilon)
    return max(0.0, math.log1p(gamma) * LOG2E - penalty)


def conditional_error(gamma, coding, model=DispersionModel.IID_GAUSSIAN):
    """Normal-approximation error probability given the SIR.

    Vectorized over ``gamma``. ``gamma = inf`` (no interference, no noise)
    maps to 0; ``gamma = 0`` maps to 1 for positive rates and to 1/2 at zero
    rate (continuity limit).
    """
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0.0) or np.any(np.isnan(g)):
        raise DomainError("conditional_error needs gamma >= 0")
    finite = np.isfinite(g) & (g > 0.0)
    safe = np.where(finite, g, 1.0)
    arg = (np.log1p(safe) * LOG2E - coding.rate) / np.sqrt(dispersion(safe, model) / coding.blocklength)
    out = np.where(finite, 0.5 * special.erfc(arg / math.sqrt(2.0)), 0.0)
    out = np.where(g == 0.0, 1.0 if coding.rate > 0.0 else 0.5, out)
    if out.ndim == 0:
        return float(out)
    return out


def _q_argument(x, rate, blocklength, model):
    return (math.log1p(x) * LOG2E - rate) / math.sqrt(dispersion(x, model) / blocklength)


def _transition_interval(coding, model):
    """SIR interval outside which the conditional error is 1 or 0 to ~1e-19."""
    n, rate = coding.blocklength, coding.rate
    center = coding.threshold

    def shifted(x, level):
        return _q_argument(x, rate, n, model) - level

    hi = max(center, 1.0 / n)
    step = max(center, 1.0 / n)
    for _ in range(2000):
        if shifted(hi, _TRANSITION_Z) >= 0.0:
            break
        hi += step
        step *= 2.0
    lo_bracket = max(center, 1e-300) * 1e-15
    upper = optimize.brentq(shifted, lo_bracket if center == 0 else center, hi, args=(_TRANSITION_Z,), xtol=1e-14 * hi)
    if center == 0.0 or shifted(lo_bracket, -_TRANSITION_Z) >= 0.0:
        lower = 0.0
    else:
        lower = optimize.brentq(shifted, lo_bracket, center, args=(-_TRANSITION_Z,), xtol=1e-14 * center)
    return lower, center, upper


def error_probability_integral(params, coding, model=DispersionModel.IID_GAUSSIAN, quad_tol=DEFAULT_QUAD_TOL):
    """Decoding error probability as the SIR-averaged conditional error.

    The integral runs in ``u = x^(2/beta)`` where the interference part of the
    SIR density is a plain exponential, split at the edges and centre of the
    conditional-error transition.
    """
    if not quad_tol > 0.0:
        raise DomainError("quad_tol must be positive")
    c = params.interference_coefficient
    k = params.noise_coefficient
    if c == 0.0 and k == 0.0:
        return 0.0

    beta = params.path_loss_beta
    half_beta = 0.5 * beta
    delta = 2.0 / beta
    n, rate = coding.blocklength, coding.rate
    no_noise = k == 0.0

    def integrand(u):
        if u <= 0.0:
            pdf = c if (no_noise or half_beta > 1.0) else math.inf
            return pdf * (1.0 if rate > 0.0 else 0.5)
        x = u**half_beta
        if no_noise:
            pdf = c * math.exp(-c * u)
        else:
            pdf = (c + k * half_beta * u ** (half_beta - 1.0)) * math.exp(-c * u - k * x)
        if pdf == 0.0:
            return 0.0
        if math.isinf(x):
            return 0.0
        z = _q_argument(x, rate, n, model)
        return 0.5 * math.erfc(z / math.sqrt(2.0)) * pdf

    lower, center, upper = _transition_interval(coding, model)
    knots = sorted({0.0, lower**delta, center**delta, upper**delta})
    pieces = [(a, b) for a, b in zip(knots[:-1], knots[1:]) if b > a]
    pieces.append((knots[-1], math.inf))

    part_tol = quad_tol / len(pieces)
    total, total_err, failed = 0.0, 0.0, None
    for a, b in pieces:
        value, abserr, info, *rest = integrate.quad(
            integrand, a, b, epsabs=part_tol, epsrel=1e-13, limit=400, full_output=1
        )
        total += value
        total_err += abserr
        if rest and abserr > part_tol:
            failed = rest[0]
    if failed is not None or not math.isfinite(total):
        raise NumericalError(
            f"quadrature did not converge: {failed}", estimate=min(max(total, 0.0), 1.0), error_bound=total_err
        )
    return min(max(total, 0.0), 1.0)


def q_breakpoints(coding):
    """Breakpoints of the piecewise-linear conditional error for ``rate > 0``.

    The linear piece is the first-order expansion of the conditional error at
    ``2^R - 1`` under the iid-codebook dispersion; it reaches 1 and 0 at the
    lower and upper breakpoints.
    """
    if coding.rate <= 0.0:
        raise DomainError("piecewise linearization needs rate > 0")
    n = coding.blocklength
    two_r = 2.0**coding.rate
    spread = two_r * two_r - two_r  # 2^{2R} - 2^R
    half_width = math.sqrt(math.pi * spread / n)
    center = coding.threshold
    raw_lower = center - half_width
    return QBreakpoints(
        lower=max(raw_lower, 0.0),
        upper=center + half_width,
        slope=-math.sqrt(n / (4.0 * math.pi * spread)),
        center=center,
        raw_lower=raw_lower,
    )


def q_piecewise(x, bp, coding=None):
    """Piecewise-linear surrogate of :func:`conditional_error`; vectorized over ``x``."""
    arr = np.asarray(x, dtype=float)
    center = bp.center if coding is None else coding.threshold
    linear = np.clip(0.5 + bp.slope * (arr - center), 0.0, 1.0)
    out = np.where(arr <= bp.lower, 1.0, np.where(arr >= bp.upper, 0.0, linear))
    if out.ndim == 0:
        return float(out)
    return out


def exp_integral_moment(level, coefficient, beta):
    """``c * X^(1+2/beta) * E_{-beta/2}(c X^(2/beta))``, i.e. ``int_X^inf x f(x) dx``.

    ``f`` is the interference-limited SIR density with coefficient ``c``. At
    ``X = 0`` the limit is the SIR mean ``Gamma(1+beta/2) / c^(beta/2)``.
    """
    delta = 2.0 / beta
    if level == 0.0:
        return math.exp(special.gammaln(1.0 + 0.5 * beta) - 0.5 * beta * math.log(coefficient))
    z = coefficient * level**delta
    return coefficient * level ** (1.0 + delta) * exp_integral(-0.5 * beta, z)


def _partial_moment(lower, upper, c, beta):
    """``int_lower^upper x f(x) dx`` via regularized incomplete gammas.

    Same quantity as the difference of two :func:`exp_integral_moment` terms,
    which cancel catastrophically when ``c`` is small.
    """
    a = 1.0 + 0.5 * beta
    delta = 2.0 / beta
    z_lo = c * lower**delta
    z_hi = c * upper**delta
    if z_hi <= a:
        diff = special.gammainc(a, z_hi) - special.gammainc(a, z_lo)
    else:
        diff = special.gammaincc(a, z_lo) - special.gammaincc(a, z_hi)
    if diff <= 0.0:
        return 0.0
    return math.exp(special.gammaln(a) - 0.5 * beta * math.log(c) + math.log(diff))


def error_probability_closed_form(params, coding):
    """Closed-form error probability in the interference-limited regime.

    Exact integral of :func:`q_piecewise` against the SIR density:

        F(A) + K (F(B) - F(A)) + slope * int_A^B x f(x) dx,

    with ``F`` the SIR CDF, ``K = 1/2 + sqrt(n (2^R - 1) / (4 pi 2^R))`` and the
    moment term expressed through ``E_{-beta/2}`` (see
    :func:`exp_integral_moment`).
    """
    if not params.interference_limited:
        raise UnsupportedRegimeError("closed form requires inv_power = 0 (interference-limited)")
    if coding.rate <= 0.0:
        raise DomainError("closed form requires rate > 0")
    c = params.interference_coefficient
    if c == 0.0:
        return 0.0

    beta = params.path_loss_beta
    delta = 2.0 / beta
    bp = q_breakpoints(coding)
    cdf_lower = -math.expm1(-c * bp.lower**delta)
    cdf_upper = -math.expm1(-c * bp.upper**delta)
    plateau = 0.5 - bp.slope * bp.center
    moment = _partial_moment(bp.lower, bp.upper, c, beta)
    eps = cdf_lower + plateau * (cdf_upper - cdf_lower) + bp.slope * moment
    return min(max(eps, 0.0), 1.0)
