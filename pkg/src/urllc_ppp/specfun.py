"""Scalar special functions: Gaussian tail, its inverse, generalized exponential integral."""

import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NumericalError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# q underflows to zero a little past 38; the bracket only has to contain the root.
_Q_INV_BRACKET = 40.0
_GAMMA_MAX_ARG = 170.0


def q(x):
    """Standard normal tail probability ``P[Z > x]``.

    Accepts a scalar or an array. Evaluated through ``erfc`` so that the far
    tail keeps full relative precision.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("q is defined for finite arguments only")
    out = 0.5 * special.erfc(arr / _SQRT2)
    if out.ndim == 0:
        return float(out)
    return out


def _normal_pdf(x):
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def q_inv(p, tol=1e-12):
    """Inverse of :func:`q` on the open interval (0, 1).

    Bracketed bisection followed by Newton polishing; ``tol`` is the relative
    tolerance on ``p``.
    """
    if not (0.0 < p < 1.0):
        raise DomainError(f"q_inv needs 0 < p < 1, got {p!r}")
    if p > 0.5:
        # 1 - p is exact for p >= 0.5
        return -q_inv(1.0 - p, tol)
    if p == 0.5:
        return 0.0

    lo, hi = 0.0, _Q_INV_BRACKET
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if q(mid) > p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6 * max(1.0, lo):
            break
    x = 0.5 * (lo + hi)

    for _ in range(50):
        fx = q(x) - p
        if abs(fx) <= tol * p:
            return x
        step = fx / _normal_pdf(x)
        x_new = x + step
        if not lo <= x_new <= hi:
            x_new = 0.5 * (lo + hi)
        if fx > 0:
            lo = max(lo, x)
        else:
            hi = min(hi, x)
        x = x_new
    if abs(q(x) - p) <= 1e3 * tol * p:
        return x
    raise NumericalError("q_inv failed to converge", estimate=x, error_bound=hi - lo)


def _exp_integral_quad(order, z):
    # t = 1 + s/z maps [1, inf) onto [0, inf) with an exp(-s) weight
    def integrand(s):
        return math.exp(-s) * (1.0 + s / z) ** (-order)

    value, abserr = integrate.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.exp(-z) / z * value


def exp_integral(order, z):
    """Generalized exponential integral ``E_order(z) = int_1^inf exp(-z t) t^-order dt``.

    For ``order < 1`` this is ``z**(order-1) * Gamma(1-order, z)``; otherwise,
    or when the gamma route would overflow, the defining integral is
    integrated numerically.
    """
    if not (math.isfinite(z) and z > 0.0):
        raise DomainError(f"exp_integral needs z > 0, got {z!r}")
    if not math.isfinite(order):
        raise DomainError("exp_integral order must be finite")

    a = 1.0 - order
    if 0.0 < a < _GAMMA_MAX_ARG:
        upper = special.gammaincc(a, z)
        if upper > 0.0:
            log_val = (order - 1.0) * math.log(z) + special.gammaln(a) + math.log(upper)
            if log_val < 700.0:
                return math.exp(log_val)
    if order > 0 and float(order).is_integer() and order < 1e4:
        return float(special.expn(int(order), z))
    return _exp_integral_quad(order, z)
