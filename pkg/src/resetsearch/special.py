"""Modified Bessel functions I_nu and K_nu for integer and half-integer order.

Only the orders nu = (d - 2)/2 with integer d >= 2 are needed, so the order is
always a non-negative multiple of 1/2. The kernels work on exponentially
scaled values

    ke(nu, x) = exp(x) K_nu(x),    ie(nu, x) = exp(-x) I_nu(x)

and in log space, which keeps ratios such as K_nu(qA)/K_nu(q eps0) finite long
after the unscaled functions under- or overflow.

Algorithms
----------
K, integer order
    Power series for K_0, K_1 on x <= 2, Steed's continued fraction (CF2,
    Temme's form) for x > 2, then forward recurrence in the order, which is
    stable for K.
K, half-integer order
    The terminating closed form
    K_{n+1/2}(x) = sqrt(pi/(2x)) e^{-x} sum_k (n+k)!/(k!(n-k)!) (2x)^{-k}.
I, any order
    Power series (all terms positive, no cancellation) up to
    x = max(30, 2 nu^2), Hankel asymptotic expansion beyond.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, vectorize

from .errors import DomainError

__all__ = [
    "bessel_k",
    "bessel_i",
    "bessel_ke",
    "bessel_ie",
    "log_bessel_k",
    "log_bessel_i",
    "order_for_dimension",
]

_EULER_GAMMA = 0.57721566490153286061
_LOG_MAX = 709.782712893384  # log(sys.float_info.max)
_RESCALE = 1e250


@njit(cache=True)
def _k01_series(x):
    """Unscaled (K_0(x), K_1(x)) from the ascending series, for x <= 2."""
    y = 0.25 * x * x
    lg = math.log(0.5 * x)
    # K_0 = -(ln(x/2) + gamma) I_0 + sum_{k>=1} H_k y^k / (k!)^2
    term = 1.0
    i0 = 1.0
    s0 = 0.0
    harm = 0.0
    # K_1 = 1/x + ln(x/2) I_1 - (x/4) sum_{k>=0} (psi(k+1) + psi(k+2)) y^k / (k!(k+1)!)
    term1 = 1.0
    i1 = 1.0
    s1 = 1.0 - 2.0 * _EULER_GAMMA  # psi(1) + psi(2) at k = 0
    for k in range(1, 200):
        term *= y / (k * k)
        harm += 1.0 / k
        i0 += term
        s0 += term * harm
        term1 *= y / (k * (k + 1))
        i1 += term1
        # psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
        s1 += term1 * (-2.0 * _EULER_GAMMA + 2.0 * harm + 1.0 / (k + 1))
        if term < 1e-18 * i0 and term1 < 1e-18 * i1:
            break
    k0 = -(lg + _EULER_GAMMA) * i0 + s0
    i1 *= 0.5 * x
    k1 = 1.0 / x + lg * i1 - 0.25 * x * s1
    return k0, k1


@njit(cache=True)
def _k01_scaled_cf2(x):
    """Scaled (e^x K_0(x), e^x K_1(x)) from Steed's CF2, for x > 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100000):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < 1e-17:
            break
    h = a1 * h
    k0 = math.sqrt(math.pi / (2.0 * x)) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


@njit(cache=True)
def _log_ke(two_nu, x):
    """log(e^x K_nu(x)) with nu = two_nu / 2."""
    if two_nu % 2 == 1:
        n = (two_nu - 1) // 2
        y = 0.5 / x
        # sum_k c_k y^k, c_k = (n+k)!/(k!(n-k)!); factor y^n out when y > 1
        coef = 1.0
        if y > 1.0:
            total = 0.0
            for k in range(n + 1):
                total += coef * y ** (k - n)
                coef *= (n + k + 1) * (n - k) / (k + 1.0)
            return 0.5 * math.log(math.pi * y) + math.log(total) + n * math.log(y)
        total = 0.0
        yk = 1.0
        for k in range(n + 1):
            total += coef * yk
            yk *= y
            coef *= (n + k + 1) * (n - k) / (k + 1.0)
        return 0.5 * math.log(math.pi * y) + math.log(total)

    n = two_nu // 2
    if x <= 2.0:
        k0, k1 = _k01_series(x)
        k0 *= math.exp(x)
        k1 *= math.exp(x)
    else:
        k0, k1 = _k01_scaled_cf2(x)
    if n == 0:
        return math.log(k0)
    offset = 0.0
    for j in range(1, n):
        k0, k1 = k1, k0 + (2.0 * j / x) * k1
        if k1 > _RESCALE:
            k0 /= _RESCALE
            k1 /= _RESCALE
            offset += math.log(_RESCALE)
    return math.log(k1) + offset


@njit(cache=True)
def _log_ie(two_nu, x):
    """log(e^{-x} I_nu(x)) with nu = two_nu / 2."""
    nu = 0.5 * two_nu
    if x >= max(30.0, 2.0 * nu * nu):
        mu = 4.0 * nu * nu
        term = 1.0
        total = 1.0
        prev = 1.0
        for k in range(1, 400):
            term *= -(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k * x)
            if abs(term) > abs(prev):
                break
            total += term
            prev = term
            if abs(term) < 1e-17 * abs(total):
                break
        return math.log(total) - 0.5 * math.log(2.0 * math.pi * x)
    y = 0.25 * x * x
    log_t0 = nu * math.log(0.5 * x) - math.lgamma(nu + 1.0)
    term = 1.0
    total = 1.0
    for k in range(1, 100000):
        term *= y / (k * (k + nu))
        total += term
        if term < 1e-17 * total:
            break
    return log_t0 + math.log(total) - x


@vectorize(["float64(int64, float64)"], cache=True)
def _log_ke_ufunc(two_nu, x):
    return _log_ke(two_nu, x)


@vectorize(["float64(int64, float64)"], cache=True)
def _log_ie_ufunc(two_nu, x):
    return _log_ie(two_nu, x)


def order_for_dimension(d: int) -> float:
    """Bessel order (d - 2)/2 attached to the radial process in dimension d."""
    if int(d) != d or d < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {d!r}")
    return (int(d) - 2) / 2.0


def _two_nu(nu) -> int:
    two_nu = 2.0 * float(nu)
    k = round(two_nu)
    if k < 0 or abs(two_nu - k) > 1e-12:
        raise DomainError(f"order must be a non-negative multiple of 1/2, got {nu!r}")
    return int(k)


def _positive_arg(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("Bessel argument must be > 0")
    return arr


def _out(values, x):
    return float(values) if np.ndim(x) == 0 else values


def log_bessel_k(nu, x):
    """Natural log of K_nu(x); finite for every x > 0 that is representable."""
    arr = _positive_arg(x)
    return _out(_log_ke_ufunc(_two_nu(nu), arr) - arr, x)


def log_bessel_i(nu, x):
    """Natural log of I_nu(x)."""
    arr = _positive_arg(x)
    return _out(_log_ie_ufunc(_two_nu(nu), arr) + arr, x)


def bessel_ke(nu, x):
    """Exponentially scaled K: exp(x) * K_nu(x)."""
    arr = _positive_arg(x)
    with np.errstate(over="ignore"):
        val = np.exp(_log_ke_ufunc(_two_nu(nu), arr))
    if np.any(np.isinf(val)):
        raise OverflowError("exp(x) K_nu(x) overflows for this argument")
    return _out(val, x)


def bessel_ie(nu, x):
    """Exponentially scaled I: exp(-x) * I_nu(x)."""
    arr = _positive_arg(x)
    return _out(np.exp(_log_ie_ufunc(_two_nu(nu), arr)), x)


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x).

    Args:
        nu: order, a non-negative multiple of 1/2.
        x: argument(s), strictly positive.

    Raises:
        DomainError: for x <= 0 or an unsupported order.
        OverflowError: if K_nu(x) exceeds the floating-point range (tiny x).
    """
    log_val = log_bessel_k(nu, x)
    if np.any(np.asarray(log_val) > _LOG_MAX):
        raise OverflowError(f"K_{nu}(x) overflows for x={x!r}")
    return _out(np.exp(log_val), x)


def bessel_i(nu, x):
    """Modified Bessel function of the first kind I_nu(x).

    Raises:
        DomainError: for x <= 0 or an unsupported order.
        OverflowError: if I_nu(x) exceeds the floating-point range (x >~ 713).
    """
    log_val = log_bessel_i(nu, x)
    if np.any(np.asarray(log_val) > _LOG_MAX):
        raise OverflowError(f"I_{nu}(x) overflows for x={x!r}")
    return _out(np.exp(log_val), x)
