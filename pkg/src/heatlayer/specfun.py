"""Scalar special functions used by the asymptotic formulas.

Everything here is pure and dependency free: the complementary error
function (with its scaled variant), the exponential integrals of order 1/2
and 3/2, the Hermite functions and the odd double factorial.
"""

import math

_SQRT_PI = math.sqrt(math.pi)
_TINY = 1e-300

# switch from the erf power series to the continued fraction
_SERIES_CUTOFF = 1.0
# E_{3/2}: switch from the erfc identity to the asymptotic series
_E32_ASYMPTOTIC = 40.0


def _erf_series(x):
    """Maclaurin series of erf, accurate for |x| <= 1."""
    x2 = x * x
    term = x
    total = x
    n = 0
    while True:
        n += 1
        term *= -x2 / n
        inc = term / (2 * n + 1)
        total += inc
        if abs(inc) <= 1e-17 * abs(total):
            break
    return 2.0 / _SQRT_PI * total


def _erfc_cf(x):
    """Continued fraction for sqrt(pi) * exp(x^2) * erfc(x), x >= 1.

    erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    evaluated with the modified Lentz algorithm.
    """
    f = x
    c = f
    d = 0.0
    for k in range(1, 5000):
        a = 0.5 * k
        d = x + a * d
        d = 1.0 / (d if d != 0.0 else _TINY)
        c = x + a / c
        if c == 0.0:
            c = _TINY
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return 1.0 / f


def _erfc_cf_tail(x):
    """Tail R of the continued fraction x + R, R = (1/2)/(x + 1/(x + (3/2)/(x + ...))).

    Computed on its own so that 1 - x/(x + R) = R/(x + R) keeps full
    relative accuracy where R << x.
    """
    f = _TINY
    c = f
    d = 0.0
    for k in range(1, 5000):
        a = 0.5 * k
        d = x + a * d
        d = 1.0 / (d if d != 0.0 else _TINY)
        c = x + a / c
        if c == 0.0:
            c = _TINY
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return f


def erfcx(x):
    """Scaled complementary error function exp(x^2) * erfc(x) for x >= 0."""
    x = float(x)
    if x < 0:
        raise ValueError("erfcx is only provided for x >= 0")
    if x < _SERIES_CUTOFF:
        return math.exp(x * x) * (1.0 - _erf_series(x))
    return _erfc_cf(x) / _SQRT_PI


def erfc(x):
    """Complementary error function.

    Uses the Maclaurin series of erf for |x| < 1 and a continued fraction
    beyond; negative arguments go through erfc(-x) = 2 - erfc(x).
    """
    x = float(x)
    if math.isnan(x):
        return x
    if x < 0:
        return 2.0 - erfc(-x)
    if x < _SERIES_CUTOFF:
        return 1.0 - _erf_series(x)
    if x > 27.3:
        # exp(-x^2) underflows below the smallest subnormal
        return 0.0
    return math.exp(-x * x) * _erfc_cf(x) / _SQRT_PI


def _e32_asymptotic(x):
    # E_s(x) ~ exp(-x)/x * sum_k (-1)^k (s)_k / x^k, s = 3/2
    term = 1.0
    total = 1.0
    k = 0
    while True:
        nxt = -term * (1.5 + k) / x
        if abs(nxt) >= abs(term) or abs(nxt) < 1e-17 * abs(total):
            break
        total += nxt
        term = nxt
        k += 1
    return math.exp(-x) / x * total


def exp_integral_half_orders(s, x):
    """Exponential integral E_s(x) = int_1^inf exp(-x t) t^(-s) dt, s in {1/2, 3/2}.

    E_{1/2}(x) = x^(-1/2) Gamma(1/2, x) = sqrt(pi/x) erfc(sqrt(x)), and the
    recurrence E_{s+1}(x) = (exp(-x) - x E_s(x)) / s gives
    E_{3/2}(x) = 2 (exp(-x) - sqrt(pi x) erfc(sqrt(x))).  The latter is
    evaluated through the scaled erfc.  For x >= 1 the difference
    1 - sqrt(pi x) erfcx(sqrt(x)) is taken from the tail of the erfc continued
    fraction, which avoids the cancellation, and for x > 40 the asymptotic
    series of the incomplete gamma function is used.
    """
    x = float(x)
    if x < 0:
        raise ValueError("E_s(x) requires x >= 0")
    if s == 0.5:
        if x == 0.0:
            raise ValueError("E_{1/2} diverges at x = 0")
        rx = math.sqrt(x)
        return math.exp(-x) * _SQRT_PI * erfcx(rx) / rx
    if s == 1.5:
        if x == 0.0:
            return 2.0
        if x > _E32_ASYMPTOTIC:
            return _e32_asymptotic(x)
        rx = math.sqrt(x)
        if rx >= _SERIES_CUTOFF:
            # 1 - sqrt(pi) rx erfcx(rx) = R / (rx + R) without cancellation
            tail = _erfc_cf_tail(rx)
            return 2.0 * math.exp(-x) * tail / (rx + tail)
        return 2.0 * math.exp(-x) * (1.0 - _SQRT_PI * rx * erfcx(rx))
    raise ValueError(f"only s = 1/2 and s = 3/2 are supported, got {s!r}")


def e32(x):
    """Shorthand for E_{3/2}(x)."""
    return exp_integral_half_orders(1.5, x)


def e32_from_recurrence(x):
    """E_{3/2} built from E_{1/2} by the upward recurrence (no large-x branch)."""
    return 2.0 * (math.exp(-x) - x * exp_integral_half_orders(0.5, x))


def hermite_fn(n, t):
    """Hermite function h_n(t) = (-1)^n d^n/dt^n exp(-t^2).

    Three-term recurrence h_{n+1} = 2 t h_n - 2 n h_{n-1} started from
    h_0 = exp(-t^2), h_1 = 2 t exp(-t^2).
    """
    if n < 0 or int(n) != n:
        raise ValueError("n must be a nonnegative integer")
    n = int(n)
    t = float(t)
    h_prev = math.exp(-t * t)
    if n == 0:
        return h_prev
    h = 2.0 * t * h_prev
    for k in range(1, n):
        h_prev, h = h, 2.0 * t * h - 2.0 * k * h_prev
    return h


def double_factorial(n):
    """(2m-1)!! style double factorial for odd n >= -1; (-1)!! = 1."""
    if int(n) != n or n < -1 or n % 2 == 0:
        raise ValueError(f"double factorial needs an odd integer >= -1, got {n!r}")
    out = 1
    for k in range(int(n), 0, -2):
        out *= k
    return float(out)
