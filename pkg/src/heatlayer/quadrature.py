"""Time quadrature rules for integrals with an inverse square root endpoint.

All rules describe an integral over ``tau`` in ``[0, dt]`` (one time step
ending at the evaluation time).  Nodes are stored twice: as times ``tau``
and as *lags* ``dt - tau``.  The lags are computed directly, never by
subtraction, because the kernels are evaluated at lags as small as 1e-14
where ``dt - tau`` would have lost every digit.

Two flavours of weights exist:

* ``weighted=True`` (product integration, Gauss-Jacobi): the rule
  approximates ``int g(tau) / sqrt(dt - tau) dtau`` and the weights already
  contain the singular factor.
* ``weighted=False`` (Gauss-Legendre, dyadic, graded): the rule approximates
  ``int F(tau) dtau`` for an integrand that carries its own singularity.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np


@dataclass(frozen=True)
class TimeRule:
    """Nodes and weights of a one-dimensional rule plus where it came from."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    interval: tuple
    lags: np.ndarray = None
    weighted: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.nodes) != len(self.weights):
            raise ValueError("node and weight counts differ")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("non-finite quadrature weight")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        if self.lags is not None:
            self.lags.setflags(write=False)

    def __len__(self):
        return len(self.nodes)

    def apply(self, f):
        """Apply the rule to a vectorised callable of the node variable."""
        return math.fsum(self.weights * np.asarray(f(self.nodes), dtype=float))


def _legendre_eval(n, x):
    """P_{n-1}, P_n and P_n' at x by the three-term recurrence."""
    one = np.ones_like(x)
    if n == 1:
        return one, x.copy(), one
    p0, p1 = one, x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p0, p1, n * (x * p1 - p0) / ((x - 1) * (x + 1))


@lru_cache(maxsize=None)
def _legendre_reference(n):
    """Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.

    Chebyshev-type initial guesses, Legendre polynomials from the three-term
    recurrence, all roots iterated together.  Nodes come back ascending.
    """
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        _, p1, dp = _legendre_eval(n, x)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # polish the nodes and form the weights in extended precision where the
    # platform has it (80-bit long double on x86); plain doubles otherwise
    x = x.astype(np.longdouble)
    for _ in range(2):
        p0, p1, dp = _legendre_eval(n, x)
        x = x - p1 / dp
    p0, p1, dp = _legendre_eval(n, x)
    # w = 2 / ((1 - x^2) P_n'^2); (1 - x)(1 + x) keeps full relative accuracy
    # next to the endpoints
    w = (2 / ((1 - x) * (1 + x) * dp * dp)).astype(float)
    x = x.astype(float)
    order = np.argsort(x)
    x = x[order]
    w = w[order]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def legendre_nodes(n):
    """Reference n-point Gauss-Legendre rule on [-1, 1] (read-only arrays)."""
    if not 1 <= n <= 200:
        raise ValueError(f"Gauss-Legendre order must be in [1, 200], got {n}")
    return _legendre_reference(int(n))


def gauss_legendre(n, a, b):
    """n-point Gauss-Legendre rule on [a, b]."""
    if not a < b:
        raise ValueError("need a < b")
    x, w = legendre_nodes(n)
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * x
    return TimeRule(nodes=nodes, weights=half * w, kind=f"gauss-legendre({n})",
                    interval=(a, b), params={"n": n})


def _beta_half_moments(k):
    # int_0^1 s^m (1-s)^(-1/2) ds = B(m+1, 1/2) = 2 * prod_{i<=m} 2i/(2i+1)
    out = []
    v = Fraction(2)
    for m in range(k + 1):
        if m:
            v *= Fraction(2 * m, 2 * m + 1)
        out.append(v)
    return out


@lru_cache(maxsize=None)
def _product_weights_exact(k):
    """Product-integration weights for the unit step, in exact rationals."""
    if k == 0:
        return (Fraction(2),)
    # node j sits at tau = 1 - j/k
    x = [1 - Fraction(j, k) for j in range(k + 1)]
    rhs = _beta_half_moments(k)
    n = k + 1
    a = [[x[j] ** m for j in range(n)] + [rhs[m]] for m in range(n)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [u - f * v for u, v in zip(a[r], a[col])]
    return tuple(a[i][n] for i in range(n))


def product_integration_weights(k, dt):
    """Equispaced product-integration rule for the weight (dt - tau)^(-1/2).

    With lags v_j = j dt / k the rule reads

        int_0^dt g(tau) / sqrt(dt - tau) dtau ~ sqrt(dt) * sum_j w_j g(dt - v_j)

    and is exact for polynomials of degree <= k.  The moment system is
    solved in rational arithmetic, so the returned weights are correctly
    rounded.  ``weights`` holds ``sqrt(dt) * w_j``; at dt = 1 these are the
    raw w_j (which sum to 2).
    """
    if not 0 <= k <= 12:
        raise ValueError(f"product integration order must be in [0, 12], got {k}")
    w = np.array([float(v) for v in _product_weights_exact(int(k))])
    if k == 0:
        lags = np.zeros(1)
    else:
        lags = np.arange(k + 1) * (dt / k)
    return TimeRule(nodes=dt - lags, weights=math.sqrt(dt) * w,
                    kind=f"product-integration({k})", interval=(0.0, dt),
                    lags=lags, weighted=True, params={"k": k, "raw": w})


def gauss_jacobi_sqrt(n, dt):
    """n-point Gauss rule for the weight (dt - tau)^(-1/2) on [0, dt].

    Substituting tau = dt (1 - s^2) turns the weighted integral into
    2 sqrt(dt) int_0^1 g(dt (1 - s^2)) ds, an even integrand in s.  The
    positive half of the 2n-point Gauss-Legendre rule therefore integrates
    it exactly up to degree 2n - 1 in tau.
    """
    if not 1 <= n <= 64:
        raise ValueError(f"Gauss-Jacobi order must be in [1, 64], got {n}")
    s, w = legendre_nodes(2 * n)
    s = s[n:]
    w = w[n:]
    lags = dt * s * s
    return TimeRule(nodes=dt - lags, weights=2.0 * math.sqrt(dt) * w,
                    kind=f"gauss-jacobi({n})", interval=(0.0, dt), lags=lags,
                    weighted=True, params={"n": n})


def dyadic_panels(delta, dt):
    """Dyadic panels covering [0, dt - delta] in tau.

    Panel i is [dt - dt/2^i, dt - dt/2^(i+1)], so each panel sits at its own
    length from the singular endpoint.  The last panel is clipped at
    dt - delta; there are ceil(log2(dt / delta)) of them.
    """
    if not 0 < delta < dt:
        raise ValueError("need 0 < delta < dt")
    count = max(1, math.ceil(math.log2(dt / delta) - 1e-12))
    panels = []
    for i in range(count):
        hi_lag = dt / 2 ** i
        lo_lag = max(dt / 2 ** (i + 1), delta)
        panels.append((dt - hi_lag, dt - lo_lag))
    return panels


def _dyadic_lag_panels(delta, dt):
    count = max(1, math.ceil(math.log2(dt / delta) - 1e-12))
    return [(max(dt / 2 ** (i + 1), delta), dt / 2 ** i) for i in range(count)]


def dyadic_rule(n, delta, dt):
    """Composite n-point Gauss-Legendre rule on the dyadic panels."""
    x, w = legendre_nodes(n)
    lags = []
    weights = []
    for lo, hi in _dyadic_lag_panels(delta, dt):
        half = 0.5 * (hi - lo)
        lags.append(0.5 * (lo + hi) + half * x)
        weights.append(half * w)
    lags = np.concatenate(lags)
    return TimeRule(nodes=dt - lags, weights=np.concatenate(weights),
                    kind=f"adaptive-dyadic({n})", interval=(0.0, dt - delta),
                    lags=lags, params={"n": n, "delta": delta})


def graded_rule(n, delta, dt):
    """Single Gauss-Legendre panel after the substitution dt - tau = exp(-u).

    (u_j, omega_j) is the n-point rule on [-log dt, -log delta]; the
    returned weights are omega_j exp(-u_j) so that sum_j w_j F(tau_j)
    approximates int_0^(dt - delta) F(tau) dtau for an integrand that
    still carries its own singular kernel.
    """
    if not 0 < delta < dt:
        raise ValueError("need 0 < delta < dt")
    if not 1 <= n <= 200:
        raise ValueError(f"graded rule order must be in [1, 200], got {n}")
    x, w = legendre_nodes(n)
    u0 = -math.log(dt)
    u1 = -math.log(delta)
    half = 0.5 * (u1 - u0)
    u = 0.5 * (u0 + u1) + half * x
    lags = np.exp(-u)
    return TimeRule(nodes=dt - lags, weights=half * w * lags,
                    kind=f"graded({n})", interval=(0.0, dt - delta), lags=lags,
                    params={"n": n, "delta": delta, "u": u, "omega": half * w})


def lag_rule_gauss_legendre(n, lo, hi):
    """Gauss-Legendre in the lag variable on [lo, hi] (used by bridge terms)."""
    x, w = legendre_nodes(n)
    half = 0.5 * (hi - lo)
    return 0.5 * (lo + hi) + half * x, half * w
