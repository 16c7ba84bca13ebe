"""Closed-form short-time asymptotics of the local layer potentials.

All formulas work in the local frame of the target: foot point x0 on
Gamma(t_final), inward normal n, scaled distance c = r / sqrt(dt),
curvature kappa and normal velocity v (see :mod:`heatlayer.geometry` for
the sign conventions).  Double-layer formulas use the outward normal in the
kernel, so interior targets (c > 0) see the jump -mu/2.

For c = 0 the double-layer functions return the principal value D*; the
one-sided limits are D* -/+ mu/2.
"""

from dataclasses import dataclass
import math

import numpy as np

from .specfun import e32, erfc

_SQRT_PI = math.sqrt(math.pi)
_SQRT2 = math.sqrt(2.0)


class MissingDerivativeError(ValueError):
    """The higher-order double-layer formula needs mu_ss and mu_tau."""


@dataclass(frozen=True)
class AsymptoticInput:
    """Frame plus density data at (x0, t_final).

    ``frame.dt`` is the time span the formula integrates over (the full step,
    or the tail length delta in the hybrid scheme).
    """

    frame: object
    density: float
    mu_ss: float = None
    mu_tau: float = None

    @property
    def dt(self):
        return self.frame.dt

    @property
    def c(self):
        return self.frame.c


def _sgn(c):
    return (c > 0) - (c < 0)


def asym_single(inp):
    """Single layer: 1/2 sqrt(dt/pi) E(c^2/4) (1 + (kappa - v)/2 c sqrt(dt)) sigma."""
    f = inp.frame
    if inp.density == 0:
        return 0.0
    c = f.c
    return (0.5 * math.sqrt(f.dt / math.pi) * e32(0.25 * c * c)
            * (1.0 + 0.5 * (f.kappa - f.v) * f.r) * inp.density)


def asym_double(inp, order="leading"):
    """Double layer, leading order (error O(dt)) or higher order (O(dt^1.5)).

    The higher-order form needs the arc-length second derivative mu_ss and
    the time derivative mu_tau (taken following the normal line) at x0.
    """
    f = inp.frame
    mu = inp.density
    c = f.c
    dt = f.dt
    k = f.kappa
    v = f.v
    r = f.r  # c * sqrt(dt)
    if order == "leading":
        if mu == 0:
            return 0.0
        E = e32(0.25 * c * c)
        out = -math.sqrt(dt / math.pi) * E * 0.25 * (k + v) * mu
        if c != 0:
            out -= 0.5 * _sgn(c) * erfc(0.5 * abs(c)) * (1.0 + 0.5 * r * (k - v)) * mu
        return out
    if order != "higher":
        raise ValueError(f"unknown order {order!r}")
    if inp.mu_ss is None or inp.mu_tau is None:
        raise MissingDerivativeError("order='higher' needs mu_ss and mu_tau")
    E = e32(0.25 * c * c)
    q = v * v + 3 * k * k - 2 * v * k
    out = math.sqrt(dt / math.pi) * E * (-0.25 * (k + v) + (v * v - 3 * k * k) / 8 * r) * mu
    if c != 0:
        out -= 0.5 * _sgn(c) * erfc(0.5 * abs(c)) * (1.0 + 0.5 * r * (k - v) + r * r * q / 8) * mu
    # the q/16 term enters with a minus sign inside the bracket; with a plus
    # sign the O(dt) error does not cancel (checked against the oracle on
    # static, growing and translating circles)
    out -= r * math.sqrt(dt) / _SQRT_PI * E * (-q / 16 * mu + 0.25 * (inp.mu_ss - inp.mu_tau))
    return out


def asym_bridge_single(inp):
    """Single layer one step removed: integration over [0, dt], evaluation at 2 dt.

    At c = 0 this is (sqrt(2) - 1) sqrt(dt/pi) sigma, the c -> 0 limit of the
    E_{3/2} combination.
    """
    f = inp.frame
    if inp.density == 0:
        return 0.0
    c2 = f.c * f.c
    comb = _SQRT2 * e32(c2 / 8) - e32(c2 / 4)
    return 0.5 * math.sqrt(f.dt / math.pi) * comb * (1.0 + 0.5 * (f.kappa - f.v) * f.r) * inp.density


def asym_bridge_double(inp):
    """Double layer one step removed (leading order)."""
    f = inp.frame
    mu = inp.density
    if mu == 0:
        return 0.0
    c = f.c
    c2 = c * c
    comb = _SQRT2 * e32(c2 / 8) - e32(c2 / 4)
    out = -math.sqrt(f.dt / math.pi) * comb * 0.25 * (f.kappa + f.v) * mu
    if c != 0:
        jump = erfc(_SQRT2 * abs(c) / 4) - erfc(0.5 * abs(c))
        out -= 0.5 * _sgn(c) * jump * (1.0 + 0.5 * f.r * (f.kappa - f.v)) * mu
    return out


def density_derivatives(curve, density, frame, step=None):
    """Finite-difference mu_ss and mu_tau at the foot point.

    mu_ss is the second derivative along Gamma(t_final) with respect to arc
    length.  mu_tau is d/dtau of mu at the point where Gamma(tau) crosses
    the normal line through x0, i.e. mu_t + v * (n . grad mu).
    """
    h = step if step is not None else 1e-4 * max(curve.scale, 1.0)
    lam0 = frame.lam0
    t = frame.t_final
    x0 = np.asarray(frame.x0, dtype=float)
    n = np.asarray(frame.n, dtype=float)
    # second derivative in arc length via the parameter
    he = h / frame.speed
    lam = lam0 + np.array([-2 * he, -he, 0.0, he, 2 * he])
    vals = density(curve.point(lam, t), t)
    d1 = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * he)
    d2 = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * he * he)
    t_vec = curve.d_lam(lam0, t)
    tt = curve.d_lam2(lam0, t)
    speed = float(np.hypot(t_vec[0], t_vec[1]))
    dspeed = float(t_vec @ tt) / speed
    mu_ss = (d2 * speed - d1 * dspeed) / speed ** 3
    # time derivative following the normal line
    ht = h
    pts = np.array([x0, x0])
    mt = density(pts, t + ht)[0] - density(pts, t - ht)[0]
    mu_t = mt / (2 * ht)
    pn = np.array([x0 + h * n, x0 - h * n])
    gn = density(pn, t)
    mu_n = (gn[0] - gn[1]) / (2 * h)
    return float(mu_ss), float(mu_t + frame.v * mu_n)
