"""Time-dependent boundary curves, densities and the local asymptotic frame.

Sign conventions
----------------
Every curve carries an explicit ``interior`` flag: ``+1`` when the domain
lies to the left of the direction of increasing parameter, ``-1`` when it
lies to the right.  The inward normal follows from it, and with the boundary
written locally as a graph over its tangent line in the inward direction,

* curvature ``kappa = y_ss`` (positive for a convex domain),
* normal velocity ``v = y_tau`` (positive when the boundary moves inward).

Chords
------
Kernels are evaluated on ``x - y`` where ``y`` lies within a few sqrt(lag)
of the target, with lags down to 1e-14.  Forming ``x - y`` from absolute
coordinates would leave only a few correct digits in the dipole factor
``(x - y) . n``, so curves expose ``chord(lam0, eta, t_eval, lag)``:
``gamma(lam0 + eta, t_eval - lag) - gamma(lam0, t_eval)`` evaluated without
cancellation.  Built-in curves implement it analytically; user curves fall
back to a plain difference.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np


class GeometryError(ValueError):
    """Degenerate parametrisation or ill-posed closest-point query."""


class AmbiguousProjectionError(GeometryError):
    """Two distinct boundary points are (numerically) equally close."""


class TruncationWarning(UserWarning):
    """Open curve shorter than the heat kernel's reach for the requested step."""


def _stack(x, y):
    return np.stack(np.broadcast_arrays(x, y), axis=-1)


class BoundaryCurve:
    """Base class for a parametrised curve gamma(lam, tau) in the plane.

    Subclasses implement ``point``, ``d_lam``, ``d_lam2`` and ``d_tau`` for
    array ``lam`` and scalar ``tau``, each returning an array of shape
    ``lam.shape + (2,)``.
    """

    closed = False
    interior = 1
    samples = 256

    def __init__(self, lo, hi, interior=1, closed=False, scale=1.0, key=None):
        if not lo < hi:
            raise GeometryError("parameter domain must satisfy lo < hi")
        if interior not in (1, -1):
            raise GeometryError("interior must be +1 (left) or -1 (right)")
        self.lo = float(lo)
        self.hi = float(hi)
        self.interior = interior
        self.closed = closed
        self.scale = float(scale)
        self.key = key

    @property
    def period(self):
        return self.hi - self.lo

    def point(self, lam, tau):
        raise NotImplementedError

    def d_lam(self, lam, tau):
        raise NotImplementedError

    def d_lam2(self, lam, tau):
        raise NotImplementedError

    def d_tau(self, lam, tau):
        raise NotImplementedError

    def chord(self, lam0, eta, t_eval, lag):
        """gamma(lam0 + eta, t_eval - lag) - gamma(lam0, t_eval)."""
        eta = np.asarray(eta, dtype=float)
        return self.point(lam0 + eta, t_eval - lag) - self.point(lam0, t_eval)

    def __repr__(self):
        return f"{type(self).__name__}({self.key})"


class Segment(BoundaryCurve):
    """Static straight segment from (a, y0) to (b, y0); interior above by default."""

    def __init__(self, a=-1.0, b=1.0, y0=0.0, interior=1):
        super().__init__(a, b, interior=interior, scale=max(abs(a), abs(b), 1.0),
                         key=f"segment:{a!r}:{b!r}:{y0!r}:{interior}")
        self.y0 = float(y0)

    def point(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(lam, self.y0)

    def d_lam(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(np.ones_like(lam), 0.0)

    def d_lam2(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(np.zeros_like(lam), 0.0)

    def d_tau(self, lam, tau):
        return self.d_lam2(lam, tau)

    def chord(self, lam0, eta, t_eval, lag):
        eta = np.asarray(eta, dtype=float)
        return _stack(eta, 0.0)


class Parabola(BoundaryCurve):
    """Static parabola (lam, a lam^2), |lam| <= half_range; curvature 2a at the vertex."""

    def __init__(self, a, half_range=2 * math.pi, interior=1):
        super().__init__(-half_range, half_range, interior=interior, scale=half_range,
                         key=f"parabola:{a!r}:{half_range!r}:{interior}")
        self.a = float(a)
        self.samples = 512

    def point(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(lam, self.a * lam * lam)

    def d_lam(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(np.ones_like(lam), 2 * self.a * lam)

    def d_lam2(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(np.zeros_like(lam), np.full_like(lam, 2 * self.a))

    def d_tau(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(np.zeros_like(lam), 0.0)

    def chord(self, lam0, eta, t_eval, lag):
        eta = np.asarray(eta, dtype=float)
        return _stack(eta, self.a * eta * (2 * lam0 + eta))


class MovingEllipse(BoundaryCurve):
    """Ellipse (A cos th + V t + cx, B sin th + cy) translating along x."""

    def __init__(self, semi_x=20.0, semi_y=1.0, speed=1.5, cx=0.0, cy=0.0, interior=1):
        super().__init__(0.0, 2 * math.pi, interior=interior, closed=True,
                         scale=max(semi_x, semi_y),
                         key=f"ellipse:{semi_x!r}:{semi_y!r}:{speed!r}:{cx!r}:{cy!r}:{interior}")
        self.A = float(semi_x)
        self.B = float(semi_y)
        self.V = float(speed)
        self.cx = float(cx)
        self.cy = float(cy)
        self.samples = 512

    def point(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(self.A * np.cos(lam) + self.V * tau + self.cx,
                      self.B * np.sin(lam) + self.cy)

    def d_lam(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(-self.A * np.sin(lam), self.B * np.cos(lam))

    def d_lam2(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(-self.A * np.cos(lam), -self.B * np.sin(lam))

    def d_tau(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(np.full_like(lam, self.V), 0.0)

    def chord(self, lam0, eta, t_eval, lag):
        eta = np.asarray(eta, dtype=float)
        mid = lam0 + 0.5 * eta
        sh = np.sin(0.5 * eta)
        dx = -2 * self.A * np.sin(mid) * sh - self.V * lag
        dy = 2 * self.B * np.cos(mid) * sh
        return _stack(dx, dy)


class Circle(BoundaryCurve):
    """Circle of radius R0 + rate * t about (cx, cy), counterclockwise."""

    def __init__(self, radius=1.0, rate=0.0, cx=0.0, cy=0.0, interior=1):
        super().__init__(0.0, 2 * math.pi, interior=interior, closed=True, scale=radius,
                         key=f"circle:{radius!r}:{rate!r}:{cx!r}:{cy!r}:{interior}")
        self.R0 = float(radius)
        self.rate = float(rate)
        self.cx = float(cx)
        self.cy = float(cy)

    def radius(self, tau):
        return self.R0 + self.rate * tau

    def point(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        r = self.radius(tau)
        return _stack(r * np.cos(lam) + self.cx, r * np.sin(lam) + self.cy)

    def d_lam(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        r = self.radius(tau)
        return _stack(-r * np.sin(lam), r * np.cos(lam))

    def d_lam2(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        r = self.radius(tau)
        return _stack(-r * np.cos(lam), -r * np.sin(lam))

    def d_tau(self, lam, tau):
        lam = np.asarray(lam, dtype=float)
        return _stack(self.rate * np.cos(lam), self.rate * np.sin(lam))

    def chord(self, lam0, eta, t_eval, lag):
        eta = np.asarray(eta, dtype=float)
        r = self.radius(t_eval - lag)
        mid = lam0 + 0.5 * eta
        sh = np.sin(0.5 * eta)
        dr = -self.rate * lag
        dx = -2 * r * np.sin(mid) * sh + dr * math.cos(lam0)
        dy = 2 * r * np.cos(mid) * sh + dr * math.sin(lam0)
        return _stack(dx, dy)


class ParametricCurve(BoundaryCurve):
    """User curve from a vectorised callable ``gamma(lam, tau) -> (..., 2)``.

    Missing derivatives are replaced by centred finite differences with step
    1e-6 times the parameter-domain length (time step 1e-6).
    """

    def __init__(self, gamma, lo, hi, closed=False, interior=1, d_lam=None,
                 d_lam2=None, d_tau=None, scale=1.0, key=None):
        super().__init__(lo, hi, interior=interior, closed=closed, scale=scale, key=key)
        self._gamma = gamma
        self._d_lam = d_lam
        self._d_lam2 = d_lam2
        self._d_tau = d_tau
        self._h = 1e-6 * (hi - lo)

    def point(self, lam, tau):
        return np.asarray(self._gamma(np.asarray(lam, dtype=float), tau), dtype=float)

    def d_lam(self, lam, tau):
        if self._d_lam is not None:
            return np.asarray(self._d_lam(np.asarray(lam, dtype=float), tau), dtype=float)
        h = self._h
        return (self.point(lam + h, tau) - self.point(lam - h, tau)) / (2 * h)

    def d_lam2(self, lam, tau):
        if self._d_lam2 is not None:
            return np.asarray(self._d_lam2(np.asarray(lam, dtype=float), tau), dtype=float)
        h = 1e2 * self._h
        lam = np.asarray(lam, dtype=float)
        return (self.point(lam + h, tau) - 2 * self.point(lam, tau)
                + self.point(lam - h, tau)) / (h * h)

    def d_tau(self, lam, tau):
        if self._d_tau is not None:
            return np.asarray(self._d_tau(np.asarray(lam, dtype=float), tau), dtype=float)
        h = 1e-6
        return (self.point(lam, tau + h) - self.point(lam, tau - h)) / (2 * h)


# ---------------------------------------------------------------------------
# densities


class Density:
    """Density sigma(y, tau) defined on the plane; ``y`` has shape (..., 2)."""

    key = None

    def __call__(self, y, tau):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.key})"


class ConstantDensity(Density):
    def __init__(self, value=1.0):
        self.value = float(value)
        self.key = f"constant:{value!r}"

    def __call__(self, y, tau):
        y = np.asarray(y, dtype=float)
        return np.full(y.shape[:-1], self.value)


class CosineDensity(Density):
    """cos(2 k pi y_1), the oscillatory density on the segment."""

    def __init__(self, k):
        self.k = float(k)
        self.key = f"cosine:{k!r}"

    def __call__(self, y, tau):
        y = np.asarray(y, dtype=float)
        return np.cos(2 * self.k * math.pi * y[..., 0])


class GaussianBumpDensity(Density):
    """exp(-y_1^2 / 4d) / sqrt(4 pi d), time independent."""

    def __init__(self, d):
        self.d = float(d)
        self.key = f"bump:{d!r}"

    def __call__(self, y, tau):
        y = np.asarray(y, dtype=float)
        return np.exp(-y[..., 0] ** 2 / (4 * self.d)) / math.sqrt(4 * math.pi * self.d)


class EllipseDensity(Density):
    """cos(y_1 t) + sin(10 t), the moving-ellipse test density."""

    key = "ellipse-mu"

    def __call__(self, y, tau):
        y = np.asarray(y, dtype=float)
        return np.cos(y[..., 0] * tau) + math.sin(10 * tau)


class FunctionDensity(Density):
    """Wrap a vectorised callable ``f(y, tau)``."""

    def __init__(self, f, key=None):
        self.f = f
        self.key = key

    def __call__(self, y, tau):
        y = np.asarray(y, dtype=float)
        return np.broadcast_to(np.asarray(self.f(y, tau), dtype=float), y.shape[:-1])


# ---------------------------------------------------------------------------
# closest points


def inward_normal(tangent, interior):
    """Unit inward normal from a tangent (not necessarily unit)."""
    t = np.asarray(tangent, dtype=float)
    speed = np.linalg.norm(t, axis=-1, keepdims=True)
    left = np.stack([-t[..., 1], t[..., 0]], axis=-1) / speed
    return interior * left


def curve_point(curve, lam, tau):
    """Point, unit tangent, speed, inward normal, curvature and normal velocity."""
    lam = float(lam)
    p = curve.point(lam, tau)
    d1 = curve.d_lam(lam, tau)
    d2 = curve.d_lam2(lam, tau)
    dt = curve.d_tau(lam, tau)
    speed = float(math.hypot(d1[0], d1[1]))
    if speed < 1e-13:
        raise GeometryError(f"degenerate parametrisation at lam={lam}")
    n = inward_normal(d1, curve.interior)
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    kappa = curve.interior * cross / speed ** 3
    v = float(dt @ n)
    return p, d1 / speed, speed, n, float(kappa), v


def _eta_grid(curve, lam_ref, samples):
    if curve.closed:
        P = curve.period
        return -0.5 * P + P * np.arange(samples) / samples
    return np.linspace(curve.lo - lam_ref, curve.hi - lam_ref, samples)


def distance_minima(curve, offset, lam_ref, t_eval, lag=0.0, samples=None):
    """Local minima of |x - gamma(lam_ref + eta, t_eval - lag)| over eta.

    ``offset`` is x - gamma(lam_ref, t_eval).  Returns (eta, dist) arrays for
    every local minimum of the sampled distance, refined by safeguarded
    Newton iteration on <x - gamma, gamma_lam> = 0.
    """
    M = samples or curve.samples
    eta = _eta_grid(curve, lam_ref, M)
    h = eta[1] - eta[0]
    tau = t_eval - lag
    diff = offset - curve.chord(lam_ref, eta, t_eval, lag)
    d2 = np.einsum("...i,...i->...", diff, diff)
    if curve.closed:
        left = np.roll(d2, 1)
        right = np.roll(d2, -1)
    else:
        left = np.concatenate([[np.inf], d2[:-1]])
        right = np.concatenate([d2[1:], [np.inf]])
    idx = np.nonzero((d2 <= left) & (d2 <= right))[0]
    # drop plateau duplicates (keep the first of consecutive indices)
    if len(idx) > 1:
        keep = np.concatenate([[True], np.diff(idx) > 1])
        if curve.closed and idx[0] == 0 and idx[-1] == M - 1:
            keep[-1] = False
        idx = idx[keep]
    e0 = eta[idx]
    a = e0 - h
    b = e0 + h
    if not curve.closed:
        a = np.maximum(a, eta[0])
        b = np.minimum(b, eta[-1])

    def grad(e):
        diff = offset - curve.chord(lam_ref, e, t_eval, lag)
        d1 = curve.d_lam(lam_ref + e, tau)
        dd = curve.d_lam2(lam_ref + e, tau)
        g = -np.einsum("...i,...i->...", diff, d1)
        gp = np.einsum("...i,...i->...", d1, d1) - np.einsum("...i,...i->...", diff, dd)
        return g, gp

    ga, _ = grad(a)
    gb, _ = grad(b)
    # a bracket without a sign change means the minimum sits at that end
    at_a = ga >= 0
    at_b = (gb <= 0) & ~at_a
    e = e0.copy()
    live = ~(at_a | at_b)
    for _ in range(80):
        if not live.any():
            break
        g, gp = grad(e)
        a = np.where(live & (g < 0), e, a)
        b = np.where(live & (g > 0), e, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / gp
        new = e - step
        bad = ~np.isfinite(new) | (gp <= 0) | (new <= a) | (new >= b)
        new = np.where(bad, 0.5 * (a + b), new)
        conv = np.abs(new - e) <= 4e-16 * (np.abs(lam_ref + e) + h)
        conv |= g == 0
        e = np.where(live, new, e)
        live &= ~conv
    e = np.where(at_a, a, np.where(at_b, b, e))
    diff = offset - curve.chord(lam_ref, e, t_eval, lag)
    dist = np.sqrt(np.einsum("...i,...i->...", diff, diff))
    return e, dist


@dataclass(frozen=True)
class LocalFrame:
    """Asymptotic parameters of a target relative to Gamma(t_final)."""

    x0: np.ndarray
    n: np.ndarray
    r: float
    c: float
    kappa: float
    v: float
    lam0: float
    dt: float
    t_final: float
    tangent: np.ndarray = None
    speed: float = 1.0


def closest_point(curve, x, t_final, ambiguity=1e-9, strict=True):
    """Parameter of the closest point of Gamma(t_final) to x.

    Raises AmbiguousProjectionError when ``strict`` and two distinct local
    minima are within ``ambiguity`` of each other.
    """
    x = np.asarray(x, dtype=float)
    lam_ref = curve.lo if curve.closed else 0.5 * (curve.lo + curve.hi)
    offset = x - curve.point(lam_ref, t_final)
    eta, dist = distance_minima(curve, offset, lam_ref, t_final)
    order = np.argsort(dist, kind="stable")
    best = order[0]
    if strict and len(order) > 1:
        lam_all = lam_ref + eta
        for other in order[1:]:
            if dist[other] - dist[best] > ambiguity:
                break
            sep = abs(lam_all[other] - lam_all[best])
            if curve.closed:
                sep = min(sep, curve.period - sep)
            if sep > 1e-6 * curve.period:
                raise AmbiguousProjectionError(
                    f"target {x.tolist()} is equidistant ({dist[best]:.3g}) from "
                    f"several boundary points")
    lam0 = lam_ref + float(eta[best])
    if curve.closed:
        lam0 = curve.lo + (lam0 - curve.lo) % curve.period
    return lam0, float(dist[best])


def local_frame(curve, x, dt, t_final=None):
    """Closest point, inward normal, signed distance, curvature, normal velocity.

    ``c = r / sqrt(dt)``; targets within 1e-13 * curve.scale of the boundary
    are snapped onto it (r = c = 0).
    """
    if t_final is None:
        t_final = dt
    lam0, _ = closest_point(curve, x, t_final)
    return frame_at(curve, lam0, x, dt, t_final)


def frame_at(curve, lam0, x, dt, t_final):
    """LocalFrame for a target whose foot point parameter is already known."""
    x = np.asarray(x, dtype=float)
    p, tan, speed, n, kappa, v = curve_point(curve, lam0, t_final)
    r = float((x - p) @ n)
    if abs(r) < 1e-13 * curve.scale:
        r = 0.0
    return LocalFrame(x0=p, n=n, r=r, c=r / math.sqrt(dt), kappa=kappa, v=v,
                      lam0=lam0, dt=dt, t_final=t_final, tangent=tan, speed=speed)


def check_truncation(curve, lam0, t_final, dt, eps):
    """Warn if an open curve ends closer than sqrt(dt) ln(1/eps) to lam0."""
    if curve.closed:
        return True
    reach = math.sqrt(dt) * math.log(1.0 / eps)
    x0 = curve.point(lam0, t_final)
    ends = [curve.point(curve.lo, t_final), curve.point(curve.hi, t_final)]
    short = min(float(np.linalg.norm(e - x0)) for e in ends)
    if short <= reach:
        warnings.warn(
            f"open curve ends {short:.3g} from the target, inside the kernel reach "
            f"{reach:.3g}; the result is that of the truncated curve",
            TruncationWarning, stacklevel=3)
        return False
    return True
