"""Heat kernel, fixed-time spatial slices and layer-potential evaluators.

The local potentials over one step ending at ``t_final`` are written with the
lag ``l = t_final - tau`` as

    S = int_0^dt B_S(l) / sqrt(4 pi l) dl,
    D = int_0^dt B_D(l) / sqrt(4 pi l) dl,

where the slices

    B_S(l) = int_{Gamma(t_final - l)} exp(-|x - y|^2 / 4l) / sqrt(4 pi l) sigma ds_y
    B_D(l) = int_{Gamma(t_final - l)} (x - y).n_y exp(-|x - y|^2 / 4l) / (4 sqrt(pi) l^1.5) mu ds_y

stay bounded as l -> 0.  ``n_y`` is the outward normal, so an interior
target sees the jump -mu/2.

Spatial integrals use adaptive Gauss-Legendre panels restricted to the part
of the curve where the Gaussian exceeds exp(-42) (relative to its peak).
This keeps the spatial error near rounding level for every lag, which is
what lets the experiments isolate the time-quadrature error.
"""

from dataclasses import dataclass, field
import math
import re
import warnings

import numpy as np

from . import quadrature as quad
from .asymptotics import (AsymptoticInput, asym_bridge_double, asym_bridge_single,
                          asym_double, asym_single, density_derivatives)
from .geometry import (closest_point, curve_point, distance_minima,
                       frame_at)

_SQRT_PI = math.sqrt(math.pi)
_SQRT_4PI = math.sqrt(4 * math.pi)

# exp(-42) ~ 6e-19: Gaussian cut-off for the spatial windows
_CUTOFF = 42.0
# beyond this many sqrt(delta) the asymptotic tail is below exp(-400)
_TAIL_REACH = 40.0
_MAX_ROUNDS = 40
# bisection stops (with a ResolutionWarning) beyond this many panels
_MAX_PANELS = 20000


class ResolutionWarning(UserWarning):
    """The adaptive spatial quadrature stopped before meeting its tolerance."""


def heat_kernel(x, t):
    """Two-dimensional heat kernel exp(-|x|^2 / 4t) / (4 pi t)."""
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t!r}")
    x = np.asarray(x, dtype=float)
    r2 = np.einsum("...i,...i->...", x, x)
    return np.exp(-r2 / (4 * t)) / (4 * math.pi * t)


# ---------------------------------------------------------------------------
# methods


@dataclass(frozen=True)
class Method:
    """Time-quadrature method descriptor.

    ``kind`` is one of asymptotic, product-integration, gauss-jacobi,
    adaptive-dyadic, graded, hybrid.  ``n`` is the node count (k for
    product integration), ``delta`` the tail length (None selects the
    default), ``m`` the spatial Gauss-Legendre order per panel.
    """

    kind: str
    n: int = 16
    delta: float = None
    m: int = 16

    KINDS = ("asymptotic", "product-integration", "gauss-jacobi",
             "adaptive-dyadic", "graded", "hybrid")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown method kind {self.kind!r}")
        if self.kind == "product-integration" and not 0 <= self.n <= 12:
            raise ValueError("product integration order must be in [0, 12]")
        if self.kind == "gauss-jacobi" and not 1 <= self.n <= 64:
            raise ValueError("gauss-jacobi order must be in [1, 64]")
        if self.kind in ("adaptive-dyadic", "graded", "hybrid") and not 1 <= self.n <= 200:
            raise ValueError(f"{self.kind} order must be in [1, 200]")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 2 <= self.m <= 64:
            raise ValueError("spatial order m must be in [2, 64]")

    @classmethod
    def parse(cls, text, m=16):
        """Parse ``"hybrid(16)"``, ``"adaptive-dyadic(9,1e-9)"``, ``"asymptotic"``."""
        s = text.strip()
        hit = re.fullmatch(r"([a-z-]+)\s*(?:\(\s*([^)]*)\))?", s)
        if not hit:
            raise ValueError(f"cannot parse method {text!r}")
        kind = hit.group(1)
        args = [a.strip() for a in (hit.group(2) or "").split(",") if a.strip()]
        if kind == "asymptotic":
            if args:
                raise ValueError("asymptotic takes no parameters")
            return cls(kind, n=0, m=m)
        if not args or len(args) > 2:
            raise ValueError(f"method {text!r} needs (n) or (n, delta)")
        try:
            n = int(args[0])
            delta = float(args[1]) if len(args) == 2 else None
        except ValueError as exc:
            raise ValueError(f"bad parameters in {text!r}") from exc
        if kind in ("product-integration", "gauss-jacobi") and delta is not None:
            raise ValueError(f"{kind} takes a single parameter")
        return cls(kind, n=n, delta=delta, m=m)

    @property
    def label(self):
        if self.kind == "asymptotic":
            return "asymptotic"
        if self.delta is None:
            return f"{self.kind}({self.n})"
        return f"{self.kind}({self.n},{self.delta!r})"


def default_delta(eps, dt):
    """max(eps, 1e-12), capped at dt / 2."""
    return min(max(eps, 1e-12), 0.5 * dt)


@dataclass(frozen=True)
class PotentialRequest:
    """Everything needed to evaluate one layer potential at one target.

    For the local potential the integration runs over
    ``[t_final - dt, t_final]``; for the bridge over
    ``[t_final - 2 dt, t_final - dt]``.  ``t_final`` defaults to ``dt``
    (local) or ``2 dt`` (bridge).
    """

    layer: str
    x: tuple
    dt: float
    method: Method
    curve: object
    density: object
    eps: float = 1e-12
    t_final: float = None
    kind: str = "local"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.layer not in ("single", "double"):
            raise ValueError("layer must be 'single' or 'double'")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 1e-14 <= self.eps < 1e-1:
            raise ValueError("tolerance must lie in [1e-14, 1e-1)")
        if self.kind not in ("local", "bridge"):
            raise ValueError("kind must be 'local' or 'bridge'")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))

    @property
    def t_eval(self):
        if self.t_final is not None:
            return float(self.t_final)
        return self.dt if self.kind == "local" else 2 * self.dt

    @property
    def delta(self):
        if self.method.delta is not None:
            return min(self.method.delta, 0.5 * self.dt)
        return default_delta(self.eps, self.dt)


# ---------------------------------------------------------------------------
# spatial slices


@dataclass(frozen=True)
class Anchor:
    """Target position relative to a reference parameter on Gamma(t_eval)."""

    lam0: float
    offset: np.ndarray
    dist: float
    on_curve: bool


def resolve_anchor(curve, x, t_eval):
    """Closest point of Gamma(t_eval) to x as an anchor for chord evaluation."""
    x = np.asarray(x, dtype=float)
    lam_ref = curve.lo if curve.closed else 0.5 * (curve.lo + curve.hi)
    off = x - curve.point(lam_ref, t_eval)
    eta, dist = distance_minima(curve, off, lam_ref, t_eval)
    best = int(np.argmin(dist))
    lam0 = lam_ref + float(eta[best])
    offset = x - curve.point(lam0, t_eval)
    d = float(np.hypot(offset[0], offset[1]))
    on = d < 1e-13 * curve.scale
    if on:
        offset = np.zeros(2)
        d = 0.0
    return Anchor(lam0=lam0, offset=offset, dist=d, on_curve=on)



def _legendre_probe(m):
    # rows giving the Legendre coefficients of degree m-1 and m-2 from samples
    x, w = quad.legendre_nodes(m)
    V = np.polynomial.legendre.legvander(x, m - 1)
    rows = []
    for k in (m - 1, m - 2):
        rows.append(0.5 * (2 * k + 1) * w * V[:, k])
    return np.array(rows).T


_PROBES = {}


def _probe(m):
    if m not in _PROBES:
        _PROBES[m] = _legendre_probe(m)
    return _PROBES[m]


class _Slice:
    """Integrand of one slice B(lag) as a function of eta = lam - lam0."""

    def __init__(self, curve, density, anchor, t_eval, lag, layer):
        self.curve = curve
        self.density = density
        self.anchor = anchor
        self.t_eval = t_eval
        self.lag = lag
        self.tau = t_eval - lag
        self.layer = layer

    def dist(self, eta):
        d = self.anchor.offset - self.curve.chord(self.anchor.lam0, eta, self.t_eval, self.lag)
        return np.sqrt(np.einsum("...i,...i->...", d, d))

    def __call__(self, eta):
        c = self.curve
        lam = self.anchor.lam0 + eta
        d = self.anchor.offset - c.chord(self.anchor.lam0, eta, self.t_eval, self.lag)
        r2 = np.einsum("...i,...i->...", d, d)
        g = np.exp(-r2 / (4 * self.lag))
        tvec = c.d_lam(lam, self.tau)
        dens = self.density(c.point(lam, self.tau), self.tau)
        if self.layer == "single":
            speed = np.hypot(tvec[..., 0], tvec[..., 1])
            return g * dens * speed / math.sqrt(4 * math.pi * self.lag)
        cross = d[..., 0] * tvec[..., 1] - d[..., 1] * tvec[..., 0]
        return c.interior * cross * g * dens / (4 * _SQRT_PI * self.lag ** 1.5)


def _merge(intervals, period=None):
    intervals = sorted(intervals)
    out = []
    for a, b in intervals:
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    if period is not None and len(out) > 1 and out[-1][1] - period >= out[0][0]:
        a, b = out.pop()
        out[0][0] = a - period
        out[0][1] = max(out[0][1], b - period)
    return [tuple(v) for v in out]


def _windows(sl):
    """Parameter intervals (relative to lam0) where the Gaussian exceeds exp(-42)."""
    curve = sl.curve
    R = math.sqrt(4 * sl.lag * _CUTOFF)
    eta_m, dist_m = distance_minima(curve, sl.anchor.offset, sl.anchor.lam0,
                                    sl.t_eval, sl.lag)
    if curve.closed:
        P = curve.period
        lo_lim, hi_lim = -np.inf, np.inf
    else:
        P = None
        lo_lim = curve.lo - sl.anchor.lam0
        hi_lim = curve.hi - sl.anchor.lam0
    out = []
    for e, d in zip(eta_m, dist_m):
        if d >= R:
            continue
        tv = curve.d_lam(sl.anchor.lam0 + e, sl.tau)
        speed = max(float(np.hypot(tv[0], tv[1])), 1e-300)
        h0 = 1.25 * math.sqrt(R * R - d * d) / speed + 1e-15 * (1.0 + abs(e))
        ends = []
        for sign in (-1.0, 1.0):
            h = h0
            for _ in range(200):
                pos = e + sign * h
                if pos <= lo_lim or pos >= hi_lim:
                    break
                if P is not None and h >= 0.5 * P:
                    break
                if sl.dist(np.array(pos)) >= R:
                    break
                h *= 1.6
            ends.append(e + sign * h)
        a = max(ends[0], lo_lim)
        b = min(ends[1], hi_lim)
        if P is not None and b - a >= P:
            return [(e - 0.5 * P, e + 0.5 * P)]
        out.append((a, b))
    if not out:
        return []
    if P is not None:
        # shift into one period around the first window before merging
        ref = out[0][0]
        shifted = []
        for a, b in out:
            k = math.floor((a - ref) / P)
            shifted.append((a - k * P, b - k * P))
        merged = _merge(shifted, P)
        if sum(b - a for a, b in merged) >= P:
            c = 0.5 * (merged[0][0] + merged[0][1])
            return [(c - 0.5 * P, c + 0.5 * P)]
        return merged
    return _merge(out)


def _adaptive(f, intervals, m, panel, rtol):
    """Adaptive Gauss-Legendre panels; returns (value, converged)."""
    x, w = quad.legendre_nodes(m)
    probe = _probe(m)
    pending = []
    for a, b in intervals:
        k = max(1, min(64, math.ceil((b - a) / panel)))
        edges = np.linspace(a, b, k + 1)
        pending.extend(zip(edges[:-1], edges[1:]))
    done = []
    done_abs = []
    for _ in range(_MAX_ROUNDS):
        if not pending:
            return math.fsum(done), True
        P = np.array(pending)
        mid = 0.5 * (P[:, 0] + P[:, 1])
        half = 0.5 * (P[:, 1] - P[:, 0])
        eta = mid[:, None] + half[:, None] * x[None, :]
        vals = np.asarray(f(eta), dtype=float)
        contrib = half[:, None] * w[None, :] * vals
        est = contrib.sum(axis=1)
        absum = np.abs(contrib).sum(axis=1)
        scale = math.fsum(done_abs) + float(absum.sum())
        coef = np.abs(vals @ probe).sum(axis=1) * half
        tiny = half <= 4e-16 * (np.abs(mid) + np.abs(P[:, 1] - P[:, 0]) + 1.0)
        ok = (coef <= rtol * scale) | tiny
        done.extend(est[ok].tolist())
        done_abs.extend(absum[ok].tolist())
        nxt = []
        for (a, b), c in zip(P[~ok], mid[~ok]):
            nxt.append((a, c))
            nxt.append((c, b))
        pending = nxt
        if len(done) + len(pending) > _MAX_PANELS:
            break
    if pending:
        P = np.array(pending)
        mid = 0.5 * (P[:, 0] + P[:, 1])
        half = 0.5 * (P[:, 1] - P[:, 0])
        vals = np.asarray(f(mid[:, None] + half[:, None] * x[None, :]), dtype=float)
        done.extend((half[:, None] * w[None, :] * vals).sum(axis=1).tolist())
    return math.fsum(done), False


def _lag_zero(curve, density, anchor, t_eval, layer):
    """Limit of the slice as lag -> 0."""
    if not anchor.on_curve:
        return 0.0
    p, _, _, _, kappa, _ = curve_point(curve, anchor.lam0, t_eval)
    mu = float(density(p, t_eval))
    return mu if layer == "single" else -0.5 * kappa * mu


def slice_at_lag(curve, density, anchor, t_eval, lag, layer, m=16, rtol=5e-15):
    """B_S or B_D at one lag for a resolved anchor."""
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    if lag == 0:
        return _lag_zero(curve, density, anchor, t_eval, layer)
    sl = _Slice(curve, density, anchor, t_eval, lag, layer)
    iv = _windows(sl)
    if not iv:
        return 0.0
    # initial panel length: about 4 standard deviations of arc length
    tv = curve.d_lam(anchor.lam0, t_eval)
    speed = max(float(np.hypot(tv[0], tv[1])), 1e-300)
    panel = 4.0 * math.sqrt(lag) / speed
    value, ok = _adaptive(sl, iv, m, panel, rtol)
    if not ok:
        warnings.warn(f"spatial quadrature did not converge at lag {lag:.3g}",
                      ResolutionWarning, stacklevel=3)
    return value


def _slice_public(curve, density, x, t_eval, tau, m, layer):
    if not tau <= t_eval:
        raise ValueError("need tau <= t_eval")
    anchor = resolve_anchor(curve, x, t_eval)
    return slice_at_lag(curve, density, anchor, t_eval, t_eval - tau, layer, m)


def spatial_slice_single(curve, density, x, t_eval, tau, m=16):
    """B_S at time tau for evaluation time t_eval (bounded as tau -> t_eval)."""
    return _slice_public(curve, density, x, t_eval, tau, m, "single")


def spatial_slice_double(curve, density, x, t_eval, tau, m=16):
    """B_D at time tau for evaluation time t_eval (outward normal)."""
    return _slice_public(curve, density, x, t_eval, tau, m, "double")


def slices(curve, density, anchor, t_eval, lags, layer, m=16, rtol=5e-15):
    """Vector of slice values at the given lags."""
    return np.array([slice_at_lag(curve, density, anchor, t_eval, float(l), layer, m, rtol)
                     for l in lags])


# ---------------------------------------------------------------------------
# time integration


def _tail(req, anchor, delta, strict_frame=False):
    """Asymptotic formula over the last delta of the step (frame on Gamma(t_eval))."""
    if anchor.dist > _TAIL_REACH * math.sqrt(delta):
        return 0.0
    curve = req.curve
    t_eval = req.t_eval
    lam0 = anchor.lam0
    if strict_frame:
        lam0, _ = closest_point(curve, req.x, t_eval)
    frame = frame_at(curve, lam0, req.x, delta, t_eval)
    mu = float(req.density(frame.x0, t_eval))
    if req.layer == "single":
        return asym_single(AsymptoticInput(frame, mu))
    if 0 < abs(frame.c) < 0.1:
        mu_ss, mu_tau = density_derivatives(curve, req.density, frame)
        return asym_double(AsymptoticInput(frame, mu, mu_ss, mu_tau), order="higher")
    return asym_double(AsymptoticInput(frame, mu), order="leading")


def time_rule(method, dt, delta):
    """The TimeRule a method applies on [0, dt - delta] (None for asymptotic)."""
    k = method.kind
    if k == "product-integration":
        return quad.product_integration_weights(method.n, dt)
    if k == "gauss-jacobi":
        return quad.gauss_jacobi_sqrt(method.n, dt)
    if k == "adaptive-dyadic":
        return quad.dyadic_rule(method.n, delta, dt)
    if k in ("graded", "hybrid"):
        return quad.graded_rule(method.n, delta, dt)
    return None


def integrate_rule(req, anchor, rule, rtol=5e-15):
    """Apply a TimeRule in the lag variable to the slices of a request."""
    B = slices(req.curve, req.density, anchor, req.t_eval, rule.lags, req.layer,
               req.method.m, rtol)
    if rule.weighted:
        return math.fsum(rule.weights * B) / _SQRT_4PI
    return math.fsum(rule.weights * B / np.sqrt(4 * math.pi * rule.lags))


def eval_potential(req):
    """Local single- or double-layer potential over [t_final - dt, t_final].

    On the boundary the double layer returns its principal value.
    """
    if req.kind != "local":
        raise ValueError("use eval_bridge for bridge requests")
    anchor = resolve_anchor(req.curve, req.x, req.t_eval)
    kind = req.method.kind
    if kind == "asymptotic":
        return _tail(req, anchor, req.dt, strict_frame=True)
    delta = req.delta
    rule = time_rule(req.method, req.dt, delta)
    value = integrate_rule(req, anchor, rule)
    if kind in ("adaptive-dyadic", "graded", "hybrid"):
        value += _tail(req, anchor, delta)
    return value


def eval_bridge(req):
    """Potential over [t_final - 2dt, t_final - dt] evaluated at t_final.

    The kernel is smooth there, so every quadrature method reduces to one
    Gauss-Legendre panel in the lag with max(n, 16) nodes; ``asymptotic``
    uses the closed-form bridge expansions.
    """
    if req.kind != "bridge":
        raise ValueError("eval_bridge needs a request with kind='bridge'")
    anchor = resolve_anchor(req.curve, req.x, req.t_eval)
    if req.method.kind == "asymptotic":
        if anchor.dist > _TAIL_REACH * math.sqrt(req.dt):
            return 0.0
        lam0, _ = closest_point(req.curve, req.x, req.t_eval)
        frame = frame_at(req.curve, lam0, req.x, req.dt, req.t_eval)
        mu = float(req.density(frame.x0, req.t_eval))
        inp = AsymptoticInput(frame, mu)
        return asym_bridge_single(inp) if req.layer == "single" else asym_bridge_double(inp)
    n = max(req.method.n, 16)
    lags, w = quad.lag_rule_gauss_legendre(n, req.dt, 2 * req.dt)
    B = slices(req.curve, req.density, anchor, req.t_eval, lags, req.layer, req.method.m)
    return math.fsum(w * B / np.sqrt(4 * math.pi * lags))


def evaluate(req):
    """Dispatch on ``req.kind``."""
    return eval_potential(req) if req.kind == "local" else eval_bridge(req)
