"""Reference values for the layer potentials by two independent routes.

Route (a) integrates the slices on dyadic lag panels [2^i d0, 2^(i+1) d0]
from d0 = 1e-14 up to dt (20 Gauss-Legendre nodes each) and removes the
leading tail error by Richardson extrapolation between d0 and d0 / 4.
Route (b) uses the exponential substitution lag = exp(-u) on
[1e-13, dt], with 48 Gauss-Legendre nodes per u-panel of length at most 8,
plus the same Richardson-corrected tail at its own delta.  A single 48-node panel would miss the sharp
transition at lag ~ r^2 for targets a distance r off the curve.  A value
is returned only when the two agree to ``tol * max(|a|, |b|, sqrt(dt))``.

Bridge requests have a smooth integrand: route (a) is a composite 4-panel
20-point rule in the lag, route (b) a single 48-point panel.

Spatial integrals use 24-point panels.  Results are cached on disk, keyed
by the curve, density, target, step, layer and a version stamp.
"""

from dataclasses import asdict, dataclass, replace
import hashlib
import json
import math
import os
import tempfile

import numpy as np

from . import quadrature as quad
from .potentials import (Method, _tail, resolve_anchor, slices)

VERSION = "heatlayer-oracle-4"

_SPATIAL_M = 24
_SPATIAL_RTOL = 1e-15
_DELTA_A = 1e-14
_DELTA_B = 1e-13
# route (b): graded panels no longer than this in u = -log(lag)
_GRADED_SPAN = 8.0


class OracleDisagreement(RuntimeError):
    """The two oracle routes differ by more than the requested tolerance."""

    def __init__(self, message, route_a, route_b):
        super().__init__(message)
        self.route_a = route_a
        self.route_b = route_b


@dataclass(frozen=True)
class OracleResult:
    value: float
    error: float
    effort: int
    route_a: float
    route_b: float
    converged: bool = True


def reference_model_integral(delta, dt):
    """int_delta^dt t^(-1/2) dt = 2 (sqrt(dt) - sqrt(delta))."""
    if not 0 <= delta <= dt:
        raise ValueError("need 0 <= delta <= dt")
    return 2.0 * (math.sqrt(dt) - math.sqrt(delta))


# ---------------------------------------------------------------------------
# cache


def cache_dir():
    return os.environ.get("HEATLAYER_CACHE", os.path.join(".cache", "heatlayer"))


def cache_key(req, tol):
    ck = getattr(req.curve, "key", None)
    dk = getattr(req.density, "key", None)
    if ck is None or dk is None:
        return None
    parts = [ck, dk, repr(tuple(req.x)), repr(float(req.dt)), repr(float(req.t_eval)),
             req.layer, req.kind, repr(float(tol)), VERSION]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()


def _cache_read(key):
    path = os.path.join(cache_dir(), key + ".json")
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, ValueError):
        return None
    if data.get("version") != VERSION:
        return None
    return OracleResult(**data["result"])


def _cache_write(key, result):
    root = cache_dir()
    try:
        os.makedirs(root, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=root, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump({"version": VERSION, "result": asdict(result)}, fh)
        os.replace(tmp, os.path.join(root, key + ".json"))
    except OSError:
        pass


# ---------------------------------------------------------------------------
# routes


def _weighted_sum(req, anchor, lags, weights):
    B = slices(req.curve, req.density, anchor, req.t_eval, lags, req.layer,
               _SPATIAL_M, _SPATIAL_RTOL)
    return math.fsum(weights * B / np.sqrt(4 * math.pi * lags))


def _route_a(req, anchor):
    dt = req.dt
    x, w = quad.legendre_nodes(20)
    d0 = _DELTA_A
    # panels from d0 / 4 upward; the two lowest only enter V(d0 / 4)
    edges = [d0 / 4, d0 / 2]
    e = d0
    while e < dt:
        edges.append(e)
        e *= 2
    edges.append(dt)
    parts = []
    nodes = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        lags = 0.5 * (lo + hi) + half * x
        parts.append(_weighted_sum(req, anchor, lags, half * w))
        nodes += len(lags)
    upper = math.fsum(parts[2:])
    v1 = upper + _tail(req, anchor, d0)
    v4 = math.fsum(parts) + _tail(req, anchor, d0 / 4)
    return (8 * v4 - v1) / 7, nodes


def _route_b(req, anchor):
    delta = min(_DELTA_B, 0.5 * req.dt)
    u0 = -math.log(req.dt)
    u1 = -math.log(delta)
    count = max(1, math.ceil((u1 - u0) / _GRADED_SPAN))
    x, w = quad.legendre_nodes(48)
    parts = []
    for i in range(count):
        a = u0 + (u1 - u0) * i / count
        b = u0 + (u1 - u0) * (i + 1) / count
        half = 0.5 * (b - a)
        lags = np.exp(-(0.5 * (a + b) + half * x))
        parts.append(_weighted_sum(req, anchor, lags, half * w * lags))
    # extra panel [delta / 4, delta] for the Richardson step
    lo, hi = -math.log(delta), -math.log(delta / 4)
    half = 0.5 * (hi - lo)
    lags = np.exp(-(0.5 * (lo + hi) + half * x))
    extra = _weighted_sum(req, anchor, lags, half * w * lags)
    v1 = math.fsum(parts) + _tail(req, anchor, delta)
    v4 = math.fsum(parts + [extra]) + _tail(req, anchor, delta / 4)
    return (8 * v4 - v1) / 7, 48 * (count + 1)


def _bridge_routes(req, anchor):
    dt = req.dt
    x, w = quad.legendre_nodes(20)
    parts = []
    for i in range(4):
        lo = dt + i * dt / 4
        hi = dt + (i + 1) * dt / 4
        half = 0.5 * (hi - lo)
        parts.append(_weighted_sum(req, anchor, 0.5 * (lo + hi) + half * x, half * w))
    a = math.fsum(parts)
    lags, wb = quad.lag_rule_gauss_legendre(48, dt, 2 * dt)
    b = _weighted_sum(req, anchor, lags, wb)
    return a, b, 80 + 48


def reference_potential(req, tol=1e-12, use_cache=True):
    """High-accuracy value of the potential described by ``req``.

    ``req.method`` is ignored.  Raises OracleDisagreement when the routes
    differ by more than ``tol * max(|a|, |b|, sqrt(dt))``.
    """
    if not tol >= 1e-12:
        raise ValueError("oracle tolerance must be >= 1e-12")
    key = cache_key(req, tol) if use_cache else None
    if key is not None:
        hit = _cache_read(key)
        if hit is not None:
            return hit
    req = replace(req, method=Method("graded", n=48, m=_SPATIAL_M))
    anchor = resolve_anchor(req.curve, req.x, req.t_eval)
    if req.kind == "bridge":
        a, b, effort = _bridge_routes(req, anchor)
    else:
        a, na = _route_a(req, anchor)
        b, nb = _route_b(req, anchor)
        effort = na + nb
    err = abs(a - b)
    bound = tol * max(abs(a), abs(b), math.sqrt(req.dt))
    if err > bound:
        raise OracleDisagreement(
            f"oracle routes disagree: {a!r} vs {b!r} (|diff| {err:.3g} > {bound:.3g})", a, b)
    result = OracleResult(value=a, error=err, effort=effort, route_a=a, route_b=b)
    if key is not None:
        _cache_write(key, result)
    return result
