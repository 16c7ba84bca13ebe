import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatlayer import geometry as geo
from heatlayer.asymptotics import (AsymptoticInput, MissingDerivativeError, asym_bridge_double,
                                   asym_bridge_single, asym_double, asym_single,
                                   density_derivatives)
from heatlayer.specfun import e32, erfc

from orders import SMOOTH, oracle_value, order_ratios, spread

LINE = geo.Segment(-10.0, 10.0)
ONE = geo.ConstantDensity(1.0)


def frame(c=0.0, dt=0.01, kappa=0.0, v=0.0):
    r = c * math.sqrt(dt)
    return geo.LocalFrame(x0=np.zeros(2), n=np.array([0.0, 1.0]), r=r, c=c, kappa=kappa,
                          v=v, lam0=0.0, dt=dt, t_final=dt)


def test_single_on_boundary():
    assert asym_single(AsymptoticInput(frame(0.0, 0.01), 1.0)) == pytest.approx(
        0.05641895835477563, rel=1e-15)


def test_zero_density():
    f = frame(0.7, 0.01, 2.0, 1.0)
    assert asym_single(AsymptoticInput(f, 0.0)) == 0.0
    assert asym_double(AsymptoticInput(f, 0.0)) == 0.0
    assert asym_double(AsymptoticInput(f, 0.0, 1.0, 1.0), order="higher") == 0.0
    assert asym_bridge_single(AsymptoticInput(f, 0.0)) == 0.0
    assert asym_bridge_double(AsymptoticInput(f, 0.0)) == 0.0


def test_single_flat_line_against_oracle():
    dt = 0.01
    val = asym_single(AsymptoticInput(frame(1.0, dt), 1.0))
    assert val == pytest.approx(0.5 * math.sqrt(dt / math.pi) * e32(0.25), rel=1e-15)
    # static flat line with constant density: the expansion has no remainder
    assert abs(val - oracle_value(LINE, ONE, "single", 1.0, dt)) < 1e-13


def test_double_on_boundary_unit_circle():
    dt = 1e-4
    val = asym_double(AsymptoticInput(frame(0.0, dt, kappa=1.0), 1.0))
    assert val == pytest.approx(-math.sqrt(dt / math.pi) / 2, rel=1e-15)
    assert val == pytest.approx(-2.82094e-3, abs=1e-8)
    ref = oracle_value(geo.Circle(1.0), ONE, "double", 0.0, dt)
    assert abs(val - ref) < dt ** 1.5


@pytest.mark.parametrize("c", [1.0, -1.0])
def test_double_flat_line_jump(c):
    val = asym_double(AsymptoticInput(frame(c, 0.01), 1.0))
    assert val == pytest.approx(-0.5 * math.copysign(1, c) * erfc(0.5), rel=1e-15)
    # interior targets (c > 0) carry -mu/2
    assert abs(val - oracle_value(LINE, ONE, "double", c, 0.01)) < 1e-13


def test_double_flat_line_difference():
    up = asym_double(AsymptoticInput(frame(1.0), 1.0))
    down = asym_double(AsymptoticInput(frame(-1.0), 1.0))
    assert up - down == pytest.approx(-erfc(0.5), rel=1e-15)


def test_higher_order_needs_derivatives():
    with pytest.raises(MissingDerivativeError):
        asym_double(AsymptoticInput(frame(0.5), 1.0), order="higher")
    with pytest.raises(ValueError):
        asym_double(AsymptoticInput(frame(0.5), 1.0), order="third")


@pytest.mark.parametrize("order", ["leading", "higher"])
@pytest.mark.parametrize("kappa,v", [(1.0, 0.0), (3.0, -1.5), (-2.0, 0.7)])
def test_limit_consistency(order, kappa, v):
    mu = 1.7
    args = (mu, 0.3, -0.4) if order == "higher" else (mu,)
    at0 = asym_double(AsymptoticInput(frame(0.0, 1e-3, kappa, v), *args), order=order)
    for c, sign in ((1e-6, -1), (-1e-6, 1)):
        near = asym_double(AsymptoticInput(frame(c, 1e-3, kappa, v), *args), order=order)
        assert near == pytest.approx(at0 + sign * 0.5 * mu, abs=1e-5 * (1 + mu))


def test_bridge_single_on_boundary_constant():
    dt = 0.01
    val = asym_bridge_single(AsymptoticInput(frame(0.0, dt), 1.0))
    assert val == pytest.approx((math.sqrt(2) - 1) * math.sqrt(dt / math.pi), rel=1e-15)


def test_bridge_single_flat_line_off_surface():
    dt = 0.01
    val = asym_bridge_single(AsymptoticInput(frame(2.0, dt), 1.0))
    ref = oracle_value(LINE, ONE, "single", 2.0, dt, kind="bridge")
    assert abs(val - ref) < dt ** 1.5


def test_bridge_double_on_boundary():
    dt = 1e-4
    val = asym_bridge_double(AsymptoticInput(frame(0.0, dt, kappa=1.0), 1.0))
    assert val == pytest.approx(-(math.sqrt(2) - 1) * math.sqrt(dt / math.pi) / 2, rel=1e-15)
    ref = oracle_value(geo.Circle(1.0), ONE, "double", 0.0, dt, kind="bridge")
    assert abs(val - ref) < dt ** 1.5
    assert asym_bridge_double(AsymptoticInput(frame(0.0, dt), 1.0)) == 0.0


@settings(max_examples=200, deadline=None)
@given(c=st.floats(-6, 6), kappa=st.floats(-5, 5), v=st.floats(-5, 5),
       dt=st.floats(1e-8, 1e-1))
def test_bridge_plus_local_equals_double_step(c, kappa, v, dt):
    # S over [0, 2dt] at 2dt = S over [dt, 2dt] + S_B over [0, dt]; the leading
    # terms of the expansions satisfy this identity exactly
    r = c * math.sqrt(dt)
    local = asym_single(AsymptoticInput(frame(c, dt, kappa, v), 1.0))
    bridge = asym_bridge_single(AsymptoticInput(frame(c, dt, kappa, v), 1.0))
    full = asym_single(AsymptoticInput(frame(r / math.sqrt(2 * dt), 2 * dt, kappa, v), 1.0))
    assert local + bridge == pytest.approx(full, rel=1e-13, abs=1e-300)


def test_oracle_bridge_plus_local_is_full_step():
    from heatlayer.oracle import reference_potential
    from heatlayer.potentials import Method, PotentialRequest
    circ = geo.Circle(1.0)
    dt = 1e-3
    x = (0.97, 0.0)
    m = Method("hybrid")
    local = reference_potential(PotentialRequest("single", x, dt, m, circ, SMOOTH, t_final=2 * dt))
    bridge = reference_potential(PotentialRequest("single", x, dt, m, circ, SMOOTH, kind="bridge"))
    full = reference_potential(PotentialRequest("single", x, 2 * dt, m, circ, SMOOTH))
    assert local.value + bridge.value == pytest.approx(full.value, abs=1e-13)


# finite-difference density derivatives --------------------------------------

@pytest.mark.parametrize("rate", [0.0, 0.5])
@pytest.mark.parametrize("theta", [0.0, 0.3, 2.0])
def test_density_derivatives(rate, theta):
    curve = geo.Circle(1.0, rate=rate)
    t = 0.2
    R = curve.radius(t)
    x = curve.point(theta, t)
    f = geo.local_frame(curve, x, 1e-3, t)
    mu_ss, mu_tau = density_derivatives(curve, SMOOTH, f)
    # mu = 1 + 0.3 x + 0.2 y^2 + 0.5 t along x = R cos(s/R), y = R sin(s/R)
    ref_ss = -0.3 * math.cos(theta) / R + 0.4 * math.cos(2 * theta)
    grad = np.array([0.3, 0.4 * x[1]])
    ref_tau = 0.5 + f.v * (grad @ f.n)
    assert mu_ss == pytest.approx(ref_ss, abs=1e-6)
    assert mu_tau == pytest.approx(ref_tau, abs=1e-6)


# convergence orders on a growing circle -----------------------------------------

GROWING = geo.Circle(1.0, rate=0.5)


@pytest.mark.parametrize("layer,c,p,order", [
    ("single", 0.0, 1.5, "leading"),
    ("single", 1.0, 1.5, "leading"),
    ("double", 1.0, 1.0, "leading"),
    ("double", -1.0, 1.0, "leading"),
    ("double", 1.0, 1.5, "higher"),
    ("double", 0.05, 1.5, "higher"),
    ("double", 0.0, 1.5, "leading"),
])
def test_orders_on_growing_circle(layer, c, p, order):
    assert spread(order_ratios(GROWING, SMOOTH, layer, c, p, order)) <= 4


def test_leading_double_is_not_better_than_first_order():
    # the leading formula really is O(dt) off the boundary: dividing by
    # dt^(3/2) makes the ratio grow like dt^(-1/2)
    r = order_ratios(GROWING, SMOOTH, "double", 1.0, 1.5, "leading")
    assert r[-1] / r[0] > 3
