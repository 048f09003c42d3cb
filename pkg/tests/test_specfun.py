import math

import numpy as np
import pytest

from cavitydtn.specfun import (
    MAX_ORDER,
    BesselDomainError,
    bessel_j,
    bessel_j_orders,
    bessel_y,
    bessel_y_orders,
    dtn_coefficient,
    dtn_coefficients,
    hankel_table,
    inverse_hankel,
)
from oracles import j_series, y_series

GRID_Z = [0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 200.0]


def test_j0_at_tiny_argument():
    assert bessel_j(0, 1e-300) == pytest.approx(1.0, abs=1e-12)


def test_high_order_small_argument_vanishes():
    z = 1e-3
    assert 0 <= bessel_j(5, z) <= z**5


@pytest.mark.parametrize("n,z", [(1, 2.0), (0, 0.3), (3, 7.5), (10, 15.0), (0, 20.0), (25, 12.0)])
def test_j_matches_power_series(n, z):
    ref = j_series(n, z)
    assert bessel_j(n, z) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("n,z", [(0, 0.1), (1, 0.5), (2, 3.0), (5, 10.0), (0, 19.0)])
def test_y_matches_series(n, z):
    assert bessel_y(n, z) == pytest.approx(y_series(n, z), rel=1e-11)


def test_y7_recurrence_oracle():
    # upward recurrence seeded by independent series values of Y_0, Y_1
    z = 3.5
    y = [y_series(0, z), y_series(1, z)]
    for n in range(1, 7):
        y.append(2 * n / z * y[n] - y[n - 1])
    assert bessel_y(7, 3.5) == pytest.approx(y[7], rel=1e-11)


def test_y0_large_argument_asymptotics():
    z = 100.0
    assert abs(bessel_y(0, z) - math.sqrt(2 / (math.pi * z)) * math.sin(z - math.pi / 4)) < 1e-3


@pytest.mark.parametrize("z", GRID_Z)
def test_wronskian_grid(z):
    t = hankel_table(61, z)
    j, y = t.j, t.y
    n = np.arange(0, 61)
    jp = np.where(n == 0, -j[1], j[np.maximum(n - 1, 0)] - n / z * j[:61])
    yp = np.where(n == 0, -y[1], y[np.maximum(n - 1, 0)] - n / z * y[:61])
    w = j[:61] * yp - jp * y[:61]
    assert np.max(np.abs(w / (2 / (math.pi * z)) - 1)) <= 1e-11


@pytest.mark.parametrize("z", GRID_Z)
def test_derivative_recurrence(z):
    t = hankel_table(60, z)
    n = np.arange(1, 61)
    lhs = t.hp[1:]
    rhs = t.h[:-1] - n / z * t.h[1:]
    finite = np.isfinite(rhs)
    assert np.all(np.abs(lhs - rhs)[finite] <= 1e-12 * np.abs(rhs)[finite])
    assert t.hp[0] == -t.h[1]


@pytest.mark.parametrize("z", [0.5, 5.0, 50.0])
def test_three_term_recurrence_stable_direction(z):
    n = np.arange(1, 40)
    y = bessel_y_orders(40, z)
    res = np.abs(y[2:] - (2 * n / z * y[1:-1] - y[:-2]))
    assert np.all(res <= 1e-10 * np.abs(y[2:]))
    j = bessel_j_orders(40, z)
    res = np.abs(j[:-2] - (2 * n / z * j[1:-1] - j[2:]))
    assert np.all(res <= 1e-10 * np.maximum(np.abs(j[:-2]), 1e-300) + 1e-300)


def test_table_order_zero():
    t = hankel_table(0, 1.0)
    assert t.h.shape == (1,)
    assert t.h[0].real == pytest.approx(j_series(0, 1.0), rel=1e-13)
    assert t.h[0].imag == pytest.approx(y_series(0, 1.0), rel=1e-12)


def test_table_is_read_only():
    t = hankel_table(5, 2.0)
    with pytest.raises(ValueError):
        t.h[0] = 0


def test_evanescent_growth():
    t = hankel_table(40, 5.0)
    mag = np.abs(t.h[6:])
    assert np.all(np.diff(mag) > 0)


def test_dtn_coefficient_large_order_bound():
    c = dtn_coefficient(200, 10.0, 1.0)
    ratio = abs(c) / 10.0 / (200 / 10.0)
    assert 0.5 <= ratio <= 2.0


def test_dtn_coefficient_order_zero_from_series():
    z = 1.0
    h0 = j_series(0, z) + 1j * y_series(0, z)
    h1 = j_series(1, z) + 1j * y_series(1, z)
    c = dtn_coefficient(0, 1.0, 1.0)
    assert c == pytest.approx(-h1 / h0, rel=1e-12)
    assert c.imag > 0


def test_dtn_coefficient_scaling():
    for n in (0, 3, 17):
        assert dtn_coefficient(n, 3.0 * 2.5, 1.2 / 3.0) == pytest.approx(3.0 * dtn_coefficient(n, 2.5, 1.2), rel=1e-12)


def test_dtn_coefficients_match_table():
    t = hankel_table(30, math.pi)
    assert np.allclose(dtn_coefficients(30, 2.0, math.pi / 2), 2.0 * t.hp / t.h, rtol=1e-12)


def test_inverse_hankel_is_zero_beyond_overflow():
    inv = inverse_hankel(MAX_ORDER, 1.0)
    assert inv[-1] == 0
    assert np.all(np.isfinite(inv))


@pytest.mark.parametrize("n,z", [(-1, 1.0), (MAX_ORDER + 1, 1.0), (1, 0.0), (1, -2.0), (1, math.inf), (1.5, 1.0)])
def test_domain_errors(n, z):
    with pytest.raises(BesselDomainError):
        bessel_j(n, z)
    with pytest.raises(BesselDomainError):
        bessel_y(n, z)
