"""Integer-order Bessel and Hankel functions of real positive argument.

J_n is obtained from Miller's backward recurrence normalised with the
Neumann sum ``J_0 + 2 sum J_2k = 1`` (the power series is used below
``z = 1``).  Y_0 and Y_1 come from the Neumann-type series in J_k, and
higher orders from upward recurrence, which is the stable direction for Y.

Only what the DtN boundary condition needs is provided: real z > 0,
integer orders up to :data:`MAX_ORDER`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_ORDER = 1024
EULER_GAMMA = 0.57721566490153286061

_SERIES_LIMIT = 1.0
_RESCALE_AT = 1e200


class BesselDomainError(ValueError):
    """Order or argument outside the supported domain."""


def _check(n: int, z: float) -> None:
    if int(n) != n or n < 0 or n > MAX_ORDER:
        raise BesselDomainError(f"order must be an integer in [0, {MAX_ORDER}], got {n}")
    if not (math.isfinite(z) and z > 0.0):
        raise BesselDomainError(f"argument must be finite and positive, got {z}")


def _j_series(n: int, z: float) -> float:
    # (z/2)^n / n! in log space so tiny z or large n underflow gracefully
    log_lead = n * math.log(0.5 * z) - math.lgamma(n + 1)
    if log_lead < -745.0:
        return 0.0
    q = -0.25 * z * z
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * (n + k))
        total += term
        if abs(term) <= 1e-17 * abs(total):
            break
    return math.exp(log_lead) * total


def _miller(z: float, nmax: int) -> tuple[np.ndarray, float, float]:
    """Backward recurrence for J_0..J_M, normalised; returns (J, sum_u, sum_v).

    ``sum_u`` and ``sum_v`` are the Neumann sums needed for Y_0 and Y_1:
    sum_u = sum_{k>=1} (-1)^k J_2k / k,
    sum_v = sum_{k odd >= 3} (-1)^((k-1)/2) k/(k^2-1) J_k.
    """
    start = int(max(nmax, z) + 30 + 12.0 * z ** (1.0 / 3.0))
    start += start % 2
    f = np.zeros(start + 2)
    f[start] = 1e-300
    for k in range(start, 0, -1):
        f[k - 1] = (2.0 * k / z) * f[k] - f[k + 1]
        if abs(f[k - 1]) > _RESCALE_AT:
            f[k - 1 :] *= 1.0 / _RESCALE_AT
    norm = f[0] + 2.0 * f[2 : start + 1 : 2].sum()
    j = f[: start + 1] / norm
    ks = np.arange(2, start + 1, 2)
    sum_u = float(np.sum(np.where((ks // 2) % 2 == 0, 1.0, -1.0) * j[ks] / (ks // 2)))
    ko = np.arange(3, start + 1, 2)
    sum_v = float(np.sum(np.where((ko // 2) % 2 == 0, 1.0, -1.0) * ko / (ko * ko - 1.0) * j[ko]))
    return j, sum_u, sum_v


def bessel_j_orders(nmax: int, z: float) -> np.ndarray:
    """J_0(z), ..., J_nmax(z) as a float array."""
    _check(nmax, z)
    if z < _SERIES_LIMIT:
        return np.array([_j_series(n, z) for n in range(nmax + 1)])
    j, _, _ = _miller(z, nmax)
    return j[: nmax + 1].copy()


def _y01(z: float) -> tuple[float, float]:
    if z < _SERIES_LIMIT:
        # classical ascending series with harmonic numbers
        q = 0.25 * z * z
        lg = math.log(0.5 * z) + EULER_GAMMA
        j0 = _j_series(0, z)
        j1 = _j_series(1, z)
        s0 = 0.0
        term = 1.0
        harm = 0.0
        for k in range(1, 60):
            term *= -q / (k * k)
            harm += 1.0 / k
            s0 -= term * harm
            if abs(term) < 1e-18:
                break
        y0 = (2.0 / math.pi) * (lg * j0 + s0)
        # Y_1 = (2/pi) lg J_1 - 2/(pi z) - (z/(2 pi)) sum_k (H_k + H_{k+1}) (-q)^k / (k!(k+1)!)
        s1 = 0.0
        term = 1.0
        hk = 0.0
        for k in range(0, 60):
            if k > 0:
                term *= -q / (k * (k + 1))
                hk += 1.0 / k
            hk1 = hk + 1.0 / (k + 1)
            s1 += term * (hk + hk1)
            if k > 0 and abs(term) < 1e-18:
                break
        y1 = (2.0 / math.pi) * lg * j1 - 2.0 / (math.pi * z) - (z / (2.0 * math.pi)) * s1
        return y0, y1
    j, su, sv = _miller(z, 1)
    lg = math.log(0.5 * z) + EULER_GAMMA
    y0 = (2.0 / math.pi) * (lg * j[0] - 2.0 * su)
    # Y_1 = -Y_0', differentiating the Y_0 series term by term
    y1 = (2.0 / math.pi) * ((lg - 1.0) * j[1] - j[0] / z - 4.0 * sv)
    return y0, y1


def bessel_y_orders(nmax: int, z: float) -> np.ndarray:
    """Y_0(z), ..., Y_nmax(z) by upward recurrence (overflows to -inf at extreme orders)."""
    _check(nmax, z)
    y = np.empty(nmax + 1)
    y0, y1 = _y01(z)
    y[0] = y0
    if nmax >= 1:
        y[1] = y1
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, nmax):
            y[n + 1] = (2.0 * n / z) * y[n] - y[n - 1]
    return y


def bessel_j(n: int, z: float) -> float:
    """Bessel function of the first kind J_n(z)."""
    _check(n, z)
    if z < _SERIES_LIMIT:
        return _j_series(int(n), z)
    return float(bessel_j_orders(int(n), z)[int(n)])


def bessel_y(n: int, z: float) -> float:
    """Bessel function of the second kind Y_n(z)."""
    _check(n, z)
    return float(bessel_y_orders(int(n), z)[int(n)])


@dataclass(frozen=True)
class HankelTable:
    """H_n^(1)(z) and its derivative for n = 0..order_max at one argument.

    Arrays are read-only; the table can be shared between threads.
    """

    order_max: int
    argument: float
    h: np.ndarray
    hp: np.ndarray

    @property
    def j(self) -> np.ndarray:
        return self.h.real

    @property
    def y(self) -> np.ndarray:
        return self.h.imag


def hankel_table(order_max: int, z: float) -> HankelTable:
    """Tabulate H_n^(1)(z) = J_n + iY_n and H_n^(1)'(z) for n <= order_max."""
    _check(order_max, z)
    top = max(order_max, 1)  # H_0' = -H_1 needs order 1
    j = bessel_j_orders(top, z)
    y = bessel_y_orders(top, z)
    h = j + 1j * y
    hp = np.empty(order_max + 1, dtype=complex)
    hp[0] = -h[1]
    n = np.arange(1, order_max + 1)
    with np.errstate(over="ignore", invalid="ignore"):
        hp[1:] = h[:order_max] - (n / z) * h[1 : order_max + 1]
    h = h[: order_max + 1].copy()
    h.setflags(write=False)
    hp.setflags(write=False)
    return HankelTable(order_max=int(order_max), argument=float(z), h=h, hp=hp)


def dtn_coefficients(nmax: int, kappa0: float, R: float) -> np.ndarray:
    """kappa0 * H_n'(kappa0 R) / H_n(kappa0 R) for n = 0..nmax.

    Uses the ratio q_n = H_{n-1}/H_n, which obeys 1/q_{n+1} = 2n/z - q_n
    and never overflows even where |H_n| itself would.
    """
    z = kappa0 * R
    _check(nmax, z)
    j = bessel_j_orders(1, z)
    y = bessel_y_orders(1, z)
    h0 = j[0] + 1j * y[0]
    h1 = j[1] + 1j * y[1]
    out = np.empty(nmax + 1, dtype=complex)
    out[0] = -h1 / h0
    q = h0 / h1
    for n in range(1, nmax + 1):
        out[n] = q - n / z
        q = 1.0 / (2.0 * n / z - q)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise FloatingPointError(f"DtN coefficient not finite at order {bad}, kappa0*R = {z}")
    return kappa0 * out


def dtn_coefficient(n: int, kappa0: float, R: float) -> complex:
    """kappa0 H_n^(1)'(kappa0 R) / H_n^(1)(kappa0 R)."""
    if not (kappa0 > 0 and R > 0):
        raise BesselDomainError("kappa0 and R must be positive")
    return complex(dtn_coefficients(int(n), kappa0, R)[int(n)])


def inverse_hankel(nmax: int, z: float) -> np.ndarray:
    """1 / H_n^(1)(z) for n = 0..nmax; orders where H_n overflows give 0."""
    _check(nmax, z)
    j = bessel_j_orders(nmax, z)
    y = bessel_y_orders(nmax, z)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        inv = 1.0 / (j + 1j * y)
    inv[~np.isfinite(y)] = 0.0
    return inv
