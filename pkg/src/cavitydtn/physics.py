"""Material coefficients, plane-wave reference fields and TBC boundary data.

The reference field is the incident plane wave plus its reflection by the
PEC ground line.  In TM polarization the reflection is odd in x2 (the
total reference field vanishes on the ground); in TE it is even (its
normal derivative vanishes there).  Below the ground the closed forms are
used as an analytic extension.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .specfun import MAX_ORDER, inverse_hankel

log = logging.getLogger(__name__)

TM = "TM"
TE = "TE"
POLARIZATIONS = (TM, TE)


def check_polarization(pol: str) -> str:
    if pol not in POLARIZATIONS:
        raise ValueError(f"polarization must be 'TM' or 'TE', got {pol!r}")
    return pol


@dataclass(frozen=True)
class MaterialMap:
    """Relative permittivity and permeability per mesh region.

    Conductivity is folded into the imaginary part of ``eps_r``.  Regions
    that are not listed are free space.
    """

    kappa0: float
    regions: Mapping[int, tuple[complex, complex]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")
        for rid, (eps, mu) in self.regions.items():
            if complex(eps).imag < 0 or complex(mu).imag < 0:
                raise ValueError(f"region {rid}: material must be passive (Im eps_r, Im mu_r >= 0)")

    def material(self, region: int) -> tuple[complex, complex]:
        return tuple(complex(v) for v in self.regions.get(int(region), (1.0, 1.0)))  # type: ignore[return-value]

    def kappa_squared(self, region: int) -> complex:
        eps, mu = self.material(region)
        return self.kappa0**2 * eps * mu

    def kappa_squared_of(self, region_ids: np.ndarray, known: set[int] | None = None) -> np.ndarray:
        """Per-element kappa^2; ``known`` restricts which region ids are accepted."""
        region_ids = np.asarray(region_ids)
        ids = np.unique(region_ids)
        if known is not None:
            bad = [int(r) for r in ids if int(r) not in known]
            if bad:
                raise KeyError(f"unknown region id(s) {bad}")
        table = {int(r): self.kappa_squared(int(r)) for r in ids}
        out = np.empty(region_ids.shape, dtype=complex)
        for r, k2 in table.items():
            out[region_ids == r] = k2
        return out

    def has_magnetic_contrast(self, region_ids: np.ndarray) -> bool:
        return any(self.material(int(r))[1] != 1.0 for r in np.unique(region_ids))


def kappa_squared(mat: MaterialMap, region: int) -> complex:
    return mat.kappa_squared(region)


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave exp(i(alpha x1 - beta x2)) arriving at angle theta from the normal."""

    kappa0: float
    theta: float

    def __post_init__(self) -> None:
        if not self.kappa0 > 0:
            raise ValueError("kappa0 must be positive")
        # grazing incidence is admitted; the TM reference field is then zero
        if not (-0.5 * math.pi <= self.theta <= 0.5 * math.pi):
            raise ValueError(f"incident angle must lie in [-pi/2, pi/2], got {self.theta}")

    @property
    def alpha(self) -> float:
        return self.kappa0 * math.sin(self.theta)

    @property
    def beta(self) -> float:
        return self.kappa0 * math.cos(self.theta)


def _plane_pair(p, wave: IncidentWave, sign: float):
    p = np.asarray(p, dtype=float)
    x1, x2 = p[..., 0], p[..., 1]
    a, b = wave.alpha, wave.beta
    down = np.exp(1j * (a * x1 - b * x2))
    up = np.exp(1j * (a * x1 + b * x2))
    value = down + sign * up
    grad = np.stack([1j * a * value, -1j * b * down + sign * 1j * b * up], axis=-1)
    return value, grad


def reference_field_tm(p, wave: IncidentWave):
    """Value and gradient of exp(i(a x1 - b x2)) - exp(i(a x1 + b x2)); vectorised over p[..., 2]."""
    return _plane_pair(p, wave, -1.0)


def reference_field_te(p, wave: IncidentWave):
    """Value and gradient of exp(i(a x1 - b x2)) + exp(i(a x1 + b x2))."""
    return _plane_pair(p, wave, +1.0)


def reference_field(p, wave: IncidentWave, pol: str):
    return reference_field_tm(p, wave) if check_polarization(pol) == TM else reference_field_te(p, wave)


# ---------------------------------------------------------------------------
# TBC data
# ---------------------------------------------------------------------------

def series_length(wave: IncidentWave, R: float, tol: float, n_min: int = 1) -> int:
    """Number of Fourier terms for the boundary data.

    The n-th term is bounded by |1/H_n(kappa0 R)| independently of the
    angles, so the count stops once that envelope stays below
    ``tol * max`` for five consecutive orders (and at least ``n_min``).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    z = wave.kappa0 * R
    env = np.abs(inverse_hankel(MAX_ORDER, z))
    run_max = np.maximum.accumulate(env)
    small = env < tol * run_max
    count = 0
    for n in range(1, MAX_ORDER + 1):
        count = count + 1 if small[n] else 0
        if count >= 5 and n >= n_min:
            return n
    raise ArithmeticError(f"boundary data series did not converge within {MAX_ORDER} terms (kappa0 R = {z})")


def _tbc_series(phi, wave: IncidentWave, R: float, tol: float, n_min: int, pol: str) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    nmax = series_length(wave, R, tol, n_min)
    inv = inverse_hankel(nmax, wave.kappa0 * R)
    n = np.arange(1, nmax + 1)
    shift = wave.theta - 0.5 * math.pi
    coef = (1j ** ((n + 1) % 4)) * inv[1:]
    trig = np.sin if pol == TM else np.cos
    coef = coef * trig(n * shift)
    out = -(8.0 / (math.pi * R)) * (trig(np.multiply.outer(phi, n)) @ coef)
    if pol == TE:
        out = out - (4j / (math.pi * R)) * inv[0]
    return out


def tbc_data_tm(phi, wave: IncidentWave, R: float, tol: float = 1e-14, n_min: int = 1):
    """TM boundary data f = d_rho u_ref - B u_ref on the semicircle of radius R."""
    out = _tbc_series(phi, wave, R, tol, n_min, TM)
    return complex(out) if np.ndim(phi) == 0 else out


def tbc_data_te(phi, wave: IncidentWave, R: float, tol: float = 1e-14, n_min: int = 1):
    """TE boundary data g = d_rho u_ref - B u_ref, including the n = 0 mode."""
    out = _tbc_series(phi, wave, R, tol, n_min, TE)
    return complex(out) if np.ndim(phi) == 0 else out


def tbc_data(phi, wave: IncidentWave, R: float, pol: str, tol: float = 1e-14, n_min: int = 1):
    if check_polarization(pol) == TM:
        return tbc_data_tm(phi, wave, R, tol, n_min)
    return tbc_data_te(phi, wave, R, tol, n_min)


# ---------------------------------------------------------------------------
# H1 norm of the reference field
# ---------------------------------------------------------------------------

# symmetric 6-point rule, exact for degree 4 (barycentric weights, sum 1)
_A1, _B1, _W1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
_A2, _B2, _W2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
TRI_QUAD_BARY = np.array(
    [[_A1, _A1, _B1], [_A1, _B1, _A1], [_B1, _A1, _A1], [_A2, _A2, _B2], [_A2, _B2, _A2], [_B2, _A2, _A2]]
)
TRI_QUAD_W = np.array([_W1, _W1, _W1, _W2, _W2, _W2])


def ref_field_h1_norm(mesh, wave: IncidentWave, pol: str) -> float:
    """sqrt of the integral of |grad u_ref|^2 + |u_ref|^2 over the meshed domain."""
    p = np.einsum("qk,tkd->tqd", TRI_QUAD_BARY, mesh.nodes[mesh.triangles])
    val, grad = reference_field(p, wave, pol)
    dens = np.abs(val) ** 2 + np.sum(np.abs(grad) ** 2, axis=-1)
    return float(math.sqrt(np.sum((dens @ TRI_QUAD_W) * mesh.areas)))
