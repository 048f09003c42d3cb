"""Truncated Dirichlet-to-Neumann operator on the semicircle.

A trace u on the polygonal arc is expanded in sin(n phi) (TM, n >= 1) or
cos(n phi) (TE, n >= 0).  The Fourier coefficients are computed by
integrating the hat-function expansion of u against the piecewise-linear
interpolant of the angular mode along each chord, which gives

    u_n = c_n * sum_i u_i beta_i^(n),
    beta_i^(n) = l_i/6 s_{i-1} + (l_i + l_{i+1})/3 s_i + l_{i+1}/6 s_{i+1},

with c_n = 2/(pi R) (1/(pi R) for the TE mean) and zero-length virtual
chords at both ends of the arc.  The same weights give the dense TBC
matrix F_ji = sum_n c_n d_n beta_i^(n) beta_j^(n), d_n = kappa0 H_n'/H_n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BoundaryArc
from .physics import TE, TM, check_polarization
from .specfun import MAX_ORDER, dtn_coefficients


@dataclass(frozen=True)
class DtnConfig:
    polarization: str
    kappa0: float
    R: float
    R_hat: float
    N: int
    coefficients: np.ndarray

    @classmethod
    def create(cls, polarization: str, kappa0: float, R: float, R_hat: float, N: int) -> "DtnConfig":
        check_polarization(polarization)
        if not (kappa0 > 0 and R > 0 and 0 < R_hat < R):
            raise ValueError("need kappa0 > 0 and 0 < R_hat < R")
        N = int(N)
        if not 1 <= N <= MAX_ORDER:
            raise ValueError(f"truncation order must be in [1, {MAX_ORDER}], got {N}")
        if not N > math.e * kappa0 * R / 2:
            raise ValueError(f"truncation order N = {N} must exceed e*kappa0*R/2 = {math.e * kappa0 * R / 2:.3f}")
        coef = dtn_coefficients(N, kappa0, R)
        coef.setflags(write=False)
        return cls(polarization, float(kappa0), float(R), float(R_hat), N, coef)

    @property
    def orders(self) -> np.ndarray:
        return np.arange(0 if self.polarization == TE else 1, self.N + 1)

    @property
    def weights(self) -> np.ndarray:
        """Normalisation c_n for the orders in :attr:`orders`."""
        c = np.full(len(self.orders), 2.0 / (math.pi * self.R))
        if self.polarization == TE:
            c[0] = 1.0 / (math.pi * self.R)
        return c

    def modes(self, phi) -> np.ndarray:
        """Angular modes, shape (len(orders), len(phi))."""
        arg = np.multiply.outer(self.orders, np.asarray(phi, dtype=float))
        return np.sin(arg) if self.polarization == TM else np.cos(arg)


@dataclass(frozen=True, eq=False)
class TbcMatrix:
    node_ids: np.ndarray
    F: np.ndarray
    polarization: str


def _beta(arc: BoundaryArc, cfg: DtnConfig) -> np.ndarray:
    s = cfg.modes(arc.phi)
    l = arc.lengths
    left, right = l[:-1], l[1:]
    beta = s * ((left + right) / 3.0)
    beta[:, 1:] += s[:, :-1] * (left[1:] / 6.0)
    beta[:, :-1] += s[:, 1:] * (right[:-1] / 6.0)
    return beta


def _check_arc(arc: BoundaryArc, cfg: DtnConfig) -> None:
    if abs(arc.R - cfg.R) > 1e-12 * cfg.R:
        raise ValueError(f"arc radius {arc.R} does not match DtN radius {cfg.R}")


def trace_fourier_coefficients(arc: BoundaryArc, values, cfg: DtnConfig) -> np.ndarray:
    """Fourier coefficients u_n of the arc trace for n in ``cfg.orders``."""
    _check_arc(arc, cfg)
    values = np.asarray(values)
    if values.shape[0] != arc.M:
        raise ValueError(f"expected {arc.M} trace values, got {values.shape[0]}")
    return cfg.weights * (_beta(arc, cfg) @ values)


def tbc_matrix(arc: BoundaryArc, cfg: DtnConfig) -> TbcMatrix:
    _check_arc(arc, cfg)
    beta = _beta(arc, cfg)
    d = cfg.coefficients[cfg.orders] * cfg.weights
    F = (beta.T * d) @ beta
    F = 0.5 * (F + F.T)
    F.setflags(write=False)
    return TbcMatrix(node_ids=arc.node_ids, F=F, polarization=cfg.polarization)


def dtn_apply_trace(arc: BoundaryArc, values, cfg: DtnConfig, phi=None) -> np.ndarray:
    """B^N applied to the trace, sampled at the arc nodes or at angles ``phi``."""
    coef = trace_fourier_coefficients(arc, values, cfg)
    at = arc.phi if phi is None else phi
    return (cfg.coefficients[cfg.orders] * coef) @ cfg.modes(at)
