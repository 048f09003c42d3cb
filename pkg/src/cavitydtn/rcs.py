"""Radar cross section from the computed field.

Two families of far-field formulas are provided: integrals over the
aperture (valid when nothing protrudes above the ground) and integrals
over the semicircle (always valid).  The observation angle ``varphi`` is
measured so that the far-field kernel reads exp(i kappa0 cos(varphi) y1)
on the ground line; in polar terms the observation direction is
(-cos varphi, sin varphi).  Backscatter for incidence angle theta is
therefore varphi = pi/2 - theta.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .adapt import AdaptConfig, ErrorReport, Solution, adaptive_solve, default_h0
from .assembly import GAUSS_T, GAUSS_W, p1_gradients
from .dtn import DtnConfig, dtn_apply_trace
from .geometry import APERTURE, BoundaryArc, CavityGeometry, Mesh, boundary_arc
from .physics import TE, TM, IncidentWave, MaterialMap, check_polarization, reference_field

log = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
FORMULAS = ("aperture", "semicircle")


def kappa0_from_ghz(f_ghz: float) -> float:
    return 2.0 * math.pi * f_ghz * 1e9 / SPEED_OF_LIGHT


def backscatter_angle(theta: float) -> float:
    """Observation angle varphi pointing back along the incident direction."""
    return 0.5 * math.pi - theta


def to_db(sigma: float) -> float:
    with np.errstate(divide="ignore"):
        return float(10.0 * np.log10(sigma))


@dataclass(frozen=True, eq=False)
class ApertureTrace:
    """Scattered field on the aperture, nodes sorted by x1."""

    x: np.ndarray
    us: np.ndarray
    dus_dy2: np.ndarray


@dataclass(frozen=True, eq=False)
class ArcTrace:
    arc: BoundaryArc
    us: np.ndarray
    dr_us: np.ndarray

    @property
    def phi(self) -> np.ndarray:
        return self.arc.phi


def nodal_gradients(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """Area-weighted average of the P1 gradients of the triangles around each node."""
    grads, area = p1_gradients(mesh)
    g = np.einsum("tk,tkd->td", u[mesh.triangles], grads)
    acc = np.zeros((mesh.n_nodes, 2), dtype=complex)
    wsum = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.add.at(acc, mesh.triangles[:, k], g * area[:, None])
        np.add.at(wsum, mesh.triangles[:, k], area)
    return acc / wsum[:, None]


def scattered_trace(sol: Solution, where: str = "semicircle") -> ApertureTrace | ArcTrace:
    """u_s = u_h - u_ref on the aperture or on the semicircle.

    On the semicircle the radial derivative is the DtN map of the trace;
    on the aperture the y2-derivative comes from averaged P1 gradients.
    """
    mesh, pol = sol.mesh, sol.polarization
    if where == "semicircle":
        arc = boundary_arc(mesh)
        ref, _ = reference_field(mesh.nodes[arc.node_ids], sol.wave, pol)
        us = sol.u[arc.node_ids] - ref
        return ArcTrace(arc=arc, us=us, dr_us=dtn_apply_trace(arc, us, sol.cfg))
    if where != "aperture":
        raise ValueError(f"unknown trace location {where!r}")
    ids = mesh.nodes_with_tag(APERTURE)
    if ids.size < 2:
        raise ValueError("mesh has no aperture edges (is the cavity overfilled?)")
    ids = ids[np.argsort(mesh.nodes[ids, 0], kind="stable")]
    ref, ref_grad = reference_field(mesh.nodes[ids], sol.wave, pol)
    us = sol.u[ids] - ref
    dus = np.zeros(len(ids), dtype=complex)
    if pol == TE:
        dus = nodal_gradients(mesh, sol.u)[ids, 1] - ref_grad[:, 1]
    return ApertureTrace(x=mesh.nodes[ids, 0], us=us, dus_dy2=dus)


def _segment_integral(x: np.ndarray, vals: np.ndarray, kernel) -> complex:
    a, b = x[:-1], x[1:]
    q = a[:, None] + GAUSS_T[None, :] * (b - a)[:, None]
    v = vals[:-1, None] * (1.0 - GAUSS_T) + vals[1:, None] * GAUSS_T
    return complex(np.sum((b - a) * ((v * kernel(q)) @ GAUSS_W)))


def rcs_aperture(trace: ApertureTrace, kappa0: float, pol: str, varphi: float) -> float:
    """sigma from aperture integrals, piecewise-linear trace, Gauss per segment."""
    check_polarization(pol)

    def kernel(y1):
        return np.exp(1j * kappa0 * math.cos(varphi) * y1)

    if pol == TM:
        I = _segment_integral(trace.x, trace.us, kernel)
        return float(kappa0 * abs(math.sin(varphi) * I) ** 2)
    I = _segment_integral(trace.x, trace.dus_dy2, kernel)
    return float(abs(I) ** 2 / kappa0)


def _trapezoid(phi: np.ndarray, vals: np.ndarray) -> complex:
    return complex(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(phi)))


def rcs_semicircle(trace: ArcTrace, kappa0: float, pol: str, varphi: float) -> float:
    """sigma from semicircle integrals; image term subtracted (TM) or added (TE)."""
    check_polarization(pol)
    phi, R = trace.phi, trace.arc.R

    def part(c):
        return _trapezoid(phi, (1j * kappa0 * c * trace.us - trace.dr_us) * np.exp(1j * kappa0 * R * c))

    a = part(np.cos(phi - varphi))
    b = part(np.cos(phi + varphi))
    total = a - b if pol == TM else a + b
    return float(R**2 / (4.0 * kappa0) * abs(total) ** 2)


def rcs(sol: Solution, formula: str, varphi: float | None = None) -> float:
    """sigma of a solution; ``varphi`` defaults to backscatter."""
    if varphi is None:
        varphi = backscatter_angle(sol.wave.theta)
    k0 = sol.wave.kappa0
    if formula == "aperture":
        return rcs_aperture(scattered_trace(sol, "aperture"), k0, sol.polarization, varphi)
    if formula == "semicircle":
        return rcs_semicircle(scattered_trace(sol, "semicircle"), k0, sol.polarization, varphi)
    raise ValueError(f"unknown RCS formula {formula!r}")


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RcsSample:
    param: float
    sigma_linear: float
    sigma_db: float
    formula: str


@dataclass
class RcsCurve:
    polarization: str
    samples: list[RcsSample] = field(default_factory=list)

    def values(self, formula: str) -> np.ndarray:
        return np.array([s.sigma_linear for s in self.samples if s.formula == formula])

    def params(self, formula: str) -> np.ndarray:
        return np.array([s.param for s in self.samples if s.formula == formula])


@dataclass(frozen=True)
class Problem:
    """Everything except the sweep variable.

    ``materials`` maps region ids to (eps_r, mu_r); ``N`` is None for the
    automatic truncation order.  ``h0`` overrides the default initial mesh
    size (one eighth of the wavelength, capped at R/2).
    """

    polarization: str
    geometry: CavityGeometry
    materials: dict = field(default_factory=dict)
    adapt: AdaptConfig = AdaptConfig()
    N: int | None = None
    formulas: tuple[str, ...] = ("semicircle",)
    kappa0: float | None = None
    theta: float | None = None

    def solve(self, kappa0: float, theta: float, on_iteration=None) -> tuple[Solution, list[ErrorReport]]:
        mat = MaterialMap(kappa0, self.materials)
        wave = IncidentWave(kappa0, theta)
        geom = self.geometry
        h0 = self.adapt.h0 if self.adapt.h0 is not None else min(default_h0(kappa0), 0.5 * geom.R)
        acfg = AdaptConfig(**{**self.adapt.__dict__, "h0": h0})
        cfg: DtnConfig | str = self.polarization
        if self.N is not None:
            cfg = DtnConfig.create(self.polarization, kappa0, geom.R, geom.R_hat, self.N)
        first = self.formulas[0]
        return adaptive_solve(geom, mat, wave, cfg, acfg, observe=lambda s: rcs(s, first), on_iteration=on_iteration)

    def evaluate(self, kappa0: float, theta: float) -> dict[str, float]:
        sol, _ = self.solve(kappa0, theta)
        return {f: rcs(sol, f) for f in self.formulas}


def backscatter_sweep(
    problem: Problem,
    angles: Sequence[float] | None = None,
    frequencies_ghz: Sequence[float] | None = None,
    threads: int = 1,
) -> RcsCurve:
    """One adaptive solve per sweep point; failures give NaN and the sweep continues."""
    if (angles is None) == (frequencies_ghz is None):
        raise ValueError("give exactly one of angles or frequencies_ghz")
    params = list(angles if angles is not None else frequencies_ghz)
    if not params:
        raise ValueError("empty sweep")

    def point(p: float) -> dict[str, float]:
        if angles is not None:
            k0, th = problem.kappa0, p
        else:
            k0, th = kappa0_from_ghz(p), problem.theta
        try:
            return problem.evaluate(k0, th)
        except (ArithmeticError, ValueError) as exc:
            log.error("sweep point %g failed: %s", p, exc)
            return {f: math.nan for f in problem.formulas}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(point, params))
    else:
        results = [point(p) for p in params]
    curve = RcsCurve(problem.polarization)
    for f in problem.formulas:
        for p, res in zip(params, results):
            curve.samples.append(RcsSample(float(p), res[f], to_db(res[f]), f))
    return curve


def write_rcs_csv(curve: RcsCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "sigma_linear", "sigma_db", "formula"])
        for s in curve.samples:
            w.writerow([repr(s.param), repr(s.sigma_linear), repr(s.sigma_db), s.formula])
