"""Residual error indicators, DtN truncation bound and the adaptive loop.

For each triangle T

    eta_T = h_T ||H u_h||_T + ( 1/2 sum_{e in dT} h_e ||J_e||_e^2 )^(1/2)

where H u_h is kappa^2 u_h (TM) or u_h (TE) for P1 fields, J_e is the
flux jump across interior edges and the boundary-condition residual on
the semicircle (and on the PEC boundary in TE).  The loop is
solve -> estimate -> mark (eta_T >= tau max eta) -> refine.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import GAUSS_T, GAUSS_W, GlobalSystem, arc_quadrature, build_system, p1_gradients
from .dtn import DtnConfig, dtn_apply_trace
from .geometry import ARC, GROUND, WALL, BoundaryArc, CavityGeometry, Mesh, boundary_arc, initial_mesh, refine, refine_arc, refine_uniform
from .linsolve import solve_system
from .physics import TE, TM, IncidentWave, MaterialMap, check_polarization, ref_field_h1_norm, tbc_data
from .specfun import MAX_ORDER

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Solution:
    """Total field u_h at the mesh nodes, with what produced it."""

    mesh: Mesh
    u: np.ndarray
    cfg: DtnConfig
    wave: IncidentWave
    mat: MaterialMap
    dof: int

    @property
    def polarization(self) -> str:
        return self.cfg.polarization

    @property
    def arc(self) -> BoundaryArc:
        return boundary_arc(self.mesh)


@dataclass(frozen=True, eq=False)
class ErrorReport:
    eta: np.ndarray
    eps_h: float
    eps_N: float
    dof: int
    iteration: int
    rcs: float | None = None

    @classmethod
    def from_eta(cls, eta: np.ndarray, eps_N: float, dof: int, iteration: int, rcs: float | None = None):
        eta = np.asarray(eta, dtype=float)
        return cls(eta=eta, eps_h=float(math.sqrt(np.sum(eta**2))), eps_N=eps_N, dof=dof, iteration=iteration, rcs=rcs)


@dataclass(frozen=True)
class AdaptConfig:
    tau: float = 0.5
    tol: float = 0.0
    max_dof: int = 15000
    max_iter: int = 50
    epsN_target: float = 1e-8
    h0: float | None = None
    mode: str = "adaptive"
    resolve_arc: bool = True

    def __post_init__(self) -> None:
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.mode not in ("adaptive", "uniform"):
            raise ValueError(f"mode must be 'adaptive' or 'uniform', got {self.mode!r}")
        if self.max_iter < 1 or self.max_dof < 1:
            raise ValueError("max_iter and max_dof must be positive")
        if self.h0 is not None and not self.h0 > 0:
            raise ValueError("h0 must be positive")


# ---------------------------------------------------------------------------
# indicators
# ---------------------------------------------------------------------------

def _edge_normals(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Unit normals of every edge oriented out of its first triangle, and edge lengths."""
    e = mesh.edges
    p, q = mesh.nodes[e[:, 0]], mesh.nodes[e[:, 1]]
    d = q - p
    h = np.hypot(d[:, 0], d[:, 1])
    n = np.stack([d[:, 1], -d[:, 0]], axis=1) / h[:, None]
    t1 = mesh.edge2elem[:, 0]
    centroid = mesh.nodes[mesh.triangles[t1]].mean(axis=1)
    flip = np.sum((0.5 * (p + q) - centroid) * n, axis=1) < 0
    n[flip] *= -1.0
    return n, h


def element_indicators(
    mesh: Mesh,
    u: np.ndarray,
    mat: MaterialMap,
    wave: IncidentWave,
    cfg: DtnConfig,
    arc: BoundaryArc | None = None,
    data: Callable[[np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """eta_T for every triangle given the nodal total field ``u``.

    ``data`` overrides the boundary data on the arc (defaults to f or g
    for the incident wave).
    """
    pol = cfg.polarization
    u = np.asarray(u, dtype=complex)
    grads, area = p1_gradients(mesh)
    k2 = mat.kappa_squared_of(mesh.region)
    ut = u[mesh.triangles]
    grad_u = np.einsum("tk,tkd->td", ut, grads)

    # volume residual, integrated exactly for P1
    l2sq = area / 12.0 * (np.sum(np.abs(ut) ** 2, axis=1) + np.abs(ut.sum(axis=1)) ** 2)
    weight = np.abs(k2) ** 2 if pol == TM else 1.0
    vol = mesh.diameters * np.sqrt(weight * l2sq)

    flux = grad_u / k2[:, None] if pol == TE else grad_u
    normals, h = _edge_normals(mesh)
    e2t = mesh.edge2elem
    tags = mesh.edge_tags
    jump_sq = np.zeros(len(h))  # ||J_e||^2 on each edge

    inner = e2t[:, 1] >= 0
    t1, t2 = e2t[inner, 0], e2t[inner, 1]
    nu = normals[inner]
    J = -np.sum((flux[t1] - flux[t2]) * nu, axis=1)
    jump_sq[inner] = np.abs(J) ** 2 * h[inner]

    if pol == TE:
        pec = ~inner & np.isin(tags, (WALL, GROUND))
        tp = e2t[pec, 0]
        J = -2.0 * np.sum(flux[tp] * normals[pec], axis=1)
        jump_sq[pec] = np.abs(J) ** 2 * h[pec]

    arc = boundary_arc(mesh) if arc is None else arc
    if data is None:
        def data(phi):
            return tbc_data(phi, wave, cfg.R, pol, n_min=cfg.N)
    phi_q, _ = arc_quadrature(arc)
    Bu = dtn_apply_trace(arc, u[arc.node_ids], cfg, phi=phi_q.ravel()).reshape(phi_q.shape)
    g = np.asarray(data(phi_q), dtype=complex).reshape(phi_q.shape)
    chords = np.stack([arc.node_ids[:-1], arc.node_ids[1:]], axis=1)
    eid = mesh.edge_index(chords)
    ta = e2t[eid, 0]
    # grad u_h . nu is constant on each chord
    dn = np.sum(grad_u[ta] * normals[eid], axis=1)
    res = 2.0 * (Bu + g - dn[:, None])
    if pol == TE:
        res /= cfg.kappa0**2
    jump_sq[eid] = h[eid] * (np.abs(res) ** 2 @ GAUSS_W)

    edge_term = 0.5 * jump_sq * h
    per_tri = edge_term[mesh.elem2edge].sum(axis=1)
    return vol + np.sqrt(per_tri)


def element_indicator(mesh, u, mat, wave, cfg, T: int) -> float:
    """eta_T of a single triangle (see :func:`element_indicators`)."""
    return float(element_indicators(mesh, u, mat, wave, cfg)[int(T)])


# ---------------------------------------------------------------------------
# truncation bound and marking
# ---------------------------------------------------------------------------

def _log_bound(N: int, kappa0: float, R: float, R_hat: float) -> float:
    a = N * math.log(R_hat / R)
    b = (2 * N + 4) * math.log(math.e * kappa0 * R / (2 * N))
    return float(np.logaddexp(a, b))


def truncation_error(cfg: DtnConfig, ref_norm: float) -> float:
    """[(R_hat/R)^N + (e kappa0 R / 2N)^(2N+4)] * ||u_ref||_H1, evaluated in log space."""
    if not cfg.N > math.e * cfg.kappa0 * cfg.R / 2:
        raise ValueError("truncation bound needs N > e*kappa0*R/2")
    if not 0 < cfg.R_hat < cfg.R:
        raise ValueError("truncation bound needs 0 < R_hat < R")
    if ref_norm == 0:
        return 0.0
    return float(math.exp(_log_bound(cfg.N, cfg.kappa0, cfg.R, cfg.R_hat) + math.log(ref_norm)))


def choose_truncation_order(kappa0: float, R: float, R_hat: float, ref_norm: float, target: float = 1e-8) -> int:
    """Smallest admissible N whose truncation bound is at most ``target``."""
    n0 = math.floor(math.e * kappa0 * R / 2) + 1
    log_t = math.log(target) - (math.log(ref_norm) if ref_norm > 0 else -math.inf)
    for N in range(max(n0, 1), MAX_ORDER + 1):
        if _log_bound(N, kappa0, R, R_hat) <= log_t:
            return N
    raise ArithmeticError(f"no N <= {MAX_ORDER} reaches truncation bound {target:g}")


def mark(report: ErrorReport | np.ndarray, tau: float) -> np.ndarray:
    """Triangles with eta_T >= tau * max eta (sorted ids)."""
    eta = report.eta if isinstance(report, ErrorReport) else np.asarray(report, dtype=float)
    if eta.size == 0:
        raise ValueError("cannot mark an empty indicator set")
    return np.flatnonzero(eta >= tau * eta.max())


# ---------------------------------------------------------------------------
# adaptive loop
# ---------------------------------------------------------------------------

def default_h0(kappa0: float) -> float:
    """Initial mesh size of one eighth of the free-space wavelength."""
    return 2.0 * math.pi / kappa0 / 8.0


def arc_chord_limit(cfg: DtnConfig) -> float:
    """Longest arc chord that still samples sin(N phi) twice per half-period."""
    return math.pi * cfg.R / (2 * cfg.N)


def auto_dtn_config(pol: str, geom: CavityGeometry, wave: IncidentWave, mesh: Mesh, target: float) -> DtnConfig:
    ref = ref_field_h1_norm(mesh, wave, pol)
    N = choose_truncation_order(wave.kappa0, geom.R, geom.R_hat, ref, target)
    return DtnConfig.create(pol, wave.kappa0, geom.R, geom.R_hat, N)


def solve_on_mesh(mesh: Mesh, mat: MaterialMap, wave: IncidentWave, cfg: DtnConfig) -> Solution:
    system: GlobalSystem = build_system(mesh, mat, wave, cfg)
    x = solve_system(system.A, system.rhs)
    return Solution(mesh=mesh, u=system.expand(x), cfg=cfg, wave=wave, mat=mat, dof=system.dim)


def adaptive_solve(
    geom: CavityGeometry,
    mat: MaterialMap,
    wave: IncidentWave,
    cfg: DtnConfig | str,
    acfg: AdaptConfig = AdaptConfig(),
    observe: Callable[[Solution], float] | None = None,
    mesh: Mesh | None = None,
    on_iteration: Callable[[Solution, ErrorReport], None] | None = None,
) -> tuple[Solution, list[ErrorReport]]:
    """Solve, estimate, mark and refine until a stopping rule fires.

    ``cfg`` is either a ready DtnConfig or the polarization, in which case
    N is the smallest order meeting ``acfg.epsN_target``.  ``observe`` maps
    each iterate to a scalar (typically the RCS) recorded in the history;
    ``on_iteration`` sees every iterate with its report (e.g. mesh dumps).
    In uniform mode every edge is split each iteration, which halves all
    element sizes.
    """
    if mesh is None:
        mesh = initial_mesh(geom, acfg.h0 if acfg.h0 is not None else default_h0(wave.kappa0))
    if isinstance(cfg, str):
        cfg = auto_dtn_config(check_polarization(cfg), geom, wave, mesh, acfg.epsN_target)
        log.info("auto-selected DtN truncation order N = %d", cfg.N)
    if acfg.resolve_arc:
        # at least two arc nodes per half-period of sin(N phi); coarser arcs alias
        # the highest retained modes and the DtN weights amplify them
        mesh = refine_arc(mesh, arc_chord_limit(cfg))
    ref_norm = ref_field_h1_norm(mesh, wave, cfg.polarization)
    eps_N = truncation_error(cfg, ref_norm)

    history: list[ErrorReport] = []
    it = 0
    while True:
        sol = solve_on_mesh(mesh, mat, wave, cfg)
        eta = element_indicators(mesh, sol.u, mat, wave, cfg)
        value = observe(sol) if observe is not None else None
        rep = ErrorReport.from_eta(eta, eps_N, sol.dof, it, value)
        history.append(rep)
        if on_iteration is not None:
            on_iteration(sol, rep)
        log.info("iter %d: dof %d eps_h %.4e%s", it, rep.dof, rep.eps_h, "" if value is None else f" observed {value}")
        if rep.eps_h <= acfg.tol or rep.dof >= acfg.max_dof or it + 1 >= acfg.max_iter:
            return sol, history
        if acfg.mode == "uniform":
            mesh = refine_uniform(mesh)
        else:
            mesh = refine(mesh, mark(rep, acfg.tau))
        it += 1


def write_convergence_csv(history: list[ErrorReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "dof", "eps_h", "eps_N", "rcs_linear"])
        for r in history:
            w.writerow([r.iteration, r.dof, repr(r.eps_h), repr(r.eps_N), "" if r.rcs is None else repr(float(r.rcs))])
