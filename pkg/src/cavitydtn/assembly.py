"""P1 assembly of the Helmholtz system with the DtN boundary block.

TM:  int grad u . grad v - kappa^2 u v  -  int_arc (B u) v  =  int_arc f v
TE:  int kappa^-2 grad u . grad v - u v  -  kappa0^-2 int_arc (B u) v  =  kappa0^-2 int_arc g v

Both forms are complex symmetric (no conjugation enters the matrices),
so the global matrix is symmetric as well.  TM nodes on the PEC walls
and the ground line are eliminated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .dtn import DtnConfig, tbc_matrix
from .geometry import GROUND, WALL, BoundaryArc, Mesh, boundary_arc
from .physics import TE, TM, IncidentWave, MaterialMap, check_polarization, tbc_data

log = logging.getLogger(__name__)

# 4-point Gauss-Legendre on [0, 1]
_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
GAUSS_T = 0.5 * (_GL_X + 1.0)
GAUSS_W = 0.5 * _GL_W


class AssemblyError(ValueError):
    pass


def p1_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the three hat functions per triangle, shape (T, 3, 2), and areas."""
    p = mesh.nodes[mesh.triangles]
    area = mesh.areas
    bad = np.flatnonzero(area <= 0)
    if bad.size:
        raise AssemblyError(f"degenerate triangle {int(bad[0])} (area {area[bad[0]]:.3e})")
    # grad L_k is the inward normal of the opposite edge over twice the area
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area)[:, None, None]
    return grads, area


def element_matrices(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Exact P1 stiffness and mass blocks, each (T, 3, 3)."""
    g, area = p1_gradients(mesh)
    stiff = np.einsum("tid,tjd->tij", g, g) * area[:, None, None]
    mass = (np.ones((3, 3)) + np.eye(3))[None] * (area / 12.0)[:, None, None]
    return stiff, mass


def _scatter(mesh: Mesh, blocks: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    A = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble_interior(mesh: Mesh, mat: MaterialMap, pol: str) -> sp.csr_matrix:
    """Volume part of the sesquilinear form on all mesh nodes."""
    check_polarization(pol)
    if pol == TE and mat.has_magnetic_contrast(mesh.region):
        raise AssemblyError("TE polarization requires mu_r = 1 in every region")
    stiff, mass = element_matrices(mesh)
    k2 = mat.kappa_squared_of(mesh.region)[:, None, None]
    blocks = stiff - k2 * mass if pol == TM else stiff / k2 - mass
    return _scatter(mesh, blocks.astype(complex))


def arc_quadrature(arc: BoundaryArc) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points on each chord: angles (M-1, 4) and points (M-1, 4, 2)."""
    pts = arc.points
    a, b = pts[:-1], pts[1:]
    q = a[:, None, :] + GAUSS_T[None, :, None] * (b - a)[:, None, :]
    return np.arctan2(q[..., 1], q[..., 0]), q


def assemble_tbc_load(
    mesh: Mesh,
    arc: BoundaryArc,
    data: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    pol: str,
    kappa0: float,
) -> np.ndarray:
    """Load vector int_arc data * L_i ds on all mesh nodes.

    ``data`` is either a callable of the polar angle or an array of values
    at the chord Gauss points (shape (M-1, 4)).  TE is scaled by kappa0^-2.
    """
    check_polarization(pol)
    phi, _ = arc_quadrature(arc)
    vals = np.asarray(data(phi) if callable(data) else data, dtype=complex).reshape(phi.shape)
    l = arc.lengths[1:-1]
    left = l * ((vals * (1.0 - GAUSS_T)) @ GAUSS_W)
    right = l * ((vals * GAUSS_T) @ GAUSS_W)
    loc = np.zeros(arc.M, dtype=complex)
    loc[:-1] += left
    loc[1:] += right
    if pol == TE:
        loc /= kappa0**2
    out = np.zeros(mesh.n_nodes, dtype=complex)
    out[arc.node_ids] = loc
    return out


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    """Linear system on the free nodes.

    ``dof_map[node]`` is the equation index or -1 for eliminated nodes;
    ``fixed_values`` holds the prescribed nodal values of eliminated nodes.
    """

    A: sp.csr_matrix
    rhs: np.ndarray
    dof_map: np.ndarray
    polarization: str
    generation: int
    fixed_values: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def free_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.dof_map >= 0)

    def expand(self, x: np.ndarray) -> np.ndarray:
        """Nodal vector on the full mesh from a solution of this system."""
        full = np.zeros(len(self.dof_map), dtype=complex)
        if self.fixed_values is not None:
            full[:] = self.fixed_values
        free = self.dof_map >= 0
        full[free] = x[self.dof_map[free]]
        return full


def dirichlet_nodes(mesh: Mesh) -> np.ndarray:
    return mesh.nodes_with_tag(WALL, GROUND)


def apply_dirichlet(system: GlobalSystem, mesh: Mesh, values: np.ndarray | None = None) -> GlobalSystem:
    """Symmetric elimination of the PEC nodes (TM only).

    ``values`` optionally prescribes nonzero nodal data on all mesh nodes;
    only the entries at eliminated nodes are used.
    """
    if system.polarization != TM:
        raise AssemblyError("Dirichlet elimination applies to TM only; TE walls are natural")
    if system.dim != mesh.n_nodes:
        raise AssemblyError("system has already been reduced")
    fixed = np.zeros(mesh.n_nodes, dtype=bool)
    fixed[dirichlet_nodes(mesh)] = True
    free = np.flatnonzero(~fixed)
    if free.size == 0:
        log.warning("every node is constrained; the system is empty")
    A = system.A.tocsc()
    rhs = system.rhs[free].copy()
    g = np.zeros(mesh.n_nodes, dtype=complex)
    if values is not None:
        g[fixed] = np.asarray(values)[fixed]
        rhs -= A[:, fixed].tocsr()[free] @ g[fixed]
    dof_map = np.full(mesh.n_nodes, -1, dtype=np.int64)
    dof_map[free] = np.arange(free.size)
    Ared = A[:, free].tocsr()[free]
    Ared.sort_indices()
    return replace(system, A=Ared, rhs=rhs, dof_map=dof_map, fixed_values=g)


def build_system(
    mesh: Mesh,
    mat: MaterialMap,
    wave: IncidentWave,
    cfg: DtnConfig,
    arc: BoundaryArc | None = None,
    data_tol: float = 1e-14,
) -> GlobalSystem:
    """Assemble interior form, DtN block and boundary load; eliminate PEC nodes for TM."""
    pol = cfg.polarization
    if abs(mat.kappa0 - cfg.kappa0) > 1e-12 * cfg.kappa0 or abs(wave.kappa0 - cfg.kappa0) > 1e-12 * cfg.kappa0:
        raise AssemblyError("materials, incident wave and DtN configuration disagree on kappa0")
    if abs(mesh.R - cfg.R) > 1e-12 * cfg.R:
        raise AssemblyError("mesh radius and DtN radius disagree")
    arc = boundary_arc(mesh) if arc is None else arc
    K = assemble_interior(mesh, mat, pol)
    F = tbc_matrix(arc, cfg).F
    scale = 1.0 if pol == TM else 1.0 / cfg.kappa0**2
    ids = arc.node_ids
    rows = np.repeat(ids, len(ids))
    cols = np.tile(ids, len(ids))
    Fg = sp.coo_matrix((-scale * F.ravel(), (rows, cols)), shape=K.shape).tocsr()
    A = (K + Fg).tocsr()
    A.sort_indices()
    rhs = assemble_tbc_load(
        mesh, arc, lambda phi: tbc_data(phi, wave, cfg.R, pol, tol=data_tol, n_min=cfg.N), pol, cfg.kappa0
    )
    system = GlobalSystem(
        A=A, rhs=rhs, dof_map=np.arange(mesh.n_nodes), polarization=pol, generation=mesh.generation
    )
    if pol == TM:
        system = apply_dirichlet(system, mesh)
    log.debug("assembled %s system: %d unknowns, %d arc nodes", pol, system.dim, arc.M)
    return system


def write_matrix(A: sp.spmatrix, path) -> None:
    """Coordinate dump, one ``row col re im`` line per stored entry."""
    C = A.tocoo()
    order = np.lexsort((C.col, C.row))
    data = C.data[order].astype(complex)
    lines = [f"{r} {c} {float(v.real)!r} {float(v.imag)!r}" for r, c, v in zip(C.row[order].tolist(), C.col[order].tolist(), data)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
