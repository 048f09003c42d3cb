import math

import numpy as np
import pytest
import scipy.sparse as sp

from cavitydtn.assembly import (
    AssemblyError,
    GlobalSystem,
    apply_dirichlet,
    assemble_interior,
    assemble_tbc_load,
    build_system,
    dirichlet_nodes,
    element_matrices,
    write_matrix,
)
from cavitydtn.dtn import DtnConfig, tbc_matrix
from cavitydtn.geometry import WALL, Mesh, arc_from_angles, boundary_arc, initial_mesh, rectangular_cavity
from cavitydtn.linsolve import solve_system
from cavitydtn.physics import TE, TM, IncidentWave, MaterialMap, tbc_data, tbc_data_tm
from oracles import gauss_on_chords

LAM = 1 / 16
K0 = 32 * math.pi


def one_triangle(p):
    return Mesh(
        nodes=np.asarray(p, float),
        triangles=np.array([[0, 1, 2]]),
        region=np.array([0]),
        tagged_edges=np.array([[0, 1], [1, 2], [2, 0]]),
        tags=np.array([WALL, WALL, WALL]),
        R=1.0,
    )


@pytest.fixture(scope="module")
def ex1_mesh():
    return initial_mesh(rectangular_cavity(LAM, LAM / 4, 0.75 * LAM, LAM / 8), LAM / 8)


def test_unit_right_triangle_stiffness():
    m = one_triangle([[0, 0], [1, 0], [0, 1]])
    K = assemble_interior(m, MaterialMap(1e-300), TM).toarray()
    ref = np.array([[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]])
    assert np.allclose(K, ref, atol=1e-15)


def test_mass_matrix_quadrature_oracle():
    p = np.array([[0.3, -0.2], [1.7, 0.4], [0.1, 1.1]])
    _, mass = element_matrices(one_triangle(p))
    # edge-midpoint rule, exact for quadratics
    d1, d2 = p[1] - p[0], p[2] - p[0]
    area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    bary = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    ref = area / 3 * bary.T @ bary
    assert np.allclose(mass[0], ref, rtol=1e-14)


def test_degenerate_triangle_reports_id():
    m = Mesh(
        nodes=np.array([[0, 0], [1, 0], [0, 1], [2, 0]], float),
        triangles=np.array([[0, 1, 2], [0, 1, 3]]),
        region=np.array([0, 0]),
        tagged_edges=np.zeros((0, 2), int),
        tags=np.zeros(0, int),
        R=1.0,
    )
    with pytest.raises(AssemblyError, match="triangle 1"):
        assemble_interior(m, MaterialMap(1.0), TM)


def test_two_region_additivity(ex1_mesh):
    mat = MaterialMap(K0, {1: (4 + 1j, 1.0)})
    A = assemble_interior(ex1_mesh, mat, TM)
    parts = []
    for r in (0, 1):
        sub = Mesh(ex1_mesh.nodes, ex1_mesh.triangles[ex1_mesh.region == r], ex1_mesh.region[ex1_mesh.region == r],
                   ex1_mesh.tagged_edges, ex1_mesh.tags, ex1_mesh.R)
        parts.append(assemble_interior(sub, mat, TM))
    assert abs(A - parts[0] - parts[1]).max() <= 1e-12 * abs(A).max()


def test_te_scaling(ex1_mesh):
    mat = MaterialMap(K0, {1: (4 + 1j, 1.0)})
    K, M = element_matrices(ex1_mesh)
    k2 = mat.kappa_squared_of(ex1_mesh.region)
    A = assemble_interior(ex1_mesh, mat, TE)
    t = 5
    idx = ex1_mesh.triangles[t]
    # local entries can be recovered on a single-triangle submesh
    sub = Mesh(ex1_mesh.nodes, ex1_mesh.triangles[[t]], ex1_mesh.region[[t]], ex1_mesh.tagged_edges, ex1_mesh.tags, ex1_mesh.R)
    local = assemble_interior(sub, mat, TE).toarray()[np.ix_(idx, idx)]
    assert np.allclose(local, K[t] / k2[t] - M[t], rtol=1e-14)
    assert A.shape == (ex1_mesh.n_nodes,) * 2


def test_te_rejects_magnetic_material(ex1_mesh):
    with pytest.raises(AssemblyError):
        assemble_interior(ex1_mesh, MaterialMap(K0, {1: (2.0, 1.5)}), TE)


def test_load_zero_and_one():
    arc = arc_from_angles(np.linspace(0, math.pi, 17), 0.5)
    mesh_stub = type("M", (), {"n_nodes": arc.M})()
    assert not np.any(assemble_tbc_load(mesh_stub, arc, lambda phi: 0 * phi, TM, 1.0))
    b = assemble_tbc_load(mesh_stub, arc, lambda phi: np.ones_like(phi), TM, 1.0)
    l = arc.lengths
    assert np.allclose(b, (l[:-1] + l[1:]) / 2, rtol=0, atol=1e-14)
    bte = assemble_tbc_load(mesh_stub, arc, lambda phi: np.ones_like(phi), TE, 4.0)
    assert np.allclose(bte, b / 16, atol=1e-15)


@pytest.mark.parametrize("kind", ["uniform", "jittered"])
def test_load_matches_refined_quadrature(kind):
    # chords no wider than the arc-resolution guard pi/(2N), N = 20
    rng = np.random.default_rng(5)
    R = LAM / 2
    phi = np.linspace(0, math.pi, 41)
    if kind == "jittered":
        phi[1:-1] += rng.uniform(-0.2, 0.2, 39) * (math.pi / 40)
    arc = arc_from_angles(phi, R)
    w = IncidentWave(K0, 1.0)
    mesh_stub = type("M", (), {"n_nodes": arc.M})()
    b = assemble_tbc_load(mesh_stub, arc, lambda p: tbc_data_tm(p, w, R), TM, K0)
    t, wt, q = gauss_on_chords(arc.points, 64)
    f = tbc_data_tm(np.arctan2(q[..., 1], q[..., 0]).ravel(), w, R).reshape(q.shape[:2])
    ref = np.zeros(arc.M, complex)
    ref[:-1] += np.sum(wt * f * (1 - t), axis=1)
    ref[1:] += np.sum(wt * f * t, axis=1)
    assert np.max(np.abs(b - ref)) <= 1e-10 * np.max(np.abs(ref))


def _system(mesh, pol=TM, theta=1.0, mat=None):
    R = mesh.R
    mat = mat or MaterialMap(K0)
    cfg = DtnConfig.create(pol, K0, R, LAM / 8, 20)
    return build_system(mesh, mat, IncidentWave(K0, theta), cfg), cfg


def test_system_symmetric_and_sized(ex1_mesh):
    for pol in (TM, TE):
        s, _ = _system(ex1_mesh, pol)
        assert abs(s.A - s.A.T).max() == 0
        free = ex1_mesh.n_nodes - (len(dirichlet_nodes(ex1_mesh)) if pol == TM else 0)
        assert s.dim == free
        arc = boundary_arc(ex1_mesh)
        on_arc = np.zeros(ex1_mesh.n_nodes, bool)
        on_arc[arc.node_ids] = True
        full_rhs = np.zeros(ex1_mesh.n_nodes, complex)
        full_rhs[s.free_nodes] = s.rhs
        assert not np.any(full_rhs[~on_arc])


def test_arc_end_nodes_eliminated_in_tm(ex1_mesh):
    s, _ = _system(ex1_mesh, TM)
    arc = boundary_arc(ex1_mesh)
    assert s.dof_map[arc.node_ids[0]] == -1 and s.dof_map[arc.node_ids[-1]] == -1


def test_galerkin_residual(ex1_mesh):
    s, _ = _system(ex1_mesh)
    x = solve_system(s.A, s.rhs)
    assert np.linalg.norm(s.A @ x - s.rhs) <= 1e-10 * np.linalg.norm(s.rhs)


def test_dirichlet_penalty_oracle(ex1_mesh):
    s, cfg = _system(ex1_mesh)
    x = s.expand(solve_system(s.A, s.rhs))
    # full unreduced system with a large diagonal penalty on the PEC nodes
    arc = boundary_arc(ex1_mesh)
    A = assemble_interior(ex1_mesh, MaterialMap(K0), TM).tolil()
    F = tbc_matrix(arc, cfg).F
    A[np.ix_(arc.node_ids, arc.node_ids)] = A[np.ix_(arc.node_ids, arc.node_ids)].toarray() - F
    w = IncidentWave(K0, 1.0)
    b = assemble_tbc_load(ex1_mesh, arc, lambda p: tbc_data(p, w, cfg.R, TM, n_min=cfg.N), TM, K0)
    pen = 1e14 * abs(A).max()
    for i in dirichlet_nodes(ex1_mesh):
        A[i, i] = A[i, i] + pen
    y = solve_system(A.tocsr(), b)
    assert np.max(np.abs(x - y)) <= 1e-8 * np.max(np.abs(x))


def test_all_dirichlet_mesh_gives_empty_system():
    m = one_triangle([[0, 0], [1, 0], [0, 1]])
    s = GlobalSystem(A=sp.csr_matrix(np.eye(3, dtype=complex)), rhs=np.zeros(3, complex), dof_map=np.arange(3),
                     polarization=TM, generation=0)
    r = apply_dirichlet(s, m)
    assert r.dim == 0
    assert np.array_equal(r.expand(np.zeros(0)), np.zeros(3))


def test_apply_dirichlet_rejects_te(ex1_mesh):
    s, _ = _system(ex1_mesh, TE)
    with pytest.raises(AssemblyError):
        apply_dirichlet(s, ex1_mesh)


def test_nonzero_dirichlet_values():
    # square with one interior node; Laplace with linear data reproduces the linear function
    nodes = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0.4, 0.6]], float)
    tris = np.array([[4, 0, 1], [4, 1, 2], [4, 2, 3], [4, 3, 0]])
    e = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    m = Mesh(nodes, tris, np.zeros(4, int), e, np.full(4, WALL), 1.0)
    A = assemble_interior(m, MaterialMap(1e-300), TM)
    s = GlobalSystem(A=A, rhs=np.zeros(5, complex), dof_map=np.arange(5), polarization=TM, generation=0)
    g = 2 * nodes[:, 0] - 3 * nodes[:, 1] + 1
    r = apply_dirichlet(s, m, g)
    u = r.expand(solve_system(r.A, r.rhs))
    assert np.allclose(u, g, atol=1e-12)


def test_inconsistent_inputs_rejected(ex1_mesh):
    cfg = DtnConfig.create(TM, K0, ex1_mesh.R, LAM / 8, 20)
    with pytest.raises(AssemblyError):
        build_system(ex1_mesh, MaterialMap(2 * K0), IncidentWave(K0, 0.0), cfg)
    cfg2 = DtnConfig.create(TM, K0, 2 * ex1_mesh.R, LAM / 8, 40)
    with pytest.raises(AssemblyError):
        build_system(ex1_mesh, MaterialMap(K0), IncidentWave(K0, 0.0), cfg2)


def test_assembly_is_bit_deterministic(ex1_mesh):
    a, _ = _system(ex1_mesh)
    b, _ = _system(ex1_mesh)
    assert np.array_equal(a.A.data, b.A.data) and np.array_equal(a.A.indices, b.A.indices)
    assert np.array_equal(a.rhs, b.rhs)


def test_matrix_dump(tmp_path):
    A = sp.csr_matrix(np.array([[complex(1, 2), 0], [0.5, complex(0, -3)]]))
    write_matrix(A, tmp_path / "a.txt")
    lines = (tmp_path / "a.txt").read_text().splitlines()
    assert lines == ["0 0 1.0 2.0", "1 0 0.5 0.0", "1 1 0.0 -3.0"]
