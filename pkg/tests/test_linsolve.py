import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp

from cavitydtn.linsolve import (
    RESIDUAL_TOL,
    RefinementError,
    SingularMatrixError,
    StructurallySingularError,
    factor,
    relative_residual,
    solve,
    solve_system,
)


def test_identity():
    A = sp.identity(5, dtype=complex, format="csr")
    b = np.arange(5) + 1j
    assert np.array_equal(solve_system(A, b), b)


def test_two_by_two_complex_symmetric():
    A = sp.csr_matrix(np.array([[2, 1j], [1j, 1]]))
    # det = 2 + 1 = 3, inverse = [[1, -i], [-i, 2]] / 3
    b = np.array([1.0, 2.0 + 1j])
    ref = np.array([[1, -1j], [-1j, 2]]) @ b / 3
    assert np.allclose(solve_system(A, b), ref, rtol=1e-14)


def random_symmetric(n, seed=0, density=0.02):
    rng = np.random.default_rng(seed)
    B = sp.random(n, n, density=density, random_state=rng, dtype=complex,
                  data_rvs=lambda k: rng.normal(size=k) + 1j * rng.normal(size=k))
    return (B + B.T + sp.identity(n) * (2 * n * density + 4)).tocsr()


def test_random_symmetric_residual():
    A = random_symmetric(200)
    b = np.random.default_rng(1).normal(size=200) + 0j
    x = solve_system(A, b)
    assert relative_residual(A, x, b) <= 1e-12


def test_zero_rhs():
    A = random_symmetric(50)
    assert not np.any(solve_system(A, np.zeros(50, complex)))


def test_unit_vector_recovered():
    A = random_symmetric(80, seed=3)
    fact = factor(A)
    for k in (0, 41, 79):
        e = np.zeros(80)
        e[k] = 1
        assert np.max(np.abs(solve(fact, A @ e) - e)) <= 1e-10


def test_factorization_reusable_and_reports_pivots():
    A = random_symmetric(60, seed=4)
    fact = factor(A)
    assert 0 < fact.min_pivot <= fact.max_pivot
    assert sorted(fact.perm_c.tolist()) == list(range(60))
    rng = np.random.default_rng(0)
    for _ in range(3):
        b = rng.normal(size=60) + 1j * rng.normal(size=60)
        assert relative_residual(A, solve(fact, b), b) <= RESIDUAL_TOL


def test_structurally_singular():
    A = sp.csr_matrix(np.array([[1.0, 2.0, 0], [3.0, 4.0, 0], [0, 0, 0]]))
    with pytest.raises(StructurallySingularError):
        factor(A)


def test_numerically_singular():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex))
    with pytest.raises(SingularMatrixError):
        factor(A)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        factor(sp.csr_matrix(np.ones((2, 3))))
    with pytest.raises(ValueError):
        solve(factor(sp.identity(3, format="csr")), np.ones(4))


def test_refinement_failure_reports_residual():
    # pair A with the factors of a different matrix so refinement cannot converge
    A = random_symmetric(40, seed=5)
    wrong = factor(random_symmetric(40, seed=6))
    fake = dataclasses.replace(wrong, A=sp.csc_matrix(A))
    with pytest.raises(RefinementError) as info:
        solve(fake, np.ones(40, complex))
    assert info.value.residual > RESIDUAL_TOL


def test_empty_system():
    x = solve_system(sp.csr_matrix((0, 0), dtype=complex), np.zeros(0, complex))
    assert x.shape == (0,)
