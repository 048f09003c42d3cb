import math

import numpy as np
import pytest
from scipy.special import h1vp, hankel1

from cavitydtn.dtn import DtnConfig, dtn_apply_trace, tbc_matrix, trace_fourier_coefficients
from cavitydtn.geometry import arc_from_angles
from cavitydtn.physics import TE, TM
from oracles import gauss_on_chords

K0, R = 32 * math.pi, 1 / 32


def cfg(pol, N=20, k=K0, r=R):
    return DtnConfig.create(pol, k, r, r / 4, N)


def uniform_arc(M, r=R):
    return arc_from_angles(np.linspace(0, math.pi, M), r)


def random_arc(M, seed=0, r=R):
    rng = np.random.default_rng(seed)
    inner = np.sort(rng.uniform(0, math.pi, M - 2))
    return arc_from_angles(np.concatenate([[0.0], inner, [math.pi]]), r)


def hat_values(arc, t, i):
    """Hat function of node i at the Gauss points of every chord."""
    out = np.zeros((arc.M - 1, len(t)))
    if i > 0:
        out[i - 1] = t
    if i < arc.M - 1:
        out[i] = 1 - t
    return out


def test_config_validation():
    with pytest.raises(ValueError):
        DtnConfig.create(TM, K0, R, R, 20)
    with pytest.raises(ValueError):
        DtnConfig.create(TM, K0, R, R / 2, 4)  # N < e k R / 2 = 4.27
    with pytest.raises(ValueError):
        DtnConfig.create("TX", K0, R, R / 2, 20)
    assert cfg(TM).orders[0] == 1 and cfg(TE).orders[0] == 0


def test_zero_trace():
    a = uniform_arc(33)
    for pol in (TM, TE):
        assert not np.any(trace_fourier_coefficients(a, np.zeros(a.M), cfg(pol)))
        assert not np.any(dtn_apply_trace(a, np.zeros(a.M), cfg(pol)))


@pytest.mark.parametrize("pol", [TM, TE])
def test_single_cell_bracket_matches_quadrature(pol):
    # beta_i^(n) = int sin(n phi) L_i ds with the P1 interpolant of the mode along chords
    a = random_arc(9, seed=4, r=1.0)
    c = DtnConfig.create(pol, 4.0, 1.0, 0.5, 6)
    t, w, _ = gauss_on_chords(a.points, 16)
    modes = c.modes(a.phi)
    for i in range(a.M):
        L = hat_values(a, t, i)
        for k, n in enumerate(c.orders[:6]):
            s = modes[k]
            s_lin = s[:-1, None] * (1 - t) + s[1:, None] * t
            ref = np.sum(w * s_lin * L)
            got = trace_fourier_coefficients(a, np.eye(a.M)[i], c)[k] / c.weights[k]
            assert got == pytest.approx(ref, abs=1e-12)


def test_single_mode_dominates():
    a = uniform_arc(513)
    c = cfg(TM, N=20)
    m = 3
    u = np.sin(m * a.phi)
    coef = trace_fourier_coefficients(a, u, c)
    main = abs(coef[m - 1])
    assert main == pytest.approx(1.0, rel=1e-3)
    others = np.delete(np.abs(coef), m - 1)
    assert others.max() <= 1e-3 * main


def test_linearity():
    rng = np.random.default_rng(2)
    a = random_arc(40)
    for pol in (TM, TE):
        c = cfg(pol)
        v, w = rng.normal(size=(2, a.M)) + 1j * rng.normal(size=(2, a.M))
        x, y = 0.3 - 2j, 1.7 + 0.1j
        lhs = dtn_apply_trace(a, x * v + y * w, c)
        rhs = x * dtn_apply_trace(a, v, c) + y * dtn_apply_trace(a, w, c)
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * np.max(np.abs(lhs))


@pytest.mark.parametrize("pol", [TM, TE])
def test_tbc_matrix_symmetric_exactly(pol):
    F = tbc_matrix(random_arc(64, seed=7), cfg(pol)).F
    assert np.array_equal(F, F.T)


@pytest.mark.parametrize("pol", [TM, TE])
def test_compositional_oracle(pol):
    """v^T F conj(v) equals int (B^N u_h) conj(u_h) ds assembled by quadrature."""
    rng = np.random.default_rng(11)
    a = random_arc(64, seed=3)
    c = cfg(pol)
    v = rng.normal(size=a.M) + 1j * rng.normal(size=a.M)
    F = tbc_matrix(a, c).F
    lhs = v @ F @ np.conj(v)
    coef = trace_fourier_coefficients(a, v, c)
    t, w, _ = gauss_on_chords(a.points, 8)
    modes = c.modes(a.phi)
    lin = lambda nodal: nodal[..., :-1, None] * (1 - t) + nodal[..., 1:, None] * t
    Bu = np.tensordot(c.coefficients[c.orders] * coef, lin(modes), axes=1)
    rhs = np.sum(w * Bu * np.conj(lin(v)))
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs)


@pytest.mark.parametrize("pol", [TM, TE])
def test_spectral_action_continuum_limit(pol):
    m = 3
    c = cfg(pol)
    d = K0 * h1vp(m, K0 * R) / hankel1(m, K0 * R)
    basis = np.sin if pol == TM else np.cos
    errs = []
    for M in (129, 513, 2049):
        a = uniform_arc(M)
        u = basis(m * a.phi)
        errs.append(np.max(np.abs(dtn_apply_trace(a, u, c) - d * u)) / abs(d))
    assert errs[1] <= 1e-2
    assert errs[2] < errs[1] < errs[0]


def test_spectral_action_of_matrix():
    # F applied to the interpolated mode reproduces d_m times the mass-weighted mode
    m, M = 3, 513
    a = uniform_arc(M)
    F = tbc_matrix(a, cfg(TM)).F
    u = np.sin(m * a.phi)
    d = K0 * h1vp(m, K0 * R) / hankel1(m, K0 * R)
    l = a.lengths
    idx = np.arange(M)
    mass = np.zeros((M, M))
    mass[idx, idx] = (l[:-1] + l[1:]) / 3
    mass[idx[1:], idx[:-1]] = l[1:-1] / 6
    mass[idx[:-1], idx[1:]] = l[1:-1] / 6
    ref = d * (mass @ u)
    assert np.linalg.norm(F @ u - ref) <= 1e-2 * np.linalg.norm(ref)


def test_quadratic_form_converges_in_n():
    # F entries themselves do not settle (|beta| ~ h for n < M while d_n grows),
    # but the form on a fixed trace does once its Fourier tail is exhausted
    a = uniform_arc(2049)
    v = a.phi * (math.pi - a.phi)
    vals = [v @ tbc_matrix(a, cfg(TM, N=N)).F @ v for N in (10, 20, 30, 40, 50)]
    diffs = np.abs(np.diff(vals))
    assert np.all(np.diff(diffs) < 0)
    assert diffs[-1] <= 1e-3 * abs(vals[-1])


def test_arc_radius_mismatch():
    with pytest.raises(ValueError):
        tbc_matrix(uniform_arc(9, r=2 * R), cfg(TM))
