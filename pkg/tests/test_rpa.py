import numpy as np
import pytest

from conftest import reference, results
from mrrpa.errors import InstabilityError
from mrrpa.fixtures import dense_coupling
from mrrpa.rpa import (RPAMatrices, _general_solve, assemble_AB, full_spectrum,
                       plasmon_energy, solve_rpa)

STABLE = ['dimer_sr', 'dimer_one_electron', 'h4_sr', 'h6_sr', 'h4_cas22', 'h6_cas22',
          'dimer_pair', 'h4_full_cas', 'dimer_full_cas']


def scalar(a, b):
    return RPAMatrices(np.array([[a]]), np.array([[b]]))


def test_scalar_two_by_two():
    sol = solve_rpa(scalar(2.0, 1.0))
    assert sol.omega_rpa[0] == pytest.approx(np.sqrt(3.0))
    assert sol.X[0, 0] ** 2 - sol.Y[0, 0] ** 2 == pytest.approx(1.0)
    assert sol.stable and sol.norm_ok


def test_scalar_plasmon():
    sol = solve_rpa(scalar(1.2, 0.2))
    assert sol.omega_rpa[0] == pytest.approx(np.sqrt(1.40), abs=1e-12)
    assert plasmon_energy(sol) == pytest.approx(-0.0083920, abs=1e-7)
    assert plasmon_energy(sol) == pytest.approx(0.5 * (np.sqrt(1.4) - 1.2), abs=1e-15)


def test_tda_coincidence():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 5))
    A = a @ a.T + 5 * np.eye(5)
    sol = solve_rpa(RPAMatrices(A, np.zeros((5, 5))))
    assert np.allclose(sol.omega_rpa, np.linalg.eigvalsh(A))
    assert np.allclose(sol.Y, 0.0)
    assert plasmon_energy(sol) == pytest.approx(0.0, abs=1e-12)


def _random_stable(seed, n=6):
    rng = np.random.default_rng(seed)
    w = np.sort(rng.uniform(0.5, 2.0, n))
    c = rng.normal(scale=0.2, size=(n, n))
    K = c @ c.T
    return RPAMatrices(np.diag(w) + K, K)


@pytest.mark.parametrize('seed', range(5))
def test_general_path_agrees(seed):
    m = _random_stable(seed)
    sym = solve_rpa(m)
    omega, X, Y, bad = _general_solve(m.A, m.B)
    assert not bad
    assert np.allclose(omega, sym.omega_rpa, atol=1e-10)
    assert np.allclose(X.T @ X - Y.T @ Y, np.eye(m.n), atol=1e-8)
    # eigenvectors agree up to sign
    s = np.sign(np.sum(X * sym.X, axis=0))
    assert np.allclose(X * s, sym.X, atol=1e-7)


def test_complex_frequencies_flagged():
    sol = solve_rpa(scalar(1.0, 2.0))
    assert not sol.stable
    assert sol.unstable_modes
    with pytest.raises(InstabilityError):
        plasmon_energy(sol)


def test_indefinite_metric_flagged():
    sol = solve_rpa(scalar(-2.0, 1.0))
    assert not sol.stable


@pytest.mark.parametrize('name', STABLE)
def test_structure_on_fixtures(name):
    res = results(name)
    m, sol = res.matrices, res.solution
    assert np.array_equal(m.A, m.A.T) and np.array_equal(m.B, m.B.T)
    assert sol.stable and sol.norm_ok
    if m.n:
        spec = full_spectrum(m)
        assert np.max(np.abs(spec.imag)) < 1e-9
        assert np.allclose(np.sort(spec.real), -np.sort(spec.real)[::-1], atol=1e-9)
        X, Y = sol.X, sol.Y
        assert np.allclose(X.T @ X - Y.T @ Y, np.eye(m.n), atol=1e-8)
        assert np.allclose(X.T @ Y - Y.T @ X, 0.0, atol=1e-8)
        assert np.all(np.diff(sol.omega_rpa) >= 0)
    assert res.de_rpa <= 1e-14


def test_sr_limit_textbook_matrices():
    fx, ref, man = reference('h4_sr')
    m = assemble_AB(man, ref.part.residual)
    g = ref.part.integrals.eri_dense
    eps = np.diag(ref.part.fock)
    for N, sn in enumerate(man.states):
        (a, i), = sn.d
        for M, sm in enumerate(man.states):
            (b, j), = sm.d
            same_ai = a % 2 == i % 2
            direct = g[a // 2, i // 2, j // 2, b // 2] if same_ai and b % 2 == j % 2 else 0.0
            diag = eps[a // 2] - eps[i // 2] if N == M else 0.0
            assert m.A[N, M] == pytest.approx(diag + direct, abs=1e-12)
            assert m.B[N, M] == pytest.approx(g[a // 2, i // 2, b // 2, j // 2]
                                              if same_ai and b % 2 == j % 2 else 0.0, abs=1e-12)


@pytest.mark.parametrize('name', ['h4_full_cas', 'dimer_full_cas'])
def test_full_cas_limit(name):
    fx, ref, man = reference(name)
    m = assemble_AB(man, ref.part.residual)
    assert np.array_equal(m.A, np.diag(man.omegas))
    assert np.array_equal(m.B, np.zeros_like(m.B))
    assert abs(plasmon_energy(solve_rpa(m))) < 1e-12


@pytest.mark.parametrize('name', ['h4_cas22', 'dimer_pair', 'dimer_one_electron'])
def test_against_dense_quadruple_loop(name):
    fx, ref, man = reference(name)
    m = assemble_AB(man, ref.part.residual)
    K = dense_coupling(man, ref.part.integrals, fx.spaces)
    assert np.allclose(m.A, np.diag(man.omegas) + K, atol=1e-12)
    assert np.allclose(m.B, K, atol=1e-12)


def test_empty_manifold():
    sol = solve_rpa(RPAMatrices(np.zeros((0, 0)), np.zeros((0, 0))))
    assert sol.stable and plasmon_energy(sol) == 0.0
