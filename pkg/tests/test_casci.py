import itertools

import numpy as np
import pytest

from mrrpa import casci
from mrrpa.errors import CapacityError, UsageError
from mrrpa.fixtures import BruteForceSpace
from mrrpa.integrals import IntegralSet, hubbard_model
from mrrpa.partition import OrbitalSpaces, build_dyall


def dimer_part(U=4.0, nelec=2):
    ints = hubbard_model(2, t=1.0, U=U, nelec=nelec)
    return build_dyall(ints, OrbitalSpaces((), (0, 1), (), nelec), np.eye(2) * nelec / 2)


@pytest.mark.parametrize('m, n, sz2, count', [(2, 2, 0, 4), (2, 1, 1, 2), (6, 6, 0, 400),
                                              (3, 0, 0, 1), (3, 6, 0, 1)])
def test_sector_sizes(m, n, sz2, count):
    dets = casci.enumerate_sector(m, n, sz2)
    assert len(dets) == count == casci.sector_dimension(m, n, sz2)
    assert dets == sorted(dets)
    na, nb = (n + sz2) // 2, (n - sz2) // 2
    assert all(bin(d.alpha).count('1') == na and bin(d.beta).count('1') == nb for d in dets)


def test_single_alpha_sector_order():
    assert casci.enumerate_sector(2, 1, 1) == [casci.Determinant(1, 0), casci.Determinant(2, 0)]


@pytest.mark.parametrize('m, n, sz2', [(2, 5, 1), (2, 2, 1), (2, 1, 3), (2, -1, 1), (1, 2, 2)])
def test_infeasible_sector(m, n, sz2):
    assert not casci.sector_feasible(m, n, sz2)
    with pytest.raises(UsageError):
        casci.enumerate_sector(m, n, sz2)


def test_dimer_spectrum():
    part = dimer_part(4.0)
    h = casci.build_active_hamiltonian(part, casci.enumerate_sector(2, 2, 0))
    assert np.allclose(h, h.T)
    expected = [2 - np.sqrt(4 + 4), 0.0, 4.0, 2 + np.sqrt(8)]
    assert np.allclose(np.linalg.eigvalsh(h), expected)
    sol = casci.solve_sector(part, 2, 0)
    assert sol.energies[0] == pytest.approx(-0.8284271247, abs=1e-10)


def test_noninteracting_dimer():
    sol = casci.solve_sector(dimer_part(0.0), 2, 0)
    assert sol.energies[0] == pytest.approx(-2.0)


@pytest.mark.parametrize('sz2', [1, -1])
def test_one_electron_sector(sz2):
    sol = casci.solve_sector(dimer_part(4.0), 1, sz2)
    assert np.allclose(sol.energies, [-1.0, 1.0])


def test_vacuum_sector():
    sol = casci.solve_sector(dimer_part(), 0, 0)
    assert len(sol) == 1 and sol.energies[0] == 0.0
    h = casci.build_active_hamiltonian(dimer_part(), casci.enumerate_sector(2, 0, 0))
    assert np.array_equal(h, [[0.0]])


def test_doubly_occupied_diagonal():
    ints = IntegralSet(1, 2, 0, [[-0.3]], {(0, 0, 0, 0): 0.45})
    part = build_dyall(ints, OrbitalSpaces((), (0,), (), 2), np.eye(1) * 2)
    h = casci.build_active_hamiltonian(part, casci.enumerate_sector(1, 2, 0))
    assert h[0, 0] == pytest.approx(2 * -0.3 + 0.45)


def test_capacity():
    with pytest.raises(CapacityError, match='smaller active space'):
        casci.solve_sector(dimer_part(), 2, 0, cap=3)


def _random_part(seed, m=3, nelec=3):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(m, m))
    c = rng.normal(size=(m, m, 2))
    c = c + c.transpose(1, 0, 2)
    g = 0.3 * np.einsum('pqk,rsk->pqrs', c, c)
    ints = IntegralSet.from_dense(h + h.T, g, nelec, nelec % 2)
    return build_dyall(ints, OrbitalSpaces((), tuple(range(m)), (), nelec),
                       np.eye(m) * nelec / m)


@pytest.mark.parametrize('key', [(3, 1), (2, 0), (4, 0), (3, -1)])
def test_sector_solution_invariants(key):
    part = _random_part(1)
    sol = casci.solve_sector(part, *key)
    V = sol.vectors
    h = casci.build_active_hamiltonian(part, list(sol.basis))
    assert np.allclose(V.T @ V, np.eye(len(sol)), atol=1e-10)
    assert np.max(np.linalg.norm(h @ V - V * sol.energies, axis=0)) < 1e-8
    assert np.all(np.diff(sol.energies) >= 0)


def test_matches_brute_force_fock_space():
    part = _random_part(2)
    space = BruteForceSpace(part)
    for key in ((3, 1), (2, 0), (1, -1)):
        idx = space.sector_indices(*key)
        brute = np.linalg.eigvalsh(space.H_D[np.ix_(idx, idx)])
        assert np.allclose(casci.solve_sector(part, *key).energies, brute, atol=1e-10)


def test_spectrum_invariant_under_orbital_permutation():
    part = _random_part(3)
    perm = [2, 0, 1]
    ints = part.integrals
    g = ints.eri_dense[np.ix_(perm, perm, perm, perm)]
    permuted = IntegralSet.from_dense(ints.h1[np.ix_(perm, perm)], g, ints.nelec, ints.ms2)
    other = build_dyall(permuted, part.spaces, part.gamma_active)
    for key in ((3, 1), (2, 0)):
        assert np.allclose(casci.solve_sector(part, *key).energies,
                           casci.solve_sector(other, *key).energies, atol=1e-10)


def _embed(space, sol, state):
    out = np.zeros(space.dim)
    m = sol.norb
    for c, det in zip(sol.vectors[:, state], sol.basis):
        occ = [2 * x for x in range(m) if det.alpha >> x & 1]
        occ += [2 * x + 1 for x in range(m) if det.beta >> x & 1]
        out[space.basis_index(occ)] = c
    return out


def test_annihilation_against_fock_operators():
    part = dimer_part(4.0)
    space = BruteForceSpace(part)
    ground = casci.solve_sector(part, 2, 0)
    target = casci.solve_sector(part, 1, 1)
    amp = casci.annihilation_amplitudes(target, ground)
    dens = casci.transition_density(target, 0, ground, 0, 'y')
    ket = _embed(space, ground, 0)
    for mu in range(len(target)):
        bra = _embed(space, target, mu)
        brute = [bra @ (space.annihilator(k) @ ket) for k in range(4)]
        assert np.allclose(amp[mu], brute, atol=1e-12)
    assert np.allclose(dens, amp[0])
    assert np.allclose(dens[0::2], 0.0)


def test_creation_against_fock_operators():
    part = _random_part(4)
    space = BruteForceSpace(part)
    src = casci.solve_sector(part, 3, 1)
    for tgt_key in ((4, 0), (4, 2)):
        tgt = casci.solve_sector(part, *tgt_key)
        amp = casci.creation_amplitudes(tgt, src, state=1)
        ket = _embed(space, src, 1)
        for mu in range(len(tgt)):
            bra = _embed(space, tgt, mu)
            brute = [bra @ (space.annihilator(k).T @ ket) for k in range(6)]
            assert np.allclose(amp[mu], brute, atol=1e-12)


def test_number_operator_and_orthogonality():
    part = _random_part(5)
    sol = casci.solve_sector(part, 3, 1)
    d0 = casci.transition_density(sol, 0, sol, 0, 'x†y')
    assert np.trace(d0) == pytest.approx(3.0)
    assert np.trace(casci.active_rdm1(sol)) == pytest.approx(3.0)
    for mu in range(1, len(sol)):
        assert abs(np.trace(casci.transition_density(sol, mu, sol, 0, 'x+y'))) < 1e-12


def test_hermiticity_and_excitation_tensor():
    part = _random_part(6)
    sol = casci.solve_sector(part, 3, 1)
    amp = casci.excitation_amplitudes(sol, 0)
    for mu in (1, 4):
        a = casci.transition_density(sol, mu, sol, 0, 'x+y')
        b = casci.transition_density(sol, 0, sol, mu, 'x+y')
        assert np.allclose(a, b.T, atol=1e-12)
        assert np.allclose(a, amp[mu], atol=1e-12)


def test_completeness_resolution():
    part = _random_part(7)
    space = BruteForceSpace(part)
    sol = casci.solve_sector(part, 3, 1)
    amp = casci.excitation_amplitudes(sol, 0)
    ket = _embed(space, sol, 0)
    for x, y in itertools.product(range(6), repeat=2):
        if x % 2 != y % 2:
            continue
        op = space.excitation(x, y)
        vec = op @ ket
        assert np.sum(amp[:, x, y] ** 2) == pytest.approx(vec @ vec, abs=1e-12)


def test_incompatible_sectors():
    part = _random_part(8)
    a = casci.solve_sector(part, 3, 1)
    b = casci.solve_sector(part, 2, 0)
    with pytest.raises(UsageError):
        casci.transition_density(a, 0, b, 0, 'x+y')
    with pytest.raises(UsageError):
        casci.transition_density(b, 0, a, 0, 'x+')
    with pytest.raises(UsageError):
        casci.transition_density(a, 0, a, 0, 'xy')
