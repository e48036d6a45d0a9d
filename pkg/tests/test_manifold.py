import numpy as np
import pytest

from conftest import reference
from mrrpa import quadrature
from mrrpa.errors import DegeneracyError, UsageError
from mrrpa.fixtures import (BruteForceSpace, aggregate_degenerate, assemble_state,
                            brute_transition_densities)
from mrrpa.integrals import IntegralSet, hubbard_model
from mrrpa.manifold import build_manifold, required_sectors, solve_sectors
from mrrpa.partition import OrbitalSpaces
from mrrpa.pipeline import prepare_reference

BRUTE = ['dimer_sr', 'dimer_one_electron', 'h4_cas22', 'h4_sr', 'dimer_pair', 'h4_full_cas']


def _dense(man, nso):
    d = np.zeros((len(man), nso, nso))
    for k, st in enumerate(man.states):
        for (p, r), val in st.d.items():
            d[k, p, r] = val
    return d


def test_sr_limit_only_cv():
    fx, ref, man = reference('h6_sr')
    assert man.class_counts() == {'CV': 18, 'CA': 0, 'AV': 0, 'AA': 0}
    for st in man.states:
        (a, i), = st.d
        assert st.d[a, i] == 1.0 and a % 2 == i % 2


def test_full_cas_only_aa():
    fx, ref, man = reference('h4_full_cas')
    counts = man.class_counts()
    assert counts['AA'] == len(man) > 0
    assert all(p // 2 in fx.spaces.active and r // 2 in fx.spaces.active
               for p, r in man.pairs)


def test_cas22_counts():
    fx, ref, man = reference('h4_cas22')
    counts = man.class_counts()
    for cls in ('CV', 'CA', 'AV', 'AA'):
        assert counts[cls] == fx.expected['n_' + cls.lower()].value


@pytest.mark.parametrize('name', ['h4_cas22', 'h6_cas22', 'dimer_pair', 'dimer_one_electron'])
def test_sparsity_and_bookkeeping(name):
    fx, ref, man = reference(name)
    sp = fx.spaces
    seen = set()
    for st in man.states:
        assert st.omega > 0
        assert (st.class_tag, st.labels) not in seen
        seen.add((st.class_tag, st.labels))
        for (p, r) in st.d:
            assert (p, r) in man.pair_index
            assert p % 2 == r % 2
            P, R = p // 2, r // 2
            allowed = {'CV': (sp.virtual, sp.core), 'CA': (sp.active, sp.core),
                       'AV': (sp.virtual, sp.active), 'AA': (sp.active, sp.active)}
            assert P in allowed[st.class_tag][0] and R in allowed[st.class_tag][1]
    assert sorted(man.pair_index.values()) == list(range(len(man.pair_index)))


@pytest.mark.parametrize('name', BRUTE)
def test_against_brute_force(name):
    fx, ref, man = reference(name)
    space = BruteForceSpace(ref.part)
    _, omegas, d = brute_transition_densities(space)
    brute = [(w, P) for w, P in aggregate_degenerate(omegas, d) if np.max(np.abs(P)) > 1e-10]
    ours = aggregate_degenerate(man.omegas, _dense(man, space.nso))
    assert len(brute) == len(ours)
    for (w1, p1), (w2, p2) in zip(brute, ours):
        assert w1 == pytest.approx(w2, abs=1e-10)
        assert np.allclose(p1, p2, atol=1e-10)


@pytest.mark.parametrize('name', BRUTE)
def test_elementwise_phases(name):
    fx, ref, man = reference(name)
    space = BruteForceSpace(ref.part)
    ground = assemble_state(space, ref.part, ref.sectors)
    e_ref = 2 * np.sum(ref.part.eps_core) + ref.sectors[fx.spaces.n_active_electrons,
                                                        ref.part.ms2].energies[0]
    assert ground @ space.H_D @ ground == pytest.approx(e_ref, abs=1e-10)
    for st in man.states:
        vec = assemble_state(space, ref.part, ref.sectors, st)
        assert vec @ vec == pytest.approx(1.0, abs=1e-12)
        # eigenstate of H_D with the advertised excitation energy
        hv = space.H_D @ vec - (ground @ space.H_D @ ground) * vec
        assert np.allclose(hv, st.omega * vec, atol=1e-10)
        for p in range(space.nso):
            for r in range(space.nso):
                val = vec @ (space.excitation(p, r) @ ground)
                assert val == pytest.approx(st.d.get((p, r), 0.0), abs=1e-12)


def test_polarizability_matches_full_resolvent():
    fx, ref, man = reference('h4_cas22')
    space = BruteForceSpace(ref.part)
    idx = space.sector_indices()
    e, vec = np.linalg.eigh(space.H_D[np.ix_(idx, idx)])
    full = np.zeros((space.dim, len(e)))
    full[idx] = vec
    ground = full[:, 0]
    omega = 0.5
    pairs = man.pairs
    ket = np.array([space.excitation(p, r) @ ground for p, r in pairs])
    # resolvent over all sector states minus the ground-state projector
    proj = full @ full.T - np.outer(ground, ground)
    shift = full @ np.diag(e - e[0]) @ full.T
    resolvent = np.linalg.pinv(shift @ shift + omega ** 2 * proj, hermitian=True)
    pi = -2.0 * ket @ (shift @ resolvent @ proj) @ ket.T
    assert np.allclose(quadrature.polarizability(man, omega), pi, atol=1e-12)


def test_required_sectors_and_missing():
    fx, ref, man = reference('h4_cas22')
    assert set(required_sectors(fx.spaces, 0)) == {(2, 0), (3, 1), (3, -1), (1, -1), (1, 1)}
    sectors = dict(ref.sectors)
    del sectors[3, 1]
    with pytest.raises(UsageError):
        build_manifold(ref.part, sectors)


def test_degenerate_ground_state_rejected():
    ints = IntegralSet(3, 1, 1, np.diag([0.0, 0.0, 1.0]), {(0, 0, 0, 0): 0.5, (1, 1, 1, 1): 0.5})
    spaces = OrbitalSpaces((), (0, 1), (2,), 1)
    ref = prepare_reference(ints, spaces)
    with pytest.raises(DegeneracyError, match='degenerate'):
        build_manifold(ref.part, ref.sectors)


def test_negative_excitation_energy_aborts():
    # site basis: the "core" site sits above the virtual site in energy
    ints = hubbard_model(4, U=2.0)
    spaces = OrbitalSpaces((0,), (1, 2), (3,), 2)
    ref = prepare_reference(ints, spaces)
    with pytest.raises(DegeneracyError, match='omega'):
        build_manifold(ref.part, solve_sectors(ref.part))


def test_drop_tol_filters_everything():
    fx, ref, man = reference('h4_cas22')
    assert len(build_manifold(ref.part, ref.sectors, drop_tol=10.0)) == 0
