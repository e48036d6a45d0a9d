"""Test systems and brute-force oracles.

Hubbard fixtures are expressed in the eigenbasis of the hopping matrix
(Hueckel orbitals), so the lowest orbitals are the natural core.  Every
fixture carries its expected values together with a provenance tag.

``BruteForceSpace`` builds H, H_D and V as dense matrices over the full Fock
space of at most four spatial orbitals.  Fermionic modes follow the global
order used by the manifold builder: core alpha, core beta, active alpha,
active beta, virtual alpha, virtual beta, each block by ascending orbital.
"""

import dataclasses
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from mrrpa.errors import CapacityError, DegeneracyError, UsageError
from mrrpa.integrals import compose_noninteracting, h1_eigenbasis, hubbard_model
from mrrpa.manifold import ExcitationManifold, ExcitedState
from mrrpa.partition import OrbitalSpaces

__all__ = [
    'Expected', 'Fixture', 'ScalarInteraction', 'scalar_model', 'FIXTURES',
    'get_fixture', 'hubbard_fixture', 'composed_dimer_pair', 'BruteForceSpace',
    'brute_transition_densities', 'brute_second_order', 'ring_second_order',
    'assemble_state', 'aggregate_degenerate', 'dense_coupling', 'MAX_BRUTE_ORBITALS',
]

MAX_BRUTE_ORBITALS = 4


@dataclasses.dataclass(frozen=True)
class Expected:
    value: float
    tag: str


@dataclasses.dataclass(frozen=True, eq=False)
class Fixture:
    name: str
    integrals: object
    spaces: OrbitalSpaces
    expected: Mapping[str, Expected]
    note: str = ''


# scalar model -------------------------------------------------------------

class ScalarInteraction:
    """Interaction given directly as a matrix in a manifold's pair basis."""

    def __init__(self, matrix, exchange_matrix=None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.exchange_matrix = (np.zeros_like(self.matrix) if exchange_matrix is None
                                else np.atleast_2d(np.asarray(exchange_matrix, dtype=float)))

    def pair_matrix(self, pairs, exchange=False):
        if len(pairs) != self.matrix.shape[0]:
            raise UsageError('pair basis does not match the interaction matrix')
        return self.matrix - self.exchange_matrix if exchange else self.matrix.copy()


def scalar_model(omega=1.0, b=0.2):
    """One excitation with unit transition density and coupling v d^2 = b.

    Gives A = omega + b and B = b.
    """
    state = ExcitedState('CV', float(omega), {(2, 0): 1.0}, (0, 2))
    return ExcitationManifold.from_states([state]), ScalarInteraction([[b]])


# Hubbard fixtures ---------------------------------------------------------

def _mo_hubbard(nsite, U, t=1.0, nelec=None):
    return h1_eigenbasis(hubbard_model(nsite, t=t, U=U, nelec=nelec))


def _dimer_rpa(t, U):
    d = 2.0 * t
    return 0.5 * (np.sqrt(d * (d + 2.0 * U)) - d - U)


def hubbard_fixture(name, U=2.0, t=1.0):
    """Build one of the named Hubbard fixtures."""
    closed = 'DERIVED: closed-shell determinant energy'
    if name == 'dimer_sr':
        e = -2.0 * t + 0.5 * U
        rpa = _dimer_rpa(t, U)
        return Fixture(name, _mo_hubbard(2, U, t), OrbitalSpaces((0,), (), (1,), 0), {
            'e_casci': Expected(e, closed),
            'e_fci': Expected(U / 2 - np.sqrt(U ** 2 / 4 + 4 * t ** 2),
                              'DERIVED: analytic 4x4 diagonalization'),
            'de_rpa': Expected(rpa, 'DERIVED: singlet/triplet 1x1 blocks'),
            'de_sosex': Expected(0.5 * rpa, 'DERIVED: only opposite-spin exchange survives'),
        }, 'two-site chain, bonding orbital doubly occupied')
    if name == 'dimer_one_electron':
        omega = 2.0 * t + U / 4
        a, b = omega + U / 2, U / 2
        return Fixture(name, _mo_hubbard(2, U, t, nelec=1),
                       OrbitalSpaces((), (0,), (1,), 1), {
            'e_casci': Expected(-t, 'DERIVED: bonding orbital energy'),
            'de_rpa': Expected(0.5 * (np.sqrt(a * a - b * b) - a),
                               'DERIVED: single AV state closed form'),
            'de_sosex': Expected(0.0, 'DERIVED: one-electron exchange cancellation'),
        }, 'two-site chain with one electron, CAS(1,1)')
    if name == 'dimer_full_cas':
        return Fixture(name, _mo_hubbard(2, U, t), OrbitalSpaces((), (0, 1), (), 2), {
            'e_casci': Expected(U / 2 - np.sqrt(U ** 2 / 4 + 4 * t ** 2),
                                'DERIVED: analytic 4x4 diagonalization'),
            'de_rpa': Expected(0.0, 'TRIVIAL: full-CAS limit'),
            'de_sosex': Expected(0.0, 'TRIVIAL: full-CAS limit'),
        }, 'two-site chain, every orbital active')
    if name == 'h4_sr':
        return Fixture(name, _mo_hubbard(4, U, t), OrbitalSpaces((0, 1), (), (2, 3), 0), {
            'n_cv': Expected(8, 'TRIVIAL: 2 core x 2 virtual x 2 spins'),
        }, 'four-site chain, two lowest orbitals doubly occupied')
    if name == 'h6_sr':
        return Fixture(name, _mo_hubbard(6, U, t),
                       OrbitalSpaces((0, 1, 2), (), (3, 4, 5), 0), {
            'n_cv': Expected(18, 'TRIVIAL: 3 core x 3 virtual x 2 spins'),
        }, 'six-site chain, single reference')
    if name == 'h4_cas22':
        return Fixture(name, _mo_hubbard(4, U, t), OrbitalSpaces((0,), (1, 2), (3,), 2), {
            'n_cv': Expected(2, 'TRIVIAL: 1 core x 1 virtual x 2 spins'),
            'n_ca': Expected(4, 'DERIVED: 2 spins x dim(3 electrons, |sz2| = 1) = 2'),
            'n_av': Expected(4, 'DERIVED: 2 spins x dim(1 electron, |sz2| = 1) = 2'),
            'n_aa': Expected(3, 'DERIVED: dim(2 electrons, sz2 = 0) - 1'),
        }, 'four-site chain, CAS(2,2) over the frontier orbitals')
    if name == 'h4_full_cas':
        return Fixture(name, _mo_hubbard(4, U, t), OrbitalSpaces((), (0, 1, 2, 3), (), 4), {
            'de_rpa': Expected(0.0, 'TRIVIAL: full-CAS limit'),
            'de_sosex': Expected(0.0, 'TRIVIAL: full-CAS limit'),
        }, 'four-site chain, every orbital active')
    if name == 'h6_cas22':
        return Fixture(name, _mo_hubbard(6, U, t),
                       OrbitalSpaces((0, 1), (2, 3), (4, 5), 2), {
            'n_cv': Expected(8, 'TRIVIAL: 2 core x 2 virtual x 2 spins'),
        }, 'six-site chain, CAS(2,2) over the frontier orbitals')
    if name == 'dimer_pair':
        return composed_dimer_pair(U, t)
    raise UsageError(f'unknown fixture {name!r}')


def composed_dimer_pair(U=2.0, t=1.0):
    """Two noninteracting one-electron dimers; the union of CAS(1,1) spaces is CAS(2,2)."""
    frag = _mo_hubbard(2, U, t, nelec=1)
    both = compose_noninteracting(frag, frag)
    spaces = OrbitalSpaces((), (0, 2), (1, 3), 2)
    e = -2.0 * t
    return Fixture('dimer_pair', both, spaces, {
        'e_casci': Expected(e, 'DERIVED: sum of fragment energies'),
    }, 'block-separable pair of one-electron dimers')


FIXTURES = ('dimer_sr', 'dimer_one_electron', 'dimer_full_cas', 'h4_sr', 'h6_sr',
            'h4_cas22', 'h4_full_cas', 'h6_cas22', 'dimer_pair')


def get_fixture(name, U=2.0, t=1.0):
    return hubbard_fixture(name, U=U, t=t)


# brute-force Fock space -----------------------------------------------------

def _mode_map(spaces):
    """Spin-orbital 2p+s -> fermionic mode in the global order."""
    out = {}
    offset = 0
    for block in (spaces.core, spaces.active, spaces.virtual):
        n = len(block)
        for k, p in enumerate(block):
            for s in (0, 1):
                out[2 * p + s] = offset + k + s * n
        offset += 2 * n
    return out


def _popcount(x):
    return bin(x).count('1')


class BruteForceSpace:
    """Dense Fock-space representation of H, H_D and V for one partition."""

    def __init__(self, part):
        norb = part.integrals.norb
        if norb > MAX_BRUTE_ORBITALS:
            raise CapacityError(f'brute force is limited to {MAX_BRUTE_ORBITALS} '
                                f'spatial orbitals, got {norb}')
        self.part = part
        self.norb = norb
        self.nso = 2 * norb
        self.dim = 1 << self.nso
        self.mode = _mode_map(part.spaces)
        self._ann = [self._annihilator(self.mode[k]) for k in range(self.nso)]
        self._ex = {}
        self.nelec = part.integrals.nelec
        self.ms2 = part.integrals.ms2
        self.H = self._hamiltonian()
        self.H_D = self._dyall()
        self.V = self._residual()

    def _annihilator(self, mode):
        rows, cols, vals = [], [], []
        for n in range(self.dim):
            if n >> mode & 1:
                rows.append(n ^ (1 << mode))
                cols.append(n)
                vals.append(-1.0 if _popcount(n & ((1 << mode) - 1)) % 2 else 1.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))

    def annihilator(self, so):
        return self._ann[so]

    def excitation(self, p, r):
        """Sparse p^dagger r over spin orbitals."""
        key = (p, r)
        if key not in self._ex:
            self._ex[key] = (self._ann[p].T @ self._ann[r]).tocsr()
        return self._ex[key]

    def dense_excitation(self, p, r):
        return self.excitation(p, r).toarray()

    def _one_body(self, h):
        out = sp.csr_matrix((self.dim, self.dim))
        for p in range(self.nso):
            for q in range(self.nso):
                if p % 2 == q % 2 and h[p // 2, q // 2] != 0.0:
                    out = out + h[p // 2, q // 2] * self.excitation(p, q)
        return out

    def _two_body(self, value):
        """1/2 sum value(P, R, Q, S) P^dag Q^dag S R."""
        out = sp.csr_matrix((self.dim, self.dim))
        n = self.nso
        for P in range(n):
            for R in range(n):
                for Q in range(n):
                    for S in range(n):
                        v = value(P, R, Q, S)
                        if v == 0.0:
                            continue
                        term = self.excitation(P, R) @ self.excitation(Q, S)
                        if R == Q:
                            term = term - self.excitation(P, S)
                        out = out + 0.5 * v * term
        return out

    def _hamiltonian(self):
        g = self.part.integrals.eri_dense

        def chem(P, R, Q, S):
            if P % 2 != R % 2 or Q % 2 != S % 2:
                return 0.0
            return g[P // 2, R // 2, Q // 2, S // 2]

        return (self._one_body(self.part.integrals.h1) + self._two_body(chem)).toarray()

    def _dyall(self):
        act = self.part.spaces.active
        pos = {x: k for k, x in enumerate(act)}
        g = self.part.active_eri

        def active_only(P, R, Q, S):
            idx = [x // 2 for x in (P, R, Q, S)]
            if P % 2 != R % 2 or Q % 2 != S % 2 or any(x not in pos for x in idx):
                return 0.0
            return g[tuple(pos[x] for x in idx)]

        hd = self._one_body(self.part.one_body_zeroth_order())
        return (hd + self._two_body(active_only)).toarray()

    def _residual(self):
        v = self.part.residual
        one = sp.csr_matrix((self.dim, self.dim))
        for p in range(self.nso):
            for q in range(self.nso):
                val = v.one_body(p, q)
                if val != 0.0:
                    one = one + val * self.excitation(p, q)
        return (one + self._two_body(v.two_body)).toarray()

    def sector_indices(self, nelec=None, ms2=None):
        """Basis indices with the given electron count and twice Sz."""
        nelec = self.nelec if nelec is None else nelec
        ms2 = self.ms2 if ms2 is None else ms2
        alpha = sum(1 << self.mode[2 * p] for p in range(self.norb))
        out = [n for n in range(self.dim)
               if _popcount(n) == nelec and _popcount(n & alpha) - _popcount(n & ~alpha) == ms2]
        return np.array(out, dtype=int)

    def basis_index(self, spin_orbitals):
        return sum(1 << self.mode[k] for k in spin_orbitals)


def aggregate_degenerate(omegas, vectors, tol=1e-8):
    """Group states by excitation energy; returns [(omega, sum_N d_N d_N^T)]."""
    omegas = np.asarray(omegas)
    vectors = np.asarray(vectors).reshape(len(omegas), -1)
    order = np.argsort(omegas, kind='stable')
    groups = []
    for n in order:
        if groups and omegas[n] - groups[-1][0] < tol:
            groups[-1][1].append(n)
        else:
            groups.append((omegas[n], [n]))
    return [(float(np.mean(omegas[idx])), vectors[idx].T @ vectors[idx]) for _, idx in groups]


def brute_transition_densities(space, gap_tol=1e-8):
    """Diagonalize H_D in the physical sector.

    Returns ``(e0, omegas, d)`` with ``d[N, p, r] = <N|p^dag r|0>`` over spin
    orbitals for every excited state N > 0 of the sector.
    """
    idx = space.sector_indices()
    hd = space.H_D[np.ix_(idx, idx)]
    e, vec = np.linalg.eigh(hd)
    if len(e) > 1 and e[1] - e[0] < gap_tol:
        raise DegeneracyError('zeroth-order ground state is degenerate')
    full = np.zeros((space.dim, len(e)))
    full[idx] = vec
    ground = full[:, 0]
    n = space.nso
    d = np.zeros((len(e) - 1, n, n))
    for p in range(n):
        for r in range(n):
            if p % 2 == r % 2:
                d[:, p, r] = full[:, 1:].T @ (space.excitation(p, r) @ ground)
    return e[0], e[1:] - e[0], d


def ring_second_order(omegas, K):
    """-1/2 sum_NM K_NM^2 / (omega_N + omega_M)."""
    w = np.asarray(omegas)
    return -0.5 * float(np.sum(np.asarray(K) ** 2 / (w[:, None] + w[None, :])))


def _independent_v(integrals, spaces, P, R, Q, S):
    if P % 2 != R % 2 or Q % 2 != S % 2:
        return 0.0
    idx = (P // 2, R // 2, Q // 2, S // 2)
    if all(x in spaces.active for x in idx):
        return 0.0
    return integrals.get_eri(*idx)


def brute_second_order(space, gap_tol=1e-8):
    """Rayleigh-Schroedinger second-order energy and its ring channel.

    ``full`` uses the complete residual V (one- and two-body) between
    eigenstates of H_D in the physical sector.  ``ring`` restricts V to the
    particle-hole channel: -1/2 sum K_NM^2 / (w_N + w_M) with K built from
    brute-force transition densities and an explicit quadruple loop over v.
    """
    idx = space.sector_indices()
    e, vec = np.linalg.eigh(space.H_D[np.ix_(idx, idx)])
    if len(e) > 1 and e[1] - e[0] < gap_tol:
        raise DegeneracyError('zeroth-order ground state is degenerate')
    vsec = space.V[np.ix_(idx, idx)]
    coupling = vec[:, 1:].T @ (vsec @ vec[:, 0])
    full = -float(np.sum(coupling ** 2 / (e[1:] - e[0])))

    _, omegas, d = brute_transition_densities(space, gap_tol)
    part = space.part
    n = space.nso
    vq = np.zeros((n, n, n, n))
    for P in range(n):
        for R in range(n):
            for Q in range(n):
                for S in range(n):
                    vq[P, R, Q, S] = _independent_v(part.integrals, part.spaces, P, R, Q, S)
    K = np.einsum('Npr,prqs,Mqs->NM', d, vq, d)
    return {'full': full, 'ring': ring_second_order(omegas, K)}


def assemble_state(space, part, sectors, state=None):
    """Fock-space vector of a manifold state in the product convention.

    ``state=None`` gives the reference |core>|Phi_0>.  CA and AV states are
    |core minus i>|Phi_mu> and |core>|Phi_mu>|a> with unit sign in the global
    mode order; AA states replace Phi_0 by Phi_mu.  A CV state is defined by
    its transition density d[(a, i)] = 1, i.e. a^dag i |0>.
    """
    if state is not None and state.class_tag == 'CV':
        i, a = state.labels
        return space.excitation(a, i) @ assemble_state(space, part, sectors)
    spaces = part.spaces
    key, mu = (spaces.n_active_electrons, part.ms2), 0
    fixed = [2 * i + s for i in spaces.core for s in (0, 1)]
    if state is not None:
        if state.class_tag == 'CA':
            hole, key, mu = state.labels
            fixed.remove(hole)
        elif state.class_tag == 'AV':
            particle, key, mu = state.labels
            fixed.append(particle)
        else:
            key, mu = state.labels
    sol = sectors[key]
    act = spaces.active
    out = np.zeros(space.dim)
    for c, det in zip(sol.vectors[:, mu], sol.basis):
        occ = [2 * p for x, p in enumerate(act) if det.alpha >> x & 1]
        occ += [2 * p + 1 for x, p in enumerate(act) if det.beta >> x & 1]
        out[space.basis_index(fixed + occ)] += c
    return out


def dense_coupling(man, integrals, spaces, exchange=False):
    """K[N, M] from dense d matrices and an explicit loop over spin-orbital quadruples."""
    n = 2 * integrals.norb
    d = np.zeros((len(man), n, n))
    for k, st in enumerate(man.states):
        for (p, r), val in st.d.items():
            d[k, p, r] = val
    K = np.zeros((len(man), len(man)))
    for P in range(n):
        for R in range(n):
            if not d[:, P, R].any():
                continue
            for Q in range(n):
                for S in range(n):
                    v = _independent_v(integrals, spaces, P, R, Q, S)
                    if exchange:
                        v -= _independent_v(integrals, spaces, P, S, Q, R)
                    if v != 0.0:
                        K += v * np.outer(d[:, P, R], d[:, Q, S])
    return K
