"""Exact diagonalization of the active-space Hamiltonian.

Determinants are pairs of bit strings over the active orbitals.  Creation
operators are ordered alpha string first, then beta string, each by
ascending orbital index, so an operator on mode ``k`` picks up the parity of
the occupied modes below ``k`` in the combined string ``alpha | beta << M``.
Active spin orbitals are numbered ``2*x + s`` as in the rest of the package.
"""

import dataclasses
from itertools import combinations
from math import comb
from typing import NamedTuple, Tuple

import numpy as np
import scipy.sparse as sp

from mrrpa.errors import CapacityError, UsageError

__all__ = [
    'Determinant', 'SectorSolution', 'enumerate_sector', 'sector_feasible',
    'build_active_hamiltonian', 'solve_sector', 'transition_density',
    'creation_amplitudes', 'annihilation_amplitudes', 'excitation_amplitudes',
    'active_rdm1', 'DEFAULT_SECTOR_CAP',
]

DEFAULT_SECTOR_CAP = 20000


class Determinant(NamedTuple):
    alpha: int
    beta: int


def sector_feasible(norb, nelec, sz2):
    if nelec < 0 or nelec > 2 * norb or (nelec + sz2) % 2 or abs(sz2) > nelec:
        return False
    na, nb = (nelec + sz2) // 2, (nelec - sz2) // 2
    return na <= norb and nb <= norb


def _strings(norb, n):
    return sorted(sum(1 << i for i in occ) for occ in combinations(range(norb), n))


def enumerate_sector(norb, nelec, sz2):
    if not sector_feasible(norb, nelec, sz2):
        raise UsageError(f'sector (nelec={nelec}, sz2={sz2}) is infeasible '
                         f'for {norb} orbitals')
    na, nb = (nelec + sz2) // 2, (nelec - sz2) // 2
    return [Determinant(a, b) for a in _strings(norb, na) for b in _strings(norb, nb)]


def sector_dimension(norb, nelec, sz2):
    if not sector_feasible(norb, nelec, sz2):
        return 0
    return comb(norb, (nelec + sz2) // 2) * comb(norb, (nelec - sz2) // 2)


def _mode(so, norb):
    x, s = divmod(so, 2)
    return x + s * norb


def _bits(det, norb):
    return det.alpha | (det.beta << norb)


def _parity(bits, mode):
    return -1 if bin(bits & ((1 << mode) - 1)).count('1') % 2 else 1


def _apply(bits, ops):
    """Apply ``ops`` (rightmost first) as (create?, mode) to a bit string."""
    sign = 1
    for create, mode in reversed(ops):
        occupied = bits >> mode & 1
        if occupied == create:
            return None, 0
        sign *= _parity(bits, mode)
        bits ^= 1 << mode
    return bits, sign


def _operator(target, source, norb, ops):
    """Sparse matrix of a string of creation/annihilation operators."""
    index = {_bits(d, norb): i for i, d in enumerate(target)}
    rows, cols, vals = [], [], []
    for j, det in enumerate(source):
        new, sign = _apply(_bits(det, norb), ops)
        if new is not None and new in index:
            rows.append(index[new])
            cols.append(j)
            vals.append(sign)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(target), len(source)))


def _spin_summed_excitations(basis, norb):
    ops = {}
    for x in range(norb):
        for y in range(norb):
            mat = None
            for s in (0, 1):
                term = _operator(basis, basis, norb,
                                 [(1, x + s * norb), (0, y + s * norb)])
                mat = term if mat is None else mat + term
            ops[x, y] = mat
    return ops


def build_active_hamiltonian(part, basis):
    """H_A = sum f_xy E_xy + 1/2 sum (xy|zw) (E_xy E_zw - delta_yz E_xw)."""
    norb = part.n_active
    dim = len(basis)
    if norb == 0 or dim == 0:
        return np.zeros((dim, dim))
    f = part.f_active
    g = part.active_eri
    E = _spin_summed_excitations(basis, norb)
    hp = f - 0.5 * np.einsum('xzzy->xy', g)
    ham = sp.csr_matrix((dim, dim))
    for x in range(norb):
        for y in range(norb):
            w = hp[x, y] * sp.identity(dim, format='csr')
            for z in range(norb):
                for v in range(norb):
                    if g[x, y, z, v] != 0.0:
                        w = w + (0.5 * g[x, y, z, v]) * E[z, v]
            ham = ham + E[x, y] @ w
    ham = ham.toarray()
    return 0.5 * (ham + ham.T)


@dataclasses.dataclass(frozen=True, eq=False)
class SectorSolution:
    norb: int
    nelec: int
    sz2: int
    basis: Tuple[Determinant, ...]
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def key(self):
        return (self.nelec, self.sz2)

    def __len__(self):
        return len(self.energies)


def solve_sector(part, nelec, sz2, cap=DEFAULT_SECTOR_CAP):
    norb = part.n_active
    dim = sector_dimension(norb, nelec, sz2)
    if dim > cap:
        raise CapacityError(f'sector (nelec={nelec}, sz2={sz2}) has dimension {dim} '
                            f'> cap {cap}; choose a smaller active space')
    basis = tuple(enumerate_sector(norb, nelec, sz2))
    ham = build_active_hamiltonian(part, basis)
    e, v = np.linalg.eigh(ham)
    return SectorSolution(norb=norb, nelec=nelec, sz2=sz2, basis=basis,
                          energies=e, vectors=v)


def _check_sectors(bra, ket, dn):
    if bra.nelec - ket.nelec != dn or abs(bra.sz2 - ket.sz2) != abs(dn):
        raise UsageError(f'incompatible sectors {bra.key} and {ket.key} for '
                         f'an operator changing the electron count by {dn}')


def creation_amplitudes(target, source, state=0):
    """``out[mu, k] = <target_mu| a_k^dagger |source_state>`` over active spin orbitals k."""
    _check_sectors(target, source, 1)
    norb = source.norb
    ket = source.vectors[:, state]
    out = np.zeros((len(target), 2 * norb))
    s = (1 - (target.sz2 - source.sz2)) // 2
    for x in range(norb):
        k = 2 * x + s
        op = _operator(target.basis, source.basis, norb, [(1, _mode(k, norb))])
        out[:, k] = target.vectors.T @ (op @ ket)
    return out


def annihilation_amplitudes(target, source, state=0):
    """``out[mu, k] = <target_mu| a_k |source_state>``."""
    _check_sectors(target, source, -1)
    norb = source.norb
    ket = source.vectors[:, state]
    out = np.zeros((len(target), 2 * norb))
    s = (1 + (target.sz2 - source.sz2)) // 2
    for x in range(norb):
        k = 2 * x + s
        op = _operator(target.basis, source.basis, norb, [(0, _mode(k, norb))])
        out[:, k] = target.vectors.T @ (op @ ket)
    return out


def excitation_amplitudes(sol, state=0):
    """``out[mu, k, l] = <mu| a_k^dagger a_l |state>`` within one sector."""
    norb = sol.norb
    ket = sol.vectors[:, state]
    out = np.zeros((len(sol), 2 * norb, 2 * norb))
    for k in range(2 * norb):
        for l in range(2 * norb):
            if k % 2 != l % 2:
                continue
            op = _operator(sol.basis, sol.basis, norb,
                           [(1, _mode(k, norb)), (0, _mode(l, norb))])
            out[:, k, l] = sol.vectors.T @ (op @ ket)
    return out


def transition_density(bra, bra_state, ket, ket_state, mode):
    """<bra| op |ket> for op in {'x+y', 'x+', 'y'} over active spin orbitals."""
    norb = ket.norb
    mode = mode.replace('†', '+')
    b = bra.vectors[:, bra_state]
    k = ket.vectors[:, ket_state]
    if mode == 'x+y':
        if bra.key != ket.key:
            raise UsageError(f'x+y needs equal sectors, got {bra.key} and {ket.key}')
        out = np.zeros((2 * norb, 2 * norb))
        for p in range(2 * norb):
            for q in range(2 * norb):
                if p % 2 == q % 2:
                    op = _operator(bra.basis, ket.basis, norb,
                                   [(1, _mode(p, norb)), (0, _mode(q, norb))])
                    out[p, q] = b @ (op @ k)
        return out
    if mode in ('x+', 'y'):
        create = mode == 'x+'
        _check_sectors(bra, ket, 1 if create else -1)
        out = np.zeros(2 * norb)
        for p in range(2 * norb):
            op = _operator(bra.basis, ket.basis, norb, [(int(create), _mode(p, norb))])
            out[p] = b @ (op @ k)
        return out
    raise UsageError(f'unknown transition-density mode {mode!r}')


def active_rdm1(sol, state=0):
    """Spin-summed active 1-RDM, gamma[x, y] = <a_x^dagger a_y>."""
    d = transition_density(sol, state, sol, state, 'x+y')
    return d[0::2, 0::2] + d[1::2, 1::2]
