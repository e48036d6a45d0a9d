"""Zeroth-order excitation manifold of the Dyall Hamiltonian.

Four classes of excited states couple to the reference through one-body
operators p^dagger r:

    CV  core -> virtual            a^dagger i |0>
    CA  core -> active             |core minus i> |Phi_mu(N_A + 1)>
    AV  active -> virtual          |core> |Phi_mu(N_A - 1)> |a>
    AA  active internal            |core> |Phi_mu(N_A)>, mu > 0

Product states are assembled with the global mode order core < active <
virtual, alpha before beta inside each space; the resulting fermionic signs
are folded into the transition-density vectors.
"""

import dataclasses
from typing import Dict, List, Tuple

import numpy as np

from mrrpa import casci
from mrrpa.errors import DegeneracyError, UsageError

__all__ = ['ExcitedState', 'ExcitationManifold', 'build_manifold',
           'required_sectors', 'solve_sectors', 'CLASSES']

CLASSES = ('CV', 'CA', 'AV', 'AA')


@dataclasses.dataclass(frozen=True)
class ExcitedState:
    class_tag: str
    omega: float
    d: Dict[Tuple[int, int], float]
    labels: Tuple


@dataclasses.dataclass(frozen=True, eq=False)
class ExcitationManifold:
    states: Tuple[ExcitedState, ...]
    pair_index: Dict[Tuple[int, int], int]

    @classmethod
    def from_states(cls, states):
        pair_index = {}
        for st in states:
            for pr in st.d:
                pair_index.setdefault(pr, len(pair_index))
        return cls(tuple(states), pair_index)

    def __len__(self):
        return len(self.states)

    @property
    def pairs(self):
        return list(self.pair_index)

    @property
    def omegas(self):
        return np.array([st.omega for st in self.states])

    def dense_d(self):
        """Transition densities as an (n_states, n_pairs) array."""
        out = np.zeros((len(self.states), len(self.pair_index)))
        for n, st in enumerate(self.states):
            for pr, val in st.d.items():
                out[n, self.pair_index[pr]] = val
        return out

    def class_counts(self):
        counts = dict.fromkeys(CLASSES, 0)
        for st in self.states:
            counts[st.class_tag] += 1
        return counts


def required_sectors(spaces, ms2):
    """Active sectors needed for the manifold, restricted to feasible ones."""
    m = len(spaces.active)
    n = spaces.n_active_electrons
    keys = [(n, ms2)]
    if spaces.core:
        keys += [(n + 1, ms2 + 1), (n + 1, ms2 - 1)]
    if spaces.virtual:
        keys += [(n - 1, ms2 - 1), (n - 1, ms2 + 1)]
    return [k for k in keys if casci.sector_feasible(m, *k)]


def solve_sectors(part, cap=casci.DEFAULT_SECTOR_CAP):
    return {key: casci.solve_sector(part, *key, cap=cap)
            for key in required_sectors(part.spaces, part.ms2)}


def _so(p, s):
    return 2 * p + s


def build_manifold(part, sectors, drop_tol=1e-12, omega_min=1e-6, gap_tol=1e-8):
    """Enumerate the four excitation classes with omega_N and d_N[(p, r)]."""
    sp = part.spaces
    ms2 = part.ms2
    na = sp.n_active_electrons
    ncore = len(sp.core)
    for key in required_sectors(sp, ms2):
        if key not in sectors:
            raise UsageError(f'missing sector solution for (nelec, sz2)={key}')
    ref = sectors[na, ms2]
    e0 = ref.energies[0]
    if len(ref) > 1 and ref.energies[1] - e0 < gap_tol:
        raise DegeneracyError(f'CASCI ground state is degenerate (gap '
                              f'{ref.energies[1] - e0:.3e} Eh); the reference is undefined')

    states: List[ExcitedState] = []

    def keep(tag, omega, d, labels):
        if not d or max(abs(v) for v in d.values()) < drop_tol:
            return
        states.append(ExcitedState(tag, float(omega), d, labels))

    for s in (0, 1):
        for ic, i in enumerate(sp.core):
            for ia, a in enumerate(sp.virtual):
                keep('CV', part.eps_virt[ia] - part.eps_core[ic],
                     {(_so(a, s), _so(i, s)): 1.0}, (_so(i, s), _so(a, s)))

    # core hole of spin s: the active space gains an electron of spin s
    for s in (0, 1):
        key = (na + 1, ms2 + (1 if s == 0 else -1))
        if not sp.core or key not in sectors:
            continue
        plus = sectors[key]
        amp = casci.creation_amplitudes(plus, ref)
        for ic, i in enumerate(sp.core):
            pos = ic + s * ncore
            sign = -1.0 if pos % 2 == 0 else 1.0
            for mu in range(len(plus)):
                omega = -part.eps_core[ic] + plus.energies[mu] - e0
                d = {(_so(x, s), _so(i, s)): sign * amp[mu, 2 * kx + s]
                     for kx, x in enumerate(sp.active) if amp[mu, 2 * kx + s] != 0.0}
                keep('CA', omega, d, (_so(i, s), key, mu))

    sign_av = -1.0 if (na - 1) % 2 else 1.0
    for s in (0, 1):
        key = (na - 1, ms2 - (1 if s == 0 else -1))
        if not sp.virtual or key not in sectors:
            continue
        minus = sectors[key]
        amp = casci.annihilation_amplitudes(minus, ref)
        for ia, a in enumerate(sp.virtual):
            for mu in range(len(minus)):
                omega = part.eps_virt[ia] + minus.energies[mu] - e0
                d = {(_so(a, s), _so(y, s)): sign_av * amp[mu, 2 * ky + s]
                     for ky, y in enumerate(sp.active) if amp[mu, 2 * ky + s] != 0.0}
                keep('AV', omega, d, (_so(a, s), key, mu))

    if sp.active:
        amp = casci.excitation_amplitudes(ref)
        act = sp.active
        for mu in range(1, len(ref)):
            d = {}
            for kx, x in enumerate(act):
                for ky, y in enumerate(act):
                    for s in (0, 1):
                        val = amp[mu, 2 * kx + s, 2 * ky + s]
                        if val != 0.0:
                            d[_so(x, s), _so(y, s)] = val
            keep('AA', ref.energies[mu] - e0, d, ((na, ms2), mu))

    low = [st for st in states if st.omega < omega_min]
    if low:
        worst = min(low, key=lambda st: st.omega)
        raise DegeneracyError(
            f'{len(low)} coupled excitation(s) with omega < {omega_min:g} Eh '
            f'(lowest {worst.omega:.3e} Eh, class {worst.class_tag}, labels {worst.labels})')
    return ExcitationManifold.from_states(states)
