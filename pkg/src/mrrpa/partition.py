"""Dyall partition of the Hamiltonian and the residual interaction.

Spin orbitals are numbered ``2*p + s`` with spatial index ``p`` and spin
``s`` (0 = alpha, 1 = beta).
"""

import dataclasses
from typing import Tuple

import numpy as np

from mrrpa.errors import UsageError
from mrrpa.integrals import IntegralSet, rotate_orbitals

__all__ = [
    'OrbitalSpaces', 'DyallPartition', 'ResidualInteraction',
    'build_generalized_fock', 'semicanonicalize', 'build_dyall', 'residual_v',
    'total_density',
]


@dataclasses.dataclass(frozen=True)
class OrbitalSpaces:
    core: Tuple[int, ...]
    active: Tuple[int, ...]
    virtual: Tuple[int, ...]
    n_active_electrons: int

    def __post_init__(self):
        for name in ('core', 'active', 'virtual'):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        if not 0 <= self.n_active_electrons <= 2 * len(self.active):
            raise UsageError(f'{self.n_active_electrons} active electrons do not fit '
                             f'in {len(self.active)} active orbitals')

    @property
    def norb(self):
        return len(self.core) + len(self.active) + len(self.virtual)

    def validate(self, integrals):
        labels = self.core + self.active + self.virtual
        if sorted(labels) != list(range(integrals.norb)):
            raise UsageError('core/active/virtual must partition the orbitals '
                             f'0..{integrals.norb - 1} without overlap')
        if 2 * len(self.core) + self.n_active_electrons != integrals.nelec:
            raise UsageError(f'2*{len(self.core)} core + {self.n_active_electrons} active '
                             f'electrons != nelec={integrals.nelec}')
        if abs(integrals.ms2) > self.n_active_electrons:
            raise UsageError(f'ms2={integrals.ms2} cannot be carried by '
                             f'{self.n_active_electrons} active electrons')
        return self

    def is_active(self, p):
        return p in self.active

    @classmethod
    def single_reference(cls, norb, nocc):
        return cls(tuple(range(nocc)), (), tuple(range(nocc, norb)), 0)


def total_density(spaces, gamma_active, norb):
    """Spin-summed 1-RDM: 2 on core, active block from CASCI, 0 on virtuals."""
    gamma = np.zeros((norb, norb))
    core = list(spaces.core)
    act = list(spaces.active)
    gamma[core, core] = 2.0
    if act:
        gamma[np.ix_(act, act)] = gamma_active
    return gamma


def build_generalized_fock(integrals, gamma):
    """F_pq = h_pq + sum_rs gamma_rs [(pq|rs) - 1/2 (ps|rq)]."""
    gamma = np.asarray(gamma, dtype=float)
    if np.max(np.abs(gamma - gamma.T), initial=0.0) > 1e-10:
        raise UsageError('density matrix is not symmetric')
    if abs(np.trace(gamma) - integrals.nelec) > 1e-8:
        raise UsageError(f'trace of density {np.trace(gamma):.10f} != nelec={integrals.nelec}')
    g = integrals.eri_dense
    fock = integrals.h1 + np.einsum('pqrs,rs->pq', g, gamma) \
        - 0.5 * np.einsum('psrq,rs->pq', g, gamma)
    return 0.5 * (fock + fock.T)


def _diagonalizing_block(block):
    n = block.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0))
    off = block - np.diag(np.diag(block))
    if np.max(np.abs(off)) <= 1e-14:
        order = np.argsort(np.diag(block), kind='stable')
        return np.diag(block)[order], np.eye(n)[:, order]
    e, u = np.linalg.eigh(block)
    idx = np.argmax(np.abs(u), axis=0)
    u = u * np.sign(u[idx, np.arange(n)])
    return e, u


def semicanonicalize(integrals, spaces, fock):
    """Diagonalize the core and virtual blocks of ``fock``.

    Returns ``(rotation, transformed_integrals)``; the columns of ``rotation``
    are the new orbitals expressed in the input basis.
    """
    fock = np.asarray(fock)
    rot = np.eye(integrals.norb)
    for block in (spaces.core, spaces.virtual):
        idx = list(block)
        _, u = _diagonalizing_block(fock[np.ix_(idx, idx)])
        if idx:
            rot[np.ix_(idx, idx)] = u
    if np.allclose(rot, np.eye(integrals.norb), atol=0.0, rtol=0.0):
        return rot, integrals
    return rot, rotate_orbitals(integrals, rot)


@dataclasses.dataclass(frozen=True, eq=False)
class DyallPartition:
    spaces: OrbitalSpaces
    eps_core: np.ndarray
    eps_virt: np.ndarray
    f_active: np.ndarray
    active_eri: np.ndarray
    rotation: np.ndarray
    integrals: IntegralSet
    fock: np.ndarray
    gamma_active: np.ndarray

    @property
    def n_active(self):
        return len(self.spaces.active)

    @property
    def nelec_active(self):
        return self.spaces.n_active_electrons

    @property
    def ms2(self):
        return self.integrals.ms2

    @property
    def core_energy(self):
        """Energy of the doubly occupied core, including the constant term."""
        core = list(self.spaces.core)
        h = self.integrals.h1
        g = self.integrals.eri_dense
        e = self.integrals.e_core + 2.0 * np.trace(h[np.ix_(core, core)])
        if core:
            jj = np.einsum('iijj->ij', g[np.ix_(core, core, core, core)])
            kk = np.einsum('ijji->ij', g[np.ix_(core, core, core, core)])
            e += np.sum(2.0 * jj - kk)
        return float(e)

    def one_body_zeroth_order(self):
        """Orbital-basis matrix of the quadratic part of H_D."""
        n = self.integrals.norb
        hd = np.zeros((n, n))
        sp = self.spaces
        hd[list(sp.core), list(sp.core)] = self.eps_core
        hd[list(sp.virtual), list(sp.virtual)] = self.eps_virt
        act = list(sp.active)
        if act:
            hd[np.ix_(act, act)] = self.f_active
        return hd

    @property
    def residual(self):
        return ResidualInteraction(self)


def build_dyall(integrals, spaces, gamma_active):
    """Zeroth-order Dyall parameters for semicanonical ``integrals``."""
    spaces.validate(integrals)
    if not spaces.active and spaces.n_active_electrons > 0:
        raise UsageError('active electrons given but the active space is empty')
    m = len(spaces.active)
    gamma_active = np.zeros((m, m)) if m == 0 else np.asarray(gamma_active, dtype=float)
    gamma = total_density(spaces, gamma_active, integrals.norb)
    fock = build_generalized_fock(integrals, gamma)
    core, act, vir = list(spaces.core), list(spaces.active), list(spaces.virtual)
    g = integrals.eri_dense
    f_act = integrals.h1[np.ix_(act, act)].copy()
    if core and act:
        f_act += 2.0 * np.einsum('xyii->xy', g[np.ix_(act, act, core, core)])
        f_act -= np.einsum('xiiy->xy', g[np.ix_(act, core, core, act)])
    return DyallPartition(
        spaces=spaces,
        eps_core=np.diag(fock)[core].copy(),
        eps_virt=np.diag(fock)[vir].copy(),
        f_active=0.5 * (f_act + f_act.T),
        active_eri=np.array(g[np.ix_(act, act, act, act)]),
        rotation=np.eye(integrals.norb),
        integrals=integrals,
        fock=fock,
        gamma_active=gamma_active,
    )


class ResidualInteraction:
    """v = H - H_D over spin orbitals.

    The two-body part is <pq|rs> = (pr|qs) except on all-active quadruples,
    where it vanishes.
    """

    def __init__(self, part):
        self.part = part
        self.eri = part.integrals.eri_dense
        norb = part.integrals.norb
        self.active_mask = np.zeros(norb, dtype=bool)
        self.active_mask[list(part.spaces.active)] = True
        self.h1_residual = part.integrals.h1 - part.one_body_zeroth_order()

    def two_body(self, p, r, q, s):
        (pp, sp), (rr, sr), (qq, sq), (ss, ss_) = (divmod(k, 2) for k in (p, r, q, s))
        if sp != sr or sq != ss_:
            return 0.0
        if self.active_mask[[pp, rr, qq, ss]].all():
            return 0.0
        return float(self.eri[pp, rr, qq, ss])

    __call__ = two_body

    def one_body(self, p, q):
        (pp, sp), (qq, sq) = divmod(p, 2), divmod(q, 2)
        return float(self.h1_residual[pp, qq]) if sp == sq else 0.0

    def pair_matrix(self, pairs, exchange=False):
        """Matrix v[(p,r),(q,s)] over oriented spin-orbital pairs.

        With ``exchange`` the antisymmetrized v_{pr,qs} - v_{ps,qr} is returned.
        """
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        p, r = pairs[:, 0], pairs[:, 1]
        P, R = p[:, None], r[:, None]
        Q, S = p[None, :], r[None, :]
        out = self._vectorized(P, R, Q, S)
        if exchange:
            out = out - self._vectorized(P, S, Q, R)
        return out

    def _vectorized(self, p, r, q, s):
        ps, pspin = np.divmod(p, 2)
        rs, rspin = np.divmod(r, 2)
        qs, qspin = np.divmod(q, 2)
        ss, sspin = np.divmod(s, 2)
        val = self.eri[ps, rs, qs, ss]
        am = self.active_mask
        keep = (pspin == rspin) & (qspin == sspin) & ~(am[ps] & am[rs] & am[qs] & am[ss])
        return np.where(keep, val, 0.0)


def residual_v(part, p, r, q, s):
    return part.residual.two_body(p, r, q, s)
