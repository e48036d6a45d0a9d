"""Textbook single-reference direct RPA and SOSEX.

Written without the multi-reference machinery so it can act as an oracle
for the empty-active-space limit.  Orbitals are canonicalized within the
occupied and virtual blocks of the closed-shell Fock matrix, the spin-orbital
A and B matrices are built from chemist integrals, the RPA energy comes from
the eigenvalues of (A - B)(A + B) and the ring amplitudes from a Newton
solution of the Riccati equation.
"""

import dataclasses

import numpy as np
import scipy.linalg

from mrrpa.errors import InstabilityError, UsageError

__all__ = ['SRReference', 'canonical_reference', 'sr_matrices', 'sr_rpa_energy',
           'sr_ring_amplitudes', 'sr_sosex_energy']


@dataclasses.dataclass(frozen=True, eq=False)
class SRReference:
    occ: np.ndarray
    virt: np.ndarray
    eps: np.ndarray
    eri: np.ndarray


def canonical_reference(integrals, nocc):
    """Closed-shell Fock matrix, block canonicalization and transformed ERIs."""
    if integrals.nelec % 2:
        raise UsageError('single-reference oracle needs an even electron count')
    if 2 * nocc != integrals.nelec:
        raise UsageError(f'nocc={nocc} does not match nelec={integrals.nelec}')
    n = integrals.norb
    g = np.array(integrals.eri_dense)
    occ = np.arange(nocc)
    fock = integrals.h1 + 2.0 * np.einsum('pqii->pq', g[:, :, occ][:, :, :, occ]) \
        - np.einsum('piiq->pq', g[:, occ][:, :, occ])
    C = np.zeros((n, n))
    eps = np.zeros(n)
    for block in (slice(0, nocc), slice(nocc, n)):
        e, u = np.linalg.eigh(fock[block, block])
        eps[block] = e
        C[block, block] = u
    g = np.einsum('pqrs,pi,qj,rk,sl->ijkl', g, C, C, C, C, optimize=True)
    return SRReference(occ=occ, virt=np.arange(nocc, n), eps=eps, eri=g)


def sr_matrices(ref, exchange=False):
    """Spin-orbital A, B (or the antisymmetrized B when ``exchange``).

    A_{ia,jb} = (e_a - e_i) d_ij d_ab + <aj|ib>, B_{ia,jb} = <ab|ij>, with
    <pq|rs> = (pr|qs) and spin deltas.
    """
    g = ref.eri
    labels = [(i, a, s) for s in (0, 1) for i in ref.occ for a in ref.virt]
    n = len(labels)
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    for x, (i, a, s) in enumerate(labels):
        for y, (j, b, t) in enumerate(labels):
            direct = g[a, i, j, b]
            coul = g[a, i, b, j]
            A[x, y] = direct + (ref.eps[a] - ref.eps[i] if x == y else 0.0)
            B[x, y] = coul
            if exchange and s == t:
                B[x, y] -= g[a, j, b, i]
    return A, B


def sr_rpa_energy(integrals, nocc):
    """Plasmon-formula direct-RPA energy for a closed-shell reference."""
    ref = canonical_reference(integrals, nocc)
    A, B = sr_matrices(ref)
    if A.size == 0:
        return 0.0
    w2 = np.linalg.eigvals((A - B) @ (A + B))
    if np.any(np.abs(w2.imag) > 1e-10) or np.any(w2.real <= 0.0):
        raise InstabilityError('single-reference RPA is unstable')
    return 0.5 * (float(np.sum(np.sqrt(w2.real))) - float(np.trace(A)))


def sr_ring_amplitudes(A, B, tol=1e-13, max_iter=100):
    """Solve B + A T + T A + T B T = 0 by Newton iteration from T = 0."""
    T = np.zeros_like(A)
    for _ in range(max_iter):
        R = B + A @ T + T @ A + T @ B @ T
        if np.linalg.norm(R) < tol:
            return T
        dT = scipy.linalg.solve_sylvester(A + T @ B, A + B @ T, -R)
        T = T + dT
    raise InstabilityError('ring amplitude iterations did not converge')


def sr_sosex_energy(integrals, nocc):
    """1/2 tr(B_x T) with the antisymmetrized B_x and Riccati amplitudes T."""
    ref = canonical_reference(integrals, nocc)
    A, B = sr_matrices(ref)
    if A.size == 0:
        return 0.0
    T = sr_ring_amplitudes(A, B)
    _, Bx = sr_matrices(ref, exchange=True)
    return 0.5 * float(np.sum(Bx * T.T))
