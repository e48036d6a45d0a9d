"""Casida-form RPA eigenproblem over the excitation manifold."""

import dataclasses
from typing import List, Optional

import numpy as np
import scipy.linalg

from mrrpa.errors import InstabilityError

__all__ = ['RPAMatrices', 'RPASolution', 'assemble_AB', 'solve_rpa',
           'plasmon_energy', 'full_spectrum', 'coupling_matrix']

IMAG_TOL = 1e-10


@dataclasses.dataclass(frozen=True, eq=False)
class RPAMatrices:
    A: np.ndarray
    B: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]


@dataclasses.dataclass(frozen=True, eq=False)
class RPASolution:
    omega_rpa: np.ndarray
    X: Optional[np.ndarray]
    Y: Optional[np.ndarray]
    omega_tda: np.ndarray
    stable: bool
    norm_ok: bool
    matrices: RPAMatrices
    unstable_modes: List[complex] = dataclasses.field(default_factory=list)


def coupling_matrix(man, v, exchange=False):
    """K[N, M] = sum d_N[(p,r)] v_{pr,qs} d_M[(q,s)] (antisymmetrized if ``exchange``)."""
    d = man.dense_d()
    vpair = v.pair_matrix(man.pairs, exchange=exchange)
    k = d @ vpair @ d.T
    return 0.5 * (k + k.T)


def assemble_AB(man, v):
    k = coupling_matrix(man, v)
    return RPAMatrices(A=np.diag(man.omegas) + k, B=k.copy())


def full_spectrum(m):
    """All 2n eigenvalues of [[A, B], [-B, -A]], sorted by real part."""
    h = np.block([[m.A, m.B], [-m.B, -m.A]])
    w = np.linalg.eigvals(h)
    return w[np.argsort(w.real, kind='stable')]


def _symmetric_solve(A, B):
    amb = A - B
    s2, u = np.linalg.eigh(amb)
    sqrt_amb = (u * np.sqrt(s2)) @ u.T
    inv_sqrt_amb = (u / np.sqrt(s2)) @ u.T
    w2, z = np.linalg.eigh(sqrt_amb @ (A + B) @ sqrt_amb)
    if np.any(w2 <= 0.0):
        return w2, None, None
    omega = np.sqrt(w2)
    xpy = sqrt_amb @ z / np.sqrt(omega)
    xmy = inv_sqrt_amb @ z * np.sqrt(omega)
    return omega, 0.5 * (xpy + xmy), 0.5 * (xpy - xmy)


def _general_solve(A, B):
    n = A.shape[0]
    h = np.block([[A, B], [-B, -A]])
    w, vec = np.linalg.eig(h)
    bad = [x for x in w if abs(x.imag) > IMAG_TOL or abs(x.real) <= IMAG_TOL]
    if bad:
        return w, None, None, bad
    pos = np.where(w.real > 0)[0]
    if len(pos) != n:
        return w, None, None, list(w[pos])
    pos = pos[np.argsort(w.real[pos], kind='stable')]
    omega = w.real[pos]
    vec = vec[:, pos]
    # fix the complex phase of each column, then keep the real part
    k = np.argmax(np.abs(vec), axis=0)
    vec = (vec / (vec[k, np.arange(n)] / np.abs(vec[k, np.arange(n)]))).real
    X, Y = vec[:n], vec[n:]
    # metric-orthonormalize within (near-)degenerate groups
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and omega[stop] - omega[start] < 1e-8 * max(1.0, omega[start]):
            stop += 1
        sl = slice(start, stop)
        metric = X[:, sl].T @ X[:, sl] - Y[:, sl].T @ Y[:, sl]
        metric = 0.5 * (metric + metric.T)
        try:
            L = np.linalg.cholesky(metric)
        except np.linalg.LinAlgError:
            return w, None, None, list(omega[sl])
        Linv = scipy.linalg.solve_triangular(L, np.eye(stop - start), lower=True)
        X[:, sl] = X[:, sl] @ Linv.T
        Y[:, sl] = Y[:, sl] @ Linv.T
        start = stop
    return omega, X, Y, []


def solve_rpa(m):
    A = 0.5 * (m.A + m.A.T)
    B = 0.5 * (m.B + m.B.T)
    n = A.shape[0]
    omega_tda = np.linalg.eigvalsh(A) if n else np.zeros(0)
    if n == 0:
        return RPASolution(np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0)), omega_tda,
                           True, True, m)
    try:
        np.linalg.cholesky(A - B)
        pd = True
    except np.linalg.LinAlgError:
        pd = False
    bad = []
    if pd:
        omega, X, Y = _symmetric_solve(A, B)
        if X is None:
            bad = [complex(0.0, np.sqrt(-x)) if x < 0 else 0j for x in omega if x <= 0]
    else:
        omega, X, Y, bad = _general_solve(A, B)
    if bad:
        return RPASolution(np.zeros(0), None, None, omega_tda, False, False, m,
                           unstable_modes=list(bad))
    eye = np.eye(n)
    norm_ok = (np.max(np.abs(X.T @ X - Y.T @ Y - eye)) < 1e-8
               and np.max(np.abs(X.T @ Y - Y.T @ X)) < 1e-8)
    return RPASolution(omega, X, Y, omega_tda, True, bool(norm_ok), m)


def plasmon_energy(sol):
    """Half the sum of RPA minus TDA excitation energies."""
    if not sol.stable:
        raise InstabilityError('RPA solution is unstable; correlation energy undefined',
                               sol.unstable_modes)
    return 0.5 * (float(np.sum(sol.omega_rpa)) - float(np.sum(sol.omega_tda)))
