"""Ring-CCD amplitudes from the RPA eigenvectors and the SOSEX energy."""

import dataclasses

import numpy as np

from mrrpa.errors import InstabilityError
from mrrpa.rpa import coupling_matrix

__all__ = ['RingAmplitudes', 'ring_ccd_amplitudes', 'riccati_residual',
           'rpa_energy_from_T', 'sosex_energy', 'exchange_B']

MAX_CONDITION = 1e12


@dataclasses.dataclass(frozen=True, eq=False)
class RingAmplitudes:
    T: np.ndarray
    riccati_residual: float


def riccati_residual(A, B, T):
    """Frobenius norm of B + A T + T A + T B T."""
    return float(np.linalg.norm(B + A @ T + T @ A + T @ B @ T))


def ring_ccd_amplitudes(sol):
    """T = Y X^-1 from the positive-frequency eigenvectors."""
    if not sol.stable:
        raise InstabilityError('amplitudes need a stable RPA solution', sol.unstable_modes)
    m = sol.matrices
    if m.n == 0:
        return RingAmplitudes(np.zeros((0, 0)), 0.0)
    cond = np.linalg.cond(sol.X)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise InstabilityError(f'X is near singular (condition number {cond:.3e})')
    T = np.linalg.solve(sol.X.T, sol.Y.T).T
    return RingAmplitudes(T, riccati_residual(m.A, m.B, T))


def rpa_energy_from_T(amps, m):
    return 0.5 * float(np.sum(m.B * amps.T.T))


def exchange_B(man, v):
    """B with v_{pr,qs} replaced by v_{pr,qs} - v_{ps,qr}."""
    return coupling_matrix(man, v, exchange=True)


def sosex_energy(amps, man, v):
    if len(man) == 0:
        return 0.0
    return 0.5 * float(np.sum(exchange_B(man, v) * amps.T.T))
