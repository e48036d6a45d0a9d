"""Imaginary-frequency evaluation of the polarizability and ring energies.

Pi(i w) = -sum_N 2 w_N / (w^2 + w_N^2) d_N d_N^T is formed in the reduced
pair basis of the manifold, and the resummed energy

    dE = 1/(2 pi) int dw 1/2 tr[ln(1 - V Pi) + V Pi]

is integrated over w > 0 (the integrand is even) on a Gauss-Legendre grid
mapped to the half line.
"""

import dataclasses

import numpy as np
import scipy.linalg

from mrrpa.errors import InstabilityError, UsageError

__all__ = ['FrequencyGrid', 'make_grid', 'default_grid', 'polarizability',
           'rpa_energy_quadrature', 'ring_order_n', 'ring_partial_sums',
           'integrand_values']

DEFAULT_NODES = 64
SERIES_THRESHOLD = 1e-2


@dataclasses.dataclass(frozen=True, eq=False)
class FrequencyGrid:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.nodes)


def make_grid(n_nodes, scale):
    """Gauss-Legendre nodes on (0, 1) mapped by w = scale * x / (1 - x)."""
    if n_nodes < 4:
        raise UsageError('frequency grid needs at least 4 nodes')
    if not scale > 0:
        raise UsageError('frequency scale must be positive')
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    nodes = scale * x / (1.0 - x)
    weights = w * scale / (1.0 - x) ** 2
    return FrequencyGrid(nodes, weights)


def default_grid(man, n_nodes=DEFAULT_NODES):
    """Grid centred on the median excitation energy of the manifold."""
    scale = float(np.median(man.omegas)) if len(man) else 1.0
    return make_grid(n_nodes, scale)


def polarizability(man, omega):
    d = man.dense_d()
    w = man.omegas
    weight = 2.0 * w / (omega ** 2 + w ** 2)
    pi = -(d.T * weight) @ d
    return 0.5 * (pi + pi.T)


def _products(man, v, grid):
    if grid is None:
        grid = default_grid(man)
    vmat = v.pair_matrix(man.pairs)
    return grid, vmat, (vmat @ polarizability(man, w) for w in grid.nodes)


def _log_series(vp, norm):
    """1/2 [ln det(1 - x) + tr x] = -1/2 sum_{n>=2} tr(x^n)/n for ||x|| < 1."""
    nmax = 2 if norm == 0.0 else max(2, int(np.ceil(np.log(1e-18) / np.log(norm))))
    total = 0.0
    power = vp
    for n in range(2, nmax + 1):
        power = power @ vp
        total -= np.trace(power) / n
    return 0.5 * total


def integrand_values(man, v, grid=None):
    """1/2 [ln det(1 - V Pi) + tr(V Pi)] at every node."""
    grid, _, prods = _products(man, v, grid)
    out = []
    for w, vp in zip(grid.nodes, prods):
        m = vp.shape[0]
        norm = np.linalg.norm(vp, 2)
        if norm < SERIES_THRESHOLD:
            # ln det + tr cancel to roundoff at high frequency; sum the series
            out.append(_log_series(vp, norm))
            continue
        lu, piv = scipy.linalg.lu_factor(np.eye(m) - vp)
        diag = np.diag(lu)
        sign = np.prod(np.sign(diag)) * (-1) ** np.count_nonzero(piv != np.arange(m))
        if sign <= 0 or np.any(diag == 0.0):
            raise InstabilityError(f'det(1 - V Pi) <= 0 at imaginary frequency {w:.6g}')
        out.append(0.5 * (np.sum(np.log(np.abs(diag))) + np.trace(vp)))
    return grid, np.array(out)


def rpa_energy_quadrature(man, v, grid=None):
    if len(man) == 0:
        return 0.0
    grid, vals = integrand_values(man, v, grid)
    return float(np.dot(grid.weights, vals) / np.pi)


def ring_order_n(man, v, n, grid=None):
    """n-th order ring energy, -1/(2n) 1/(2 pi) int dw tr[(V Pi)^n]."""
    if n < 2:
        raise UsageError('ring order must be >= 2')
    if len(man) == 0:
        return 0.0
    grid, _, prods = _products(man, v, grid)
    vals = np.array([np.trace(np.linalg.matrix_power(vp, n)) for vp in prods])
    return float(-np.dot(grid.weights, vals) / (2 * n * np.pi))


def ring_partial_sums(man, v, max_order, grid=None):
    """Cumulative sums of ring orders 2..max_order, one pass over the grid."""
    if len(man) == 0:
        return np.zeros(max(max_order - 1, 0))
    grid, _, prods = _products(man, v, grid)
    traces = np.zeros((len(grid), max_order - 1))
    for k, vp in enumerate(prods):
        power = vp.copy()
        for n in range(2, max_order + 1):
            power = power @ vp
            traces[k, n - 2] = np.trace(power)
    orders = np.arange(2, max_order + 1)
    terms = -(grid.weights @ traces) / (2 * orders * np.pi)
    return np.cumsum(terms)
