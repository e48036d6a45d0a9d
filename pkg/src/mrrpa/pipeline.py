"""End-to-end evaluation: reference, manifold and the three energy routes."""

import dataclasses
import logging
import time
from typing import Dict, Optional

import numpy as np

from mrrpa import casci, quadrature, rpa, sosex
from mrrpa.manifold import build_manifold, solve_sectors
from mrrpa.partition import (build_dyall, build_generalized_fock, semicanonicalize,
                             total_density)

logger = logging.getLogger(__name__)

__all__ = ['Reference', 'prepare_reference', 'Results', 'evaluate']


@dataclasses.dataclass(frozen=True, eq=False)
class Reference:
    part: object
    sectors: Dict
    e_casci: float
    iterations: int


def prepare_reference(integrals, spaces, cap=casci.DEFAULT_SECTOR_CAP,
                      tol=1e-9, max_iter=20):
    """Semicanonical Dyall partition with a self-consistent active density.

    Starts from a uniform diagonal active density, then alternates Fock
    construction/semicanonicalization and the CASCI solve until the active
    1-RDM moves by less than ``tol``.
    """
    spaces.validate(integrals)
    m = len(spaces.active)
    gamma = np.eye(m) * (spaces.n_active_electrons / m) if m else np.zeros((0, 0))
    current = integrals
    rotation = np.eye(integrals.norb)
    for it in range(1, max_iter + 1):
        fock = build_generalized_fock(current, total_density(spaces, gamma, current.norb))
        rot, current = semicanonicalize(current, spaces, fock)
        rotation = rotation @ rot
        part = build_dyall(current, spaces, gamma)
        ground = casci.solve_sector(part, spaces.n_active_electrons, integrals.ms2, cap=cap)
        new_gamma = casci.active_rdm1(ground) if m else gamma
        change = np.max(np.abs(new_gamma - gamma), initial=0.0)
        gamma = new_gamma
        logger.debug('partition iteration %d: active density change %.3e', it, change)
        if change < tol and it > 1:
            break
    else:
        logger.warning('active density not converged after %d iterations', max_iter)
    part = dataclasses.replace(part, rotation=rotation)
    sectors = solve_sectors(part, cap=cap)
    e_active = sectors[spaces.n_active_electrons, integrals.ms2].energies[0]
    return Reference(part, sectors, part.core_energy + float(e_active), it)


@dataclasses.dataclass
class Results:
    e_casci: float
    manifold: object
    matrices: Optional[object] = None
    solution: Optional[object] = None
    amplitudes: Optional[object] = None
    de_rpa: Optional[float] = None
    de_rpa_quad: Optional[float] = None
    de_rpa_T: Optional[float] = None
    de_sosex: Optional[float] = None
    ring_orders: Optional[list] = None
    stable: bool = True
    timings: Dict[str, float] = dataclasses.field(default_factory=dict)


def evaluate(integrals, spaces, methods=('rpa', 'sosex', 'quadrature'),
             n_nodes=quadrature.DEFAULT_NODES, scale=None, drop_tol=1e-12,
             omega_min=1e-6, gap_tol=1e-8, max_ring_order=8,
             cap=casci.DEFAULT_SECTOR_CAP):
    methods = set(methods)
    t0 = time.perf_counter()
    ref = prepare_reference(integrals, spaces, cap=cap)
    man = build_manifold(ref.part, ref.sectors, drop_tol=drop_tol, omega_min=omega_min,
                         gap_tol=gap_tol)
    res = Results(e_casci=ref.e_casci, manifold=man)
    res.timings['reference'] = time.perf_counter() - t0
    v = ref.part.residual

    if methods & {'rpa', 'sosex', 'tda'}:
        t = time.perf_counter()
        res.matrices = rpa.assemble_AB(man, v)
        res.solution = rpa.solve_rpa(res.matrices)
        res.stable = res.solution.stable
        if res.stable:
            res.de_rpa = rpa.plasmon_energy(res.solution)
            if 'sosex' in methods:
                res.amplitudes = sosex.ring_ccd_amplitudes(res.solution)
                res.de_rpa_T = sosex.rpa_energy_from_T(res.amplitudes, res.matrices)
                res.de_sosex = sosex.sosex_energy(res.amplitudes, man, v)
        res.timings['rpa'] = time.perf_counter() - t

    if methods & {'quadrature', 'order_n'}:
        t = time.perf_counter()
        grid = (quadrature.default_grid(man, n_nodes) if scale is None
                else quadrature.make_grid(n_nodes, scale))
        if 'quadrature' in methods and res.stable:
            res.de_rpa_quad = quadrature.rpa_energy_quadrature(man, v, grid)
        if 'order_n' in methods:
            res.ring_orders = quadrature.ring_partial_sums(man, v, max_ring_order, grid).tolist()
        res.timings['quadrature'] = time.perf_counter() - t
    return res
