"""Command-line front end.

    mrrpa run CONFIG      single geometry
    mrrpa scan CONFIG     list of FCIDUMP files sharing one orbital partition
    mrrpa selftest        quick built-in consistency checks

The configuration is a YAML file::

    input: FCIDUMP                # or a builtin model, see below
    model: {type: hubbard, nsite: 4, t: 1.0, U: 2.0, basis: mo}
    spaces: {core: [0], active: [1, 2], virtual: [3], n_active_electrons: 2}
    methods: [casci, rpa, sosex, quadrature]
    grid: {nodes: 64, scale: auto}
    tolerances: {drop_tol: 1.0e-12, omega_min: 1.0e-6}
    output: {path: report.csv, format: csv}
    scan: [FCIDUMP.1, {label: stretched, input: FCIDUMP.2}]

Relative paths are resolved against the directory of the configuration
file.  Exit status is 0 on success, 1 for invalid input and 2 for numerical
failures (unstable RPA, degenerate reference).  ``MRRPA_WORKERS`` sets the
number of worker processes for scans.
"""

import argparse
import concurrent.futures
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import yaml

from mrrpa import fixtures, pipeline, quadrature, rpa
from mrrpa.errors import (DegeneracyError, InstabilityError, MRRPAError, ParseError,
                          UsageError)
from mrrpa.integrals import h1_eigenbasis, hubbard_model, read_fcidump
from mrrpa.partition import OrbitalSpaces

__all__ = ['RunConfig', 'Geometry', 'EnergyRecord', 'Failure', 'EnergyReport',
           'load_config', 'run', 'scan', 'emit', 'parse_report', 'main',
           'CSV_COLUMNS', 'METHODS']

logger = logging.getLogger(__name__)

METHODS = ('casci', 'rpa', 'sosex', 'tda', 'quadrature', 'order_n')
CSV_COLUMNS = ('label', 'e_casci', 'de_rpa', 'de_rpa_quad', 'de_sosex', 'stable',
               'n_cv', 'n_ca', 'n_av', 'n_aa')
WORKERS_ENV = 'MRRPA_WORKERS'

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


@dataclasses.dataclass(frozen=True)
class Geometry:
    label: str
    path: Optional[str] = None
    model: Optional[Tuple[Tuple[str, object], ...]] = None


@dataclasses.dataclass(frozen=True)
class RunConfig:
    geometries: Tuple[Geometry, ...]
    spaces: Optional[OrbitalSpaces]
    methods: Tuple[str, ...] = ('casci', 'rpa', 'sosex', 'quadrature')
    n_nodes: int = quadrature.DEFAULT_NODES
    scale: Optional[float] = None
    drop_tol: float = 1e-12
    omega_min: float = 1e-6
    gap_tol: float = 1e-8
    max_ring_order: int = 8
    sector_cap: int = 20000
    output_path: Optional[str] = None
    output_format: str = 'csv'


def _round(x):
    return None if x is None else float(f'{x:.12g}')


@dataclasses.dataclass
class EnergyRecord:
    label: str
    e_casci: Optional[float]
    de_rpa: Optional[float] = None
    de_rpa_quad: Optional[float] = None
    de_sosex: Optional[float] = None
    stable: bool = True
    manifold: Dict[str, int] = dataclasses.field(default_factory=dict)
    ring_orders: Optional[List[float]] = None
    timings: Dict[str, float] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_results(cls, label, res):
        return cls(
            label=label,
            e_casci=_round(res.e_casci),
            de_rpa=_round(res.de_rpa),
            de_rpa_quad=_round(res.de_rpa_quad),
            de_sosex=_round(res.de_sosex),
            stable=bool(res.stable),
            manifold=res.manifold.class_counts(),
            ring_orders=None if res.ring_orders is None else [_round(x) for x in res.ring_orders],
            timings={k: _round(v) for k, v in res.timings.items()},
        )


@dataclasses.dataclass
class Failure:
    label: str
    kind: str
    message: str


@dataclasses.dataclass
class EnergyReport:
    records: List[EnergyRecord] = dataclasses.field(default_factory=list)
    failures: List[Failure] = dataclasses.field(default_factory=list)

    @property
    def exit_code(self):
        if any(f.kind == 'numerical' for f in self.failures) or \
                any(not r.stable for r in self.records):
            return EXIT_NUMERICAL
        if self.failures:
            return EXIT_INVALID
        return EXIT_OK


# configuration -------------------------------------------------------------

def _require(cond, message):
    if not cond:
        raise UsageError(message)


def _parse_model(spec):
    _require(isinstance(spec, dict), 'model must be a mapping')
    spec = dict(spec)
    kind = spec.pop('type', 'hubbard')
    _require(kind in ('hubbard', 'fixture'), f'unknown model type {kind!r}')
    allowed = {'hubbard': {'nsite', 't', 'U', 'periodic', 'nelec', 'ms2', 'basis'},
               'fixture': {'name', 't', 'U'}}[kind]
    unknown = set(spec) - allowed
    _require(not unknown, f'unknown model keys: {sorted(unknown)}')
    if kind == 'hubbard':
        _require('nsite' in spec, 'hubbard model needs nsite')
        _require(spec.get('basis', 'mo') in ('mo', 'site'), 'model basis must be mo or site')
    else:
        _require(spec.get('name') in fixtures.FIXTURES,
                 f'fixture name must be one of {list(fixtures.FIXTURES)}')
    return (('type', kind),) + tuple(sorted(spec.items()))


def _build_model(model):
    spec = dict(model)
    kind = spec.pop('type')
    if kind == 'fixture':
        fx = fixtures.get_fixture(spec['name'], U=spec.get('U', 2.0), t=spec.get('t', 1.0))
        return fx.integrals, fx.spaces
    basis = spec.pop('basis', 'mo')
    ints = hubbard_model(spec.pop('nsite'), **spec)
    return (h1_eigenbasis(ints) if basis == 'mo' else ints), None


def _parse_spaces(spec):
    _require(isinstance(spec, dict), 'spaces must be a mapping')
    for key in ('core', 'active', 'virtual', 'n_active_electrons'):
        _require(key in spec, f'spaces needs {key}')
    lists = []
    for key in ('core', 'active', 'virtual'):
        val = spec[key] or []
        _require(isinstance(val, list) and all(isinstance(x, int) for x in val),
                 f'spaces.{key} must be a list of orbital indices')
        lists.append(tuple(val))
    _require(isinstance(spec['n_active_electrons'], int), 'n_active_electrons must be an integer')
    return OrbitalSpaces(*lists, spec['n_active_electrons'])


def _parse_geometry(entry, base, index):
    if isinstance(entry, str):
        entry = {'input': entry}
    _require(isinstance(entry, dict), f'scan entry {index} must be a path or a mapping')
    if 'model' in entry:
        model = _parse_model(entry['model'])
        return Geometry(label=str(entry.get('label', f'model{index}')), model=model)
    _require('input' in entry, f'scan entry {index} needs input or model')
    path = Path(entry['input'])
    if not path.is_absolute():
        path = base / path
    _require(path.is_file(), f'input file {path} does not exist')
    return Geometry(label=str(entry.get('label', path.name)), path=str(path))


def config_from_dict(data, base=Path('.'), mode='run'):
    """Validate a configuration mapping into a RunConfig."""
    _require(isinstance(data, dict), 'configuration must be a mapping')
    known = {'input', 'model', 'label', 'spaces', 'methods', 'grid', 'tolerances',
             'output', 'scan'}
    unknown = set(data) - known
    _require(not unknown, f'unknown configuration keys: {sorted(unknown)}')
    if mode == 'scan':
        entries = data.get('scan')
        _require(isinstance(entries, list) and entries, 'scan needs a nonempty list under "scan"')
        geoms = tuple(_parse_geometry(e, base, k) for k, e in enumerate(entries))
    else:
        _require(('input' in data) != ('model' in data), 'give exactly one of input or model')
        entry = {k: data[k] for k in ('input', 'model', 'label') if k in data}
        geoms = (_parse_geometry(entry, base, 0),)
        if 'label' not in data and 'model' in data:
            geoms = (dataclasses.replace(geoms[0], label='model'),)

    spaces = _parse_spaces(data['spaces']) if 'spaces' in data else None
    _require(spaces is not None or all(g.model and dict(g.model)['type'] == 'fixture'
                                       for g in geoms), 'spaces are required')
    methods = data.get('methods', ['casci', 'rpa', 'sosex', 'quadrature'])
    _require(isinstance(methods, list) and methods, 'methods must be a nonempty list')
    bad = [m for m in methods if m not in METHODS]
    _require(not bad, f'unknown methods {bad}; choose from {list(METHODS)}')

    grid = data.get('grid') or {}
    _require(isinstance(grid, dict), 'grid must be a mapping')
    n_nodes = grid.get('nodes', quadrature.DEFAULT_NODES)
    _require(isinstance(n_nodes, int) and n_nodes >= 4, 'grid.nodes must be an integer >= 4')
    scale = grid.get('scale', 'auto')
    if scale == 'auto':
        scale = None
    else:
        _require(isinstance(scale, (int, float)) and scale > 0, 'grid.scale must be "auto" or > 0')
        scale = float(scale)

    tol = data.get('tolerances') or {}
    _require(isinstance(tol, dict), 'tolerances must be a mapping')
    unknown = set(tol) - {'drop_tol', 'omega_min', 'gap_tol', 'max_ring_order', 'sector_cap'}
    _require(not unknown, f'unknown tolerance keys: {sorted(unknown)}')

    out = data.get('output') or {}
    _require(isinstance(out, dict), 'output must be a mapping')
    fmt = out.get('format', 'csv')
    _require(fmt in ('csv', 'json'), 'output.format must be csv or json')
    path = out.get('path')
    if path is not None:
        path = Path(path)
        path = str(path if path.is_absolute() else base / path)

    return RunConfig(
        geometries=geoms, spaces=spaces, methods=tuple(methods), n_nodes=n_nodes,
        scale=scale, drop_tol=float(tol.get('drop_tol', 1e-12)),
        omega_min=float(tol.get('omega_min', 1e-6)), gap_tol=float(tol.get('gap_tol', 1e-8)),
        max_ring_order=int(tol.get('max_ring_order', 8)),
        sector_cap=int(tol.get('sector_cap', 20000)), output_path=path, output_format=fmt)


def load_config(path, mode='run'):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f'configuration file {path} does not exist')
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as err:
        line = getattr(getattr(err, 'problem_mark', None), 'line', None)
        raise ParseError(f'invalid YAML: {err}', None if line is None else line + 1) from None
    return config_from_dict(data, base=path.parent, mode=mode)


# execution -----------------------------------------------------------------

def _classify(err):
    if isinstance(err, (InstabilityError, DegeneracyError)):
        return 'numerical'
    return 'invalid'


def _run_geometry(config, geom):
    """Evaluate one geometry; returns an EnergyRecord or a Failure."""
    try:
        if geom.model is not None:
            ints, default_spaces = _build_model(geom.model)
        else:
            ints, default_spaces = read_fcidump(geom.path), None
        spaces = config.spaces or default_spaces
        res = pipeline.evaluate(
            ints, spaces, methods=config.methods, n_nodes=config.n_nodes,
            scale=config.scale, drop_tol=config.drop_tol, omega_min=config.omega_min,
            gap_tol=config.gap_tol, max_ring_order=config.max_ring_order,
            cap=config.sector_cap)
        return EnergyRecord.from_results(geom.label, res)
    except (MRRPAError, OSError) as err:
        return Failure(geom.label, _classify(err), str(err))


def _workers():
    raw = os.environ.get(WORKERS_ENV, '1')
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f'{WORKERS_ENV} must be an integer, got {raw!r}') from None
    _require(n >= 1, f'{WORKERS_ENV} must be >= 1')
    return n


def run(config):
    """Evaluate every geometry of ``config``; records keep the input order."""
    workers = min(_workers(), len(config.geometries))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_geometry, [config] * len(config.geometries),
                                     config.geometries))
    else:
        outcomes = [_run_geometry(config, g) for g in config.geometries]
    report = EnergyReport()
    for item in outcomes:
        if isinstance(item, Failure):
            logger.error('%s: %s', item.label, item.message)
            report.failures.append(item)
        else:
            report.records.append(item)
    return report


scan = run


# reports -------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ''
    if isinstance(x, bool):
        return 'true' if x else 'false'
    if isinstance(x, float):
        return f'{x:.12g}'
    return str(x)


def emit(report, fmt='csv', timings=True):
    """Serialize ``report`` to bytes in the CSV or JSON layout."""
    if fmt == 'csv':
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator='\n')
        writer.writerow(CSV_COLUMNS)
        for r in report.records:
            m = r.manifold
            writer.writerow([_fmt(x) for x in (
                r.label, r.e_casci, r.de_rpa, r.de_rpa_quad, r.de_sosex, r.stable,
                m.get('CV', 0), m.get('CA', 0), m.get('AV', 0), m.get('AA', 0))])
        return buf.getvalue().encode()
    if fmt == 'json':
        records = []
        for r in report.records:
            rec = dataclasses.asdict(r)
            if not timings:
                rec.pop('timings')
            records.append(rec)
        doc = {'records': records, 'failures': [dataclasses.asdict(f) for f in report.failures]}
        return (json.dumps(doc, indent=2) + '\n').encode()
    raise UsageError(f'unknown report format {fmt!r}')


def parse_report(data):
    """Inverse of ``emit(..., 'json')``."""
    doc = json.loads(data)
    records = [EnergyRecord(**rec) for rec in doc.get('records', [])]
    failures = [Failure(**f) for f in doc.get('failures', [])]
    return EnergyReport(records, failures)


def write_report(report, config, timings=True):
    data = emit(report, config.output_format, timings=timings)
    if config.output_path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(config.output_path, 'wb') as f:
            f.write(data)


# selftest ------------------------------------------------------------------

def _selftest_checks():
    man, v = fixtures.scalar_model()
    sol = rpa.solve_rpa(rpa.assemble_AB(man, v))
    e_plasmon = rpa.plasmon_energy(sol)
    yield 'scalar plasmon', abs(e_plasmon - 0.5 * (np.sqrt(1.4) - 1.2)) < 1e-12
    yield 'scalar quadrature', abs(quadrature.rpa_energy_quadrature(man, v) - e_plasmon) < 1e-6

    fx = fixtures.get_fixture('dimer_full_cas')
    res = pipeline.evaluate(fx.integrals, fx.spaces)
    yield 'dimer FCI energy', abs(res.e_casci - fx.expected['e_casci'].value) < 1e-10
    yield 'full-CAS RPA', abs(res.de_rpa) < 1e-12

    from mrrpa.reference_sr import sr_rpa_energy
    fx = fixtures.get_fixture('h4_sr')
    res = pipeline.evaluate(fx.integrals, fx.spaces)
    yield 'SR reduction', abs(res.de_rpa - sr_rpa_energy(fx.integrals, 2)) < 1e-10

    fx = fixtures.get_fixture('h4_cas22')
    res = pipeline.evaluate(fx.integrals, fx.spaces)
    yield 'CAS(2,2) plasmon vs quadrature', abs(res.de_rpa - res.de_rpa_quad) < 1e-6
    yield 'CAS(2,2) plasmon vs tr(BT)', abs(res.de_rpa - res.de_rpa_T) < 1e-9


def selftest(stream=None):
    stream = stream or sys.stdout
    ok = True
    for name, passed in _selftest_checks():
        ok &= bool(passed)
        print(f'{"PASS" if passed else "FAIL"}  {name}', file=stream)
    return EXIT_OK if ok else EXIT_NUMERICAL


# entry point ---------------------------------------------------------------

def _parser():
    parser = argparse.ArgumentParser(prog='mrrpa', description=__doc__.split('\n\n')[0])
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', required=True)
    for name, text in (('run', 'single-point calculation'), ('scan', 'scan over inputs')):
        p = sub.add_parser(name, help=text)
        p.add_argument('config', help='YAML configuration file')
        p.add_argument('--format', choices=('csv', 'json'), help='override output.format')
        p.add_argument('-o', '--output', help='override output.path ("-" for stdout)')
        p.add_argument('--no-timings', action='store_true',
                       help='omit timings so reports compare byte for byte')
    sub.add_parser('selftest', help='run built-in consistency checks')
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')
    if args.command == 'selftest':
        return selftest()
    try:
        config = load_config(args.config, mode=args.command)
        if args.format:
            config = dataclasses.replace(config, output_format=args.format)
        if args.output:
            config = dataclasses.replace(
                config, output_path=None if args.output == '-' else args.output)
        report = run(config)
        write_report(report, config, timings=not args.no_timings)
    except (MRRPAError, OSError) as err:
        print(f'error: {err}', file=sys.stderr)
        return EXIT_NUMERICAL if _classify(err) == 'numerical' else EXIT_INVALID
    for f in report.failures:
        print(f'error: {f.label}: {f.message}', file=sys.stderr)
    for r in report.records:
        if not r.stable:
            print(f'error: {r.label}: RPA is unstable; energies withheld', file=sys.stderr)
    return report.exit_code


if __name__ == '__main__':
    sys.exit(main())
