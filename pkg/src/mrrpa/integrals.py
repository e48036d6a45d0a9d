"""Molecular integrals in the FCIDUMP format.

Two-electron integrals are kept in chemist notation (pq|rs) and only the
canonical member of each 8-fold permutation class is stored.  The physicist
integral <pq|rs> used by the many-body code equals (pr|qs).
"""

import dataclasses
import io
import re
from functools import cached_property
from types import MappingProxyType
from typing import Mapping, Tuple

import numpy as np

from mrrpa.errors import ParseError, UsageError

__all__ = [
    'IntegralSet', 'canonical_key', 'parse_fcidump', 'read_fcidump',
    'write_fcidump', 'get_eri', 'hubbard_model', 'compose_noninteracting',
    'rotate_orbitals', 'h1_eigenbasis',
]


def canonical_key(p, q, r, s):
    """Representative of the 8-fold class of (pq|rs): p>=q, r>=s, pq>=rs."""
    if p < q:
        p, q = q, p
    if r < s:
        r, s = s, r
    if (p, q) < (r, s):
        p, q, r, s = r, s, p, q
    return (p, q, r, s)


@dataclasses.dataclass(frozen=True)
class IntegralSet:
    norb: int
    nelec: int
    ms2: int
    h1: np.ndarray
    eri: Mapping[Tuple[int, int, int, int], float]
    e_core: float = 0.0
    orbsym: Tuple[int, ...] = ()
    isym: int = 1

    def __post_init__(self):
        if self.norb < 1:
            raise UsageError('norb must be >= 1')
        if not 0 <= self.nelec <= 2 * self.norb:
            raise UsageError(f'nelec={self.nelec} incompatible with norb={self.norb}')
        h1 = np.array(self.h1, dtype=float)
        if h1.shape != (self.norb, self.norb):
            raise UsageError(f'h1 has shape {h1.shape}, expected ({self.norb}, {self.norb})')
        if not np.all(np.isfinite(h1)):
            raise UsageError('h1 contains non-finite values')
        if np.max(np.abs(h1 - h1.T), initial=0.0) > 1e-10:
            raise UsageError('h1 is not symmetric')
        h1 = 0.5 * (h1 + h1.T)
        h1.flags.writeable = False
        eri = {}
        for key, val in self.eri.items():
            if any(not 0 <= k < self.norb for k in key):
                raise UsageError(f'ERI index {key} out of range')
            val = float(val)
            if not np.isfinite(val):
                raise UsageError(f'ERI {key} is not finite')
            eri[canonical_key(*key)] = val
        if not np.isfinite(self.e_core):
            raise UsageError('e_core is not finite')
        object.__setattr__(self, 'h1', h1)
        object.__setattr__(self, 'eri', MappingProxyType(eri))
        object.__setattr__(self, 'e_core', float(self.e_core))
        object.__setattr__(self, 'orbsym', tuple(self.orbsym))

    def get_eri(self, p, q, r, s):
        for k in (p, q, r, s):
            if not 0 <= k < self.norb:
                raise UsageError(f'orbital index {k} out of range [0, {self.norb})')
        return self.eri.get(canonical_key(p, q, r, s), 0.0)

    @cached_property
    def eri_dense(self):
        """Full (pq|rs) tensor, read-only."""
        n = self.norb
        g = np.zeros((n, n, n, n))
        if self.eri:
            idx = np.array(list(self.eri.keys()))
            val = np.array(list(self.eri.values()))
            p, q, r, s = idx.T
            for a, b, c, d in ((p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r)):
                g[a, b, c, d] = val
                g[c, d, a, b] = val
        g.flags.writeable = False
        return g

    @classmethod
    def from_dense(cls, h1, eri, nelec, ms2=0, e_core=0.0, orbsym=(), isym=1):
        """Build from a dense (pq|rs) tensor; exact zeros are not stored."""
        eri = np.asarray(eri, dtype=float)
        n = eri.shape[0]
        p, q, r, s = np.indices(eri.shape).reshape(4, -1)
        pq = p * (p + 1) // 2 + q
        rs = r * (r + 1) // 2 + s
        mask = (p >= q) & (r >= s) & (pq >= rs)
        mask &= eri.reshape(-1) != 0.0
        keys = zip(p[mask].tolist(), q[mask].tolist(), r[mask].tolist(), s[mask].tolist())
        store = dict(zip(keys, eri.reshape(-1)[mask].tolist()))
        return cls(norb=n, nelec=nelec, ms2=ms2, h1=h1, eri=store, e_core=e_core,
                   orbsym=orbsym, isym=isym)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def get_eri(integrals, p, q, r, s):
    return integrals.get_eri(p, q, r, s)


_HEADER_END = re.compile(r'(&END|/)\s*$', re.IGNORECASE)


def _parse_header(text, first_lineno):
    body = re.sub(r'^\s*&FCI', '', text, flags=re.IGNORECASE)
    body = re.sub(r'(&END|/)\s*$', '', body.strip(), flags=re.IGNORECASE)
    body = re.sub(r'\s*=\s*', '=', body.replace(',', ' '))
    fields = {}
    key = None
    for tok in body.split():
        if '=' in tok:
            key, _, val = tok.partition('=')
            key = key.upper()
            fields[key] = [val] if val else []
        elif key is None:
            raise ParseError(f'unexpected token {tok!r} in header', first_lineno)
        else:
            fields[key].append(tok)
    out = {}
    for name in ('NORB', 'NELEC', 'MS2'):
        if not fields.get(name):
            raise ParseError(f'header is missing {name}', first_lineno)
        try:
            out[name] = int(fields[name][0])
        except ValueError:
            raise ParseError(f'{name} is not an integer', first_lineno) from None
    if fields.get('IUHF') and fields['IUHF'][0] not in ('0', '.FALSE.', 'F'):
        raise ParseError('unrestricted FCIDUMP files are not supported', first_lineno)
    try:
        out['ORBSYM'] = tuple(int(x) for x in fields.get('ORBSYM', []))
        out['ISYM'] = int(fields['ISYM'][0]) if fields.get('ISYM') else 1
    except ValueError:
        raise ParseError('ORBSYM/ISYM must be integers', first_lineno) from None
    return out


def parse_fcidump(text):
    """Parse FCIDUMP text (a string or a text stream) into an IntegralSet."""
    if not isinstance(text, str):
        text = text.read()
    lines = text.splitlines()
    header_lines = []
    lineno = 0
    for lineno, line in enumerate(lines, start=1):
        header_lines.append(line)
        if _HEADER_END.search(line.strip()) or re.search(r'&END', line, re.IGNORECASE):
            break
    else:
        raise ParseError('header is not terminated by "/" or "&END"', lineno or 1)
    if not header_lines or not header_lines[0].lstrip().upper().startswith('&FCI'):
        raise ParseError('header must start with "&FCI"', 1)
    hdr = _parse_header(' '.join(header_lines), 1)
    norb, nelec, ms2 = hdr['NORB'], hdr['NELEC'], hdr['MS2']
    if norb < 1:
        raise ParseError('NORB must be >= 1', 1)

    h1 = np.zeros((norb, norb))
    eri = {}
    e_core = 0.0
    for n, line in enumerate(lines[lineno:], start=lineno + 1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) != 5:
            raise ParseError(f'expected "value i j k l", got {line.strip()!r}', n)
        if toks[0].startswith('('):
            raise ParseError('complex integrals are not supported', n)
        try:
            val = float(toks[0].replace('D', 'E').replace('d', 'e'))
        except ValueError:
            raise ParseError(f'non-numeric value {toks[0]!r}', n) from None
        try:
            i, j, k, l = (int(t) for t in toks[1:])
        except ValueError:
            raise ParseError(f'non-integer index in {line.strip()!r}', n) from None
        if any(not 0 <= x <= norb for x in (i, j, k, l)):
            raise ParseError(f'index out of range [0, {norb}] in {line.strip()!r}', n)
        if not np.isfinite(val):
            raise ParseError(f'non-finite value {toks[0]!r}', n)
        if i == j == k == l == 0:
            e_core = val
        elif k == l == 0 and i > 0 and j > 0:
            h1[i - 1, j - 1] = h1[j - 1, i - 1] = val
        elif j == k == l == 0:
            # orbital energies emitted by some producers; not needed
            continue
        elif min(i, j, k, l) > 0:
            eri[canonical_key(i - 1, j - 1, k - 1, l - 1)] = val
        else:
            raise ParseError(f'invalid index pattern in {line.strip()!r}', n)
    try:
        return IntegralSet(norb=norb, nelec=nelec, ms2=ms2, h1=h1, eri=eri,
                           e_core=e_core, orbsym=hdr['ORBSYM'], isym=hdr['ISYM'])
    except UsageError as err:
        raise ParseError(str(err), 1) from None


def read_fcidump(path):
    with open(path) as f:
        return parse_fcidump(f.read())


def write_fcidump(integrals, fileobj=None):
    """Serialize to FCIDUMP text; returns the text when no file object is given."""
    out = io.StringIO() if fileobj is None else fileobj
    n = integrals.norb
    out.write(f'&FCI NORB={n},NELEC={integrals.nelec},MS2={integrals.ms2},\n')
    orbsym = integrals.orbsym or (1,) * n
    out.write(' ORBSYM=' + ','.join(str(x) for x in orbsym) + ',\n')
    out.write(f' ISYM={integrals.isym},\n&END\n')
    fmt = '{:24.16e} {:4d} {:4d} {:4d} {:4d}\n'
    for (p, q, r, s) in sorted(integrals.eri):
        out.write(fmt.format(integrals.eri[p, q, r, s], p + 1, q + 1, r + 1, s + 1))
    for p in range(n):
        for q in range(p + 1):
            if integrals.h1[p, q] != 0.0:
                out.write(fmt.format(integrals.h1[p, q], p + 1, q + 1, 0, 0))
    out.write(fmt.format(integrals.e_core, 0, 0, 0, 0))
    if fileobj is None:
        return out.getvalue()


def hubbard_model(nsite, t=1.0, U=1.0, periodic=False, nelec=None, ms2=None):
    """Site-basis Hubbard chain; half filling by default."""
    if nsite < 2:
        raise UsageError('hubbard_model needs at least 2 sites')
    if nelec is None:
        nelec = nsite
    if ms2 is None:
        ms2 = nelec % 2
    h1 = np.zeros((nsite, nsite))
    bonds = nsite if periodic and nsite > 2 else nsite - 1
    for i in range(bonds):
        j = (i + 1) % nsite
        h1[i, j] = h1[j, i] = -t
    eri = {(i, i, i, i): U for i in range(nsite)} if U != 0 else {}
    return IntegralSet(norb=nsite, nelec=nelec, ms2=ms2, h1=h1, eri=eri)


def compose_noninteracting(a, b):
    """Block-separable union of two systems; orbitals of b follow those of a."""
    n = a.norb + b.norb
    h1 = np.zeros((n, n))
    h1[:a.norb, :a.norb] = a.h1
    h1[a.norb:, a.norb:] = b.h1
    eri = dict(a.eri)
    off = a.norb
    for (p, q, r, s), val in b.eri.items():
        eri[p + off, q + off, r + off, s + off] = val
    orbsym = a.orbsym + b.orbsym if a.orbsym and b.orbsym else ()
    return IntegralSet(norb=n, nelec=a.nelec + b.nelec, ms2=a.ms2 + b.ms2, h1=h1,
                       eri=eri, e_core=a.e_core + b.e_core, orbsym=orbsym)


def rotate_orbitals(integrals, C):
    """Integrals in the orbital basis given by the columns of orthogonal C."""
    C = np.asarray(C, dtype=float)
    h1 = C.T @ integrals.h1 @ C
    eri = np.einsum('pqrs,pi,qj,rk,sl->ijkl', integrals.eri_dense, C, C, C, C,
                    optimize=True)
    return IntegralSet.from_dense(h1, eri, integrals.nelec, integrals.ms2,
                                  integrals.e_core)


def h1_eigenbasis(integrals):
    """Rotate to the eigenvectors of h1 (Hueckel orbitals for lattice models)."""
    _, C = np.linalg.eigh(integrals.h1)
    # fix column signs so the largest component is positive
    idx = np.argmax(np.abs(C), axis=0)
    C = C * np.sign(C[idx, np.arange(C.shape[1])])
    return rotate_orbitals(integrals, C)

