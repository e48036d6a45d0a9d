"""Multi-reference RPA and SOSEX correlation energies on a Dyall partition."""

from mrrpa.errors import (CapacityError, DegeneracyError, InstabilityError, MRRPAError,
                          ParseError, UsageError)
from mrrpa.integrals import (IntegralSet, compose_noninteracting, hubbard_model,
                             parse_fcidump, read_fcidump, write_fcidump)
from mrrpa.partition import OrbitalSpaces
from mrrpa.pipeline import evaluate, prepare_reference

__version__ = '0.1.0'

__all__ = [
    'CapacityError', 'DegeneracyError', 'InstabilityError', 'MRRPAError', 'ParseError',
    'UsageError', 'IntegralSet', 'compose_noninteracting', 'hubbard_model',
    'parse_fcidump', 'read_fcidump', 'write_fcidump', 'OrbitalSpaces', 'evaluate',
    'prepare_reference',
]
