"""Block CMV operators with matrix Verblunsky coefficients.

Submodules
----------
linalg_core   dense matrix primitives and tolerances
verblunsky    coefficient sequences, rho, Theta blocks
cmv_operator  finite unitary truncations and banded solves
herglotz      Caratheodory/Schur calculus on the disk
weyl          half-lattice Schur functions and Weyl-Titchmarsh matrices
analysis      moments, trace formulas, reflectionless and Borg checks
cli           command line front-end (``cmv``)
"""

from .errors import *  # noqa: F401,F403
from .linalg_core import (DEFAULT_TOL, Tolerances, hermitian_sqrt, operator_norm,
                          principal_log, unitary_eig)
from .verblunsky import (VerblunskySequence, borg_sequence, conjugate_sequence,
                         free_sequence)
from .cmv_operator import CmvTruncation, build, build_centered
from .analysis import ArcSpec

__version__ = '0.1.0'
