"""Exact symbolic engine for thick-morphism pull-backs.

The library computes the non-linear pull-back of a generating function
S(x, q), checks that such pull-backs have multiplicative differentials,
reconstructs S from any such functional by evaluation on linear functions,
and carries the companion cotangent-bundle bracket calculus.  All arithmetic
is exact over the rationals; identities are verified as literal equalities
of truncated polynomials.
"""

from .ring import (
    EPSILON,
    LAMBDA,
    PARAM,
    P_MOMENTUM,
    Q_COVECTOR,
    X_COORD,
    Y_COORD,
    EngineError,
    Poly,
    RangeError,
    Scalar,
    UsageError,
    VarTable,
    arith,
)
from .parse import ParseError, UnknownSymbolError, parse_poly, render_canonical
from .thick import (
    ChartPair,
    FormalMap,
    GenFixture,
    GenFunction,
    GradedFunction,
    closed_form_pullback3,
    closed_form_y2,
    pullback,
    read_genfunction,
    solve_y_map,
)
from .functional import (
    CheckResult,
    Functional,
    OrderAgreementError,
    RoundtripReport,
    SupportMap,
    associate,
    corrupted_thick_functional,
    differential,
    evaluate,
    homomorphism_check,
    lemma2_check,
    order_difference,
    polarise,
    roundtrip_verify,
    support_map,
    thick_functional,
)
from .hamilton import (
    BracketMorphismResult,
    Hamiltonian,
    bracket_morphism_check,
    derived_bracket,
    ham_vector,
    poisson,
    read_hamiltonian,
    s_related_check,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
