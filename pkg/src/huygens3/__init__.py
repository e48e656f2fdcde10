"""huygens3: exact polynomial algebra, Groebner machinery and a replay
pipeline for the spin-coefficient vanishing argument on Petrov type III
backgrounds."""

from ._coeff import MPQ, MPZ
from .algebra import (
    Monomial,
    Polynomial,
    Symbol,
    SymbolRegistry,
    conjugate,
    content_and_primitive,
    primitive_part,
    ring_ops,
    substitute,
)
from .grobner import (
    GroebnerBasis,
    MonomialOrder,
    ResourceCaps,
    ResourceLimitError,
    TriangularSystem,
    buchberger,
    gsolve,
    grevlex_order,
    is_trivial,
    lex_order,
    normal_form,
    radical_membership,
    saturate,
)
from .npfield import (
    CommutatorRules,
    Gauge,
    PfaffianTable,
    Relation,
    RelationSet,
    apply_deriv,
    commutator_residual,
    eliminate_atoms,
    solve_for_atom,
    specialize,
)
from .reldb import ParseError, parse_expr, parse_file, parse_source, render

__version__ = "0.1.0"

__all__ = [
    "MPQ", "MPZ", "Monomial", "Polynomial", "Symbol", "SymbolRegistry",
    "conjugate", "content_and_primitive", "primitive_part", "ring_ops",
    "substitute", "GroebnerBasis", "MonomialOrder", "ResourceCaps",
    "ResourceLimitError", "TriangularSystem", "buchberger", "gsolve",
    "grevlex_order", "is_trivial", "lex_order", "normal_form",
    "radical_membership", "saturate", "CommutatorRules", "Gauge",
    "PfaffianTable", "Relation", "RelationSet", "apply_deriv",
    "commutator_residual", "eliminate_atoms", "solve_for_atom", "specialize",
    "ParseError", "parse_expr", "parse_file", "parse_source", "render",
]
