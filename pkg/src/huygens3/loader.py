"""Load the shipped relation database into engine structures."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

from .algebra import Polynomial, SymbolRegistry
from .npfield import (
    CommutatorRules,
    Gauge,
    NPError,
    PfaffianTable,
    Relation,
    RelationSet,
)
from .reldb import SourceFile, StepDecl, parse_expr, parse_file, parse_source

DATA_FILES = (
    "np_field_equations.rel",
    "np_commutators.rel",
    "gauge_typeIII.rel",
    "paper_section2.rel",
)
SCRIPT_FILE = "proof_typeIII.script"


@dataclass
class Database:
    reg: SymbolRegistry
    relations: RelationSet
    gauge: Gauge
    rules: CommutatorRules
    steps: list[StepDecl] = field(default_factory=list)

    def relation(self, name: str) -> Relation:
        return self.relations.get(name)

    def build_table(self, names: list[str]) -> PfaffianTable:
        """Pfaffian table from named relations (conjugation-closed and
        canonicalized); every named relation must carry a solve subject."""
        table = PfaffianTable(self.reg, self.gauge)
        for name in names:
            rel = self.relations.get(name)
            table.add_from_relation(rel)
        table.canonicalize()
        return table


def data_text(name: str) -> str:
    return importlib.resources.files("huygens3.data").joinpath(name).read_text("utf-8")


def absorb(db: Database, src: SourceFile):
    reg = db.reg
    for decl in src.relations:
        db.relations.add(Relation(decl.name, decl.poly, decl.provenance,
                                  decl.variant, decl.solve, decl.ref))
    for name in src.gauge.zeros:
        db.gauge.set_zero(name)
    for name, value in src.gauge.sets:
        db.gauge.set_value(name, value)
    for text in src.gauge.vanish:
        poly = parse_expr(text, reg)
        sids = list(poly.variables())
        if len(sids) != 1 or not reg.symbol(sids[0]).is_atom:
            raise NPError(f"gauge vanish target {text!r} is not a derivative atom")
        db.gauge.add_vanish(reg.symbol(sids[0]))
    by_pair: dict[tuple[str, str], list] = {}
    for op1, op2, coeff, opname, _line in src.commutators:
        by_pair.setdefault((op1, op2), []).append((coeff, opname))
    for (op1, op2), entries in by_pair.items():
        db.rules.set(op1, op2, entries)
    db.steps.extend(src.steps)


def load_database(paths: list[str] | None = None,
                  script: str | bool = True) -> Database:
    """Standard database: packaged data files unless explicit paths given."""
    reg = SymbolRegistry.standard()
    db = Database(reg, RelationSet(), Gauge(reg), CommutatorRules(reg))
    if paths is None:
        for name in DATA_FILES:
            absorb(db, parse_source(data_text(name), reg, path=name))
        if script is True:
            absorb(db, parse_source(data_text(SCRIPT_FILE), reg, path=SCRIPT_FILE))
        elif isinstance(script, str):
            absorb(db, parse_file(script, reg))
    else:
        for p in paths:
            absorb(db, parse_file(p, reg))
    return db
