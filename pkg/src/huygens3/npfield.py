"""Differential layer: relation database, gauge specialization, derivative
application through Pfaffian tables, commutator residuals and linear solving.

Directional derivatives of scalars that have no known value stay in the ring
as derivative-atom symbols.  Relations whose solved form has a polynomial
(non-rational) coefficient are kept as numerator relations with an explicit
subject; reduction modulo such relations is pseudo-division that records the
nonzero multipliers it used, so the ring itself stays division-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ._coeff import MPQ, QONE
from .algebra import (
    AlgebraError,
    DERIV_CONJ,
    DERIV_TAGS,
    MONOMIAL_ONE,
    Monomial,
    Polynomial,
    Symbol,
    SymbolRegistry,
    conjugate,
    coefficient_primitive,
    content_and_primitive,
    substitute,
)

PROVENANCE_APPENDIX = "appendix"
PROVENANCE_PAPER = "paper-eq"
PROVENANCE_CONDITION = "transcribed-condition"
PROVENANCE_DERIVED = "derived"


class NPError(Exception):
    pass


@dataclass(frozen=True)
class Relation:
    """Named equality, stored as lhs - rhs in canonical form."""

    name: str
    poly: Polynomial
    provenance: str = PROVENANCE_DERIVED
    variant: str | None = None
    solve: str | None = None
    ref: str = ""

    def conjugated(self, name: str | None = None) -> "Relation":
        reg = self.poly.reg
        solve = None
        if self.solve is not None:
            sym = reg.get(self.solve)
            if sym is None:
                raise NPError(f"solve subject {self.solve!r} is not interned")
            solve = reg.symbol(sym.conj_id).name
        return replace(self, name=name or ("~" + self.name),
                       poly=conjugate(self.poly), solve=solve)


class RelationSet:
    """Ordered, name-addressable collection of relations.

    A base name may carry verbatim/corrected variants; plain lookup resolves
    to the corrected variant when both exist (the replay reports which one
    each step actually used).
    """

    def __init__(self):
        self._by_key: dict[tuple[str, str], Relation] = {}
        self._order: list[tuple[str, str]] = []

    def add(self, rel: Relation, replace_existing: bool = False):
        key = (rel.name, rel.variant or "")
        if key in self._by_key and not replace_existing:
            raise NPError(f"duplicate relation {rel.name!r} variant {rel.variant!r}")
        if key not in self._by_key:
            self._order.append(key)
        self._by_key[key] = rel

    def has(self, name: str) -> bool:
        return any(k[0] == name for k in self._by_key)

    def variants(self, name: str) -> list[Relation]:
        return [self._by_key[k] for k in self._order if k[0] == name]

    def get(self, name: str, mode: str | None = None) -> Relation:
        """Resolve a name, honouring an explicit variant request `name!mode`.

        A `~` prefix resolves to the conjugated relation.
        """
        if "!" in name:
            name, mode = name.split("!", 1)
        if name.startswith("~") and not any(k[0] == name for k in self._by_key):
            return self.get(name[1:], mode).conjugated(name)
        cands = self.variants(name)
        if not cands:
            raise NPError(f"unknown relation {name!r}")
        if mode:
            for r in cands:
                if (r.variant or "") == mode:
                    return r
            raise NPError(f"relation {name!r} has no variant {mode!r}")
        for preferred in ("corrected", "", "verbatim"):
            for r in cands:
                if (r.variant or "") == preferred:
                    return r
        return cands[0]

    def names(self) -> list[str]:
        out = []
        for name, _ in self._order:
            if name not in out:
                out.append(name)
        return out

    def __iter__(self):
        return (self._by_key[k] for k in self._order)

    def __len__(self):
        return len(self._order)


# ---------------------------------------------------------------------------
# gauge


@dataclass
class Gauge:
    """Substitution of fixed scalars plus identically vanishing derivatives.

    Applying a gauge twice equals applying it once; vanishing atoms are
    matched structurally so nested atoms over a killed base also vanish.
    """

    reg: SymbolRegistry
    subs: dict[int, object] = field(default_factory=dict)  # symbol id -> rational
    vanish: set[int] = field(default_factory=set)          # atom symbol ids

    def set_zero(self, name: str):
        sym = self.reg[name]
        self.subs[sym.id] = MPQ(0)

    def set_value(self, name: str, value):
        sym = self.reg[name]
        self.subs[sym.id] = MPQ(value)

    def add_vanish(self, atom: Symbol):
        self.vanish.add(atom.id)

    def kills_atom(self, sym: Symbol) -> bool:
        """True when a derivative atom is identically zero under this gauge."""
        if sym.id in self.vanish:
            return True
        base = self.reg.symbol(sym.base_id)
        while base.is_atom:
            if base.id in self.vanish:
                return True
            base = self.reg.symbol(base.base_id)
        return base.id in self.subs  # derivative of a constant scalar

    def apply(self, p: Polynomial) -> Polynomial:
        reg = self.reg
        mapping: dict[int, Polynomial] = {}
        for sid in p.variables():
            sym = reg.symbol(sid)
            if sym.is_atom:
                if self.kills_atom(sym):
                    mapping[sid] = Polynomial.zero(reg)
            elif sid in self.subs:
                mapping[sid] = Polynomial.constant(reg, self.subs[sid])
        if not mapping:
            return p
        return substitute(p, mapping)


def specialize(rel: Relation, gauge: Gauge) -> Relation:
    """Gauge-specialize a relation; idempotent."""
    return replace(rel, poly=gauge.apply(rel.poly))


# ---------------------------------------------------------------------------
# Pfaffian table and derivative application


class PfaffianTable:
    """Map (operator tag, scalar symbol id) -> Polynomial value.

    Closed under conjugation: inserting an entry also inserts the conjugated
    entry and verifies consistency when both are given explicitly.
    """

    def __init__(self, reg: SymbolRegistry, gauge: Gauge | None = None):
        self.reg = reg
        self.gauge = gauge
        self.entries: dict[tuple[str, int], Polynomial] = {}

    def set(self, op: str, sym: Symbol, value: Polynomial):
        if op not in DERIV_TAGS:
            raise NPError(f"unknown operator {op!r}")
        conj_key = (DERIV_CONJ[op], sym.conj_id)
        conj_value = conjugate(value)
        for key, val in (((op, sym.id), value), (conj_key, conj_value)):
            existing = self.entries.get(key)
            if existing is not None and existing != val:
                opname, sid = key
                raise NPError(
                    f"conflicting table entries for {opname}({self.reg.symbol(sid).name})")
            self.entries[key] = val

    def get(self, op: str, sym: Symbol) -> Polynomial | None:
        return self.entries.get((op, sym.id))

    def add_from_relation(self, rel: Relation):
        """Install a relation that is linear in one derivative atom with a
        rational coefficient, solving for that atom."""
        subject = rel.solve
        if subject is None:
            raise NPError(f"relation {rel.name!r} has no solve subject")
        sym = self.reg[subject]
        if not sym.is_atom:
            raise NPError(f"table subject {subject!r} is not a derivative atom")
        value = solve_for_atom(rel, sym)
        self.set(sym.op, self.reg.symbol(sym.base_id), value)

    def canonicalize(self):
        """Rewrite atom symbols inside stored values by other table entries
        until a fixpoint, so every value is as explicit as the table allows."""
        for _ in range(len(self.entries) + 4):
            changed = False
            for key, val in list(self.entries.items()):
                mapping = {}
                for sid in val.atoms():
                    asym = self.reg.symbol(sid)
                    if self.gauge is not None and self.gauge.kills_atom(asym):
                        mapping[sid] = Polynomial.zero(self.reg)
                        continue
                    sub = self.entries.get((asym.op, asym.base_id))
                    if sub is not None and (asym.op, asym.base_id) != key:
                        mapping[sid] = sub
                if mapping:
                    self.entries[key] = substitute(val, mapping)
                    changed = True
            if not changed:
                return
        raise NPError("pfaffian table does not reach a fixpoint (cyclic entries)")

    def conjugation_closed(self) -> bool:
        for (op, sid), val in self.entries.items():
            key = (DERIV_CONJ[op], self.reg.symbol(sid).conj_id)
            other = self.entries.get(key)
            if other is None or other != conjugate(val):
                return False
        return True


def apply_deriv(op: str, p: Polynomial, table: PfaffianTable | None = None,
                gauge: Gauge | None = None) -> Polynomial:
    """Leibniz expansion of a directional derivative.

    Table entries resolve known derivatives; gauge-killed derivatives vanish;
    anything else is emitted as a derivative-atom symbol.
    """
    if op not in DERIV_TAGS:
        raise NPError(f"unknown operator {op!r}")
    reg = p.reg
    gauge = gauge or (table.gauge if table is not None else None)
    deriv_cache: dict[int, Polynomial] = {}

    def d_of(sid: int) -> Polynomial:
        got = deriv_cache.get(sid)
        if got is not None:
            return got
        sym = reg.symbol(sid)
        if table is not None:
            val = table.get(op, sym)
            if val is not None:
                deriv_cache[sid] = val
                return val
        atom = reg.atom(op, sym)
        if gauge is not None and gauge.kills_atom(atom):
            out = Polynomial.zero(reg)
        else:
            out = Polynomial.variable(reg, atom)
        deriv_cache[sid] = out
        return out

    total = Polynomial.zero(reg)
    for m, c in p.terms:
        for idx, (sid, e) in enumerate(m.exps):
            rest = list(m.exps[:idx]) + list(m.exps[idx + 1:])
            if e > 1:
                rest.append((sid, e - 1))
            cof = Polynomial(reg, ((Monomial(tuple(sorted(rest))), c * e),))
            total = total + cof * d_of(sid)
    return total


# ---------------------------------------------------------------------------
# commutator rules


class CommutatorRules:
    """The four directional commutators and their conjugates.

    rule(op1, op2) yields [(coeff, op)] with [op1, op2] = sum coeff * op;
    missing pairs resolve through antisymmetry and conjugation.
    """

    def __init__(self, reg: SymbolRegistry):
        self.reg = reg
        self._rules: dict[tuple[str, str], list[tuple[Polynomial, str]]] = {}

    def set(self, op1: str, op2: str, entries: list[tuple[Polynomial, str]]):
        self._rules[(op1, op2)] = list(entries)

    def rule(self, op1: str, op2: str) -> list[tuple[Polynomial, str]]:
        got = self._rules.get((op1, op2))
        if got is not None:
            return got
        rev = self._rules.get((op2, op1))
        if rev is not None:
            return [(-c, o) for c, o in rev]
        c1, c2 = DERIV_CONJ[op1], DERIV_CONJ[op2]
        got = self._rules.get((c1, c2))
        if got is not None:
            return [(conjugate(c), DERIV_CONJ[o]) for c, o in got]
        rev = self._rules.get((c2, c1))
        if rev is not None:
            return [(-conjugate(c), DERIV_CONJ[o]) for c, o in rev]
        raise NPError(f"no commutator rule for ({op1}, {op2})")

    def apply(self, op1: str, op2: str, f: Polynomial,
              table: PfaffianTable | None, gauge: Gauge | None) -> Polynomial:
        total = Polynomial.zero(f.reg)
        g = gauge or (table.gauge if table is not None else None)
        for coeff, op in self.rule(op1, op2):
            c = g.apply(coeff) if g is not None else coeff
            if c.is_zero:
                continue
            total = total + c * apply_deriv(op, f, table, gauge)
        return total


def commutator_residual(op1: str, op2: str, f: Polynomial,
                        table: PfaffianTable, rules: CommutatorRules,
                        side: "ReductionSystem | None" = None):
    """op1(op2 f) - op2(op1 f) - [op1,op2] f, expanded via the table and then
    reduced modulo `side`.  Returns (residual, reduction record)."""
    gauge = table.gauge
    e = apply_deriv(op1, apply_deriv(op2, f, table), table) \
        - apply_deriv(op2, apply_deriv(op1, f, table), table) \
        - rules.apply(op1, op2, f, table, gauge)
    if side is None:
        return e, ReductionRecord()
    return side.reduce(e)


# ---------------------------------------------------------------------------
# linear solving and elimination


def solve_for_atom(rel: Relation, atom: Symbol,
                   trail: list[Polynomial] | None = None) -> Polynomial:
    """Solve a relation that is linear in `atom`.

    With a rational coefficient the exact value is returned.  A polynomial
    coefficient is recorded on `trail` as a nonzero side condition and the
    returned value is the numerator (the true value is numerator/denominator).
    """
    num, den = solve_linear(rel.poly, atom)
    if den.is_constant:
        c = den.constant_value()
        if c == 0:
            raise NPError(f"{atom.name} is absent from {rel.name!r}")
        return num * (QONE / c)
    if trail is None:
        raise NPError(
            f"coefficient of {atom.name} in {rel.name!r} is not a rational")
    trail.append(den)
    return num


def solve_linear(p: Polynomial, sym: Symbol) -> tuple[Polynomial, Polynomial]:
    """Write p = den*sym - num with sym absent from den and num; returns
    (num, den) so that sym = num/den on the zero set of p (den nonzero)."""
    reg = p.reg
    den_terms = {}
    num_terms = {}
    for m, c in p.terms:
        e = m.exponent(sym.id)
        if e == 0:
            num_terms[m] = -c
        elif e == 1:
            den_terms[m.div(Monomial(((sym.id, 1),)))] = c
        else:
            raise NPError(f"not linearly solvable: degree {e} in {sym.name}")
    if not den_terms:
        raise NPError(f"not linearly solvable: {sym.name} absent")
    from .algebra import _from_clean_dict

    den = _from_clean_dict(reg, den_terms)
    num = _from_clean_dict(reg, num_terms)
    if sym.id in den.variables():
        raise NPError(f"not linearly solvable: nonlinear occurrence of {sym.name}")
    return num, den


def eliminate_atoms(rel1: Relation, rel2: Relation, atoms: list[Symbol]) -> Polynomial:
    """One polynomial combination of rel1, rel2 from which all listed atoms
    are absent; the result is reduced to its primitive part.

    Requires the atom-coefficient vectors of the two relations to be
    proportional (cross products vanish), which is exactly when a single
    combination can eliminate all the atoms at once.
    """
    if not atoms:
        raise NPError("no atoms to eliminate")
    reg = rel1.poly.reg

    def coeff_of(p: Polynomial, sym: Symbol) -> Polynomial:
        data = {}
        unit = Monomial(((sym.id, 1),))
        for m, c in p.terms:
            e = m.exponent(sym.id)
            if e == 1:
                data[m.div(unit)] = c
            elif e > 1:
                raise NPError(f"atom {sym.name} occurs nonlinearly")
        from .algebra import _from_clean_dict

        return _from_clean_dict(reg, data)

    c1 = [coeff_of(rel1.poly, a) for a in atoms]
    c2 = [coeff_of(rel2.poly, a) for a in atoms]
    pivot = None
    for i, (a, b) in enumerate(zip(c1, c2)):
        if not a.is_zero or not b.is_zero:
            pivot = i
            break
    if pivot is None:
        raise NPError("atoms absent from both relations")
    for i in range(len(atoms)):
        if c1[pivot] * c2[i] != c1[i] * c2[pivot]:
            raise NPError("atoms not jointly eliminable by one combination")
    combo = c2[pivot] * rel1.poly - c1[pivot] * rel2.poly
    if combo.is_zero:
        return combo
    for a in atoms:
        if a.id in combo.variables():
            raise NPError("atoms not jointly eliminable by one combination")
    return coefficient_primitive(combo)


# ---------------------------------------------------------------------------
# pseudo-reduction with prolongation


@dataclass
class ReductionRecord:
    """Multipliers (assumed nonzero) and relations used during a reduction."""

    multipliers: list[Polynomial] = field(default_factory=list)
    used: list[str] = field(default_factory=list)
    prolonged: list[str] = field(default_factory=list)


class ReductionSystem:
    """Subject-directed pseudo-reduction modulo a set of relations.

    Every relation has a subject symbol in which it is linear; reducing a
    polynomial eliminates subjects in dependency order by pseudo-division,
    multiplying through by the subject coefficients (recorded as nonzero
    assumptions).  Derivatives of subjects that appear along the way are
    resolved by prolonging the defining relation with the Leibniz rule.
    """

    def __init__(self, reg: SymbolRegistry, relations: list[Relation],
                 table: PfaffianTable | None = None, auto_prolong: bool = True):
        self.reg = reg
        self.table = table
        self.auto_prolong = auto_prolong
        self.relations: dict[int, Relation] = {}
        for rel in relations:
            self.add(rel)

    def add(self, rel: Relation):
        if rel.solve is None:
            raise NPError(f"reduction relation {rel.name!r} needs a solve subject")
        sym = self.reg[rel.solve]
        if sym.id in self.relations:
            raise NPError(f"duplicate reduction subject {sym.name}")
        if rel.poly.degree_in(sym.id) != 1:
            raise NPError(f"relation {rel.name!r} is not linear in {sym.name}")
        self.relations[sym.id] = rel

    def _prolong(self, atom: Symbol, record: ReductionRecord) -> bool:
        """Create a relation for atom = op(subject) from the subject's one."""
        if not (self.auto_prolong and atom.is_atom):
            return False
        base = self.reg.symbol(atom.base_id)
        rel = self.relations.get(base.id)
        if rel is None:
            return False
        prolonged = apply_deriv(atom.op, rel.poly, self.table)
        if prolonged.degree_in(atom.id) != 1:
            return False
        name = f"{atom.op}:{rel.name}"
        self.relations[atom.id] = Relation(
            name, prolonged, PROVENANCE_DERIVED, solve=atom.name)
        record.prolonged.append(name)
        return True

    def reduce(self, p: Polynomial, max_rounds: int = 400):
        record = ReductionRecord()
        for _ in range(max_rounds):
            targets = [self.reg.symbol(s) for s in p.atoms()]
            targets += [self.reg.symbol(s) for s in p.variables()
                        if not self.reg.symbol(s).is_atom and s in self.relations]
            # deepest atoms first, then structural order
            targets.sort(key=lambda s: (-self.reg.atom_depth(s), s.sort_key))
            progressed = False
            for sym in targets:
                rel = self.relations.get(sym.id)
                if rel is None:
                    if self._prolong(sym, record):
                        rel = self.relations.get(sym.id)
                    else:
                        continue
                p = self._pseudo_reduce(p, rel, sym, record)
                progressed = True
                break
            if not progressed:
                return p, record
        raise NPError("reduction did not terminate within the round cap")

    def _pseudo_reduce(self, p: Polynomial, rel: Relation, sym: Symbol,
                       record: ReductionRecord) -> Polynomial:
        num, den = solve_linear(rel.poly, sym)
        record.used.append(rel.name + ("!" + rel.variant if rel.variant else ""))
        if not den.is_constant:
            record.multipliers.append(den)
        guard = 0
        unit = Monomial(((sym.id, 1),))
        while sym.id in p.variables():
            guard += 1
            if guard > 64:
                raise NPError(f"pseudo-reduction stuck on {sym.name}")
            # p = A*sym + B (A free of sym at this occurrence level)
            a_terms = {}
            b_terms = {}
            for m, c in p.terms:
                e = m.exponent(sym.id)
                if e == 0:
                    b_terms[m] = c
                else:
                    a_terms[m.div(unit)] = c
            from .algebra import _from_clean_dict

            a = _from_clean_dict(self.reg, a_terms)
            b = _from_clean_dict(self.reg, b_terms)
            # den*(A*sym + B) = A*num + den*B on the zero set of rel
            p = a * num + den * b
        return p
