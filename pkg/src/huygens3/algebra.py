"""Exact multivariate polynomial arithmetic over the rationals.

Symbols are interned in a registry that also fixes a conjugation involution
(barred partners are independent ring variables; complex-conjugate semantics
is only imposed later by the solver's conjugation filter).  Polynomials are
immutable, canonically ordered and exact; no floating point enters anywhere
in this module.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Mapping

from ._coeff import MPQ, QONE, QZERO, is_integer, qden, qgcd, qlcm, qnum

# Derivative operator tags.  "T" is the up-tetrad operator (printed as a
# capital delta in the usual spin-coefficient notation), "d" the holomorphic
# and "bd" the anti-holomorphic angular operator.
DERIV_TAGS = ("D", "T", "d", "bd")
DERIV_CONJ = {"D": "D", "T": "T", "d": "bd", "bd": "d"}

KIND_NP_SCALAR = "np-scalar"
KIND_X_VARIABLE = "x-variable"
KIND_DERIV_ATOM = "derivative-atom"
KIND_AUXILIARY = "auxiliary"

# Fixed surface names, pairs conjugate under `~`, "self" means real.
_BUILTIN_PAIRS = [
    ("kappa", "~kappa"), ("sigma", "~sigma"), ("rho", "~rho"),
    ("tau", "~tau"), ("eps", "~eps"), ("alpha", "~alpha"),
    ("beta", "~beta"), ("gamma", "~gamma"), ("pi", "~pi"),
    ("lambda", "~lambda"), ("mu", "~mu"), ("nu", "~nu"),
    ("Psi0", "~Psi0"), ("Psi1", "~Psi1"), ("Psi2", "~Psi2"),
    ("Psi3", "~Psi3"), ("Psi4", "~Psi4"),
    ("Phi00", "self"), ("Phi01", "Phi10"), ("Phi02", "Phi20"),
    ("Phi11", "self"), ("Phi12", "Phi21"), ("Phi22", "self"),
    ("Lam", "self"),
    ("phi0", "~phi0"), ("phi1", "~phi1"), ("phi2", "~phi2"),
]
_BUILTIN_X = [("x1", "~x1"), ("x2", "~x2")]


class AlgebraError(Exception):
    """Raised on contract violations in exact algebra operations."""


class Symbol:
    """Interned ring variable with conjugation metadata.

    Derivative atoms carry their (operator, base symbol) structure so that
    conjugation and rendering stay well defined for nested atoms.
    """

    __slots__ = ("id", "name", "kind", "conj_id", "op", "base_id", "sort_key")

    def __init__(self, id, name, kind, conj_id, op=None, base_id=None, sort_key=()):
        self.id = id
        self.name = name
        self.kind = kind
        self.conj_id = conj_id
        self.op = op
        self.base_id = base_id
        self.sort_key = sort_key

    @property
    def is_atom(self) -> bool:
        return self.kind == KIND_DERIV_ATOM

    def __repr__(self):
        return f"Symbol({self.name!r})"


class SymbolRegistry:
    """Thread-safe interning of symbols with a conjugation involution.

    Sort keys are structural (independent of interning order) so canonical
    term ordering and rendering are reproducible across runs.
    """

    def __init__(self):
        self._lock = threading.RLock()
        self._by_name: dict[str, int] = {}
        self._symbols: list[Symbol] = []

    @classmethod
    def standard(cls) -> "SymbolRegistry":
        """Registry pre-seeded with the fixed scalar and x-variable names."""
        reg = cls()
        for idx, (name, conj) in enumerate(_BUILTIN_PAIRS):
            reg._intern_builtin(name, conj, KIND_NP_SCALAR, idx)
        base = len(_BUILTIN_PAIRS)
        for idx, (name, conj) in enumerate(_BUILTIN_X):
            reg._intern_builtin(name, conj, KIND_X_VARIABLE, base + idx)
        return reg

    def _intern_builtin(self, name, conj, kind, idx):
        if conj == "self":
            sym = self._new(name, kind, sort_key=(1, idx, 0, name))
            sym.conj_id = sym.id
        else:
            a = self._new(name, kind, sort_key=(1, idx, 0, name))
            b = self._new(conj, kind, sort_key=(1, idx, 1, conj))
            a.conj_id, b.conj_id = b.id, a.id

    def _new(self, name, kind, sort_key, op=None, base_id=None) -> Symbol:
        if name in self._by_name:
            raise AlgebraError(f"symbol {name!r} already interned")
        sym = Symbol(len(self._symbols), name, kind, None, op, base_id, sort_key)
        self._symbols.append(sym)
        self._by_name[name] = sym.id
        return sym

    def __len__(self):
        return len(self._symbols)

    def symbol(self, sid: int) -> Symbol:
        return self._symbols[sid]

    def get(self, name: str) -> Symbol | None:
        sid = self._by_name.get(name)
        return None if sid is None else self._symbols[sid]

    def __getitem__(self, name: str) -> Symbol:
        sym = self.get(name)
        if sym is None:
            raise KeyError(name)
        return sym

    def intern_scalar(self, name: str, kind: str = KIND_NP_SCALAR,
                      real: bool = False) -> Symbol:
        """Intern a scalar (and its `~` partner unless real); idempotent."""
        with self._lock:
            existing = self.get(name)
            if existing is not None:
                return existing
            if name.startswith("~"):
                base = self.intern_scalar(name[1:], kind=kind)
                return self._symbols[base.conj_id]
            if real:
                sym = self._new(name, kind, sort_key=(1, 10_000, 0, name))
                sym.conj_id = sym.id
                return sym
            a = self._new(name, kind, sort_key=(1, 10_000, 0, name))
            b = self._new("~" + name, kind, sort_key=(1, 10_000, 1, "~" + name))
            a.conj_id, b.conj_id = b.id, a.id
            return a

    def intern_aux(self, name: str) -> Symbol:
        """Auxiliary self-conjugate variable (Rabinowitsch inverses etc.)."""
        with self._lock:
            existing = self.get(name)
            if existing is not None:
                return existing
            sym = self._new(name, KIND_AUXILIARY, sort_key=(3, 0, 0, name))
            sym.conj_id = sym.id
            return sym

    def atom(self, op: str, base: Symbol) -> Symbol:
        """Derivative atom symbol for op applied to base (atoms may nest)."""
        if op not in DERIV_TAGS:
            raise AlgebraError(f"unknown derivative operator {op!r}")
        name = f"{op}({base.name})"
        with self._lock:
            existing = self.get(name)
            if existing is not None:
                return existing
            depth = 1 + self.atom_depth(base)
            key = (0, -depth, DERIV_TAGS.index(op)) + base.sort_key
            sym = self._new(name, KIND_DERIV_ATOM, sort_key=key,
                            op=op, base_id=base.id)
            # conjugate partner is the conjugated operator on the conjugated base
            cop = DERIV_CONJ[op]
            cbase = self._symbols[base.conj_id]
            cname = f"{cop}({cbase.name})"
            if cname == name:
                sym.conj_id = sym.id
            else:
                csym = self.get(cname)
                if csym is None:
                    ckey = (0, -depth, DERIV_TAGS.index(cop)) + cbase.sort_key
                    csym = self._new(cname, KIND_DERIV_ATOM, sort_key=ckey,
                                     op=cop, base_id=cbase.id)
                sym.conj_id, csym.conj_id = csym.id, sym.id
            return sym

    def atom_depth(self, sym: Symbol) -> int:
        depth = 0
        while sym.is_atom:
            depth += 1
            sym = self._symbols[sym.base_id]
        return depth

    def conj(self, sid: int) -> int:
        return self._symbols[sid].conj_id

    def sort_key(self, sid: int):
        return self._symbols[sid].sort_key

    def all_symbols(self) -> list[Symbol]:
        return list(self._symbols)


class Monomial:
    """Sparse power product: sorted tuple of (symbol id, exponent > 0)."""

    __slots__ = ("exps", "degree", "_hash")

    def __init__(self, exps: tuple[tuple[int, int], ...]):
        self.exps = exps
        self.degree = sum(e for _, e in exps)
        self._hash = hash(exps)

    @staticmethod
    def make(items: Iterable[tuple[int, int]]) -> "Monomial":
        merged: dict[int, int] = {}
        for sid, e in items:
            if e < 0:
                raise AlgebraError("negative exponent")
            if e:
                merged[sid] = merged.get(sid, 0) + e
        return Monomial(tuple(sorted(merged.items())))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return self.exps == other.exps

    def __repr__(self):
        return f"Monomial({self.exps!r})"

    @property
    def is_one(self) -> bool:
        return not self.exps

    def exponent(self, sid: int) -> int:
        for s, e in self.exps:
            if s == sid:
                return e
        return 0

    def mul(self, other: "Monomial") -> "Monomial":
        if not self.exps:
            return other
        if not other.exps:
            return self
        merged = dict(self.exps)
        for sid, e in other.exps:
            merged[sid] = merged.get(sid, 0) + e
        return Monomial(tuple(sorted(merged.items())))

    def divides(self, other: "Monomial") -> bool:
        it = dict(other.exps)
        for sid, e in self.exps:
            if it.get(sid, 0) < e:
                return False
        return True

    def div(self, other: "Monomial") -> "Monomial":
        merged = dict(self.exps)
        for sid, e in other.exps:
            v = merged.get(sid, 0) - e
            if v < 0:
                raise AlgebraError("monomial division not exact")
            if v:
                merged[sid] = v
            else:
                merged.pop(sid, None)
        return Monomial(tuple(sorted(merged.items())))

    def lcm(self, other: "Monomial") -> "Monomial":
        merged = dict(self.exps)
        for sid, e in other.exps:
            if merged.get(sid, 0) < e:
                merged[sid] = e
        return Monomial(tuple(sorted(merged.items())))

    def gcd(self, other: "Monomial") -> "Monomial":
        out = []
        it = dict(other.exps)
        for sid, e in self.exps:
            v = min(e, it.get(sid, 0))
            if v:
                out.append((sid, v))
        return Monomial(tuple(out))

    def coprime(self, other: "Monomial") -> bool:
        it = {s for s, _ in other.exps}
        return all(s not in it for s, _ in self.exps)

    def variables(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.exps)


MONOMIAL_ONE = Monomial(())


class Polynomial:
    """Immutable exact polynomial; terms strictly ordered, no zero coefficients.

    The canonical term order is graded, then lexicographic along structural
    symbol sort keys, so rendering and iteration order never depend on the
    interning history of a particular run.
    """

    __slots__ = ("reg", "terms", "_hash")

    def __init__(self, reg: SymbolRegistry, terms: tuple[tuple[Monomial, object], ...]):
        self.reg = reg
        self.terms = terms
        self._hash = None

    # -- construction -----------------------------------------------------

    @staticmethod
    def from_dict(reg: SymbolRegistry, data: Mapping[Monomial, object]) -> "Polynomial":
        items = [(m, c) for m, c in data.items() if c != 0]
        items.sort(key=lambda mc: _canon_key(reg, mc[0]))
        return Polynomial(reg, tuple((m, MPQ(c)) for m, c in items))

    @staticmethod
    def zero(reg: SymbolRegistry) -> "Polynomial":
        return Polynomial(reg, ())

    @staticmethod
    def constant(reg: SymbolRegistry, value) -> "Polynomial":
        q = MPQ(value)
        if q == 0:
            return Polynomial(reg, ())
        return Polynomial(reg, ((MONOMIAL_ONE, q),))

    @staticmethod
    def variable(reg: SymbolRegistry, sym: Symbol, exp: int = 1) -> "Polynomial":
        if exp == 0:
            return Polynomial.constant(reg, 1)
        return Polynomial(reg, ((Monomial(((sym.id, exp),)), QONE),))

    # -- predicates and views ---------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and self.terms[0][0].is_one)

    def constant_value(self):
        if self.is_zero:
            return QZERO
        if self.is_constant:
            return self.terms[0][1]
        raise AlgebraError("not a constant polynomial")

    def constant_term(self):
        for m, c in self.terms:
            if m.is_one:
                return c
        return QZERO

    @property
    def total_degree(self) -> int:
        return max((m.degree for m, _ in self.terms), default=0)

    def variables(self) -> set[int]:
        out: set[int] = set()
        for m, _ in self.terms:
            out.update(m.variables())
        return out

    def atoms(self) -> set[int]:
        return {s for s in self.variables() if self.reg.symbol(s).is_atom}

    def coefficient_of(self, mono: Monomial):
        for m, c in self.terms:
            if m == mono:
                return c
        return QZERO

    def degree_in(self, sid: int) -> int:
        return max((m.exponent(sid) for m, _ in self.terms), default=0)

    def __len__(self):
        return len(self.terms)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.terms)
        return self._hash

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.terms == other.terms

    def __repr__(self):
        from .reldb import render

        return f"Polynomial({render(self)})"

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        data = dict(self.terms)
        for m, c in other.terms:
            v = data.get(m)
            if v is None:
                data[m] = c
            else:
                v = v + c
                if v:
                    data[m] = v
                else:
                    del data[m]
        return _from_clean_dict(self.reg, data)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.reg, tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            q = MPQ(other)
            if q == 0:
                return Polynomial(self.reg, ())
            return Polynomial(self.reg, tuple((m, c * q) for m, c in self.terms))
        if self.is_zero or other.is_zero:
            return Polynomial(self.reg, ())
        data: dict[Monomial, object] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = m1.mul(m2)
                v = data.get(m)
                if v is None:
                    data[m] = c1 * c2
                else:
                    v = v + c1 * c2
                    if v:
                        data[m] = v
                    else:
                        del data[m]
        return _from_clean_dict(self.reg, data)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise AlgebraError("non-polynomial result")
        out = Polynomial.constant(self.reg, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base if k > 1 else base
            k >>= 1
        return out

    def scale_monomial(self, mono: Monomial, coeff=QONE) -> "Polynomial":
        if coeff == 0:
            return Polynomial(self.reg, ())
        items = {m.mul(mono): c * coeff for m, c in self.terms}
        return _from_clean_dict(self.reg, items)

    # -- structural operations ----------------------------------------------

    def map_symbols(self, fn: Callable[[int], int]) -> "Polynomial":
        data: dict[Monomial, object] = {}
        for m, c in self.terms:
            nm = Monomial.make((fn(s), e) for s, e in m.exps)
            data[nm] = data.get(nm, QZERO) + c
        return _from_clean_dict(self.reg, {m: c for m, c in data.items() if c})


def _from_clean_dict(reg: SymbolRegistry, data: Mapping[Monomial, object]) -> Polynomial:
    items = sorted(data.items(), key=lambda mc: _canon_key(reg, mc[0]))
    return Polynomial(reg, tuple(items))


def _canon_key(reg: SymbolRegistry, m: Monomial):
    # graded, then lex along structural sort keys; smaller key sorts first
    return (-m.degree, tuple(sorted((reg.sort_key(s), -e) for s, e in m.exps)))


def conjugate(p: Polynomial) -> Polynomial:
    """Replace every symbol by its conjugation partner; exact coefficients fixed."""
    return p.map_symbols(p.reg.conj)


def substitute(p: Polynomial, mapping: Mapping[int, Polynomial]) -> Polynomial:
    """Ring homomorphism sending mapped symbols to polynomials.

    Unmapped symbols pass through.  Power caching keeps repeated exponents
    cheap on the dense transcription polynomials.
    """
    if not mapping or p.is_zero:
        return p
    reg = p.reg
    pow_cache: dict[tuple[int, int], Polynomial] = {}

    def power(sid: int, e: int) -> Polynomial:
        key = (sid, e)
        got = pow_cache.get(key)
        if got is None:
            got = mapping[sid] ** e
            pow_cache[key] = got
        return got

    total = Polynomial.zero(reg)
    for m, c in p.terms:
        passthrough = []
        factors = []
        for sid, e in m.exps:
            if sid in mapping:
                factors.append(power(sid, e))
            else:
                passthrough.append((sid, e))
        term = Polynomial(reg, ((Monomial(tuple(sorted(passthrough))), c),))
        for f in factors:
            term = term * f
        total = total + term
    return total


def content_and_primitive(p: Polynomial):
    """Split p into (rational content, monomial content, primitive part).

    The primitive part has coprime integer coefficients, positive leading
    coefficient under the canonical order, and no common variable factor.
    """
    if p.is_zero:
        raise AlgebraError("zero polynomial has no content decomposition")
    num_gcd = 0
    den_lcm = 1
    for _, c in p.terms:
        num_gcd = qgcd(num_gcd, qnum(c))
        den_lcm = qlcm(den_lcm, qden(c))
    content = MPQ(num_gcd, den_lcm)
    mono = p.terms[0][0]
    for m, _ in p.terms[1:]:
        mono = mono.gcd(m)
        if mono.is_one:
            break
    prim_terms = tuple((m.div(mono), c / content) for m, c in p.terms)
    if prim_terms[0][1] < 0:
        content = -content
        prim_terms = tuple((m, -c) for m, c in prim_terms)
    return content, mono, Polynomial(p.reg, prim_terms)


def primitive_part(p: Polynomial) -> Polynomial:
    if p.is_zero:
        return p
    return content_and_primitive(p)[2]


def coefficient_primitive(p: Polynomial) -> Polynomial:
    """Normalize to coprime integer coefficients with positive leading
    coefficient, keeping any common monomial factor (ideal-preserving)."""
    if p.is_zero:
        return p
    num_gcd = 0
    den_lcm = 1
    for _, c in p.terms:
        num_gcd = qgcd(num_gcd, qnum(c))
        den_lcm = qlcm(den_lcm, qden(c))
    content = MPQ(num_gcd, den_lcm)
    if p.terms[0][1] < 0:
        content = -content
    if content == 1:
        return p
    return Polynomial(p.reg, tuple((m, c / content) for m, c in p.terms))


def ring_ops(a: Polynomial, b: Polynomial | None, op: str, k: int = 0) -> Polynomial:
    """Uniform entry point for the basic ring operations."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "neg":
        return -a
    if op == "pow-k":
        return a ** k
    raise AlgebraError(f"unknown ring operation {op!r}")
