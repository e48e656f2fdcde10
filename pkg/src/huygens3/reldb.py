"""Text grammar for symbols, polynomials, relations, gauges and proof scripts.

The surface syntax is ASCII only.  `~x` is the conjugate partner of `x`;
`D(f)`, `T(f)`, `d(f)`, `bd(f)` are derivative atoms for the four directional
operators (nesting allowed, e.g. `D(T(Phi12))`).  One declaration per line;
`#` starts a comment.  Every relation line must carry a `# ref:` comment so
the transcription stays auditable line by line.

Grammar (EBNF):

    file        = { line } ;
    line        = [ decl ] [ comment ] NEWLINE ;
    decl        = symdecl | reldecl | gaugedecl | stepdecl ;
    symdecl     = "symbol" NAME ( NAME | "self" ) [ KIND ] ;
    reldecl     = "rel" TAG PROVENANCE [ "variant" MODE ] [ "solve" ATOM ]
                  ":" expr [ "=" expr ] ;
    gaugedecl   = "gauge" ( "zero" NAME | "set" NAME "=" RATIONAL
                | "vanish" ATOM ) ;
    stepdecl    = "step" ID KIND { KEY "=" VALUE } ;
    expr        = [ "+" | "-" ] term { ( "+" | "-" ) term } ;
    term        = factor { "*" factor } ;
    factor      = atom [ "^" INT ] ;
    atom        = RATIONAL | NAME | "~" NAME | OP "(" atom ")" | "(" expr ")" ;
    OP          = "D" | "T" | "d" | "bd" ;
    RATIONAL    = INT [ "/" INT ] ;
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ._coeff import MPQ, is_integer, qden, qnum
from .algebra import (
    DERIV_TAGS,
    KIND_AUXILIARY,
    KIND_NP_SCALAR,
    KIND_X_VARIABLE,
    MONOMIAL_ONE,
    Monomial,
    Polynomial,
    SymbolRegistry,
)

PROVENANCES = ("appendix", "paper-eq", "transcribed-condition", "derived")
_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9_.]*")
_INT_RE = re.compile(r"[0-9]+")


class ParseError(Exception):
    """Syntax or semantic error with source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0, path: str = ""):
        self.line = line
        self.column = column
        self.path = path
        where = f"{path or '<expr>'}:{line}:{column}"
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------------------
# expression parsing


class _Lexer:
    def __init__(self, text: str, line: int = 1, path: str = ""):
        self.text = text
        self.pos = 0
        self.line = line
        self.path = path

    def error(self, msg):
        raise ParseError(msg, self.line, self.pos + 1, self.path)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            return ""
        return self.text[self.pos]

    def take(self, ch):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def match(self, ch):
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def name(self):
        self.skip_ws()
        m = _NAME_RE.match(self.text, self.pos)
        if not m:
            self.error("expected a name")
        self.pos = m.end()
        return m.group(0)

    def integer(self):
        self.skip_ws()
        m = _INT_RE.match(self.text, self.pos)
        if not m:
            self.error("expected an integer")
        self.pos = m.end()
        return int(m.group(0))

    def at_end(self):
        return self.peek() == ""


def _parse_symbol_atom(lx: _Lexer, reg: SymbolRegistry):
    """NAME | ~NAME | OP(atom); returns a Symbol."""
    if lx.match("~"):
        base_name = lx.name()
        sym = reg.get(base_name)
        if sym is None:
            sym = reg.intern_scalar(base_name)
        return reg.symbol(sym.conj_id)
    name = lx.name()
    if name in DERIV_TAGS and lx.peek() == "(":
        lx.take("(")
        inner = _parse_symbol_atom(lx, reg)
        lx.take(")")
        return reg.atom(name, inner)
    sym = reg.get(name)
    if sym is None:
        sym = reg.intern_scalar(name)
    return sym


def _parse_factor(lx: _Lexer, reg: SymbolRegistry) -> Polynomial:
    ch = lx.peek()
    if ch == "(":
        lx.take("(")
        p = _parse_expr_inner(lx, reg)
        lx.take(")")
    elif ch.isdigit():
        num = lx.integer()
        if lx.peek() == "/":
            lx.take("/")
            den = lx.integer()
            if den == 0:
                lx.error("zero denominator")
            p = Polynomial.constant(reg, MPQ(num, den))
        else:
            p = Polynomial.constant(reg, num)
    elif ch == "~" or ch.isalpha():
        sym = _parse_symbol_atom(lx, reg)
        p = Polynomial.variable(reg, sym)
    else:
        lx.error("expected a factor")
    if lx.peek() == "^":
        lx.take("^")
        exp = lx.integer()
        p = p ** exp
    return p


def _parse_term(lx: _Lexer, reg: SymbolRegistry) -> Polynomial:
    p = _parse_factor(lx, reg)
    while lx.peek() == "*":
        lx.take("*")
        p = p * _parse_factor(lx, reg)
    return p


def _parse_expr_inner(lx: _Lexer, reg: SymbolRegistry) -> Polynomial:
    sign = 1
    if lx.match("-"):
        sign = -1
    elif lx.match("+"):
        pass
    p = _parse_term(lx, reg) * sign
    while True:
        ch = lx.peek()
        if ch == "+":
            lx.take("+")
            p = p + _parse_term(lx, reg)
        elif ch == "-":
            lx.take("-")
            p = p - _parse_term(lx, reg)
        else:
            return p


def parse_expr(text: str, reg: SymbolRegistry, line: int = 1, path: str = "") -> Polynomial:
    """Parse a polynomial expression into canonical form."""
    lx = _Lexer(text, line, path)
    p = _parse_expr_inner(lx, reg)
    if not lx.at_end():
        lx.error(f"unexpected input {lx.peek()!r}")
    return p


# ---------------------------------------------------------------------------
# rendering


def _render_coeff(c) -> str:
    return str(qnum(c)) if is_integer(c) else f"{qnum(c)}/{qden(c)}"


def _render_monomial(reg: SymbolRegistry, m: Monomial) -> str:
    parts = []
    for sid, e in sorted(m.exps, key=lambda se: reg.sort_key(se[0])):
        name = reg.symbol(sid).name
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts)


def render(obj) -> str:
    """Deterministic canonical text; parse(render(p)) == p."""
    from .grobner import GroebnerBasis, TriangularSystem
    from .npfield import Relation

    if isinstance(obj, Relation):
        return f"{obj.name}: {render(obj.poly)} = 0"
    if isinstance(obj, (GroebnerBasis, TriangularSystem)):
        polys = obj.generators if isinstance(obj, GroebnerBasis) else obj.polys
        return "; ".join(render(p) for p in polys)
    p: Polynomial = obj
    if p.is_zero:
        return "0"
    reg = p.reg
    chunks = []
    for i, (m, c) in enumerate(p.terms):
        neg = c < 0
        mag = -c if neg else c
        if m.is_one:
            body = _render_coeff(mag)
        elif mag == 1:
            body = _render_monomial(reg, m)
        else:
            body = f"{_render_coeff(mag)}*{_render_monomial(reg, m)}"
        if i == 0:
            chunks.append("-" + body if neg else body)
        else:
            chunks.append(("- " if neg else "+ ") + body)
    return " ".join(chunks)


# ---------------------------------------------------------------------------
# source files


@dataclass
class GaugeDecl:
    zeros: list[str] = field(default_factory=list)
    sets: list[tuple[str, object]] = field(default_factory=list)
    vanish: list[str] = field(default_factory=list)


@dataclass
class RelationDecl:
    name: str
    provenance: str
    poly: Polynomial
    variant: str | None
    solve: str | None
    ref: str
    line: int


@dataclass
class StepDecl:
    id: str
    kind: str
    args: dict[str, str]
    ref: str
    line: int


@dataclass
class SourceFile:
    path: str
    relations: list[RelationDecl] = field(default_factory=list)
    gauge: GaugeDecl = field(default_factory=GaugeDecl)
    steps: list[StepDecl] = field(default_factory=list)
    commutators: list[tuple[str, str, Polynomial | None, str, int]] = field(
        default_factory=list)
    # commutator entries: (op1, op2, coefficient, opname, line) rows collected
    # as (op1, op2) -> [(coeff poly, op)] by the np layer


def _split_comment(line: str) -> tuple[str, str]:
    if "#" in line:
        code, comment = line.split("#", 1)
        return code.rstrip(), comment.strip()
    return line.rstrip(), ""


_STEP_ARG_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)=((?:\[[^\]]*\])|(?:\"[^\"]*\")|\S+)")


def parse_source(text: str, reg: SymbolRegistry, path: str = "<string>",
                 require_refs: bool = True) -> SourceFile:
    """Parse one reldb source file."""
    src = SourceFile(path)
    seen_names: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        code, comment = _split_comment(raw)
        code = code.strip()
        if not code:
            continue
        head, _, rest = code.partition(" ")
        rest = rest.strip()
        if head == "symbol":
            _parse_symbol_decl(rest, reg, lineno, path)
        elif head == "rel":
            decl = _parse_rel_decl(rest, reg, lineno, path, comment)
            if require_refs and not comment.startswith("ref:"):
                raise ParseError(f"relation {decl.name!r} is missing a '# ref:' comment",
                                 lineno, 1, path)
            key = (decl.name, decl.variant or "")
            if key in seen_names:
                raise ParseError(f"duplicate relation name {decl.name!r}"
                                 + (f" variant {decl.variant!r}" if decl.variant else ""),
                                 lineno, 1, path)
            seen_names.add(key)
            src.relations.append(decl)
        elif head == "gauge":
            _parse_gauge_decl(rest, src.gauge, lineno, path)
        elif head == "comm":
            op1, op2, poly_by_op = _parse_comm_decl(rest, reg, lineno, path)
            for opname, coeff in poly_by_op:
                src.commutators.append((op1, op2, coeff, opname, lineno))
        elif head == "step":
            src.steps.append(_parse_step_decl(rest, lineno, path, comment))
        else:
            raise ParseError(f"unknown declaration {head!r}", lineno, 1, path)
    return src


def _parse_symbol_decl(rest: str, reg: SymbolRegistry, lineno: int, path: str):
    parts = rest.split()
    if len(parts) < 2:
        raise ParseError("symbol declaration needs a name and a partner or 'self'",
                         lineno, 1, path)
    name, partner = parts[0], parts[1]
    kind = parts[2] if len(parts) > 2 else KIND_NP_SCALAR
    if kind not in (KIND_NP_SCALAR, KIND_X_VARIABLE, KIND_AUXILIARY):
        raise ParseError(f"unknown symbol kind {kind!r}", lineno, 1, path)
    if reg.get(name) is not None:
        return
    if partner == "self":
        reg.intern_scalar(name, kind=kind, real=True)
    elif partner == "~" + name:
        reg.intern_scalar(name, kind=kind)
    else:
        raise ParseError("partner must be 'self' or '~name'", lineno, 1, path)


def _parse_rel_decl(rest: str, reg, lineno: int, path: str, comment: str) -> RelationDecl:
    head, sep, body = rest.partition(":")
    if not sep:
        raise ParseError("relation declaration needs ':'", lineno, 1, path)
    fields = head.split()
    if len(fields) < 2:
        raise ParseError("relation needs a tag and a provenance", lineno, 1, path)
    name, provenance = fields[0], fields[1]
    if provenance not in PROVENANCES:
        raise ParseError(f"unknown provenance {provenance!r}", lineno, 1, path)
    variant = None
    solve = None
    i = 2
    while i < len(fields):
        if fields[i] == "variant" and i + 1 < len(fields):
            variant = fields[i + 1]
            i += 2
        elif fields[i] == "solve" and i + 1 < len(fields):
            solve = fields[i + 1]
            i += 2
        else:
            raise ParseError(f"unknown relation attribute {fields[i]!r}", lineno, 1, path)
    if variant not in (None, "verbatim", "corrected"):
        raise ParseError(f"unknown variant {variant!r}", lineno, 1, path)
    if "=" in body:
        lhs_text, rhs_text = body.split("=", 1)
        lhs = parse_expr(lhs_text.strip(), reg, lineno, path)
        rhs = parse_expr(rhs_text.strip(), reg, lineno, path)
        poly = lhs - rhs
    else:
        poly = parse_expr(body.strip(), reg, lineno, path)
    ref = comment[4:].strip() if comment.startswith("ref:") else ""
    return RelationDecl(name, provenance, poly, variant, solve, ref, lineno)


def _parse_gauge_decl(rest: str, gauge: GaugeDecl, lineno: int, path: str):
    parts = rest.split(None, 1)
    if len(parts) != 2:
        raise ParseError("gauge declaration needs a mode and an argument",
                         lineno, 1, path)
    mode, arg = parts
    if mode == "zero":
        gauge.zeros.append(arg.strip())
    elif mode == "vanish":
        gauge.vanish.append(arg.strip())
    elif mode == "set":
        name, sep, value = arg.partition("=")
        if not sep:
            raise ParseError("gauge set needs name = value", lineno, 1, path)
        from ._coeff import rational_from_string

        gauge.sets.append((name.strip(), rational_from_string(value.strip())))
    else:
        raise ParseError(f"unknown gauge mode {mode!r}", lineno, 1, path)


def _parse_comm_decl(rest: str, reg, lineno: int, path: str):
    head, sep, body = rest.partition(":")
    if not sep:
        raise ParseError("comm declaration needs ':'", lineno, 1, path)
    ops = head.split()
    if len(ops) != 2 or any(o not in DERIV_TAGS for o in ops):
        raise ParseError("comm needs two operator tags", lineno, 1, path)
    entries = []
    for chunk in body.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        coeff_text, sep2, opname = chunk.rpartition("|")
        if not sep2:
            raise ParseError("comm entry needs 'coeff | op'", lineno, 1, path)
        opname = opname.strip()
        if opname not in DERIV_TAGS:
            raise ParseError(f"unknown operator {opname!r} in comm entry",
                             lineno, 1, path)
        coeff = parse_expr(coeff_text.strip(), reg, lineno, path)
        entries.append((opname, coeff))
    return ops[0], ops[1], entries


def _parse_step_decl(rest: str, lineno: int, path: str, comment: str) -> StepDecl:
    parts = rest.split(None, 2)
    if len(parts) < 2:
        raise ParseError("step needs an id and a kind", lineno, 1, path)
    sid, kind = parts[0], parts[1]
    args: dict[str, str] = {}
    if len(parts) > 2:
        for m in _STEP_ARG_RE.finditer(parts[2]):
            key, value = m.group(1), m.group(2)
            if value.startswith('"') and value.endswith('"'):
                value = value[1:-1]
            args[key] = value
    ref = comment[4:].strip() if comment.startswith("ref:") else ""
    return StepDecl(sid, kind, args, ref, lineno)


def parse_file(path: str, reg: SymbolRegistry, require_refs: bool = True) -> SourceFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_source(fh.read(), reg, path, require_refs)
