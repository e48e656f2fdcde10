"""Declarative replay of the derivation chain with per-step verification.

Steps are loaded from the shipped proof script.  Each step kind wraps one
engine capability (specialization, linear combination, commutator residual,
elimination, homogenization, ideal computations, conjugation filtering).
Relations flagged with verbatim/corrected variants run in dual mode: the
step passes when at least one reading holds and the report records which.

Reports are deterministic: step order, witness digests and cost counters do
not depend on thread count or hashing accidents.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ._coeff import MPQ, rational_from_string
from .algebra import (
    Monomial,
    Polynomial,
    _from_clean_dict,
    coefficient_primitive,
    conjugate,
    content_and_primitive,
    substitute,
)
from .grobner import (
    GroebnerBasis,
    ResourceCaps,
    ResourceLimitError,
    buchberger,
    exact_divide,
    grevlex_order,
    gsolve,
    is_trivial,
    lex_order,
    normal_form,
    saturate,
    strip_factors,
)
from .loader import Database, load_database
from .npfield import (
    NPError,
    PfaffianTable,
    ReductionSystem,
    Relation,
    RelationSet,
    apply_deriv,
    commutator_residual,
    eliminate_atoms,
    solve_linear,
    specialize,
)
from .reldb import ParseError, StepDecl, parse_expr, render

REPORT_VERSION = "1"


class PipelineError(Exception):
    pass


@dataclass
class StepReport:
    id: str
    kind: str
    ref: str
    status: str = "pass"              # pass | fail | inconclusive | skipped
    mode: str = ""                    # which dual-mode reading was used
    notes: list[str] = field(default_factory=list)
    witness: str = ""                 # canonical rendering of the key witness
    cost: int = 0                     # deterministic work counter

    @property
    def witness_digest(self) -> str:
        if not self.witness:
            return ""
        return hashlib.sha256(self.witness.encode("utf-8")).hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "paper_ref": self.ref,
            "kind": self.kind,
            "status": self.status,
            "mode": self.mode,
            "notes": list(self.notes),
            "witness_digest": self.witness_digest,
            "millis": self.cost,
        }


def report_to_json(reports: list[StepReport], verdict: str) -> str:
    doc = {
        "version": REPORT_VERSION,
        "verdict": verdict,
        "steps": [r.to_json() for r in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# helpers


def _split_list(text: str) -> list[str]:
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
    return [t.strip() for t in text.split(",") if t.strip()]


class StepContext:
    """Execution context: database access, x-substitution, strip lists."""

    def __init__(self, db: Database, caps: ResourceCaps | None = None):
        self.db = db
        self.reg = db.reg
        self.caps = caps or ResourceCaps()
        self.derived = RelationSet()
        self._x_map = None
        self._gb_cache: dict[str, GroebnerBasis] = {}

    def expr(self, text: str) -> Polynomial:
        return parse_expr(text, self.reg)

    def relation(self, name: str) -> Relation:
        for source in (self.derived, self.db.relations):
            try:
                return source.get(name)
            except NPError:
                continue
        raise PipelineError(f"unknown relation {name!r}")

    def relation_modes(self, name: str) -> list[Relation]:
        """All variants of a relation for dual-mode execution."""
        base = name.split("!", 1)[0]
        if "!" in name:
            return [self.relation(name)]
        for source in (self.derived, self.db.relations):
            conj = base.startswith("~")
            look = base[1:] if conj else base
            variants = source.variants(look)
            if variants:
                ordered = sorted(variants, key=lambda r: r.variant or "")
                # corrected first so the recorded mode is the working one
                ordered.sort(key=lambda r: 0 if r.variant == "corrected" else 1)
                return [r.conjugated("~" + r.name) if conj else r for r in ordered]
        raise PipelineError(f"unknown relation {name!r}")

    @property
    def x_map(self):
        """Quotient-variable substitution for the homogenized systems."""
        if self._x_map is None:
            P = self.expr
            self._x_map = {
                self.reg["alpha"].id: P("x1*pi"),
                self.reg["~alpha"].id: P("~x1*~pi"),
                self.reg["beta"].id: P("x2*~pi"),
                self.reg["~beta"].id: P("~x2*pi"),
            }
        return self._x_map

    def to_x(self, p: Polynomial, strips: list[Polynomial] | None = None) -> Polynomial:
        out = substitute(p, self.x_map)
        if out.is_zero:
            return out
        _, _, prim = content_and_primitive(out)
        if strips:
            prim, _ = strip_factors(prim, strips)
            prim = coefficient_primitive(prim)
        return prim

    def strip_list(self, arg: str | None) -> list[Polynomial]:
        if not arg:
            return []
        return [self.expr(t) for t in _split_list(arg)]

    def lex_proof_order(self):
        ranking = [self.reg[n].id for n in ("~x2", "~x1", "x2", "x1")]
        return lex_order(self.reg, ranking)

    def cached_gb(self, tag: str, gens: list[Polynomial], order) -> GroebnerBasis:
        got = self._gb_cache.get(tag)
        if got is None:
            got = buchberger(gens, order, self.caps)
            self._gb_cache[tag] = got
        return got


def _poly_equal_mod_sign(a: Polynomial, b: Polynomial) -> str | None:
    """'exact' / 'sign' when the coefficient-primitive parts agree."""
    if a.is_zero and b.is_zero:
        return "exact"
    if a.is_zero or b.is_zero:
        return None
    pa, pb = coefficient_primitive(a), coefficient_primitive(b)
    if pa == pb:
        return "exact"
    if pa == coefficient_primitive(-b):
        return "sign"
    return None


def _value_equal(num, den, rel: Relation, subject) -> bool:
    """Compare a solved value num/den against the one in rel, sign-exactly."""
    en, ed = solve_linear(rel.poly, subject)
    return num * ed == en * den


def _phi_grades(ctx: StepContext, p: Polynomial, sid: int) -> dict[int, Polynomial]:
    out: dict[int, dict] = {}
    for m, c in p.terms:
        e = m.exponent(sid)
        rest = m.div(Monomial(((sid, e),))) if e else m
        out.setdefault(e, {})[rest] = c
    return {e: _from_clean_dict(ctx.reg, d) for e, d in out.items()}


# ---------------------------------------------------------------------------
# step implementations


def _table_for(ctx: StepContext, names: list[str]) -> PfaffianTable:
    table = PfaffianTable(ctx.reg, ctx.db.gauge)
    for name in names:
        table.add_from_relation(ctx.relation(name))
    table.canonicalize()
    return table


def _reduction_for(ctx: StepContext, names: list[str], table) -> ReductionSystem:
    return ReductionSystem(ctx.reg, [ctx.relation(n) for n in names], table)


def step_specialize_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    gauge = ctx.db.gauge
    if step.args.get("audit") == "appendix":
        bad = []
        for rel in ctx.db.relations:
            if rel.provenance != "appendix":
                continue
            spec = specialize(rel, gauge)
            if not spec.poly.atoms() and not spec.poly.is_zero:
                bad.append(rel.name)
        if bad:
            rep.status = "fail"
            rep.notes.append(f"inconsistent specializations: {', '.join(bad)}")
        else:
            rep.witness = "all appendix relations specialize consistently"
        return
    rel = ctx.relation(step.args["rel"])
    spec = specialize(rel, gauge)
    again = specialize(spec, gauge)
    if again.poly != spec.poly:
        rep.status = "fail"
        rep.notes.append("specialization is not idempotent")
        return
    expect = step.args.get("expect", "0")
    if expect == "0":
        ok = spec.poly.is_zero
    else:
        ok = _poly_equal_mod_sign(spec.poly, ctx.relation(expect).poly) is not None
    rep.witness = render(spec.poly)
    if not ok:
        rep.status = "fail"


def step_pfaffian_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    """Gauge-specialized source combination reproduces a listed relation."""
    sources = _split_list(step.args["sources"])
    weights = [rational_from_string(w) for w in _split_list(step.args.get("weights", ""))] \
        if step.args.get("weights") else [MPQ(1)] * len(sources)
    gauge = ctx.db.gauge
    combo = Polynomial.zero(ctx.reg)
    for name, w in zip(sources, weights):
        combo = combo + gauge.apply(ctx.relation(name).poly) * w
    if "eliminate" in step.args:
        atoms = [ctx.reg[t] for t in _split_list(step.args["eliminate"])]
        polys = [gauge.apply(ctx.relation(n).poly) for n in sources]
        combo = eliminate_atoms(Relation("a", polys[0]), Relation("b", polys[1]), atoms)
    if "using" in step.args:
        red = _reduction_for(ctx, _split_list(step.args["using"]), None)
        combo, rec = red.reduce(combo)
        rep.notes.extend(f"nonzero multiplier: {render(m)}" for m in rec.multipliers)
    _match_expect_dual(ctx, step, rep, combo)


def _match_expect_dual(ctx: StepContext, step: StepDecl, rep: StepReport,
                       got: Polynomial, strips: list[Polynomial] | None = None):
    strips = strips or ctx.strip_list(step.args.get("strip"))
    if strips:
        got, removed = strip_factors(got, strips)
        rep.notes.extend(f"stripped nonzero factor: {render(f)}" for f in removed)
    matched = None
    tried = []
    for rel in ctx.relation_modes(step.args["expect"]):
        how = _poly_equal_mod_sign(got, rel.poly)
        tried.append((rel, how))
        if how is not None:
            matched = rel
            rep.mode = rel.variant or ""
            break
    rep.witness = render(coefficient_primitive(got) if not got.is_zero else got)
    if matched is None:
        rep.status = "fail"
        rep.notes.append("no reading of the expected relation matches")
    else:
        if matched.variant:
            rep.notes.append(f"matched {matched.name} in {matched.variant} mode")
        if len(tried) > 1:
            for rel, how in tried:
                if how is None and rel.variant:
                    rep.notes.append(f"{rel.name}!{rel.variant} does not match")


def step_commutator_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    """Evaluate a commutator residual; optionally subtract a second one,
    solve for an atom, or check scalar leftovers against an ideal."""
    table = _table_for(ctx, _split_list(step.args["table"]))
    f = ctx.expr(step.args["f"])
    res, _ = commutator_residual(step.args["op1"], step.args["op2"], f,
                                 table, ctx.db.rules)
    if "f2" in step.args:
        f2 = ctx.expr(step.args["f2"])
        res2, _ = commutator_residual(step.args["op3"], step.args["op4"], f2,
                                      table, ctx.db.rules)
        res = res - res2
    if "using" in step.args:
        red = _reduction_for(ctx, _split_list(step.args["using"]), table)
        res, rec = red.reduce(res)
        for m in rec.multipliers:
            rep.notes.append(f"nonzero multiplier: {render(m)}")
        for name in rec.used:
            if "!" in name or ":" in name:
                rep.notes.append(f"used {name}")
    if "solve" in step.args:
        subject = ctx.reg[step.args["solve"]]
        num, den = solve_linear(res, subject)
        expect = ctx.relation_modes(step.args["expect"])
        for rel in expect:
            if _value_equal(num, den, rel, subject):
                rep.mode = rel.variant or ""
                rep.witness = render(coefficient_primitive(res))
                if rel.variant:
                    rep.notes.append(f"matched {rel.name} in {rel.variant} mode")
                return
        rep.status = "fail"
        rep.notes.append(f"solved value for {subject.name} does not match")
        rep.witness = render(coefficient_primitive(res))
        return
    if "expect" in step.args:
        _match_expect_dual(ctx, step, rep, res)
        return
    # membership mode: every quotient-variable grade component must lie in
    # the saturated scalar ideal named by `modulo`
    strips = ctx.strip_list(step.args.get("strip"))
    if res.is_zero:
        rep.witness = "0"
        return
    grades = _phi_grades(ctx, res, ctx.reg["~phi2"].id)
    gb = _modulo_gb(ctx, step.args["modulo"])
    leftovers = []
    for e, comp in sorted(grades.items()):
        comp, removed = strip_factors(comp, strips)
        compx = ctx.to_x(comp, strips=[ctx.expr("pi"), ctx.expr("~pi")])
        nf = normal_form(compx, gb.generators, gb.order, ctx.caps)
        if not nf.is_zero:
            leftovers.append((e, nf))
    if leftovers:
        rep.status = "fail"
        rep.notes.append("scalar residue escapes the shipped relation ideal")
        rep.witness = render(leftovers[0][1])
    else:
        rep.witness = f"all {len(grades)} amplitude grades reduce to zero"


def _modulo_gb(ctx: StepContext, arg: str) -> GroebnerBasis:
    names = _split_list(arg)
    tag = "mod:" + ",".join(names)
    gens = []
    for n in names:
        if n == "@main-saturated":
            return _main_saturated_gb(ctx)
        rel = ctx.relation(n)
        gens.append(rel.poly)
    return ctx.cached_gb(tag, gens, ctx.lex_proof_order())


def _main_system(ctx: StepContext) -> list[Polynomial]:
    R = ctx.relation
    return [R("5.140a").poly, R("5.141a").poly, R("5.142a").poly,
            conjugate(R("5.141a").poly), conjugate(R("5.142a").poly)]


def _main_saturated_gb(ctx: StepContext) -> GroebnerBasis:
    tag = "@main-saturated"
    got = ctx._gb_cache.get(tag)
    if got is None:
        gbI = ctx.cached_gb("@main", _main_system(ctx), grevlex_order(ctx.reg))
        got = saturate(gbI.generators, ctx.expr("x1*x2*~x1*~x2"),
                       grevlex_order(ctx.reg), ctx.caps)
        ctx._gb_cache[tag] = got
    return got


def step_solve_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    """Reduce a relation (optionally after applying a derivative) and compare
    the solved value, a numerator/denominator part, or the whole polynomial."""
    best_fail = None
    for rel in ctx.relation_modes(step.args["rel"]):
        sub = StepReport(rep.id, rep.kind, rep.ref)
        _solve_check_one(ctx, step, sub, rel)
        if sub.status == "pass":
            rep.status = "pass"
            rep.mode = rel.variant or sub.mode
            rep.notes = sub.notes + ([f"input {rel.name} in {rel.variant} mode"]
                                     if rel.variant else [])
            rep.witness = sub.witness
            return
        best_fail = sub
    rep.status = "fail"
    if best_fail:
        rep.notes = best_fail.notes
        rep.witness = best_fail.witness


def _solve_check_one(ctx: StepContext, step: StepDecl, rep: StepReport, rel: Relation):
    table = _table_for(ctx, _split_list(step.args["table"])) if "table" in step.args else None
    poly = rel.poly
    if "deriv" in step.args:
        poly = apply_deriv(step.args["deriv"], poly, table)
    if "conjdiff" in step.args:
        poly = conjugate(poly) - poly
    if "using" in step.args:
        red = _reduction_for(ctx, _split_list(step.args["using"]), table)
        poly, rec = red.reduce(poly)
        rep.notes.extend(f"nonzero multiplier: {render(m)}" for m in rec.multipliers)
    strips = ctx.strip_list(step.args.get("strip"))
    if strips:
        poly, removed = strip_factors(poly, strips)
        rep.notes.extend(f"stripped nonzero factor: {render(f)}" for f in removed)
    if "solve" in step.args:
        subject = ctx.reg[step.args["solve"]]
        num, den = solve_linear(poly, subject)
        for exp in ctx.relation_modes(step.args["expect"]):
            if _value_equal(num, den, exp, subject):
                rep.mode = exp.variant or ""
                rep.witness = render(coefficient_primitive(poly))
                if exp.variant:
                    rep.notes.append(f"matched {exp.name} in {exp.variant} mode")
                return
        rep.status = "fail"
        rep.notes.append(f"solved value for {subject.name} does not match")
        return
    if "part" in step.args:
        subject = ctx.reg[step.args.get("subject", "Phi11")]
        num, den = solve_linear(poly, subject)
        part = num if step.args["part"] == "num" else den
        _match_expect_dual(ctx, step, rep, part, strips=[])
        return
    _match_expect_dual(ctx, step, rep, poly, strips=[])


def step_eliminate_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    atoms = [ctx.reg[t] for t in _split_list(step.args["atoms"])]
    strips = ctx.strip_list(step.args.get("strip"))
    xsub = step.args.get("xsub") == "true"
    for rel1 in ctx.relation_modes(step.args["rel1"]):
        for rel2 in ctx.relation_modes(step.args["rel2"]):
            a, b = rel1, rel2
            if xsub:
                a = Relation(a.name, substitute(a.poly, ctx.x_map), "derived")
                b = Relation(b.name, substitute(b.poly, ctx.x_map), "derived")
            try:
                combo = eliminate_atoms(a, b, atoms)
            except NPError as exc:
                rep.notes.append(str(exc))
                continue
            if strips:
                combo, removed = strip_factors(combo, strips)
            if "solve" in step.args:
                subject = ctx.reg[step.args["solve"]]
                num, den = solve_linear(combo, subject)
                ok = any(_value_equal(num, den, exp, subject)
                         for exp in ctx.relation_modes(step.args["expect"]))
                how = "exact" if ok else None
                matched_rel = ctx.relation(step.args["expect"]) if ok else None
            else:
                matched_rel, how = None, None
                for exp in ctx.relation_modes(step.args["expect"]):
                    how = _poly_equal_mod_sign(combo, exp.poly)
                    if how is not None:
                        matched_rel = exp
                        break
            if how is not None:
                rep.witness = render(coefficient_primitive(combo))
                modes = [v for v in (rel1.variant, rel2.variant,
                                     matched_rel.variant if matched_rel else None) if v]
                rep.mode = ",".join(dict.fromkeys(modes))
                for r in (rel1, rel2):
                    if r.variant:
                        rep.notes.append(f"input {r.name} in {r.variant} mode")
                return
    rep.status = "fail"
    rep.notes.append("no combination of readings eliminates to the expected relation")


def step_homogenize_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    rel = ctx.relation(step.args["rel"])
    poly = rel.poly
    if "part" in step.args:
        subject = ctx.reg[step.args.get("subject", "Phi11")]
        num, den = solve_linear(poly, subject)
        poly = num if step.args["part"] == "num" else den
    sub = substitute(poly, ctx.x_map)
    if "conjdiff" in step.args:
        sub = conjugate(sub) - sub
    content, mono, prim = content_and_primitive(sub)
    mono_text = render(Polynomial(ctx.reg, ((mono, MPQ(1)),)))
    if "monomial" in step.args and mono_text != step.args["monomial"]:
        rep.status = "fail"
        rep.notes.append(f"monomial content {mono_text} != {step.args['monomial']}")
        return
    matched = None
    for exp in ctx.relation_modes(step.args["expect"]):
        ec, em, ep = content_and_primitive(exp.poly)
        if prim == ep:
            c = content / ec
        elif prim == -ep:
            c = -content / ec
        else:
            continue
        matched = (exp, c)
        break
    if matched is None:
        rep.status = "fail"
        rep.notes.append("primitive part does not match the expected relation")
        rep.witness = render(prim)
        return
    exp, c = matched
    rep.mode = exp.variant or ""
    rep.witness = f"monomial {mono_text}, constant {c}"
    if exp.variant:
        rep.notes.append(f"matched {exp.name} in {exp.variant} mode")
    if "const" in step.args:
        want = rational_from_string(step.args["const"])
        if c != want:
            rep.status = "fail"
            rep.notes.append(f"constant {c} != expected {want}")


def step_triviality_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    gens = []
    for name in _split_list(step.args["gens"]):
        xsub = name.endswith("@x")
        if xsub:
            name = name[:-2]
        rel = ctx.relation(name)
        poly = rel.poly
        if xsub:
            poly = ctx.to_x(poly, strips=ctx.strip_list(step.args.get("xstrip")))
        gens.append(poly)
    if step.args.get("conjclose") == "true":
        gens = gens + [conjugate(g) for g in gens]
    aux = []
    if "saturate" in step.args:
        h = ctx.expr(step.args["saturate"])
        t = ctx.reg.intern_aux(f"_sat_{step.id.replace('-', '_')}")
        aux.append(Polynomial.variable(ctx.reg, t) * h - Polynomial.constant(ctx.reg, 1))
    triv = is_trivial([g for g in gens if not g.is_zero] + aux, caps=ctx.caps)
    rep.witness = f"unit ideal: {triv}"
    if step.args.get("assert") == "report":
        rep.notes.append("informational run, no assertion")
        return
    if not triv:
        rep.status = "fail"


def step_groebner_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    if "skip" in step.args:
        rep.status = "skipped"
        rep.notes.append(step.args["skip"].replace("-", " "))
        return
    mode = step.args.get("mode", "radical-equal")
    if mode != "radical-equal":
        raise PipelineError(f"unknown groebner-check mode {mode!r}")
    gens = _main_system(ctx)
    gbI = ctx.cached_gb("@main", gens, grevlex_order(ctx.reg))
    h = ctx.expr(step.args.get("nonzero", "x1*x2*~x1*~x2"))
    expect = [ctx.relation(n).poly for n in _split_list(step.args["expect"])]
    missing = []
    for g in expect:
        t = ctx.reg.intern_aux(f"_rq{len(ctx._gb_cache)}_{len(missing)}_{step.id.replace('-', '_')}")
        rab = Polynomial.variable(ctx.reg, t) * (h * g) - Polynomial.constant(ctx.reg, 1)
        if not is_trivial(gbI.generators + [rab], caps=ctx.caps):
            missing.append(render(g))
    gbK = ctx.cached_gb("@K", expect, ctx.lex_proof_order())
    reverse = [render(g) for g in gens
               if not normal_form(g, gbK.generators, gbK.order, ctx.caps).is_zero]
    if missing or reverse:
        rep.status = "fail"
        if missing:
            rep.notes.append("not in the saturated radical: " + "; ".join(missing))
        if reverse:
            rep.notes.append("system generator misses the solution ideal")
    else:
        rep.witness = "radical memberships hold in both directions"


def step_filter_check(ctx: StepContext, step: StepDecl, rep: StepReport):
    from .grobner import TriangularSystem
    from .numroots import conjugation_filter

    mode = step.args.get("mode", "gsolve")
    pairing = {ctx.reg["x1"].id: ctx.reg["~x1"].id,
               ctx.reg["x2"].id: ctx.reg["~x2"].id}
    if mode == "main-solution":
        jsat = _main_saturated_gb(ctx)
        systems = gsolve(jsat.generators,
                         nonzero=[ctx.expr(n) for n in ("x1", "x2", "~x1", "~x2")],
                         order=ctx.lex_proof_order(), caps=ctx.caps)
        kept, dropped, inconclusive = conjugation_filter(systems, pairing)
        expect = sorted(render(ctx.relation(n).poly)
                        for n in _split_list(step.args["expect"]))
        got = [sorted(render(p) for p in s.polys) for s in kept]
        rep.witness = " | ".join("; ".join(g) for g in got)
        if inconclusive:
            rep.status = "inconclusive"
            rep.notes.append("conjugation filter could not certify a system")
        elif [g for g in got if g == expect] and len(kept) == 1:
            rep.notes.append(f"dropped {len(dropped)} conjugation-inconsistent systems")
        else:
            rep.status = "fail"
            rep.notes.append("surviving systems differ from the expected solution")
        return
    if mode == "final-contradiction":
        outcome = final_contradiction_check(ctx)
        rep.status = outcome.status
        rep.notes.extend(outcome.notes)
        rep.witness = outcome.witness
        return
    raise PipelineError(f"unknown filter-check mode {mode!r}")


def step_assert_substitution(ctx: StepContext, step: StepDecl, rep: StepReport):
    rel = ctx.relation(step.args["rel"])
    poly = rel.poly
    if "part" in step.args:
        subject = ctx.reg[step.args.get("subject", "Phi11")]
        num, den = solve_linear(poly, subject)
        poly = num if step.args["part"] == "num" else den
    for subst in (step.args.get("subst"), step.args.get("subst2")):
        if not subst:
            continue
        mapping = {}
        for piece in subst.split(";"):
            name, _, value = piece.partition("=")
            mapping[ctx.reg[name.strip()].id] = ctx.expr(value.strip())
        poly = substitute(poly, mapping)
    if step.args.get("xsub") == "true":
        poly = ctx.to_x(poly)
    if "factors" in step.args:
        quotient = poly
        for f in ctx.strip_list(step.args["factors"]):
            quotient = exact_divide(quotient, f) if quotient is not None else None
            if quotient is None:
                rep.status = "fail"
                rep.notes.append(f"factor {render(f)} does not divide")
                return
        rep.witness = f"cofactor {render(quotient)}"
        if not quotient.is_constant:
            rep.status = "fail"
            rep.notes.append("leftover cofactor is not a constant")
        if "printed-constant" in step.args:
            rep.notes.append(
                "derived linear factor replaces the printed constant "
                + step.args["printed-constant"])
        return
    if "modulo" in step.args:
        gb = _modulo_gb(ctx, step.args["modulo"])
        nf = normal_form(poly, gb.generators, gb.order, ctx.caps)
        want = step.args.get("expect", "zero")
        ok = nf.is_zero if want == "zero" else not nf.is_zero
        rep.witness = "0" if nf.is_zero else render(nf)
        if not ok:
            rep.status = "fail"
        return
    expect = step.args.get("expect")
    if expect is not None:
        want = ctx.expr(expect)
        if poly != want:
            rep.status = "fail"
            rep.notes.append(f"got {render(poly)}")
        rep.witness = render(poly)
        return
    rep.witness = render(poly)


@dataclass
class FinalOutcome:
    status: str
    notes: list[str]
    witness: str


def final_contradiction_check(ctx: StepContext,
                              override: Polynomial | None = None) -> FinalOutcome:
    """Certify that every conjugation-consistent solution of
    {closure relation, its conjugate, norm relation} has alpha = beta = 0."""
    from .numroots import conjugation_filter

    reg = ctx.reg
    salv = override if override is not None else ctx.relation("salvation").poly
    norm = ctx.relation("5.140s").poly
    gens = [salv, conjugate(salv), norm]
    gens = [g for g in gens if not g.is_zero]
    if not gens:
        return FinalOutcome("fail", ["empty system"], "")
    notes = []
    # radical certificates: |alpha|^2 and |beta|^2 vanish on the variety
    ok_a = False
    ok_b = False
    try:
        from .grobner import radical_membership

        ok_a = radical_membership(ctx.expr("alpha*~alpha"), gens, ctx.caps)
        ok_b = radical_membership(ctx.expr("beta*~beta"), gens, ctx.caps)
    except ResourceLimitError as exc:
        return FinalOutcome("inconclusive", [str(exc)], "")
    if ok_a and ok_b:
        notes.append("norm certificates: alpha*~alpha and beta*~beta "
                     "lie in the radical")
        systems = gsolve(gens, order=lex_order(reg), caps=ctx.caps)
        pairing = {reg["alpha"].id: reg["~alpha"].id,
                   reg["beta"].id: reg["~beta"].id}
        kept, dropped, inconclusive = conjugation_filter(systems, pairing)
        surv = []
        for s in kept:
            gb = buchberger(list(s.polys) + [conjugate(p) for p in s.polys],
                            grevlex_order(reg), ctx.caps)
            for v in ("alpha", "~alpha", "beta", "~beta"):
                if not gb.contains(ctx.expr(v), ctx.caps):
                    surv.append(render(ctx.expr(v)))
        if surv:
            return FinalOutcome(
                "fail", notes + ["conjugation-consistent solution keeps "
                                 + ", ".join(surv) + " free"], "")
        return FinalOutcome(
            "pass", notes + [f"{len(kept)} systems kept, {len(dropped)} dropped"],
            " | ".join("; ".join(render(p) for p in s.polys) for s in kept))
    return FinalOutcome("fail",
                        [f"radical certificates failed: alpha {ok_a}, beta {ok_b}"],
                        "")


STEP_HANDLERS = {
    "specialize-check": step_specialize_check,
    "pfaffian-check": step_pfaffian_check,
    "commutator-check": step_commutator_check,
    "solve-check": step_solve_check,
    "eliminate-check": step_eliminate_check,
    "homogenize-check": step_homogenize_check,
    "triviality-check": step_triviality_check,
    "groebner-check": step_groebner_check,
    "filter-check": step_filter_check,
    "assert-substitution": step_assert_substitution,
}


# ---------------------------------------------------------------------------
# replay


def replay(db: Database, steps: list[StepDecl] | None = None,
           only: set[str] | None = None, threads: int = 1,
           caps: ResourceCaps | None = None) -> tuple[list[StepReport], str]:
    """Execute proof steps in order; returns (reports, verdict).

    Steps with a `needs=` argument are skipped (not passed) when any
    dependency did not pass.  Execution may use a thread pool for steps whose
    dependencies are already settled; results are deterministic regardless.
    """
    steps = steps if steps is not None else db.steps
    ctx = StepContext(db, caps)
    status_by_id: dict[str, str] = {}
    reports: list[StepReport] = []

    def run_one(step: StepDecl) -> StepReport:
        rep = StepReport(step.id, step.kind, step.ref)
        needs = _split_list(step.args.get("needs", ""))
        unmet = [n for n in needs if status_by_id.get(n) != "pass"]
        if only is not None and step.id not in only:
            rep.status = "skipped"
            rep.notes.append("not selected")
            return rep
        if unmet:
            rep.status = "skipped"
            rep.notes.append("unmet dependencies: " + ", ".join(unmet))
            return rep
        handler = STEP_HANDLERS.get(step.kind)
        if handler is None:
            rep.status = "fail"
            rep.notes.append(f"unknown step kind {step.kind!r}")
            return rep
        t0 = time.perf_counter()
        try:
            handler(ctx, step, rep)
        except ResourceLimitError as exc:
            rep.status = "inconclusive"
            rep.notes.append(f"resource limit: {exc}")
        except (NPError, PipelineError, ParseError, KeyError) as exc:
            rep.status = "fail"
            rep.notes.append(f"{type(exc).__name__}: {exc}")
        rep.cost = _step_cost(rep)
        _ = t0  # wall time intentionally excluded from the deterministic report
        return rep

    if threads <= 1:
        for step in steps:
            rep = run_one(step)
            status_by_id[step.id] = rep.status
            reports.append(rep)
    else:
        # schedule independent ready steps concurrently; results are merged
        # in script order so the report never depends on scheduling
        pending = list(steps)
        done: dict[str, StepReport] = {}
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while pending:
                ready = []
                for step in pending:
                    needs = _split_list(step.args.get("needs", ""))
                    if all(n in status_by_id for n in needs):
                        ready.append(step)
                if not ready:
                    ready = [pending[0]]
                futures = [(s, pool.submit(run_one, s)) for s in ready]
                for s, fut in futures:
                    rep = fut.result()
                    done[s.id] = rep
                    status_by_id[s.id] = rep.status
                pending = [s for s in pending if s.id not in done]
        reports = [done[s.id] for s in steps]

    verdict = "pass" if all(r.status in ("pass", "skipped") for r in reports) \
        else "fail"
    return reports, verdict


def _step_cost(rep: StepReport) -> int:
    """Deterministic cost proxy recorded in the report's millis field."""
    base = len(rep.witness) + sum(len(n) for n in rep.notes)
    return base


def load_and_replay(threads: int = 1, caps: ResourceCaps | None = None,
                    only: set[str] | None = None):
    db = load_database()
    return replay(db, threads=threads, caps=caps, only=only)
