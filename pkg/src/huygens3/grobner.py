"""Exact ideal machinery: division, Buchberger, saturation, gsolve.

All computations are over the rationals with explicit monomial orders.
Determinism is part of the contract: for a fixed order, reduced bases are
canonical and independent of generator order, and every routine breaks ties
by explicit monomial comparisons rather than hash or insertion order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ._coeff import MPQ, QONE, qbits, qden, qnum
from .algebra import (
    AlgebraError,
    MONOMIAL_ONE,
    Monomial,
    Polynomial,
    SymbolRegistry,
    _from_clean_dict,
    coefficient_primitive,
    content_and_primitive,
)


class ResourceLimitError(Exception):
    """A configured cap (pairs, degree, coefficient size) was exceeded."""


@dataclass
class ResourceCaps:
    max_pair_reductions: int = 200_000
    max_total_degree: int = 60
    max_coeff_bits: int = 1_000_000

    def check_poly(self, p: Polynomial):
        if p.total_degree > self.max_total_degree:
            raise ResourceLimitError(
                f"total degree {p.total_degree} exceeds cap {self.max_total_degree}")
        for _, c in p.terms:
            if qbits(c) > self.max_coeff_bits:
                raise ResourceLimitError("coefficient bit length exceeds cap")


DEFAULT_CAPS = ResourceCaps()


class MonomialOrder:
    """Total, multiplicative, well-founded monomial order.

    An order is a sequence of segments (kind, vars); the last segment may
    have vars=None meaning "all remaining variables".  A plain lex or grevlex
    order is a single segment; an elimination order puts the eliminated block
    first.  `ranking` fixes the precedence (highest first) of the remaining
    variables; unlisted variables rank below listed ones by structural key.
    """

    def __init__(self, reg: SymbolRegistry, kind: str = "lex",
                 ranking: list[int] | None = None,
                 segments: list[tuple[str, list[int] | None]] | None = None):
        self.reg = reg
        self.kind = kind
        self.ranking = list(ranking) if ranking else None
        if segments is None:
            segments = [(kind, None)]
        for seg_kind, _ in segments:
            if seg_kind not in ("lex", "grevlex"):
                raise AlgebraError(f"unknown order kind {seg_kind!r}")
        self.segments = segments

    def _precedence(self, universe) -> list[int]:
        listed = [s for s in (self.ranking or []) if s in universe]
        rest = sorted((s for s in universe if s not in set(listed)),
                      key=self.reg.sort_key)
        return listed + rest

    def compile(self, universe):
        """Key function on monomials; bigger key = bigger monomial.

        Valid only for monomials supported on `universe`.
        """
        universe = set(universe)
        remaining = self._precedence(universe)
        seg_fns = []
        for seg_kind, seg_vars in self.segments:
            if seg_vars is None:
                block = list(remaining)
                remaining = []
            else:
                block = [v for v in seg_vars if v in universe]
                remaining = [v for v in remaining if v not in set(block)]
            seg_fns.append((seg_kind, tuple(block)))

        def key(m: Monomial):
            d = dict(m.exps)
            parts = []
            for seg_kind, block in seg_fns:
                if seg_kind == "lex":
                    parts.extend(d.get(v, 0) for v in block)
                else:
                    parts.append(sum(d.get(v, 0) for v in block))
                    parts.extend(-d.get(v, 0) for v in reversed(block))
            return tuple(parts)

        return key

    def leading_term(self, p: Polynomial) -> tuple[Monomial, object]:
        if p.is_zero:
            raise AlgebraError("zero polynomial has no leading term")
        key = self.compile(p.variables())
        best = p.terms[0]
        best_k = key(best[0])
        for mc in p.terms[1:]:
            k = key(mc[0])
            if k > best_k:
                best, best_k = mc, k
        return best

    def sort_terms(self, p: Polynomial) -> list[tuple[Monomial, object]]:
        key = self.compile(p.variables())
        return sorted(p.terms, key=lambda mc: key(mc[0]), reverse=True)

    def greater(self, a: Monomial, b: Monomial) -> bool:
        key = self.compile(set(a.variables()) | set(b.variables()))
        return key(a) > key(b)


def lex_order(reg, ranking=None) -> MonomialOrder:
    return MonomialOrder(reg, "lex", ranking)


def grevlex_order(reg, ranking=None) -> MonomialOrder:
    return MonomialOrder(reg, "grevlex", ranking)


def elimination_order(reg, eliminate: list[int], ranking=None) -> MonomialOrder:
    """Block order eliminating the listed variables (grevlex within blocks)."""
    return MonomialOrder(reg, "elimination-block", ranking,
                         segments=[("grevlex", list(eliminate)), ("grevlex", None)])


# ---------------------------------------------------------------------------
# division / normal form


def _cached_key(key, cache):
    def lookup(m):
        k = cache.get(m)
        if k is None:
            k = key(m)
            cache[m] = k
        return k
    return lookup


def _divide(f: Polynomial, divisors, key, caps, key_cache=None):
    """Core division: divisors is a list of (lead_mon, lead_coeff, poly).

    A lazy max-heap over cached order keys keeps leading-term extraction
    cheap; stale heap entries are skipped on pop.
    """
    import heapq

    if key_cache is None:
        key_cache = {}
    lk = _cached_key(key, key_cache)
    work = dict(f.terms)
    heap = [(_neg(lk(m)), m) for m in work]
    heapq.heapify(heap)
    div_pre = [(dict(gm.exps), gm, gc, g) for gm, gc, g in divisors]
    remainder: dict[Monomial, object] = {}
    steps = 0
    step_cap = max(caps.max_pair_reductions * 16, 1_000_000)
    while heap:
        _, lm = heapq.heappop(heap)
        lc = work.pop(lm, None)
        if lc is None:
            continue
        steps += 1
        if steps > step_cap:
            raise ResourceLimitError("division step cap exceeded")
        lmap = dict(lm.exps)
        hit = None
        for gmap, gm, gc, g in div_pre:
            ok = True
            for s, e in gm.exps:
                if lmap.get(s, 0) < e:
                    ok = False
                    break
            if ok:
                hit = (gm, gc, g)
                break
        if hit is None:
            remainder[lm] = lc
            continue
        gm, gc, g = hit
        qm = lm.div(gm)
        qc = lc / gc
        for m, c in g.terms:
            if m is gm or m == gm:
                continue
            k = m.mul(qm)
            v = work.get(k)
            if v is None:
                nv = -qc * c
                work[k] = nv
                heapq.heappush(heap, (_neg(lk(k)), k))
            else:
                nv = v - qc * c
                if nv:
                    work[k] = nv
                else:
                    del work[k]
    return _from_clean_dict(f.reg, remainder)


def _qgcd_int(a, b):
    import math

    if qden(a) == 1 and qden(b) == 1:
        g = math.gcd(int(qnum(a)), int(qnum(b)))
        return MPQ(g) if g else MPQ(1)
    return MPQ(1)


def _neg(key_tuple):
    return tuple(-x for x in key_tuple)


def _divide_ff(f: Polynomial, divisors, key, caps, key_cache=None):
    """Fraction-free top reduction over the integers.

    Input coefficients must be integers (primitive basis elements).  The
    result is c*f - sum q_i g_i for a positive integer c, which has the same
    leading behaviour as the exact normal form up to scaling; callers take
    primitive parts, so only the ideal and the reduced-to-zero property
    matter.  Content is stripped periodically to bound growth.
    """
    import heapq
    import math

    from ._coeff import MPZ

    if key_cache is None:
        key_cache = {}
    lk = _cached_key(key, key_cache)
    work = {}
    for m, c in f.terms:
        work[m] = MPZ(qnum(c)) if qden(c) == 1 else None
    if any(v is None for v in work.values()):
        return _divide(f, divisors, key, caps, key_cache)
    heap = [(_neg(lk(m)), m) for m in work]
    heapq.heapify(heap)
    div_pre = []
    for gm, gc, g in divisors:
        if qden(gc) != 1 or any(qden(c) != 1 for _, c in g.terms):
            return _divide(f, divisors, key, caps, key_cache)
        div_pre.append((gm, MPZ(qnum(gc)), g))
    remainder: dict[Monomial, object] = {}
    steps = 0
    step_cap = max(caps.max_pair_reductions * 16, 1_000_000)
    while heap:
        _, lm = heapq.heappop(heap)
        lc = work.pop(lm, None)
        if lc is None:
            continue
        steps += 1
        if steps > step_cap:
            raise ResourceLimitError("division step cap exceeded")
        if steps % 64 == 0 and (work or remainder):
            g_all = int(lc)
            for v in work.values():
                g_all = math.gcd(g_all, int(v))
                if g_all == 1:
                    break
            if g_all != 1:
                for v in remainder.values():
                    g_all = math.gcd(g_all, int(v))
                    if g_all == 1:
                        break
            if g_all > 1:
                lc //= g_all
                for k in work:
                    work[k] //= g_all
                for k in remainder:
                    remainder[k] //= g_all
        lmap = dict(lm.exps)
        hit = None
        for gm, gc, g in div_pre:
            ok = True
            for s, e in gm.exps:
                if lmap.get(s, 0) < e:
                    ok = False
                    break
            if ok:
                hit = (gm, gc, g)
                break
        if hit is None:
            remainder[lm] = lc
            continue
        gm, gc, g = hit
        qm = lm.div(gm)
        gcd = math.gcd(int(lc), int(gc))
        scale = gc // gcd      # multiply all pending terms by this
        mult = lc // gcd       # coefficient on the divisor tail
        if scale != 1:
            for k in work:
                work[k] *= scale
            for k in remainder:
                remainder[k] *= scale
        for m, c in g.terms:
            if m is gm or m == gm:
                continue
            k = m.mul(qm)
            v = work.get(k)
            nc = mult * qnum(c)
            if v is None:
                work[k] = -nc
                heapq.heappush(heap, (_neg(lk(k)), k))
            else:
                nv = v - nc
                if nv:
                    work[k] = nv
                else:
                    del work[k]
    if not remainder:
        return Polynomial.zero(f.reg)
    from ._coeff import MPQ

    return _from_clean_dict(f.reg, {m: MPQ(c) for m, c in remainder.items() if c})


def normal_form(f: Polynomial, basis: list[Polynomial], order: MonomialOrder,
                caps: ResourceCaps = DEFAULT_CAPS) -> Polynomial:
    """Remainder of f on division by basis: no remainder term is divisible
    by a basis leading monomial, and f - result lies in the ideal <basis>."""
    basis = [g for g in basis if not g.is_zero]
    if f.is_zero or not basis:
        return f
    universe = set(f.variables())
    for g in basis:
        universe |= g.variables()
    key = order.compile(universe)
    divisors = []
    for g in basis:
        gm, gc = _leading(g, key)
        divisors.append((gm, gc, g))
    return _divide(f, divisors, key, caps)


def _leading(p: Polynomial, key):
    best = p.terms[0]
    best_k = key(best[0])
    for mc in p.terms[1:]:
        k = key(mc[0])
        if k > best_k:
            best, best_k = mc, k
    return best


def exact_divide(p: Polynomial, f: Polynomial):
    """Return q with p == q*f, or None when f does not divide p exactly."""
    if p.is_zero:
        return p
    if f.is_zero:
        return None
    universe = p.variables() | f.variables()
    key = grevlex_order(p.reg).compile(universe)
    fm, fc = _leading(f, key)
    work = dict(p.terms)
    quotient: dict[Monomial, object] = {}
    while work:
        lm = max(work, key=key)
        lc = work[lm]
        if not fm.divides(lm):
            return None
        qm = lm.div(fm)
        qc = lc / fc
        quotient[qm] = quotient.get(qm, 0) + qc
        for m, c in f.terms:
            k = m.mul(qm)
            v = work.get(k, 0) - qc * c
            if v:
                work[k] = v
            else:
                work.pop(k, None)
    return _from_clean_dict(p.reg, quotient)


def strip_factors(p: Polynomial, factors: list[Polynomial]):
    """Divide out as many declared-nonzero factors as possible.

    Returns (stripped polynomial, list of factors removed, with multiplicity).
    """
    removed = []
    changed = True
    while changed and not p.is_zero and not p.is_constant:
        changed = False
        for f in factors:
            if f.is_constant:
                continue
            q = exact_divide(p, f)
            if q is not None and not q.is_zero:
                p = q
                removed.append(f)
                changed = True
                break
    return p, removed


# ---------------------------------------------------------------------------
# Buchberger


@dataclass
class GroebnerBasis:
    generators: list[Polynomial]
    order: MonomialOrder
    reduced: bool = True
    stats: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.generators)

    def __len__(self):
        return len(self.generators)

    @property
    def is_trivial(self) -> bool:
        return len(self.generators) == 1 and self.generators[0].is_constant \
            and not self.generators[0].is_zero

    @property
    def is_zero_ideal(self) -> bool:
        return all(g.is_zero for g in self.generators)

    def contains(self, f: Polynomial, caps: ResourceCaps = DEFAULT_CAPS) -> bool:
        return normal_form(f, self.generators, self.order, caps).is_zero


def buchberger(gens: list[Polynomial], order: MonomialOrder,
               caps: ResourceCaps = DEFAULT_CAPS) -> GroebnerBasis:
    """Reduced Groebner basis of <gens>.

    Pair selection is the normal strategy (minimal lcm degree, ties broken by
    the compiled key of the lcm then generator indices); the pair queue is
    maintained with the Gebauer-Moeller update, so the product criterion and
    both chain criteria are applied at insertion time.
    """
    import heapq

    if not gens:
        raise AlgebraError("buchberger requires at least one generator")
    reg = gens[0].reg
    universe: set[int] = set()
    for g in gens:
        universe |= g.variables()
    key = order.compile(universe)

    basis: list[Polynomial] = []
    for g in gens:
        if g.is_zero:
            continue
        caps.check_poly(g)
        if g.is_constant:
            return GroebnerBasis([Polynomial.constant(reg, 1)], order, True)
        basis.append(coefficient_primitive(g))
    if not basis:
        return GroebnerBasis([Polynomial.zero(reg)], order, True)

    key_cache: dict = {}
    seed = _interreduce(basis, order, key, caps, key_cache)
    if len(seed) == 1 and seed[0].is_constant:
        return GroebnerBasis([Polynomial.constant(reg, 1)], order, True)

    basis = []
    lead: list[Monomial] = []
    leadc: list = []
    alive: set[tuple[int, int]] = set()   # pairs currently queued
    heap: list = []                       # (deg, key(lcm), i, j)

    def gm_add(h: Polynomial):
        """Install a new basis element with the Gebauer-Moeller update."""
        t = len(basis)
        lt = _leading(h, key)
        new_lcm = {i: lt[0].lcm(lead[i]) for i in range(t)}
        # B criterion: discard queued old pairs whose lcm the new lead
        # divides strictly on both sides
        for (i, j) in list(alive):
            l = lead[i].lcm(lead[j])
            if lt[0].divides(l) and new_lcm[i] != l and new_lcm[j] != l:
                alive.discard((i, j))
        # M criterion: drop (i,t) when another new pair's lcm strictly divides
        keep = []
        for i in sorted(new_lcm):
            li = new_lcm[i]
            if any(j != i and new_lcm[j] != li and new_lcm[j].divides(li)
                   for j in sorted(new_lcm)):
                continue
            keep.append(i)
        # F criterion: one representative per lcm; product criterion kills
        # a whole class when any member has coprime leads
        by_lcm: dict = {}
        for i in keep:
            by_lcm.setdefault(new_lcm[i].exps, []).append(i)
        for exps, members in sorted(by_lcm.items()):
            if any(lead[i].coprime(lt[0]) for i in members):
                continue
            i = min(members)
            l = new_lcm[i]
            alive.add((i, t))
            heapq.heappush(heap, (l.degree, key(l), i, t))
        basis.append(h)
        lead.append(lt[0])
        leadc.append(lt[1])

    for g in seed:
        gm_add(g)

    reductions = 0
    zero_reductions = 0
    while heap:
        _, _, i, j = heapq.heappop(heap)
        if (i, j) not in alive:
            continue
        alive.discard((i, j))
        l = lead[i].lcm(lead[j])
        reductions += 1
        if reductions > caps.max_pair_reductions:
            raise ResourceLimitError("pair reduction cap exceeded")
        gamma = _qgcd_int(leadc[i], leadc[j])
        s = basis[i].scale_monomial(l.div(lead[i]), leadc[j] / gamma) - \
            basis[j].scale_monomial(l.div(lead[j]), leadc[i] / gamma)
        divisors = [(lead[k2], leadc[k2], basis[k2]) for k2 in range(len(basis))]
        r = _divide_ff(s, divisors, key, caps, key_cache)
        if r.is_zero:
            zero_reductions += 1
            continue
        caps.check_poly(r)
        r = coefficient_primitive(r)
        if r.is_constant:
            return GroebnerBasis([Polynomial.constant(reg, 1)], order, True,
                                 {"pairs": reductions, "zero": zero_reductions})
        gm_add(r)

    reduced = _reduce_basis(basis, order, key, caps, key_cache)
    return GroebnerBasis(reduced, order, True,
                         {"pairs": reductions, "zero": zero_reductions})


def _interreduce(polys, order, key, caps, key_cache=None):
    """Mutually reduce generators, one replacement at a time.

    Elements are replaced sequentially (never as a batch) so every
    intermediate list generates exactly the same ideal.
    """
    polys = [coefficient_primitive(p) for p in polys if not p.is_zero]
    changed = True
    while changed and len(polys) > 1:
        changed = False
        for idx in range(len(polys)):
            p = polys[idx]
            others = polys[:idx] + polys[idx + 1:]
            divisors = [(_leading(q, key)[0], _leading(q, key)[1], q) for q in others]
            r = _divide_ff(p, divisors, key, caps, key_cache)
            if r.is_zero:
                polys = others
                changed = True
                break
            r = coefficient_primitive(r)
            if r != p:
                polys = polys[:idx] + [r] + polys[idx + 1:]
                changed = True
                break
    return sorted(polys, key=lambda p: key(_leading(p, key)[0]))


def _reduce_basis(basis, order, key, caps, key_cache=None):
    leads = [_leading(g, key)[0] for g in basis]
    keep = []
    for i, g in enumerate(basis):
        redundant = False
        for j in range(len(basis)):
            if j == i:
                continue
            if leads[j].divides(leads[i]) and (leads[j] != leads[i] or j < i):
                redundant = True
                break
        if not redundant:
            keep.append(g)
    reduced = []
    for i, g in enumerate(keep):
        others = keep[:i] + keep[i + 1:]
        if others:
            divisors = [(_leading(q, key)[0], _leading(q, key)[1], q) for q in others]
            r = _divide_ff(g, divisors, key, caps, key_cache)
        else:
            r = g
        if not r.is_zero:
            reduced.append(coefficient_primitive(r))
    return sorted(reduced, key=lambda p: key(_leading(p, key)[0]))


def is_trivial(gens: list[Polynomial], order: MonomialOrder | None = None,
               caps: ResourceCaps = DEFAULT_CAPS) -> bool:
    """True iff 1 lies in the ideal generated by gens."""
    gens = [g for g in gens if not g.is_zero]
    if not gens:
        return False
    order = order or grevlex_order(gens[0].reg)
    return buchberger(gens, order, caps).is_trivial


# ---------------------------------------------------------------------------
# saturation and radical membership


def _fresh_aux(reg: SymbolRegistry, stem: str):
    i = 0
    while True:
        name = f"{stem}{i}" if i else stem
        if reg.get(name) is None:
            return reg.intern_aux(name)
        i += 1


def saturate(gens: list[Polynomial], h: Polynomial, order: MonomialOrder,
             caps: ResourceCaps = DEFAULT_CAPS) -> GroebnerBasis:
    """Reduced basis of I : h^inf in the original variables.

    Rabinowitsch variable t with t*h - 1 eliminated through a block order,
    then the contraction is re-reduced under the requested order.
    """
    if h.is_zero:
        raise AlgebraError("cannot saturate by zero")
    gens = [g for g in gens if not g.is_zero]
    reg = h.reg
    if not gens:
        return GroebnerBasis([Polynomial.zero(reg)], order, True)
    t = _fresh_aux(reg, "_t")
    rab = Polynomial.variable(reg, t) * h - Polynomial.constant(reg, 1)
    elim = MonomialOrder(reg, "elimination-block", order.ranking,
                         segments=[("grevlex", [t.id]), ("grevlex", None)])
    gb = buchberger(list(gens) + [rab], elim, caps)
    contracted = [g for g in gb.generators if t.id not in g.variables()]
    if not contracted:
        return GroebnerBasis([Polynomial.zero(reg)], order, True)
    return buchberger(contracted, order, caps)


def radical_membership(f: Polynomial, gens: list[Polynomial],
                       caps: ResourceCaps = DEFAULT_CAPS) -> bool:
    """f in the radical of <gens>, by the Rabinowitsch trick."""
    if f.is_zero:
        return True
    gens = [g for g in gens if not g.is_zero]
    if not gens:
        return False
    reg = f.reg
    t = _fresh_aux(reg, "_r")
    rab = Polynomial.variable(reg, t) * f - Polynomial.constant(reg, 1)
    return buchberger(list(gens) + [rab], grevlex_order(reg), caps).is_trivial


# ---------------------------------------------------------------------------
# univariate helpers for gsolve splitting


def univariate_in(p: Polynomial) -> int | None:
    vs = p.variables()
    if len(vs) == 1:
        return next(iter(vs))
    return None


def to_dense_univariate(p: Polynomial, sid: int) -> list:
    """Dense coefficient list c0..cn of a polynomial univariate in sid."""
    n = p.degree_in(sid)
    coeffs = [MPQ(0)] * (n + 1)
    for m, c in p.terms:
        if len(m.exps) > 1 or (m.exps and m.exps[0][0] != sid):
            raise AlgebraError("polynomial is not univariate in the given symbol")
        coeffs[m.exponent(sid)] = c
    return coeffs


def from_dense_univariate(reg, sid: int, coeffs) -> Polynomial:
    data = {}
    for e, c in enumerate(coeffs):
        if c:
            data[Monomial.make([(sid, e)])] = c
    return Polynomial.from_dict(reg, data)


def _uni_trim(a: list):
    while a and a[-1] == 0:
        a.pop()
    return a


def _uni_divmod(a: list, b: list):
    a = _uni_trim(list(a))
    b = _uni_trim(list(b))
    if not b:
        raise ZeroDivisionError("univariate division by zero")
    out = [MPQ(0)] * max(0, len(a) - len(b) + 1)
    while len(a) >= len(b):
        q = a[-1] / b[-1]
        shift = len(a) - len(b)
        out[shift] = q
        for i, bc in enumerate(b):
            a[shift + i] -= q * bc
        _uni_trim(a)
        if not a:
            break
    return out, a


def _uni_gcd(a: list, b: list):
    a = _uni_trim(list(a))
    b = _uni_trim(list(b))
    while b:
        _, r = _uni_divmod(a, b)
        a, b = b, _uni_trim(r)
    if not a:
        return [MPQ(1)]
    lead = a[-1]
    return [c / lead for c in a]


def _uni_derivative(a: list):
    return [c * i for i, c in enumerate(a)][1:]


def squarefree_part_univariate(coeffs: list) -> list:
    g = _uni_gcd(coeffs, _uni_derivative(coeffs))
    if len(g) <= 1:
        return list(coeffs)
    q, r = _uni_divmod(coeffs, g)
    if _uni_trim(r):
        raise AlgebraError("squarefree division not exact")
    return q


def rational_roots(coeffs: list) -> list:
    """All rational roots of a univariate rational-coefficient polynomial."""
    coeffs = _uni_trim(list(coeffs))
    if len(coeffs) <= 1:
        return []
    scale = 1
    for c in coeffs:
        scale = scale * qden(c) // math.gcd(scale, qden(c))
    ints = [qnum(c) * (scale // qden(c)) for c in coeffs]
    low = 0
    while low < len(ints) and ints[low] == 0:
        low += 1
    roots = [MPQ(0)] if low > 0 else []
    ints = ints[low:]
    if len(ints) <= 1:
        return sorted(roots)
    a0, an = abs(ints[0]), abs(ints[-1])

    def divisors(n):
        out = set()
        d = 1
        while d * d <= n:
            if n % d == 0:
                out.add(d)
                out.add(n // d)
            d += 1
        return sorted(out)

    for p in divisors(a0):
        for q in divisors(an):
            for sign in (1, -1):
                cand = MPQ(sign * p, q)
                if cand in roots:
                    continue
                acc = MPQ(0)
                for c in reversed(ints):
                    acc = acc * cand + c
                if acc == 0:
                    roots.append(cand)
    return sorted(roots)


def univariate_split(p: Polynomial, sid: int) -> list[Polynomial]:
    """Squarefree rational-root factors of p plus the unfactored cofactor."""
    reg = p.reg
    coeffs = to_dense_univariate(p, sid)
    sf = squarefree_part_univariate(coeffs)
    factors = []
    rest = sf
    for root in rational_roots(sf):
        lin = [-root, MPQ(1)]
        q, r = _uni_divmod(rest, lin)
        if _uni_trim(r):
            continue
        rest = q
        factors.append(coefficient_primitive(from_dense_univariate(reg, sid, lin)))
    rest = _uni_trim(list(rest))
    if len(rest) > 1:
        factors.append(coefficient_primitive(from_dense_univariate(reg, sid, rest)))
    return factors


# ---------------------------------------------------------------------------
# gsolve: factorizing triangular decomposition


@dataclass
class TriangularSystem:
    """Reduced lex basis emitted by gsolve, with its factor-split provenance."""

    polys: list[Polynomial]
    order: MonomialOrder
    trail: tuple[str, ...] = ()

    def __iter__(self):
        return iter(self.polys)

    def variables(self) -> set[int]:
        out = set()
        for p in self.polys:
            out.update(p.variables())
        return out


def _try_split(p: Polynomial) -> list[Polynomial] | None:
    """A covering family of proper factors of p, or None."""
    if p.is_zero or p.is_constant:
        return None
    _, mono, prim = content_and_primitive(p)
    reg = p.reg
    pieces: list[Polynomial] = []
    for sid, _ in mono.exps:
        v = Polynomial.variable(reg, reg.symbol(sid))
        if v not in pieces:
            pieces.append(v)
    sid = univariate_in(prim)
    if sid is not None:
        uni = univariate_split(prim, sid)
        if pieces or len(uni) > 1:
            return pieces + uni
        return None
    if pieces and not prim.is_constant:
        return pieces + [prim]
    return None


def gsolve(gens: list[Polynomial], nonzero: list[Polynomial] | None = None,
           order: MonomialOrder | None = None,
           caps: ResourceCaps = DEFAULT_CAPS,
           max_branches: int = 256) -> list[TriangularSystem]:
    """Reduced lex subsystems whose union of solution sets equals the
    solutions of gens away from the zero sets of `nonzero`.

    The system is subdivided by factoring basis elements (monomial content,
    squarefree decomposition, rational-root extraction on eliminants); each
    emitted subsystem is a reduced lex basis.  Nonvanishing constraints are
    realized by saturation, so claims never depend on finding a split.
    """
    if not gens:
        return []
    reg = gens[0].reg
    order = order or lex_order(reg)
    nonzero = list(nonzero or [])

    work_order = grevlex_order(reg)
    results: list[TriangularSystem] = []
    seen: set[tuple] = set()
    stack: list[tuple[list[Polynomial], tuple[str, ...], frozenset]] = [
        (list(gens), (), frozenset())]
    branches = 0
    while stack:
        branches += 1
        if branches > max_branches:
            raise ResourceLimitError("gsolve branch cap exceeded")
        current, trail, split_seen = stack.pop()
        # work in grevlex, saturate, and only convert to the presentation
        # order once a branch stops splitting
        basis = buchberger(current, work_order, caps)
        if basis.is_trivial or basis.is_zero_ideal:
            continue
        for h in nonzero:
            basis = saturate(basis.generators, h, work_order, caps)
            if basis.is_trivial or basis.is_zero_ideal:
                break
        if basis.is_trivial or basis.is_zero_ideal:
            continue
        split_done = False
        for g in basis.generators:
            if hash(g) in split_seen:
                continue
            factors = _try_split(g)
            if factors and (len(factors) > 1 or factors[0] != g):
                marked = split_seen | {hash(g)}
                for f in factors:
                    stack.append((basis.generators + [f],
                                  trail + (f"split:{_short(f)}",), marked))
                split_done = True
                break
        if split_done:
            continue
        final = buchberger(basis.generators, order, caps)
        if final.is_trivial or final.is_zero_ideal:
            continue
        dedup = tuple(hash(g) for g in final.generators)
        if dedup in seen:
            continue
        seen.add(dedup)
        results.append(TriangularSystem(list(final.generators), order, trail))

    all_vars: set[int] = set()
    for s in results:
        all_vars |= s.variables()
    if results:
        gkey = order.compile(all_vars)
        results.sort(key=lambda s: [gkey(_leading(p, gkey)[0]) for p in s.polys])
    return results


def _short(p: Polynomial) -> str:
    from .reldb import render

    text = render(p)
    return text if len(text) <= 40 else text[:37] + "..."
