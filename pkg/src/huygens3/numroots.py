"""Certified numeric layer for the conjugation filter.

The solver treats barred variables as independent; solutions only count when
each barred value is the complex conjugate of its partner.  Most systems the
replay meets are decided exactly (rational pins and torus relations); the
numeric path isolates univariate roots at an escalating precision ladder and
certifies pairings by Newton-style error bounds, reporting `inconclusive`
rather than guessing when certification fails at the top precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp

from ._coeff import MPQ, qden, qnum
from .algebra import Polynomial, coefficient_primitive
from .grobner import (
    GroebnerBasis,
    TriangularSystem,
    buchberger,
    grevlex_order,
    normal_form,
    to_dense_univariate,
    univariate_in,
)

PRECISION_LADDER = (128, 256, 512)


# ---------------------------------------------------------------------------
# exact real-root counting (Sturm)


def sturm_chain(coeffs: list) -> list[list]:
    """Sturm chain of a univariate rational polynomial (densely encoded)."""
    from .grobner import _uni_derivative, _uni_divmod, _uni_trim

    f = _uni_trim(list(coeffs))
    if len(f) <= 1:
        return [f] if f else [[MPQ(0)]]
    chain = [f, _uni_trim(_uni_derivative(f))]
    while chain[-1]:
        _, r = _uni_divmod(chain[-2], chain[-1])
        r = _uni_trim([-c for c in r])
        if not r:
            break
        chain.append(r)
    return chain


def _sign_changes(chain, x) -> int:
    signs = []
    for poly in chain:
        acc = MPQ(0)
        for c in reversed(poly):
            acc = acc * x + c
        if acc != 0:
            signs.append(1 if acc > 0 else -1)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def count_real_roots(coeffs: list, lo, hi) -> int:
    """Exact number of distinct real roots in (lo, hi]."""
    chain = sturm_chain(coeffs)
    return _sign_changes(chain, MPQ(lo)) - _sign_changes(chain, MPQ(hi))


def cauchy_root_bound(coeffs: list):
    """All roots lie in |x| <= 1 + max|c_i/c_n|."""
    from .grobner import _uni_trim

    c = _uni_trim(list(coeffs))
    if len(c) <= 1:
        return MPQ(1)
    lead = c[-1]
    m = max((abs(x / lead) for x in c[:-1]), default=MPQ(0))
    return MPQ(1) + m


def isolate_real_roots(coeffs: list) -> list[tuple]:
    """Disjoint rational intervals (a, b], one simple real root in each."""
    from .grobner import squarefree_part_univariate

    sf = squarefree_part_univariate(coeffs)
    bound = cauchy_root_bound(sf)
    chain = sturm_chain(sf)

    out = []

    def split(lo, hi, n):
        if n == 0:
            return
        if n == 1:
            out.append((lo, hi))
            return
        mid = (lo + hi) / 2
        left = _sign_changes(chain, lo) - _sign_changes(chain, mid)
        split(lo, mid, left)
        split(mid, hi, n - left)

    total = _sign_changes(chain, -bound) - _sign_changes(chain, bound)
    split(-bound, bound, total)
    return out


# ---------------------------------------------------------------------------
# numeric roots with certification


@dataclass
class FilterOutcome:
    kept: list[TriangularSystem]
    dropped: list[TriangularSystem]
    inconclusive: list[TriangularSystem]

    def __iter__(self):
        return iter((self.kept, self.dropped, self.inconclusive))


def _as_mpc(q) -> mp.mpc:
    return mp.mpc(qnum(q)) / mp.mpc(qden(q))


def _poly_eval(p: Polynomial, values: dict[int, mp.mpc]) -> mp.mpc:
    acc = mp.mpc(0)
    for m, c in p.terms:
        t = _as_mpc(c)
        for s, e in m.exps:
            t *= values[s] ** e
        acc += t
    return acc


def _uni_roots(coeffs: list, prec_bits: int):
    """Roots of a rational univariate polynomial with an error estimate."""
    with mp.workprec(prec_bits):
        cs = [_as_mpc(c) for c in reversed(coeffs)]
        try:
            roots, err = mp.polyroots(cs, maxsteps=200, extraprec=prec_bits,
                                      error=True)
        except mp.libmp.NoConvergence:
            return None, None
        return list(roots), err


def _numeric_points(system: TriangularSystem, prec_bits: int):
    """Enumerate candidate solution points of a triangular zero-dimensional
    system by univariate rooting plus linear back-substitution.

    Returns (points, tolerance) or None when the shape is unsupported.
    """
    polys = sorted(system.polys, key=lambda p: len(p.variables()))
    if not polys:
        return None
    first = polys[0]
    sid = univariate_in(first)
    if sid is None:
        return None
    try:
        coeffs = to_dense_univariate(first, sid)
    except Exception:
        return None
    roots, err = _uni_roots(coeffs, prec_bits)
    if roots is None:
        return None
    tol = mp.mpf(2) ** (-prec_bits // 2)
    points = [{sid: r} for r in roots]
    for p in polys[1:]:
        new_points = []
        for pt in points:
            free = [v for v in p.variables() if v not in pt]
            if not free:
                if abs(_poly_eval(p, pt)) > tol:
                    continue
                new_points.append(pt)
                continue
            if len(free) > 1:
                return None
            v = free[0]
            if p.degree_in(v) != 1:
                return None
            num = mp.mpc(0)
            den = mp.mpc(0)
            for m, c in p.terms:
                t = _as_mpc(c)
                ev = m.exponent(v)
                for s, e in m.exps:
                    if s != v:
                        t *= pt[s] ** e
                if ev == 0:
                    num += t
                else:
                    den += t
            if abs(den) < tol:
                return None
            q = dict(pt)
            q[v] = -num / den
            new_points.append(q)
        points = new_points
    return points, tol


def _pairing_status_exact(system: TriangularSystem, pairing: dict[int, int],
                          reg) -> str | None:
    """Decide conjugation consistency from rational pins and torus relations.

    Returns "kept"/"dropped" when decidable exactly, None otherwise.
    """
    gb = buchberger(list(system.polys), grevlex_order(reg))
    if gb.is_trivial:
        return "dropped"
    full = dict(pairing)
    for a, b in list(pairing.items()):
        full.setdefault(b, a)

    def nf_const(p: Polynomial):
        r = normal_form(p, gb.generators, gb.order)
        if r.is_zero:
            return MPQ(0)
        if r.is_constant:
            return r.constant_value()
        return None

    decided = True
    for a, b in sorted(pairing.items()):
        va = nf_const(Polynomial.variable(reg, reg.symbol(a)))
        vb = nf_const(Polynomial.variable(reg, reg.symbol(b)))
        if va is not None and vb is not None:
            if va != vb:   # rational values must be equal (real conjugates)
                return "dropped"
            continue
        if va is not None or vb is not None:
            # one side pinned to a rational, the other must match it
            pinned = va if va is not None else vb
            other = reg.symbol(b if va is not None else a)
            diff = normal_form(Polynomial.variable(reg, other)
                               - Polynomial.constant(reg, pinned),
                               gb.generators, gb.order)
            if diff.is_zero:
                continue
            decided = False
            continue
        # torus test: is the pair product pinned to a rational?
        prod = Polynomial.variable(reg, reg.symbol(a)) * \
            Polynomial.variable(reg, reg.symbol(b))
        r = nf_const(prod)
        if r is None:
            decided = False
            continue
        if r < 0:
            return "dropped"   # |v|^2 cannot be negative
    return "kept" if decided else None


def conjugation_filter(systems: list[TriangularSystem],
                       pairing: dict[int, int]) -> FilterOutcome:
    """Keep the systems admitting at least one solution with every barred
    variable equal to the conjugate of its partner.

    Exact criteria (rational pins, torus products) decide most systems; the
    rest go through numeric isolation at the precision ladder.  Systems that
    cannot be certified are reported as inconclusive, never dropped silently.
    """
    kept: list[TriangularSystem] = []
    dropped: list[TriangularSystem] = []
    inconclusive: list[TriangularSystem] = []
    for system in systems:
        reg = system.polys[0].reg if system.polys else None
        if reg is None:
            continue
        verdict = _pairing_status_exact(system, pairing, reg)
        if verdict == "kept":
            kept.append(system)
            continue
        if verdict == "dropped":
            dropped.append(system)
            continue
        verdict = None
        for prec in PRECISION_LADDER:
            got = _numeric_points(system, prec)
            if got is None:
                break
            points, tol = got
            if not points:
                verdict = "dropped"
                break
            consistent = []
            uncertain = False
            for pt in points:
                ok = True
                for a, b in pairing.items():
                    if a not in pt or b not in pt:
                        continue
                    delta = abs(pt[b] - mp.conj(pt[a]))
                    if delta < tol:
                        continue
                    if delta < mp.mpf(2) ** (-16):
                        uncertain = True
                    ok = False
                if ok:
                    consistent.append(pt)
            if consistent:
                verdict = "kept"
                break
            if not uncertain:
                verdict = "dropped"
                break
        if verdict == "kept":
            kept.append(system)
        elif verdict == "dropped":
            dropped.append(system)
        else:
            inconclusive.append(system)
    return FilterOutcome(kept, dropped, inconclusive)
