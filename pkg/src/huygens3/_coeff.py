"""Exact rational coefficient backend.

gmpy2 is used when available for fast arbitrary-precision rationals; plain
fractions.Fraction is the fallback so the package stays importable without
binary dependencies.  Everything downstream goes through MPQ/MPZ so the two
backends are interchangeable.
"""

from __future__ import annotations

import fractions
import math

try:
    import gmpy2 as _gmpy2

    MPQ = _gmpy2.mpq
    MPZ = _gmpy2.mpz
    BACKEND = "gmpy2"
except ImportError:  # pragma: no cover
    _gmpy2 = None
    MPQ = fractions.Fraction
    MPZ = int
    BACKEND = "fractions"

QZERO = MPQ(0)
QONE = MPQ(1)


def qnum(q) -> int:
    return int(q.numerator)


def qden(q) -> int:
    return int(q.denominator)


def is_integer(q) -> bool:
    return q.denominator == 1


def qgcd(a: int, b: int) -> int:
    if _gmpy2 is not None:
        return int(_gmpy2.gcd(a, b))
    return math.gcd(a, b)


def qlcm(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return abs(a * b) // qgcd(a, b)


def qbits(q) -> int:
    """Bit length of a rational, used for resource capping."""
    return abs(qnum(q)).bit_length() + qden(q).bit_length()


def rational_from_string(text: str):
    """Parse 'n' or 'n/d' into an exact rational."""
    if "/" in text:
        n, d = text.split("/", 1)
        return MPQ(int(n), int(d))
    return MPQ(int(text))
