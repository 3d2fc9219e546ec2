"""Exact-rational rounding oracle.

Rounds a Fraction to an IEEE binary format using integer arithmetic
alone; no floating point is involved until the final exact conversion.
Used to crosscheck the package's casts and half arithmetic against
ground truth computed a completely different way.
"""

from __future__ import annotations

from fractions import Fraction

# precision bits, minimum normal exponent, maximum exponent
FORMATS = {
    "half": (11, -14, 15),
    "single": (24, -126, 127),
    "double": (53, -1022, 1023),
}


def round_to_format(q: Fraction, fmt: str) -> float:
    """Round an exact rational to the format, nearest with ties to even.

    Returns a Python float; half and single results are exactly
    representable in it, so the conversion loses nothing.
    """
    p, emin, emax = FORMATS[fmt]
    if q == 0:
        return 0.0
    sign = -1.0 if q < 0 else 1.0
    a = -q if q < 0 else q

    # nearest-even overflows once the value reaches the midpoint above max finite
    limit = (2**p - Fraction(1, 2)) * Fraction(2) ** (emax - p + 1)
    if a >= limit:
        return sign * float("inf")

    # e = floor(log2(a)) via bit lengths, corrected for the off-by-one
    e = a.numerator.bit_length() - a.denominator.bit_length()
    if Fraction(2) ** e > a:
        e -= 1
    elif Fraction(2) ** (e + 1) <= a:
        e += 1

    grid = max(e - p + 1, emin - p + 1)  # subnormals share the bottom grid
    m = a / Fraction(2) ** grid
    whole = m.numerator // m.denominator
    rem = m - whole
    half_step = Fraction(1, 2)
    if rem > half_step or (rem == half_step and whole % 2 == 1):
        whole += 1
    return sign * float(Fraction(whole) * Fraction(2) ** grid)
