"""Arbitrary-precision scalars, exact rationals, and certified enclosures.

Three kinds of numbers flow through this package:

* ``Scalar`` — an arbitrary-precision decimal float, realized by the standard
  library's :class:`decimal.Decimal`.  Every public operation takes an explicit
  ``precision`` argument (decimal digits, default ``DEFAULT_PRECISION``); there
  is no ambient mutable precision state, so everything here is thread-safe.
* ``Rational`` — an exact rational, realized by :class:`fractions.Fraction`.
  All trusted comparisons in the certification paths reduce to exact rational
  (ultimately integer) arithmetic.
* :class:`Bound` — an outward-rounded interval ``[lo, hi]`` of Decimals.  Every
  operation on Bounds preserves containment: if the true real inputs lie inside
  the input Bounds, the true real output lies inside the output Bound.

On top of these sit certified enclosures of the transcendental functions used
by the geometry layers:

* :func:`taylor_exp_partial` — partial sums S_n(x) of the Taylor series of e^x,
* :func:`exp_bounds` — enclosure of e^x from S_n(x) plus the remainder
  a^(n+1)·3^a/(n+1)! valid on |x| ≤ a,
* :func:`ln_bounds` — enclosure of ln x by bisection, each trial point t
  certified via e^t ≶ x with exact rational comparisons,
* :func:`sqrt_bounds` — enclosure [x1, x2] of √x verified by exact rational
  squaring (x1² ≤ x ≤ x2²),
* :func:`hyp_bounds` — sinh/cosh/tanh enclosures from the degree-20 partial
  sums, with fixed error radii valid on [−3, 3],
* :func:`arccos_hp` — a *non-certified* high-precision arccos used only by the
  search/evaluation paths (the certificates never evaluate arccos, they only
  Lipschitz-bound it); accuracy contract |err| ≤ 10^(2−p) at precision p.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from decimal import Context, Decimal, ROUND_CEILING, ROUND_FLOOR, localcontext
from fractions import Fraction
from typing import Iterable, NamedTuple, Union

__all__ = [
    "DEFAULT_PRECISION",
    "CertificationError",
    "Bound",
    "HypBounds",
    "as_decimal",
    "as_fraction",
    "decimal_from_fraction",
    "taylor_exp_partial",
    "exp_bounds",
    "ln_bounds",
    "sqrt_bounds",
    "hyp_bounds",
    "arccos_hp",
    "pi_hp",
]

#: Default working precision in decimal digits.
DEFAULT_PRECISION = 400

ScalarLike = Union[Decimal, int, str]
NumberLike = Union[Decimal, int, str, Fraction]


class CertificationError(Exception):
    """A certificate's hypothesis or inequality chain failed.

    Raised (never swallowed) whenever a certified check does not hold; the
    message names the offending object (edge, angle, triangle pair, ...).
    """


def _context(precision: int, rounding: str | None = None) -> Context:
    if precision < 1:
        raise ValueError(f"precision must be >= 1, got {precision}")
    ctx = Context(prec=precision)
    if rounding is not None:
        ctx.rounding = rounding
    return ctx


def as_decimal(x: ScalarLike) -> Decimal:
    """Convert ``x`` to Decimal exactly (no rounding).

    Accepts Decimal, int, and decimal strings (scientific notation included).
    Floats are rejected: binary floats do not round-trip decimal strings.
    """
    if isinstance(x, Decimal):
        return x
    if isinstance(x, (int, str)):
        return Decimal(x)
    raise TypeError(f"expected Decimal, int or decimal string, got {type(x).__name__}")


def as_fraction(x: NumberLike) -> Fraction:
    """Convert ``x`` to an exact Fraction (Decimal conversion is exact)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (Decimal, int)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(Decimal(x))
    raise TypeError(f"expected Fraction, Decimal, int or decimal string, got {type(x).__name__}")


def decimal_from_fraction(value: Fraction, precision: int, rounding: str) -> Decimal:
    """Round an exact rational to a Decimal in the given direction."""
    with localcontext(_context(precision, rounding)):
        return Decimal(value.numerator) / Decimal(value.denominator)


@dataclass(frozen=True)
class Bound:
    """An outward-rounded enclosure ``[lo, hi]`` of a real number.

    Arithmetic computes candidate endpoints at the working precision and then
    widens each endpoint by one unit in the last place, which dominates the
    at-most-half-ulp rounding of each elementary Decimal operation.  Division
    rejects divisor Bounds containing zero.
    """

    lo: Decimal
    hi: Decimal

    def __post_init__(self) -> None:
        if self.lo.is_nan() or self.hi.is_nan():
            raise ValueError("Bound endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"Bound endpoints out of order: {self.lo} > {self.hi}")

    # -- constructors --------------------------------------------------

    @classmethod
    def point(cls, x: ScalarLike) -> "Bound":
        d = as_decimal(x)
        return cls(d, d)

    @classmethod
    def from_fraction(cls, value: Fraction, precision: int = DEFAULT_PRECISION) -> "Bound":
        """Tightest Bound around an exact rational at the given precision."""
        return cls.from_fraction_pair(value, value, precision)

    @classmethod
    def from_fraction_pair(
        cls, lo: Fraction, hi: Fraction, precision: int = DEFAULT_PRECISION
    ) -> "Bound":
        """Bound [lo, hi] from exact rational endpoints, rounded outward."""
        if lo > hi:
            raise ValueError(f"endpoints out of order: {lo} > {hi}")
        return cls(
            decimal_from_fraction(lo, precision, ROUND_FLOOR),
            decimal_from_fraction(hi, precision, ROUND_CEILING),
        )

    # -- exact queries ---------------------------------------------------

    @property
    def lo_fraction(self) -> Fraction:
        return Fraction(self.lo)

    @property
    def hi_fraction(self) -> Fraction:
        return Fraction(self.hi)

    def contains(self, x: NumberLike) -> bool:
        """Exact containment test (no rounding)."""
        xf = as_fraction(x)
        return Fraction(self.lo) <= xf <= Fraction(self.hi)

    def strictly_positive(self) -> bool:
        return self.lo > 0

    def strictly_negative(self) -> bool:
        return self.hi < 0

    def width(self, precision: int = DEFAULT_PRECISION) -> Decimal:
        with localcontext(_context(precision, ROUND_CEILING)):
            return self.hi - self.lo

    def width_fraction(self) -> Fraction:
        return Fraction(self.hi) - Fraction(self.lo)

    def midpoint(self, precision: int = DEFAULT_PRECISION) -> Decimal:
        with localcontext(_context(precision)):
            return (self.lo + self.hi) / 2

    # -- outward-rounded arithmetic ---------------------------------------

    @staticmethod
    def _outward(candidates_lo: Iterable[Decimal], candidates_hi: Iterable[Decimal], ctx: Context) -> "Bound":
        lo = ctx.next_minus(min(candidates_lo))
        hi = ctx.next_plus(max(candidates_hi))
        return Bound(lo, hi)

    def add(self, other: "Bound", precision: int = DEFAULT_PRECISION) -> "Bound":
        ctx = _context(precision)
        return self._outward([ctx.add(self.lo, other.lo)], [ctx.add(self.hi, other.hi)], ctx)

    def sub(self, other: "Bound", precision: int = DEFAULT_PRECISION) -> "Bound":
        ctx = _context(precision)
        return self._outward([ctx.subtract(self.lo, other.hi)], [ctx.subtract(self.hi, other.lo)], ctx)

    def mul(self, other: "Bound", precision: int = DEFAULT_PRECISION) -> "Bound":
        ctx = _context(precision)
        products = [
            ctx.multiply(self.lo, other.lo),
            ctx.multiply(self.lo, other.hi),
            ctx.multiply(self.hi, other.lo),
            ctx.multiply(self.hi, other.hi),
        ]
        return self._outward(products, products, ctx)

    def div(self, other: "Bound", precision: int = DEFAULT_PRECISION) -> "Bound":
        if other.lo <= 0 <= other.hi:
            raise ZeroDivisionError(f"divisor Bound contains zero: [{other.lo}, {other.hi}]")
        ctx = _context(precision)
        quotients = [
            ctx.divide(self.lo, other.lo),
            ctx.divide(self.lo, other.hi),
            ctx.divide(self.hi, other.lo),
            ctx.divide(self.hi, other.hi),
        ]
        return self._outward(quotients, quotients, ctx)

    def neg(self) -> "Bound":
        return Bound(-self.hi, -self.lo)

    def __repr__(self) -> str:  # compact: full precision stays available via .lo/.hi
        return f"Bound({self.lo}, {self.hi})"


class HypBounds(NamedTuple):
    """Certified enclosures of sinh, cosh and tanh at a common argument."""

    sinh: Bound
    cosh: Bound
    tanh: Bound


# ---------------------------------------------------------------------------
# exp / ln / sqrt enclosures
# ---------------------------------------------------------------------------


def _exp_taylor_fraction(x: Fraction, n: int) -> Fraction:
    """Exact rational value of S_n(x) = sum_{k<=n} x^k / k!."""
    term = Fraction(1)
    total = Fraction(1)
    for k in range(1, n + 1):
        term *= x / k
        total += term
    return total


def taylor_exp_partial(x: ScalarLike, n: int, precision: int = DEFAULT_PRECISION) -> Decimal:
    """The n-th partial sum S_n(x) of the Taylor series of e^x.

    The sum is accumulated exactly in rational arithmetic and rounded once to
    the working precision, so the result is the correctly rounded value of the
    exact partial sum.
    """
    if n < 0:
        raise ValueError(f"order must be >= 0, got {n}")
    value = _exp_taylor_fraction(as_fraction(x), n)
    with localcontext(_context(precision)):
        return Decimal(value.numerator) / Decimal(value.denominator)


def _exp_remainder(a: int, n: int) -> Fraction:
    """Taylor remainder cap a^(n+1) * 3^a / (n+1)! valid on [-a, a]."""
    return Fraction(a ** (n + 1) * 3**a, math.factorial(n + 1))


def exp_bounds(
    x: NumberLike, a: int, n: int = 20, precision: int = DEFAULT_PRECISION
) -> Bound:
    """Certified enclosure of e^x for |x| ≤ a, a a positive integer.

    The enclosure is S_n(x) ± a^(n+1)·3^a/(n+1)!, evaluated exactly in rational
    arithmetic, rounded outward, and widened one ulp per endpoint.
    """
    if not isinstance(a, int) or a < 1:
        raise ValueError(f"a must be a positive integer, got {a!r}")
    if n < 0:
        raise ValueError(f"order must be >= 0, got {n}")
    xf = as_fraction(x)
    if abs(xf) > a:
        raise ValueError(f"|x| = {abs(xf)} exceeds the stated range bound a = {a}")
    s = _exp_taylor_fraction(xf, n)
    r = _exp_remainder(a, n)
    ctx = _context(precision)
    lo = ctx.next_minus(decimal_from_fraction(s - r, precision, ROUND_FLOOR))
    hi = ctx.next_plus(decimal_from_fraction(s + r, precision, ROUND_CEILING))
    return Bound(lo, hi)


def _classify_exp(t: Decimal, x: Fraction, precision: int) -> int:
    """Certified comparison of e^t against x: -1 if e^t < x, +1 if e^t > x.

    The only rational point with rational exponential is t = 0, handled by
    exact comparison (0 when e^0 = x exactly); everywhere else e^t is
    irrational, so a high enough Taylor order always separates it from
    rational x.  Raises if separation is not reached by order 640.
    """
    if t == 0:
        if x == 1:
            return 0
        return -1 if x > 1 else 1
    a = max(1, math.ceil(abs(Fraction(t))))
    n = 20
    while n <= 640:
        enclosure = exp_bounds(t, a, n, precision)
        if Fraction(enclosure.hi) <= x:
            return -1
        if Fraction(enclosure.lo) >= x:
            return 1
        n *= 2
    raise CertificationError(
        f"exp enclosure at t = {t} cannot separate e^t from {x} (raise the working precision)"
    )


def ln_bounds(x: NumberLike, target_width: NumberLike, precision: int = DEFAULT_PRECISION) -> Bound:
    """Certified enclosure [a, b] of ln x with b − a ≤ target_width.

    Starts from an integer bracket and bisects; a trial point t is accepted on
    the left iff e^t ≤ x and on the right iff e^t ≥ x, both certified through
    :func:`exp_bounds` with exact rational comparisons.
    """
    xf = as_fraction(x)
    if xf <= 0:
        raise ValueError(f"ln is only defined for positive x, got {x}")
    tw = as_fraction(target_width)
    if tw <= 0:
        raise ValueError(f"target width must be positive, got {target_width}")
    if tw < Fraction(10) ** (10 - precision):
        raise ValueError(
            f"target width {target_width} is below what precision {precision} can bisect"
        )

    # Integer bracket around ln x, seeded by the (correctly rounded, but here
    # untrusted) library logarithm and then verified by certified comparisons.
    with localcontext(_context(30)):
        hint = (Decimal(xf.numerator) / Decimal(xf.denominator)).ln()
    a = int(hint.to_integral_value(rounding=ROUND_FLOOR)) - 1
    b = int(hint.to_integral_value(rounding=ROUND_CEILING)) + 1
    while _classify_exp(Decimal(a), xf, precision) > 0:
        a -= 1
    while _classify_exp(Decimal(b), xf, precision) < 0:
        b += 1

    lo, hi = Decimal(a), Decimal(b)
    # Bisect with trial points quantized to just enough digits; this keeps
    # the exact rational Taylor sums small without affecting correctness.
    trial_digits = max(20, 10 - _fraction_exponent(tw))
    while Fraction(hi) - Fraction(lo) > tw:
        with localcontext(_context(min(precision, trial_digits))):
            mid = (lo + hi) / 2
        if not (lo < mid < hi):
            with localcontext(_context(precision)):
                mid = (lo + hi) / 2
            if not (lo < mid < hi):
                raise CertificationError(
                    f"bisection for ln {x} stalled at [{lo}, {hi}] before reaching width {target_width}"
                )
        if _classify_exp(mid, xf, precision) <= 0:
            lo = mid
        else:
            hi = mid
    return Bound(lo, hi)


def _fraction_exponent(x: Fraction) -> int:
    """floor(log10 |x|) for a positive rational, exact."""
    if x <= 0:
        raise ValueError("expected a positive rational")
    num_digits = len(str(x.numerator))
    den_digits = len(str(x.denominator))
    e = num_digits - den_digits
    # Correct the off-by-one from digit counting.
    while Fraction(10) ** e > x:
        e -= 1
    while Fraction(10) ** (e + 1) <= x:
        e += 1
    return e


def sqrt_bounds(
    x: NumberLike, target_width: NumberLike | None = None, precision: int = DEFAULT_PRECISION
) -> Bound:
    """Certified enclosure [x1, x2] of √x with x1² ≤ x ≤ x2² verified exactly.

    The candidate endpoints come from the correctly rounded Decimal square
    root; the defining inequalities are then *verified* by exact rational
    squaring, stepping the endpoints outward by ulps if verification fails.
    Exact squares collapse to zero-width Bounds.  If ``target_width`` is given
    and the enclosure is wider, the working precision is raised internally.
    """
    xf = as_fraction(x)
    if xf < 0:
        raise ValueError(f"sqrt is only defined for x >= 0, got {x}")
    if xf == 0:
        return Bound(Decimal(0), Decimal(0))
    tw = None if target_width is None else as_fraction(target_width)
    if tw is not None and tw <= 0:
        raise ValueError(f"target width must be positive, got {target_width}")

    p = precision
    for _ in range(64):
        ctx = _context(p)
        with localcontext(ctx):
            hint = (Decimal(xf.numerator) / Decimal(xf.denominator)).sqrt()
        lo = hi = hint
        while Fraction(lo) ** 2 > xf:
            lo = ctx.next_minus(lo)
        while Fraction(hi) ** 2 < xf:
            hi = ctx.next_plus(hi)
        if Fraction(lo) ** 2 == xf:
            return Bound(lo, lo)
        if Fraction(hi) ** 2 == xf:
            return Bound(hi, hi)
        bound = Bound(lo, hi)
        if tw is None or bound.width_fraction() <= tw:
            return bound
        # Raise precision enough to reach the requested width and retry.
        p += max(16, _fraction_exponent(bound.width_fraction()) - _fraction_exponent(tw) + 4)
    raise CertificationError(f"sqrt enclosure for {x} did not reach width {target_width}")


# ---------------------------------------------------------------------------
# hyperbolic function enclosures (degree-20 partial sums, range [-3, 3])
# ---------------------------------------------------------------------------

_SINH_COSH_RADIUS = Fraction(1, 10**8)
_TANH_RADIUS = Fraction(1, 10**6)


def hyp_bounds(x: NumberLike, precision: int = DEFAULT_PRECISION) -> HypBounds:
    """Certified sinh/cosh/tanh enclosures for |x| ≤ 3.

    Built from the exact rational values of the odd/even parts of S_20 at ±x,
    widened by the error radii 10⁻⁸ (sinh, cosh) and 10⁻⁶ (tanh) that the
    degree-20 remainder analysis guarantees on [−3, 3].  Arguments outside
    [−3, 3] are rejected — the radii are not valid there, the caller must
    rescale.
    """
    xf = as_fraction(x)
    if abs(xf) > 3:
        raise ValueError(f"hyp_bounds only covers [-3, 3], got {x}")
    plus = _exp_taylor_fraction(xf, 20)
    minus = _exp_taylor_fraction(-xf, 20)
    s = (plus - minus) / 2
    c = (plus + minus) / 2
    t = (plus - minus) / (plus + minus)
    return HypBounds(
        sinh=Bound.from_fraction_pair(s - _SINH_COSH_RADIUS, s + _SINH_COSH_RADIUS, precision),
        cosh=Bound.from_fraction_pair(c - _SINH_COSH_RADIUS, c + _SINH_COSH_RADIUS, precision),
        tanh=Bound.from_fraction_pair(t - _TANH_RADIUS, t + _TANH_RADIUS, precision),
    )


# ---------------------------------------------------------------------------
# pi and the high-precision (non-certified) arccos
# ---------------------------------------------------------------------------


def _machin_arctan_inv_scaled(m: int, scale_power: int) -> int:
    """floor-accurate arctan(1/m) scaled by 10^scale_power.

    Alternating-series evaluation in pure integer arithmetic; each term is
    floor-divided (error < 1 unit) and the truncation error is below the first
    omitted term, so the total error is under (#terms + 1) units.
    """
    scaled = 10**scale_power
    total = 0
    k = 0
    while True:
        term = scaled // ((2 * k + 1) * m ** (2 * k + 1))
        if term == 0:
            break
        total += term if k % 2 == 0 else -term
        k += 1
    return total


@functools.lru_cache(maxsize=16)
def pi_hp(precision: int) -> Decimal:
    """π to the requested precision via Machin's formula.

    π = 16·arctan(1/5) − 4·arctan(1/239), evaluated in scaled-integer
    arithmetic with an explicit error budget:  each series contributes at most
    (#terms + 1) floor-units at scale 10^−(precision+15), multiplied by the
    coefficients 16 and 4, which keeps the absolute error below
    10^−(precision+8).
    """
    scale_power = precision + 15
    scaled = 16 * _machin_arctan_inv_scaled(5, scale_power) - 4 * _machin_arctan_inv_scaled(
        239, scale_power
    )
    with localcontext(_context(precision + 9)):
        return Decimal(scaled) / Decimal(10**scale_power)


def two_pi(precision: int) -> Decimal:
    """2π at the requested precision (shared by the cone-defect code)."""
    with localcontext(_context(precision + 5)):
        return 2 * pi_hp(precision)


def _arcsin_maclaurin(y: Decimal, work_precision: int) -> Decimal:
    """Maclaurin series of arcsin on |y| ≤ 1/2, summed at work precision.

    Terms obey t_{k+1} = t_k · y² · (2k+1)² / ((2k+2)(2k+3)); with |y| ≤ 1/2
    the terms shrink by at least a factor 4 per step, so the loop terminates
    after O(work_precision) terms.
    """
    with localcontext(_context(work_precision)):
        if y == 0:
            return Decimal(0)
        eps = Decimal(10) ** (-(work_precision - 2))
        y2 = y * y
        term = y
        total = y
        k = 0
        while abs(term) > eps:
            term = term * y2 * ((2 * k + 1) * (2 * k + 1)) / ((2 * k + 2) * (2 * k + 3))
            total += term
            k += 1
        return total


def _arcsin_hp(y: Decimal, work_precision: int) -> Decimal:
    with localcontext(_context(work_precision)):
        if abs(y) <= Decimal("0.5"):
            return _arcsin_maclaurin(y, work_precision)
        half_pi = pi_hp(work_precision) / 2
        reduced = ((1 - abs(y)) / 2).sqrt()
        value = half_pi - 2 * _arcsin_maclaurin(reduced, work_precision)
        return value if y > 0 else -value


def arccos_hp(x: ScalarLike, precision: int = DEFAULT_PRECISION) -> Decimal:
    """High-precision arccos with accuracy |err| ≤ 10^(2−p) at precision p.

    Computed as π/2 − arcsin(x), with arcsin by its Maclaurin series for
    |x| ≤ 1/2 and by the half-angle identity
    arcsin x = π/2 − 2·arcsin(√((1−x)/2)) otherwise.  This is the search-path
    evaluator; the certification paths never call it.
    """
    xd = as_decimal(x)
    if not (-1 <= xd <= 1):
        raise ValueError(f"arccos is only defined on [-1, 1], got {x}")
    work = precision + 10
    with localcontext(_context(work)):
        value = pi_hp(work) / 2 - _arcsin_hp(xd, work)
    with localcontext(_context(precision)):
        return +value
