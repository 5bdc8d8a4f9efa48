"""Geometry of the Beltrami-Klein model of hyperbolic 3-space.

Points of the model live in the open unit ball of R³; geodesics are Euclidean
chords.  At a point X with a_X = 1 − ‖X‖², the Riemannian metric applied to
tangent vectors V, W is

    ⟨V, W⟩_X = (a_X·⟨V, W⟩ + ⟨X, V⟩·⟨X, W⟩) / a_X² ,

a rational function of rational inputs — so inner products, squared cosines
and sign decisions are computed *exactly* here.  Only two irrational steps
exist in this module, and both return certified objects or carry an explicit
accuracy contract:

* :func:`distance` returns a :class:`~kleincert.precision.Bound` on the
  hyperbolic distance, built from certified sqrt/ln enclosures of the exact
  chord data;
* :func:`angle` evaluates arccos through the high-precision (search-path)
  evaluator; certificates never consume it — they work with the exact squared
  cosine from :func:`cos2_and_sign`.
"""

from __future__ import annotations

from decimal import Context, Decimal, localcontext
from fractions import Fraction
from typing import NamedTuple, Union

from .precision import (
    DEFAULT_PRECISION,
    Bound,
    arccos_hp,
    as_fraction,
    ln_bounds,
    sqrt_bounds,
)

__all__ = [
    "Point3",
    "klein_inner",
    "cos2_and_sign",
    "angle",
    "distance",
    "norm_comparison_factor",
]

CoordLike = Union[Fraction, int, str, Decimal]


class Point3(NamedTuple):
    """A point of (or vector in) R³ with exact rational coordinates.

    Model points must satisfy ‖P‖ < 1; free vectors (differences of points)
    carry no constraint.  Use :meth:`in_unit_ball` to check exactly.
    """

    x: Fraction
    y: Fraction
    z: Fraction

    @classmethod
    def of(cls, x: CoordLike, y: CoordLike, z: CoordLike) -> "Point3":
        return cls(as_fraction(x), as_fraction(y), as_fraction(z))

    def sub(self, other: "Point3") -> "Point3":
        return Point3(self.x - other.x, self.y - other.y, self.z - other.z)

    def add(self, other: "Point3") -> "Point3":
        return Point3(self.x + other.x, self.y + other.y, self.z + other.z)

    def scale(self, s: Fraction) -> "Point3":
        return Point3(self.x * s, self.y * s, self.z * s)

    def dot(self, other: "Point3") -> Fraction:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm_sq(self) -> Fraction:
        return self.dot(self)

    def is_zero(self) -> bool:
        return self.x == 0 and self.y == 0 and self.z == 0

    def in_unit_ball(self) -> bool:
        return self.norm_sq() < 1


def _require_model_point(X: Point3) -> Fraction:
    """Return a_X = 1 − ‖X‖², rejecting points outside the open unit ball."""
    a = 1 - X.norm_sq()
    if a <= 0:
        raise ValueError(f"point {tuple(X)} lies outside the open unit ball")
    return a


def klein_inner(X: Point3, V: Point3, W: Point3) -> Fraction:
    """Exact metric inner product ⟨V, W⟩_X at the model point X."""
    a = _require_model_point(X)
    return (a * V.dot(W) + X.dot(V) * X.dot(W)) / (a * a)


def cos2_and_sign(X: Point3, Y: Point3, Z: Point3) -> tuple[Fraction, int]:
    """Exact squared cosine and sign of the angle at X between rays to Y, Z.

    With V = Y − X and W = Z − X, returns (A, σ) where
    A = ⟨V,W⟩²_X / (⟨V,V⟩_X·⟨W,W⟩_X) and σ is the exact sign of ⟨V,W⟩_X,
    so that cos θ = σ·√A.  The sign is an exact rational decision — the
    arccos branch must never rest on a rounded dot product.
    """
    V = Y.sub(X)
    W = Z.sub(X)
    if V.is_zero() or W.is_zero():
        raise ValueError("angle is undefined when Y = X or Z = X")
    g_vw = klein_inner(X, V, W)
    g_vv = klein_inner(X, V, V)
    g_ww = klein_inner(X, W, W)
    A = g_vw * g_vw / (g_vv * g_ww)
    sigma = 0 if g_vw == 0 else (1 if g_vw > 0 else -1)
    return A, sigma


def angle(X: Point3, Y: Point3, Z: Point3, precision: int = DEFAULT_PRECISION) -> Decimal:
    """The angle θ = arccos(σ·√A) ∈ [0, π] at X, accuracy 10^(2−p).

    This is the non-certified evaluator used by the cone-angle and search
    paths; certificates work with the exact (A, σ) pair instead.
    """
    A, sigma = cos2_and_sign(X, Y, Z)
    if sigma == 0:
        return arccos_hp(0, precision)
    root = sqrt_bounds(A, Fraction(1, 10 ** (precision + 2)), precision + 10)
    with localcontext(Context(prec=precision + 10)):
        cos_theta = root.midpoint(precision + 10)
        if cos_theta > 1:
            cos_theta = Decimal(1)
        if sigma < 0:
            cos_theta = -cos_theta
    return arccos_hp(cos_theta, precision)


def distance(
    X: Point3,
    Y: Point3,
    target_width: CoordLike = "1e-8",
    precision: int = DEFAULT_PRECISION,
) -> Bound:
    """Certified Bound on the hyperbolic distance between model points.

    With a = ⟨Y−X, Y−X⟩, b = 2⟨X, Y−X⟩, c = ⟨X, X⟩ − 1 and Δ = b² − 4ac,
    the distance along the chord is

        d = ln(√Δ − b − 2c) − ½·ln(4c² + 4ac + 4bc).

    All polynomial quantities are exact rationals; √Δ and both logarithms are
    certified enclosures, combined outward, so the result contains the true
    distance.  ``target_width`` controls each logarithm's enclosure width.
    """
    _require_model_point(X)
    _require_model_point(Y)
    D = Y.sub(X)
    if D.is_zero():
        raise ValueError("distance requires X != Y")
    a = D.dot(D)
    b = 2 * X.dot(D)
    c = X.norm_sq() - 1
    delta = b * b - 4 * a * c
    if delta <= 0:
        raise ValueError("chord discriminant must be positive for X != Y in the ball")

    tw = as_fraction(target_width)
    root = sqrt_bounds(delta, tw / 4, precision)
    arg1_lo = Fraction(root.lo) - b - 2 * c
    arg1_hi = Fraction(root.hi) - b - 2 * c
    arg2 = 4 * c * c + 4 * a * c + 4 * b * c
    if arg1_lo <= 0 or arg2 <= 0:
        raise ValueError("logarithm arguments must be positive for model points")

    ln1_lo = ln_bounds(arg1_lo, tw / 4, precision)
    ln1_hi = ln1_lo if arg1_hi == arg1_lo else ln_bounds(arg1_hi, tw / 4, precision)
    ln2 = ln_bounds(arg2, tw / 4, precision)
    lo = Fraction(ln1_lo.lo) - Fraction(ln2.hi) / 2
    hi = Fraction(ln1_hi.hi) - Fraction(ln2.lo) / 2
    return Bound.from_fraction_pair(lo, hi, precision)


def norm_comparison_factor(r: CoordLike) -> Fraction:
    """The factor 1/(1−r²)² with ‖V‖² ≤ ⟨V,V⟩_X ≤ factor·‖V‖² for ‖X‖ ≤ r."""
    rf = as_fraction(r)
    if not 0 < rf < 1:
        raise ValueError(f"radius must lie in (0, 1), got {r}")
    s = 1 - rf * rf
    return 1 / (s * s)
