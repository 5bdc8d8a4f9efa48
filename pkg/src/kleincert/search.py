"""Construction pipeline: lattice rescaling, hill climbing, Newton refinement.

This module houses the non-certified half of the build: it manufactures a
candidate surface whose cone angles are numerically flat, which the
certification modules then verify rigorously.  Four stages:

1. ``prepare_from_lattice`` rescales an integer-lattice embedding into the
   model ball: translate the centroid to the origin, then scale by an exact
   rational so the largest coordinate magnitude becomes exactly 1/2.  Every
   output vertex lies in the cube [-1/2, 1/2]^3, hence strictly inside the
   unit ball (Euclidean norm at most sqrt(3)/2).
2. ``hill_climb`` minimises the maximum absolute cone defect by random
   coordinate perturbations, drawn from a counter-based deterministic
   generator (``sha256-counter``): the k-th uniform is
   ``int(sha256(tag || seed || k)) / 2**256``, converted exactly to a
   rational.  The entire trajectory is a pure function of the seed.
3. ``newton_refine`` runs Newton's method on the ten vertex heights at high
   working precision, solving each linear system by LU with partial
   pivoting, and records the defect-norm sequence so quadratic convergence
   can be checked after the fact.
4. ``truncate_coords`` truncates coordinates toward zero at a fixed decimal
   depth, producing the short exact rationals that certification consumes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from decimal import Context, Decimal, localcontext
from fractions import Fraction
from typing import List, MutableMapping, Optional, Sequence, Tuple

from .jacobian import dtheta_analytic, surface_with_heights, theta_map
from .klein import Point3
from .mesh import EmbeddedSurface, Triangulation
from .precision import CertificationError

__all__ = [
    "RNG_ALGORITHM",
    "SearchConfig",
    "CounterRng",
    "prepare_from_lattice",
    "objective",
    "hill_climb",
    "newton_refine",
    "truncate_coords",
]

#: Name of the deterministic generator used by ``hill_climb``, recorded in
#: search outputs alongside the seed.
RNG_ALGORITHM = "sha256-counter"

_TWO_POW_256 = 2**256


class CounterRng:
    """Counter-based deterministic uniform generator.

    Draw ``k`` is ``sha256(b"kleincert-search:<seed>:<k>")`` read as a
    big-endian integer and divided by 2**256, an exact rational in [0, 1).
    The stream depends only on the seed and the counter, never on platform,
    process, or call history, so searches are bit-reproducible and proposals
    could even be evaluated out of order.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed)
        self.counter = 0

    def uniform(self) -> Fraction:
        """Next uniform variate in [0, 1) as an exact rational."""
        digest = hashlib.sha256(
            b"kleincert-search:%d:%d" % (self.seed, self.counter)
        ).digest()
        self.counter += 1
        return Fraction(int.from_bytes(digest, "big"), _TWO_POW_256)


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the hill-climb and Newton stages.

    ``initial_step`` and ``decay_rejections`` define the step-size schedule:
    proposals are uniform in a cube of half-side ``step``, and ``step``
    halves after every ``decay_rejections`` consecutive rejections, never
    dropping below 10**(-climb_precision/2).  ``newton_tol`` is the target
    Euclidean defect norm for Newton; it must stay at least ten orders of
    magnitude above the working precision so the stopping test is
    trustworthy.
    """

    rng_seed: int = 2026
    initial_step: Fraction = Fraction(1, 10)
    decay_rejections: int = 200
    max_steps: int = 1000
    climb_precision: int = 50
    newton_precision: int = 400
    newton_tol: Fraction = Fraction(1, 10**35)
    truncation_digits: int = 32

    def __post_init__(self) -> None:
        object.__setattr__(self, "initial_step", Fraction(self.initial_step))
        object.__setattr__(self, "newton_tol", Fraction(self.newton_tol))
        for name in (
            "rng_seed",
            "initial_step",
            "decay_rejections",
            "max_steps",
            "climb_precision",
            "newton_precision",
            "newton_tol",
            "truncation_digits",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.newton_tol < Fraction(1, 10 ** (self.newton_precision - 10)):
            raise ValueError(
                "newton_tol must be at least 10^(10 - newton_precision); "
                f"got {self.newton_tol} at {self.newton_precision} digits"
            )

    @property
    def step_floor(self) -> Fraction:
        """Smallest step size the decay schedule may reach."""
        return Fraction(1, 10 ** (self.climb_precision // 2))


def prepare_from_lattice(
    triangulation: Triangulation, points: Sequence[Tuple[int, int, int]]
) -> EmbeddedSurface:
    """Rescale an integer-lattice embedding into the model ball.

    Translates so the vertex centroid is exactly the origin, then scales by
    the exact rational that makes the largest coordinate magnitude exactly
    1/2.  The result lies in the cube [-1/2, 1/2]^3 and hence strictly
    inside the unit ball.  Rejects fewer than four points and coincident
    point sets (which admit no such scale).
    """
    pts = [tuple(int(c) for c in p) for p in points]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points, got {len(pts)}")
    if any(len(p) != 3 for p in pts):
        raise ValueError("points must be integer 3-vectors")
    n = len(pts)
    centroid = tuple(Fraction(sum(p[j] for p in pts), n) for j in range(3))
    centered = [tuple(Fraction(p[j]) - centroid[j] for j in range(3)) for p in pts]
    spread = max(abs(c) for v in centered for c in v)
    if spread == 0:
        raise ValueError("all points coincide; cannot scale to the model ball")
    scale = Fraction(1, 2) / spread
    coords = tuple(
        Point3.of(v[0] * scale, v[1] * scale, v[2] * scale) for v in centered
    )
    return EmbeddedSurface(triangulation, coords)


def objective(surface: EmbeddedSurface, precision: int = 50) -> Decimal:
    """Maximum absolute cone defect, the quantity the hill climb minimises."""
    return theta_map(surface, precision).sup_norm()


def _perturbed(
    surface: EmbeddedSurface, deltas: Sequence[Fraction]
) -> Optional[EmbeddedSurface]:
    """Apply one perturbation triple per vertex; None if any vertex escapes."""
    coords: List[Point3] = []
    for i, p in enumerate(surface.coords):
        q = Point3.of(p.x + deltas[3 * i], p.y + deltas[3 * i + 1], p.z + deltas[3 * i + 2])
        if q.norm_sq() >= 1:
            return None
        coords.append(q)
    return EmbeddedSurface(surface.triangulation, tuple(coords))


def hill_climb(
    start: EmbeddedSurface,
    config: SearchConfig,
    steps: Optional[int] = None,
    record: Optional[MutableMapping[str, object]] = None,
    history: Optional[List[Tuple[int, Decimal]]] = None,
) -> EmbeddedSurface:
    """Greedy random search on the maximum absolute cone defect.

    Each step perturbs all ``3n`` coordinates at once, uniformly in the cube
    of half-side ``step`` (quantized toward zero on the decimal grid of
    ``config.climb_precision`` digits, which keeps coordinate denominators
    bounded over arbitrarily long runs), and accepts the proposal only if
    the objective strictly decreases.  Proposals that leave the unit ball,
    or on which the cone angles cannot be evaluated, count as rejections.
    After ``config.decay_rejections`` consecutive rejections the step
    halves (bounded below by ``config.step_floor``) and the rejection
    counter resets; it also resets on every acceptance.  The trajectory is
    a pure function of ``config.rng_seed``; budget exhaustion returns the
    best surface seen.  ``steps`` overrides ``config.max_steps`` (0 returns
    ``start`` untouched); ``record``, if given, is filled with the
    generator name, seed, and summary counters; ``history`` receives an
    ``(iteration, objective)`` pair for every acceptance.
    """
    budget = config.max_steps if steps is None else steps
    if budget < 0:
        raise ValueError("steps must be nonnegative")
    rng = CounterRng(config.rng_seed)
    n_coords = 3 * len(start.coords)
    best = start
    best_objective = objective(start, config.climb_precision)
    step = config.initial_step
    floor = config.step_floor
    grid = 10**config.climb_precision
    rejections = 0
    accepts = 0
    for iteration in range(budget):
        deltas = [
            Fraction(int((rng.uniform() * 2 - 1) * step * grid), grid)
            for _ in range(n_coords)
        ]
        proposal = _perturbed(best, deltas)
        accepted = False
        if proposal is not None:
            try:
                value = objective(proposal, config.climb_precision)
            except (CertificationError, ValueError, ZeroDivisionError):
                value = None  # degenerate geometry: treat as a rejection
            if value is not None and value < best_objective:
                best, best_objective = proposal, value
                accepted = True
        if accepted:
            accepts += 1
            rejections = 0
            if history is not None:
                history.append((iteration, best_objective))
        else:
            rejections += 1
            if rejections >= config.decay_rejections:
                step = max(step / 2, floor)
                rejections = 0
    if record is not None:
        record["algorithm"] = RNG_ALGORITHM
        record["seed"] = config.rng_seed
        record["steps"] = budget
        record["accepts"] = accepts
        record["final_step"] = step
        record["final_objective"] = best_objective
    return best


def _exact_determinant(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    """Determinant over the rationals by Gaussian elimination."""
    n = len(rows)
    a = [[Fraction(x) for x in row] for row in rows]
    det = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        inv = 1 / a[col][col]
        for r in range(col + 1, n):
            if a[r][col] == 0:
                continue
            factor = a[r][col] * inv
            for c in range(col, n):
                a[r][c] -= factor * a[col][c]
    return det


def _as_decimal(value, precision: int) -> Decimal:
    """Coerce a Jacobian entry (Decimal or rational) to a working Decimal."""
    if isinstance(value, Decimal):
        return value
    frac = Fraction(value)
    with localcontext(Context(prec=precision)):
        return Decimal(frac.numerator) / Decimal(frac.denominator)


def _lu_solve(
    matrix: Sequence[Sequence[Decimal]], rhs: Sequence[Decimal], precision: int
) -> List[Decimal]:
    """Solve a square system by LU with partial pivoting at the given digits."""
    n = len(matrix)
    with localcontext(Context(prec=precision)):
        a = [[+_as_decimal(x, precision) for x in row] for row in matrix]
        b = [+x for x in rhs]
        for col in range(n):
            pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
            if a[pivot][col] == 0:
                raise CertificationError("singular Jacobian: LU pivot vanished")
            if pivot != col:
                a[col], a[pivot] = a[pivot], a[col]
                b[col], b[pivot] = b[pivot], b[col]
            for r in range(col + 1, n):
                factor = a[r][col] / a[col][col]
                if factor == 0:
                    continue
                for c in range(col, n):
                    a[r][c] -= factor * a[col][c]
                b[r] -= factor * b[col]
        x = [Decimal(0)] * n
        for r in reversed(range(n)):
            acc = b[r]
            for c in range(r + 1, n):
                acc -= a[r][c] * x[c]
            x[r] = acc / a[r][r]
    return x


def newton_refine(
    surface: EmbeddedSurface,
    config: SearchConfig,
    trace: Optional[List[Fraction]] = None,
) -> EmbeddedSurface:
    """Newton's method on the vertex heights at high working precision.

    Iterates ``z <- z - J(z)^{-1} Theta(z)`` on the ten z-coordinates only
    (x and y stay exactly fixed), with the Jacobian evaluated analytically
    and each linear system solved by LU with partial pivoting at
    ``config.newton_precision`` digits.  Stops once the Euclidean defect
    norm is at most ``config.newton_tol`` (compared exactly via squared
    norms) or after ``config.max_steps`` iterations.  ``trace``, if given,
    receives the squared defect norm after every evaluation, so convergence
    order can be audited.  Raises if the starting Jacobian is singular as an
    exact rational matrix, or if the defect norm increases on two
    consecutive iterations.
    """
    precision = config.newton_precision
    tol_sq = config.newton_tol**2
    defect = theta_map(surface, precision)
    norm_sq = defect.norm_sq()
    if trace is not None:
        trace.append(norm_sq)
    if norm_sq <= tol_sq:
        return surface

    probe = dtheta_analytic(surface, precision=40)
    if _exact_determinant(probe.entries) == 0:
        raise CertificationError(
            "singular Jacobian at the starting surface: Newton step undefined"
        )

    jac_width = Fraction(1, 10 ** min(precision // 2, 150))
    previous = norm_sq
    increases = 0
    current = surface
    for _ in range(config.max_steps):
        jacobian = dtheta_analytic(current, precision=precision, target_width=jac_width)
        rows = jacobian.entries
        rhs = list(theta_map(current, precision).theta)
        delta = _lu_solve(rows, rhs, precision)
        heights = tuple(
            p.z - Fraction(d) for p, d in zip(current.coords, delta)
        )
        current = surface_with_heights(current, heights)
        defect = theta_map(current, precision)
        norm_sq = defect.norm_sq()
        if trace is not None:
            trace.append(norm_sq)
        if norm_sq <= tol_sq:
            return current
        if norm_sq >= previous:
            increases += 1
            if increases >= 2:
                raise CertificationError(
                    "Newton diverged: defect norm increased on two consecutive steps"
                )
        else:
            increases = 0
        previous = norm_sq
    return current


def truncate_coords(
    surface: EmbeddedSurface, digits: int = 32, which: str = "z"
) -> EmbeddedSurface:
    """Truncate coordinates toward zero at 10**(-digits).

    ``which`` selects ``"z"`` (heights only, the default) or ``"all"``.
    A surface whose coordinates already terminate within ``digits`` decimal
    places is a fixed point.
    """
    if digits <= 0:
        raise ValueError("digits must be positive")
    if which not in ("z", "all"):
        raise ValueError(f'which must be "z" or "all", got {which!r}')
    scale = 10**digits

    def cut(value: Fraction) -> Fraction:
        return Fraction(int(value * scale), scale)

    if which == "z":
        coords = tuple(Point3.of(p.x, p.y, cut(p.z)) for p in surface.coords)
    else:
        coords = tuple(
            Point3.of(cut(p.x), cut(p.y), cut(p.z)) for p in surface.coords
        )
    return EmbeddedSurface(surface.triangulation, coords)
