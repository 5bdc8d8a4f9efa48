"""Robust-embeddedness certification via integer separating hyperplanes.

The surface is dilated by an exact integer factor (10³² for the candidate)
so every vertex has integer coordinates; all arithmetic below is exact
integer arithmetic.  A triangle pair is *δ-separated* when it stays disjoint
(or keeps touching only at its shared vertex) under arbitrary per-vertex
z-perturbations of magnitude ≤ δ.  A normal vector N with ‖N‖_∞ < C proves
δ-separation when the relevant dot-product margins exceed 2δC, because a
z-perturbation of ≤ δ moves each dot product by at most δC:

* disjoint pair:      min_{X∈T1} ⟨X,N⟩ − max_{Y∈T2} ⟨Y,N⟩ > 2δC,
* shared vertex U:    min(⟨V1,N⟩, ⟨V2,N⟩) − ⟨U,N⟩ > 2δC   and
                      ⟨U,N⟩ − max(⟨W1,N⟩, ⟨W2,N⟩) > 2δC,

with V's the other vertices of one triangle and W's of the other.  Pairs
sharing a full edge need no test: if all other pairs are separated, two
edge-neighbors can only meet along their common edge (their remaining edges
are covered by the tested pairs).

Witness normals come from a deterministic quasi-random sequence

    ρ(n) = (⌊10⁵·L(n√2)⌋, ⌊10⁵·L(n√3)⌋, ⌊10⁵·L(n√5)⌋),   L(x) = 2(x−⌊x⌋)−1,

computed exactly via integer square roots with an explicit ambiguity check
(the floor is accepted only when the enclosure of the fractional part cannot
straddle a grid line), searched in the order n ascending, +ρ(n) before
−ρ(n).  Pairs that the sequence cannot separate within the search limits
fall back to a small table of hand-picked normals.

Certified margins transfer back to the undilated surface: δ-separation of
the dilated surface at δ = 10²⁵ means λ-robust embeddedness of the original
at λ = δ/scale = 10⁻⁷.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .mesh import EmbeddedSurface, Face, Triangulation
from .precision import CertificationError

__all__ = [
    "IntSurface",
    "PairClassification",
    "SeparationWitness",
    "EmbeddingCertificate",
    "classify_pairs",
    "rho",
    "margin_disjoint",
    "margin_shared",
    "find_normal",
    "certify_embeddedness",
    "DEFAULT_SCALE",
    "DEFAULT_DELTA",
    "DEFAULT_CAP",
    "DISJOINT_SEARCH_LIMIT",
    "SHARED_SEARCH_LIMIT",
]

IntVec3 = Tuple[int, int, int]
PairIdx = Tuple[int, int]  # indices into the face list, lower first

DEFAULT_SCALE = 10**32
DEFAULT_DELTA = 10**25
DEFAULT_CAP = 10**5
DISJOINT_SEARCH_LIMIT = 2000
SHARED_SEARCH_LIMIT = 10**5


@dataclass(frozen=True)
class IntSurface:
    """A dilated surface with exact integer vertex coordinates."""

    triangulation: Triangulation
    coords: Tuple[IntVec3, ...]
    scale: int

    @classmethod
    def from_surface(cls, S: EmbeddedSurface, scale: int) -> "IntSurface":
        coords = []
        for i, p in enumerate(S.coords):
            row = []
            for axis, c in zip("xyz", p):
                v = c * scale
                if v.denominator != 1:
                    raise ValueError(
                        f"vertex {i} {axis}-coordinate {c} is not integral at scale {scale}"
                    )
                row.append(int(v))
            coords.append(tuple(row))
        return cls(triangulation=S.triangulation, coords=tuple(coords), scale=scale)


@dataclass(frozen=True)
class PairClassification:
    """All unordered face pairs, partitioned by shared-vertex count."""

    disjoint: Tuple[PairIdx, ...]
    shared_vertex: Tuple[PairIdx, ...]
    shared_edge: Tuple[PairIdx, ...]

    @property
    def total(self) -> int:
        return len(self.disjoint) + len(self.shared_vertex) + len(self.shared_edge)


@dataclass(frozen=True)
class SeparationWitness:
    """A verified separating normal for one triangle pair."""

    pair: Tuple[Face, Face]
    kind: str  # "disjoint" or "shared_vertex"
    source: str  # "rho" or "manual"
    n: Optional[int]
    sign: Optional[int]
    normal: IntVec3
    margins: Tuple[int, ...]
    threshold: int
    cap: int

    def __post_init__(self) -> None:
        if self.kind not in ("disjoint", "shared_vertex"):
            raise ValueError(f"unknown pair kind {self.kind!r}")
        if max(abs(c) for c in self.normal) >= self.cap:
            raise ValueError(f"normal {self.normal} reaches the cap {self.cap}")
        if not all(m > self.threshold for m in self.margins):
            raise ValueError(
                f"margins {self.margins} do not all exceed the threshold {self.threshold}"
            )


@dataclass(frozen=True)
class EmbeddingCertificate:
    """Outcome of a successful robust-embeddedness certification."""

    scale: int
    delta: int
    cap: int
    robustness: Fraction  # = delta / scale, the undilated perturbation radius
    threshold: int
    witnesses: Tuple[SeparationWitness, ...]
    n_disjoint: int
    n_shared_vertex: int
    n_shared_edge: int

    def __post_init__(self) -> None:
        if self.robustness != Fraction(self.delta, self.scale):
            raise ValueError("robustness radius must equal delta/scale")
        if len(self.witnesses) != self.n_disjoint + self.n_shared_vertex:
            raise ValueError("witness count must cover every non-edge-sharing pair")


def classify_pairs(T: Triangulation) -> PairClassification:
    """Partition all C(|F|, 2) unordered face pairs by shared-vertex count."""
    disjoint: list[PairIdx] = []
    shared_vertex: list[PairIdx] = []
    shared_edge: list[PairIdx] = []
    F = T.faces
    for i in range(len(F)):
        for j in range(i + 1, len(F)):
            common = len(set(F[i]) & set(F[j]))
            if common == 0:
                disjoint.append((i, j))
            elif common == 1:
                shared_vertex.append((i, j))
            else:
                shared_edge.append((i, j))
    return PairClassification(
        disjoint=tuple(disjoint),
        shared_vertex=tuple(shared_vertex),
        shared_edge=tuple(shared_edge),
    )


def _floor_scaled_sawtooth(k: int, n: int, scale: int, digits: int = 60) -> int:
    """⌊scale · L(n·√k)⌋ with L(x) = 2(x − ⌊x⌋) − 1, exactly.

    Uses t = isqrt(k·n²·10^(2m)) = ⌊n√k·10^m⌋, so f = t mod 10^m encloses the
    fractional part in [f/10^m, (f+1)/10^m).  The floor of 2·scale·frac is
    accepted only when both interval endpoints give the same floor; otherwise
    the working precision m is raised and the computation retried (n√k is
    irrational, so some m always separates).
    """
    for m in (digits, digits + 30, digits + 90, digits + 210, digits + 450):
        pow10 = 10**m
        t = isqrt(k * n * n * pow10 * pow10)
        f = t % pow10
        lo = (2 * scale * f) // pow10
        hi = (2 * scale * (f + 1) - 1) // pow10
        if lo == hi:
            return lo - scale
    raise CertificationError(
        f"could not disambiguate the floor for sqrt({k})·{n} at {digits + 450} digits"
    )


def rho(n: int, cap: int = DEFAULT_CAP) -> IntVec3:
    """The deterministic normal-candidate sequence ρ(n); ‖ρ(n)‖_∞ ≤ cap."""
    if n < 1:
        raise ValueError(f"sequence index must be >= 1, got {n}")
    return (
        _floor_scaled_sawtooth(2, n, cap),
        _floor_scaled_sawtooth(3, n, cap),
        _floor_scaled_sawtooth(5, n, cap),
    )


def _dot(p: IntVec3, q: IntVec3) -> int:
    return p[0] * q[0] + p[1] * q[1] + p[2] * q[2]


def margin_disjoint(
    T1: Sequence[IntVec3], T2: Sequence[IntVec3], N: IntVec3
) -> int:
    """min vertex dot of T1 minus max vertex dot of T2, exact integer."""
    return min(_dot(p, N) for p in T1) - max(_dot(q, N) for q in T2)


def margin_shared(
    U: IntVec3, V1: IntVec3, V2: IntVec3, W1: IntVec3, W2: IntVec3, N: IntVec3
) -> Tuple[int, int]:
    """The two shared-vertex margins (m1, m2), exact integers.

    m1 puts both non-shared vertices of the first triangle strictly above the
    plane through the shared vertex; m2 puts both non-shared vertices of the
    second strictly below.  The second condition uses the max over W1, W2 —
    each ⟨U − W_i, N⟩ must clear the threshold individually, which is what
    the separation argument consumes.
    """
    u = _dot(U, N)
    m1 = min(_dot(V1, N), _dot(V2, N)) - u
    m2 = u - max(_dot(W1, N), _dot(W2, N))
    return m1, m2


def _shared_vertex_layout(
    f1: Face, f2: Face
) -> Tuple[int, Tuple[int, int], Tuple[int, int]]:
    """Split two one-vertex-sharing faces into (U, (V1, V2), (W1, W2))."""
    common = set(f1) & set(f2)
    if len(common) != 1:
        raise ValueError(f"faces {f1} and {f2} do not share exactly one vertex")
    u = common.pop()
    v = tuple(x for x in f1 if x != u)
    w = tuple(x for x in f2 if x != u)
    return u, v, w


def _test_normal(
    ints: IntSurface, pair: PairIdx, kind: str, N: IntVec3, threshold: int
) -> Optional[Tuple[int, ...]]:
    """Margins if N separates the pair at the threshold, else None."""
    f1 = ints.triangulation.faces[pair[0]]
    f2 = ints.triangulation.faces[pair[1]]
    if kind == "disjoint":
        m = margin_disjoint(
            [ints.coords[v] for v in f1], [ints.coords[v] for v in f2], N
        )
        return (m,) if m > threshold else None
    u, (v1, v2), (w1, w2) = _shared_vertex_layout(f1, f2)
    m1, m2 = margin_shared(
        ints.coords[u],
        ints.coords[v1],
        ints.coords[v2],
        ints.coords[w1],
        ints.coords[w2],
        N,
    )
    return (m1, m2) if m1 > threshold and m2 > threshold else None


ManualTable = Mapping[frozenset, IntVec3]


def find_normal(
    ints: IntSurface,
    pair: PairIdx,
    kind: str,
    limit: int,
    delta: int,
    cap: int = DEFAULT_CAP,
    manual_table: Optional[ManualTable] = None,
) -> Optional[SeparationWitness]:
    """First witness for one pair: n ascending, +ρ(n) before −ρ(n), then manual.

    Returns None when no candidate separates the pair — absence of a witness
    is a value here; :func:`certify_embeddedness` turns it into a failure.
    """
    threshold = 2 * delta * cap
    faces = ints.triangulation.faces
    face_pair = (faces[pair[0]], faces[pair[1]])
    for n in range(1, limit):
        base = rho(n, cap)
        if max(abs(c) for c in base) >= cap:
            continue  # cannot certify with a normal at the cap
        for sign in (1, -1):
            N = (sign * base[0], sign * base[1], sign * base[2])
            margins = _test_normal(ints, pair, kind, N, threshold)
            if margins is not None:
                return SeparationWitness(
                    pair=face_pair, kind=kind, source="rho", n=n, sign=sign,
                    normal=N, margins=margins, threshold=threshold, cap=cap,
                )
    key = frozenset(face_pair)
    if manual_table and key in manual_table:
        base = manual_table[key]
        for sign in (1, -1):
            N = (sign * base[0], sign * base[1], sign * base[2])
            margins = _test_normal(ints, pair, kind, N, threshold)
            if margins is not None:
                return SeparationWitness(
                    pair=face_pair, kind=kind, source="manual", n=None, sign=sign,
                    normal=N, margins=margins, threshold=threshold, cap=cap,
                )
    return None


def certify_embeddedness(
    S: EmbeddedSurface,
    scale: int = DEFAULT_SCALE,
    delta: int = DEFAULT_DELTA,
    cap: int = DEFAULT_CAP,
    disjoint_limit: int = DISJOINT_SEARCH_LIMIT,
    shared_limit: int = SHARED_SEARCH_LIMIT,
    manual_normals: Optional[ManualTable] = None,
) -> EmbeddingCertificate:
    """Certify that S is (delta/scale)-robustly embedded.

    Every vertex-disjoint and every one-vertex-sharing face pair must obtain
    a separating-normal witness; edge-sharing pairs are covered by the
    pair-reduction argument and are counted, not tested.  The candidate scan
    walks n once and tests all still-unwitnessed pairs against ±ρ(n), which
    reproduces exactly the per-pair first-(n, sign) witness that
    :func:`find_normal` would return, in a single pass.

    Raises :class:`CertificationError` listing the unseparated pairs if any
    pair exhausts its search limit and the manual table.
    """
    ints = IntSurface.from_surface(S, scale)
    classes = classify_pairs(ints.triangulation)
    threshold = 2 * delta * cap
    faces = ints.triangulation.faces

    pending: Dict[PairIdx, str] = {}
    for p in classes.disjoint:
        pending[p] = "disjoint"
    for p in classes.shared_vertex:
        pending[p] = "shared_vertex"

    limits = {"disjoint": disjoint_limit, "shared_vertex": shared_limit}
    witnesses: Dict[PairIdx, SeparationWitness] = {}
    max_limit = max(
        [limits[kind] for kind in set(pending.values())] or [1]
    )

    for n in range(1, max_limit):
        if not pending:
            break
        if all(n >= limits[kind] for kind in set(pending.values())):
            break
        base = rho(n, cap)
        if max(abs(c) for c in base) >= cap:
            continue
        vertex_dots = tuple(_dot(c, base) for c in ints.coords)
        for sign in (1, -1):
            for pair, kind in list(pending.items()):
                if n >= limits[kind]:
                    continue
                m = _margins_from_dots(faces, pair, kind, vertex_dots, sign)
                if all(x > threshold for x in m):
                    N = (sign * base[0], sign * base[1], sign * base[2])
                    witnesses[pair] = SeparationWitness(
                        pair=(faces[pair[0]], faces[pair[1]]), kind=kind,
                        source="rho", n=n, sign=sign, normal=N,
                        margins=m, threshold=threshold, cap=cap,
                    )
                    del pending[pair]

    for pair, kind in list(pending.items()):
        key = frozenset((faces[pair[0]], faces[pair[1]]))
        if manual_normals and key in manual_normals:
            base = manual_normals[key]
            for sign in (1, -1):
                N = (sign * base[0], sign * base[1], sign * base[2])
                margins = _test_normal(ints, pair, kind, N, threshold)
                if margins is not None:
                    witnesses[pair] = SeparationWitness(
                        pair=(faces[pair[0]], faces[pair[1]]), kind=kind,
                        source="manual", n=None, sign=sign, normal=N,
                        margins=margins, threshold=threshold, cap=cap,
                    )
                    del pending[pair]
                    break

    if pending:
        named = ", ".join(
            f"{{{faces[i]}, {faces[j]}}} [{kind}]" for (i, j), kind in sorted(pending.items())
        )
        raise CertificationError(f"no separating normal found for: {named}")

    ordered = tuple(witnesses[p] for p in sorted(witnesses))
    return EmbeddingCertificate(
        scale=scale,
        delta=delta,
        cap=cap,
        robustness=Fraction(delta, scale),
        threshold=threshold,
        witnesses=ordered,
        n_disjoint=len(classes.disjoint),
        n_shared_vertex=len(classes.shared_vertex),
        n_shared_edge=len(classes.shared_edge),
    )


def _margins_from_dots(
    faces: Tuple[Face, ...],
    pair: PairIdx,
    kind: str,
    vertex_dots: Tuple[int, ...],
    sign: int,
) -> Tuple[int, ...]:
    """Margins for one pair from precomputed per-vertex dots with +ρ(n)."""
    f1, f2 = faces[pair[0]], faces[pair[1]]
    if kind == "disjoint":
        d1 = [sign * vertex_dots[v] for v in f1]
        d2 = [sign * vertex_dots[v] for v in f2]
        return (min(d1) - max(d2),)
    u, (v1, v2), (w1, w2) = _shared_vertex_layout(f1, f2)
    du = sign * vertex_dots[u]
    m1 = min(sign * vertex_dots[v1], sign * vertex_dots[v2]) - du
    m2 = du - max(sign * vertex_dots[w1], sign * vertex_dots[w2])
    return (m1, m2)
