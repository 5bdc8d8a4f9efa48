"""Tests for the construction pipeline: lattice rescaling, hill climbing,
Newton refinement on vertex heights, and coordinate truncation."""

import math
from decimal import Context, Decimal, localcontext
from fractions import Fraction as F

import pytest

from kleincert.jacobian import JacobianMatrix, reference_jacobian, theta_map
from kleincert.klein import Point3
from kleincert.mesh import EmbeddedSurface, Triangulation
from kleincert.precision import CertificationError, two_pi
from kleincert.search import (
    RNG_ALGORITHM,
    CounterRng,
    SearchConfig,
    hill_climb,
    newton_refine,
    objective,
    prepare_from_lattice,
    truncate_coords,
)

# Nearest 5x5x5 lattice points to the candidate's vertices (k = round(3c + 2)),
# the starting sketch for the recorded hill-climb run.
LATTICE_SKETCH = (
    (4, 2, 3), (1, 4, 1), (3, 0, 1), (1, 0, 1), (0, 2, 1),
    (2, 4, 2), (0, 2, 3), (4, 2, 1), (2, 3, 1), (2, 2, 4),
)


def _log10_of_norm(norm_sq: F) -> float:
    """log10 of the Euclidean norm given its exact square."""
    num, den = norm_sq.numerator, norm_sq.denominator
    ln = len(str(num))
    ld = len(str(den))
    mantissa = math.log10(float(F(num, 10**ln) / F(den, 10**ld)))
    return (ln - ld + mantissa) / 2


@pytest.fixture(scope="module")
def prepared_sketch(candidate_surface) -> EmbeddedSurface:
    return prepare_from_lattice(candidate_surface.triangulation, LATTICE_SKETCH)


@pytest.fixture(scope="module")
def bipyramid_3pi() -> EmbeddedSurface:
    """Hexagonal bipyramid whose north pole has cone angle exactly 3*pi.

    The six rim vertices pleat through the axis directions twice (radii 1/10
    and 2/10), so the six corner angles at the origin are each exactly pi/2;
    every other vertex was checked to have defect magnitude below pi - 1/5.
    """
    faces = (
        (0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 6), (0, 6, 1),
        (7, 2, 1), (7, 3, 2), (7, 4, 3), (7, 5, 4), (7, 6, 5), (7, 1, 6),
    )
    coords = (
        (F(0), F(0), F(0)),
        (F(1, 10), F(0), F(0)),
        (F(0), F(1, 10), F(0)),
        (F(-1, 10), F(0), F(0)),
        (F(0), F(-1, 10), F(0)),
        (F(2, 10), F(0), F(0)),
        (F(0), F(2, 10), F(0)),
        (F(0), F(0), F(-3, 10)),
    )
    return EmbeddedSurface(
        Triangulation(8, faces), tuple(Point3.of(*c) for c in coords)
    )


@pytest.fixture(scope="module")
def newton_run(candidate_surface):
    trace: list = []
    refined = newton_refine(candidate_surface, SearchConfig(), trace=trace)
    return refined, trace


@pytest.fixture(scope="module")
def deep_newton_run(candidate_surface):
    trace: list = []
    refined = newton_refine(
        candidate_surface, SearchConfig(newton_tol=F(1, 10**150)), trace=trace
    )
    return refined, trace


# ---------------------------------------------------------------------------
# SearchConfig


def test_config_defaults_are_valid():
    cfg = SearchConfig()
    assert cfg.initial_step == F(1, 10)
    assert cfg.decay_rejections == 200
    assert cfg.newton_precision == 400
    assert cfg.newton_tol == F(1, 10**35)
    assert cfg.step_floor == F(1, 10**25)


@pytest.mark.parametrize(
    "field, value",
    [
        ("rng_seed", 0),
        ("rng_seed", -3),
        ("initial_step", F(0)),
        ("initial_step", F(-1, 10)),
        ("decay_rejections", 0),
        ("max_steps", -1),
        ("climb_precision", 0),
        ("newton_precision", -400),
        ("newton_tol", F(0)),
        ("truncation_digits", 0),
    ],
)
def test_config_rejects_nonpositive(field, value):
    with pytest.raises(ValueError, match="positive"):
        SearchConfig(**{field: value})


def test_config_tolerance_respects_precision():
    # the tolerance may not probe below ten digits above the working precision
    with pytest.raises(ValueError, match="newton_tol"):
        SearchConfig(newton_precision=40, newton_tol=F(1, 10**31))
    boundary = SearchConfig(newton_precision=40, newton_tol=F(1, 10**30))
    assert boundary.newton_tol == F(1, 10**30)


# ---------------------------------------------------------------------------
# CounterRng


def test_rng_stream_is_deterministic():
    a, b = CounterRng(2026), CounterRng(2026)
    assert [a.uniform() for _ in range(10)] == [b.uniform() for _ in range(10)]
    assert a.counter == 10


def test_rng_values_are_unit_interval_rationals():
    rng = CounterRng(1)
    draws = [rng.uniform() for _ in range(20)]
    assert all(0 <= u < 1 for u in draws)
    assert len(set(draws)) == 20
    other = CounterRng(2)
    assert [other.uniform() for _ in range(20)] != draws


def test_rng_is_counter_addressable():
    rng = CounterRng(9)
    sequence = [rng.uniform() for _ in range(5)]
    jump = CounterRng(9)
    jump.counter = 3
    assert jump.uniform() == sequence[3]


# ---------------------------------------------------------------------------
# prepare_from_lattice


def test_prepare_centers_and_scales_lattice(candidate_surface):
    surface = prepare_from_lattice(candidate_surface.triangulation, LATTICE_SKETCH)
    for axis in range(3):
        assert sum(p[axis] for p in surface.coords) == 0
    spread = max(abs(c) for p in surface.coords for c in p)
    assert spread == F(1, 2)
    assert all(p.norm_sq() <= F(3, 4) for p in surface.coords)
    assert all(isinstance(c, F) for p in surface.coords for c in p)


def test_prepare_centered_input_needs_no_translation(tetrahedron):
    points = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))
    surface = prepare_from_lattice(tetrahedron, points)
    expected = tuple(
        Point3.of(F(x, 2), F(y, 2), F(z, 2)) for x, y, z in points
    )
    assert surface.coords == expected


def test_prepare_doubling_is_invariant(candidate_surface):
    doubled = tuple(tuple(2 * c for c in p) for p in LATTICE_SKETCH)
    assert (
        prepare_from_lattice(candidate_surface.triangulation, doubled).coords
        == prepare_from_lattice(candidate_surface.triangulation, LATTICE_SKETCH).coords
    )


def test_prepare_rejects_too_few_points(tetrahedron):
    with pytest.raises(ValueError, match="at least 4"):
        prepare_from_lattice(tetrahedron, ((0, 0, 0), (1, 0, 0), (0, 1, 0)))


def test_prepare_rejects_coincident_points(tetrahedron):
    with pytest.raises(ValueError, match="coincide"):
        prepare_from_lattice(tetrahedron, ((2, 3, 1),) * 4)


def test_prepare_rejects_malformed_vectors(tetrahedron):
    with pytest.raises(ValueError, match="3-vector"):
        prepare_from_lattice(
            tetrahedron, ((0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0))
        )


# ---------------------------------------------------------------------------
# objective


def test_objective_candidate_is_numerically_flat(candidate_surface):
    assert objective(candidate_surface, 50) < Decimal("1e-28")


def test_objective_of_three_pi_cone_is_pi(bipyramid_3pi):
    value = objective(bipyramid_3pi, 40)
    with localcontext(Context(prec=50)):
        half_turn = two_pi(50) / 2
        assert abs(value - half_turn) < Decimal("1e-35")
        # the 3*pi vertex dominates: every other defect stays below pi - 1/5
        defects = theta_map(bipyramid_3pi, 40).theta
        assert all(abs(d) < half_turn - Decimal("0.2") for d in defects[1:])
        assert abs(defects[0] - half_turn) < Decimal("1e-35")


def test_objective_is_nonnegative(candidate_surface, bipyramid_3pi, prepared_sketch):
    for surface in (candidate_surface, bipyramid_3pi, prepared_sketch):
        assert objective(surface, 25) >= 0


# ---------------------------------------------------------------------------
# hill_climb


def test_climb_zero_budget_returns_start(prepared_sketch):
    cfg = SearchConfig(climb_precision=25)
    assert hill_climb(prepared_sketch, cfg, steps=0) is prepared_sketch


def test_climb_is_deterministic(prepared_sketch):
    cfg = SearchConfig(rng_seed=7, initial_step=F(1, 20), climb_precision=25)
    rec1: dict = {}
    rec2: dict = {}
    out1 = hill_climb(prepared_sketch, cfg, steps=40, record=rec1)
    out2 = hill_climb(prepared_sketch, cfg, steps=40, record=rec2)
    assert out1.coords == out2.coords
    assert rec1 == rec2
    assert rec1["algorithm"] == RNG_ALGORITHM == "sha256-counter"
    assert rec1["seed"] == 7


def test_climb_seed_changes_trajectory(prepared_sketch):
    base = dict(initial_step=F(1, 20), climb_precision=25)
    out1 = hill_climb(prepared_sketch, SearchConfig(rng_seed=7, **base), steps=40)
    out2 = hill_climb(prepared_sketch, SearchConfig(rng_seed=8, **base), steps=40)
    assert out1.coords != out2.coords


def test_climb_descends_and_history_is_monotone(prepared_sketch):
    cfg = SearchConfig(
        rng_seed=7, initial_step=F(1, 50), decay_rejections=40, climb_precision=30
    )
    record: dict = {}
    history: list = []
    out = hill_climb(prepared_sketch, cfg, steps=150, record=record, history=history)
    start_objective = objective(prepared_sketch, 30)
    assert record["final_objective"] < start_objective
    assert record["final_objective"] == objective(out, 30)
    assert record["accepts"] == len(history) > 0
    values = [v for _, v in history]
    assert all(b < a for a, b in zip(values, values[1:]))
    iterations = [k for k, _ in history]
    assert iterations == sorted(iterations)
    assert all(v < start_objective for v in values)


def test_climb_decays_step_after_consecutive_rejections(newton_run):
    refined, _ = newton_run
    # nothing improves a numerically flat surface at these step sizes, so
    # every proposal is rejected and the step halves every 5 rejections
    cfg = SearchConfig(
        rng_seed=3,
        initial_step=F(1, 100),
        decay_rejections=5,
        climb_precision=25,
    )
    record: dict = {}
    out = hill_climb(refined, cfg, steps=15, record=record)
    assert out is refined
    assert record["accepts"] == 0
    assert record["final_step"] == F(1, 800)


def test_climb_step_never_drops_below_floor(newton_run):
    refined, _ = newton_run
    cfg = SearchConfig(
        rng_seed=3, initial_step=F(1, 64), decay_rejections=1, climb_precision=4
    )
    record: dict = {}
    hill_climb(refined, cfg, steps=12, record=record)
    assert cfg.step_floor == F(1, 100)
    assert record["final_step"] == F(1, 100)


def test_climb_rejects_proposals_leaving_the_ball():
    tet = Triangulation(4, ((0, 1, 2), (0, 2, 3), (0, 3, 1), (1, 3, 2)))
    near_boundary = EmbeddedSurface(
        tet,
        (
            Point3.of(F(9, 10), 0, 0),
            Point3.of(0, F(9, 10), 0),
            Point3.of(0, 0, F(9, 10)),
            Point3.of(F(-1, 2), F(-1, 2), F(-1, 2)),
        ),
    )
    cfg = SearchConfig(
        rng_seed=1, initial_step=F(10), decay_rejections=100, climb_precision=20
    )
    record: dict = {}
    out = hill_climb(near_boundary, cfg, steps=5, record=record)
    assert record["accepts"] == 0
    assert out is near_boundary


def test_climb_rejects_negative_budget(prepared_sketch):
    with pytest.raises(ValueError, match="nonnegative"):
        hill_climb(prepared_sketch, SearchConfig(), steps=-1)


# ---------------------------------------------------------------------------
# newton_refine


def test_newton_reaches_tolerance_within_three_iterations(newton_run):
    refined, trace = newton_run
    assert len(trace) - 1 <= 3
    assert trace[-1] <= F(1, 10**35) ** 2
    assert theta_map(refined, 120).norm_sq() <= F(1, 10**70)


def test_newton_decay_is_quadratic(deep_newton_run):
    _, trace = deep_newton_run
    logs = [_log10_of_norm(t) for t in trace]
    assert len(logs) >= 4  # -31, -63, -127, -254 for the recorded run
    for before, after in zip(logs, logs[1:]):
        assert 1.9 < after / before < 2.1
        assert abs(after - 2 * before) < 3


def test_newton_preserves_xy_exactly(candidate_surface, newton_run):
    refined, _ = newton_run
    for original, updated in zip(candidate_surface.coords, refined.coords):
        assert updated.x == original.x
        assert updated.y == original.y
        assert updated.z != original.z


def test_newton_already_converged_returns_immediately(newton_run):
    refined, _ = newton_run
    trace: list = []
    again = newton_refine(refined, SearchConfig(), trace=trace)
    assert again is refined
    assert len(trace) == 1


def test_newton_budget_exhaustion_returns_last_iterate(candidate_surface):
    cfg = SearchConfig(max_steps=1, newton_tol=F(1, 10**150))
    trace: list = []
    out = newton_refine(candidate_surface, cfg, trace=trace)
    assert len(trace) == 2
    assert trace[1] > cfg.newton_tol**2
    assert out.coords != candidate_surface.coords


def test_newton_rejects_singular_jacobian(candidate_surface, monkeypatch):
    zeros = JacobianMatrix(
        entries=tuple(tuple(F(0) for _ in range(10)) for _ in range(10))
    )
    monkeypatch.setattr(
        "kleincert.search.dtheta_analytic",
        lambda surface, precision=60, target_width=None: zeros,
    )
    with pytest.raises(CertificationError, match="singular Jacobian"):
        newton_refine(candidate_surface, SearchConfig())


def test_newton_detects_divergence(candidate_surface, monkeypatch):
    # a negated identity sends the iteration the wrong way along Theta
    wrong_way = JacobianMatrix(
        entries=tuple(
            tuple(F(-1) if i == j else F(0) for j in range(10)) for i in range(10)
        )
    )
    monkeypatch.setattr(
        "kleincert.search.dtheta_analytic",
        lambda surface, precision=60, target_width=None: wrong_way,
    )
    cfg = SearchConfig(newton_precision=60, newton_tol=F(1, 10**40), max_steps=10)
    with pytest.raises(CertificationError, match="diverged"):
        newton_refine(candidate_surface, cfg)


# ---------------------------------------------------------------------------
# truncate_coords


def test_truncate_candidate_is_fixed_point(candidate_surface):
    assert truncate_coords(candidate_surface).coords == candidate_surface.coords


def test_truncate_changes_heights_below_grid(newton_run):
    refined, _ = newton_run
    cut = truncate_coords(refined)
    grid = F(1, 10**32)
    for original, truncated in zip(refined.coords, cut.coords):
        assert truncated.x == original.x and truncated.y == original.y
        assert abs(truncated.z - original.z) < grid
        assert abs(truncated.z) <= abs(original.z)  # toward zero
        assert (truncated.z * 10**32).denominator == 1


def test_truncate_all_coordinates_mode(newton_run):
    refined, _ = newton_run
    tail = F(1, 3 * 10**40)
    noisy = EmbeddedSurface(
        refined.triangulation,
        tuple(Point3.of(p.x + tail, p.y - tail, p.z) for p in refined.coords),
    )
    z_only = truncate_coords(noisy, which="z")
    assert all(p.x == q.x and p.y == q.y for p, q in zip(noisy.coords, z_only.coords))
    everything = truncate_coords(noisy, which="all")
    for p in everything.coords:
        for c in (p.x, p.y, p.z):
            assert (c * 10**32).denominator == 1


def test_truncate_validates_arguments(candidate_surface):
    with pytest.raises(ValueError, match="digits"):
        truncate_coords(candidate_surface, digits=0)
    with pytest.raises(ValueError, match="which"):
        truncate_coords(candidate_surface, which="w")


def test_truncate_objective_drift_is_first_order(newton_run):
    # truncating the refined heights moves the objective by at most ten times
    # the largest Jacobian row sum across the 1e-32 truncation grid
    refined, _ = newton_run
    row_cap = max(sum(abs(entry) for entry in row) for row in reference_jacobian())
    before = objective(refined, 60)
    after = objective(truncate_coords(refined), 60)
    budget = Decimal(10) * Decimal(float(row_cap)) * Decimal("1e-32")
    assert after <= before + budget
    assert after > before  # the tails genuinely moved
