"""Solver steps, the run loop, reduction identities, engines, error paths."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from strav import (
    CombettesSimultaneous,
    CountableFamily,
    FullySimultaneous,
    Halfspace,
    HalpernWittman,
    Identity,
    InfiniteStaticSA,
    PowerLaw,
    ProblemSpec,
    QuasiDynamicSA,
    SimultaneousSA,
    StaticProjectionSA,
    StaticSA,
    StringFamily,
    UnfitFamily,
    UserTable,
    cyclic_index,
    halpern_step,
    run,
    step_combettes,
    step_fully_simultaneous,
    step_halpern_wittman,
    step_infinite_static,
    step_quasi_dynamic,
    step_simultaneous,
    step_static,
)
from strav.operators import RelaxedProjection
from strav.strings import IndexOutOfRange

CORNER_OPS = [Halfspace([1.0, 0.0], 0.0), Halfspace([0.0, 1.0], 0.0)]
U = np.array([2.0, 2.0])
LAMBDA_ZERO = UserTable([0.0], PowerLaw())


def shrinking(i):
    return Halfspace([1.0, 0.0], 1.0 + 1.0 / i)


def corner_problem(**kw):
    return ProblemSpec(operators=CORNER_OPS, anchor=U, **kw)


def test_halpern_step_endpoints_and_midpoint():
    s = np.array([0.0, 0.0])
    assert_array_equal(halpern_step(U, 1.0, s), U)
    assert_array_equal(halpern_step(U, 0.0, s), s)
    assert_array_equal(halpern_step(U, 0.5, s), [1.0, 1.0])


def test_halpern_step_rejects_bad_lambda():
    with pytest.raises(ValueError):
        halpern_step(U, 1.5, np.zeros(2))
    with pytest.raises(ValueError):
        halpern_step(U, -0.1, np.zeros(2))


def test_cyclic_index_is_one_based():
    assert cyclic_index(0, 3) == 1
    assert cyclic_index(2, 3) == 3
    assert cyclic_index(3, 3) == 1
    assert cyclic_index(17, 1) == 1


def test_static_step_with_lambda_one_returns_the_anchor():
    fam = StringFamily(((1,), (2,)), (0.5, 0.5))
    out = step_static(CORNER_OPS, fam, U, PowerLaw(), U, 0)
    assert_array_equal(out, U)


def test_static_step_hand_evaluation():
    # inner average of (2,2) is (1,1); the step blends it with the anchor
    fam = StringFamily(((1,), (2,)), (0.5, 0.5))
    out = step_static(CORNER_OPS, fam, U, PowerLaw(0.5, 1.0), U, 0)
    assert_array_equal(out, [1.5, 1.5])


def test_static_step_single_string_is_pure_composition():
    fam = StringFamily(((1, 2),), (1.0,))
    out = step_static(CORNER_OPS, fam, U, LAMBDA_ZERO, [2.0, 3.0], 0)
    assert_array_equal(out, [0.0, 0.0])


def test_quasi_dynamic_cycles_through_the_schedule():
    first = StringFamily(((1,),), (1.0,))
    second = StringFamily(((2,),), (1.0,))
    x = np.array([2.0, 3.0])
    k0 = step_quasi_dynamic(CORNER_OPS, [first, second], U, LAMBDA_ZERO, x, 0)
    assert_array_equal(k0, [0.0, 3.0])  # schedule entry 1 applies T_1 only
    one = UserTable([0.0, 0.0], PowerLaw())
    k1 = step_quasi_dynamic(CORNER_OPS, [first, second], U, one, x, 1)
    assert_array_equal(k1, [2.0, 0.0])  # entry 2 applies T_2 only


def test_quasi_dynamic_wraps_around():
    first = StringFamily(((1,),), (1.0,))
    second = StringFamily(((2,),), (1.0,))
    steering = UserTable([0.0] * 8, PowerLaw())
    x = np.array([2.0, 3.0])
    # 4 mod 2 selects the first schedule entry again
    k4 = step_quasi_dynamic(CORNER_OPS, [first, second], U, steering, x, 4)
    assert_array_equal(k4, step_static(CORNER_OPS, first, U, steering, x, 4))


def test_quasi_dynamic_single_entry_equals_static():
    fam = StringFamily(((1,), (2,)), (0.5, 0.5))
    x = np.array([1.7, -0.4])
    for k in range(4):
        assert_array_equal(
            step_quasi_dynamic(CORNER_OPS, [fam], U, PowerLaw(), x, k),
            step_static(CORNER_OPS, fam, U, PowerLaw(), x, k),
        )


def test_simultaneous_collapses_for_identical_families():
    fam = StringFamily(((1,), (2,)), (0.5, 0.5))
    x = np.array([2.0, 3.0])
    a = step_simultaneous(CORNER_OPS, [fam, fam], (0.5, 0.5), U, PowerLaw(), x, 1)
    b = step_static(CORNER_OPS, fam, U, PowerLaw(), x, 1)
    assert_allclose(a, b, rtol=0, atol=1e-15)


def test_simultaneous_hand_evaluation():
    first = StringFamily(((1,),), (1.0,))
    second = StringFamily(((2,),), (1.0,))
    out = step_simultaneous(CORNER_OPS, [first, second], (0.5, 0.5), U,
                            LAMBDA_ZERO, U, 0)
    assert_array_equal(out, [1.0, 1.0])


def test_fully_simultaneous_hand_evaluation():
    out = step_fully_simultaneous(CORNER_OPS, (0.5, 0.5), U, LAMBDA_ZERO, U, 0)
    assert_array_equal(out, [1.0, 1.0])


def test_fully_simultaneous_single_operator_is_plain_halpern():
    out = step_fully_simultaneous([CORNER_OPS[0]], (1.0,), U, PowerLaw(0.5, 1.0),
                                  np.array([2.0, 3.0]), 0)
    # 0.5*(2,2) + 0.5*(0,3)
    assert_array_equal(out, [1.0, 2.5])


def test_halpern_wittman_first_step_lands_on_the_anchor():
    out = step_halpern_wittman(CORNER_OPS, U, np.array([-7.0, 13.0]), 0)
    assert_array_equal(out, U)


def test_halpern_wittman_second_step():
    x1 = step_halpern_wittman(CORNER_OPS, U, U, 1)
    assert_array_equal(x1, [1.0, 1.0])


def test_halpern_wittman_identity_composition():
    ops = [Identity(2)]
    x = np.array([0.5, -0.5])
    out = step_halpern_wittman(ops, U, x, 3)
    assert_allclose(out, 0.25 * U + 0.75 * x, rtol=0, atol=1e-15)


def test_infinite_static_step_matches_the_direct_sum():
    fam = CountableFamily.geometric_singletons(shrinking, 0.5, 2.0**-20, 2)
    x = np.array([3.0, 0.0])
    out = step_infinite_static(fam, U, LAMBDA_ZERO, x, 0)
    coord = sum(2.0**-i * (1.0 + 1.0 / i) for i in range(1, 21)) + 2.0**-20 * 3.0
    assert_allclose(out, [coord, 0.0], rtol=0, atol=1e-12)


def test_infinite_static_step_fixes_feasible_points():
    fam = CountableFamily.geometric_singletons(shrinking, 0.5, 2.0**-20, 2)
    x = np.array([0.0, 0.0])
    assert_allclose(step_infinite_static(fam, U, LAMBDA_ZERO, x, 0), x,
                    rtol=0, atol=1e-12)


def test_combettes_step_needs_singleton_strings():
    fam = CountableFamily.geometric_strings(
        lambda r: (r, r), shrinking, 0.5, 0.5, 2
    )
    with pytest.raises(ValueError):
        step_combettes(fam, U, PowerLaw(), np.zeros(2), 0)


def test_combettes_step_with_lambda_one_returns_the_anchor():
    fam = CountableFamily.geometric_singletons(shrinking, 0.5, 0.5, 2)
    out = step_combettes(fam, U, PowerLaw(), np.array([9.0, 9.0]), 0)
    assert_array_equal(out, U)


def test_combettes_nearly_finite_support_matches_fully_simultaneous():
    # push nearly all weight onto the first two operators: the leftover
    # tail mass bounds the gap to the finite weighted-average step
    q = 2.0**-15
    fam = CountableFamily.geometric_singletons(shrinking, q, 2.0**-29, 2)
    x = np.array([3.0, -1.0])
    w1 = 1.0 - q
    w2 = (1.0 - q) * q
    ops = [shrinking(1), shrinking(2)]
    a = step_combettes(fam, U, LAMBDA_ZERO, x, 0)
    b = step_fully_simultaneous(ops, (w1, w2 + q * q), U, LAMBDA_ZERO, x, 0)
    assert np.linalg.norm(a - b) <= 1e-6


def test_run_records_first_and_last_rows():
    prob = corner_problem()
    res = run(prob, StaticSA(StringFamily(((1, 2),), (1.0,))), max_iter=1)
    assert_array_equal(res.trace.ks, [0, 1])
    assert_array_equal(res.trace.xs[0], U)


def test_run_is_stationary_at_a_fixed_anchor():
    feas = np.array([-1.0, -1.0])
    prob = ProblemSpec(operators=CORNER_OPS, anchor=feas, x0=feas)
    res = run(prob, StaticSA(StringFamily(((1, 2),), (1.0,))), max_iter=50,
              record_every=10)
    assert np.all(res.trace.xs == feas)


def test_run_is_deterministic():
    prob = corner_problem()
    variant = StaticSA(StringFamily(((1,), (2,), (1, 2)), (0.3, 0.3, 0.4)))
    a = run(prob, variant, max_iter=500, record_every=50)
    b = run(prob, variant, max_iter=500, record_every=50)
    assert_array_equal(a.trace.xs, b.trace.xs)
    assert_array_equal(a.trace.step_norms, b.trace.step_norms)


def test_trace_lambda_column_holds_lambda_at_k():
    prob = corner_problem()
    res = run(prob, StaticSA(StringFamily(((1, 2),), (1.0,))), max_iter=10,
              record_every=1)
    assert_array_equal(res.trace.lambdas, 1.0 / (res.trace.ks + 1.0))


def test_step_norm_column_matches_consecutive_differences():
    prob = corner_problem()
    variant = StaticSA(StringFamily(((1,), (2,)), (0.5, 0.5)))
    dense = run(prob, variant, max_iter=40, record_every=1)
    sparse = run(prob, variant, max_iter=40, record_every=8)
    diffs = np.linalg.norm(np.diff(dense.trace.xs, axis=0), axis=1)
    assert_allclose(dense.trace.step_norms[1:], diffs, rtol=0, atol=1e-15)
    for i, k in enumerate(sparse.trace.ks):
        assert sparse.trace.step_norms[i] == dense.trace.step_norms[k]


def test_oracle_distances_are_recorded():
    prob = corner_problem()
    res = run(prob, StaticSA(StringFamily(((1, 2),), (1.0,))), max_iter=100,
              record_every=10, oracle=[0.0, 0.0])
    assert res.trace.oracle_dists[0] == pytest.approx(np.sqrt(8.0))
    assert not np.isnan(res.trace.oracle_dists).any()


# --- reduction identities (bitwise within one engine) ----------------------


def full_xs(problem, variant, steering=None):
    res = run(problem, variant, steering=steering, max_iter=100, record_every=1)
    return res.trace.xs


def test_fully_simultaneous_reduces_to_singleton_static():
    prob = corner_problem()
    a = full_xs(prob, FullySimultaneous((0.25, 0.75)))
    b = full_xs(prob, StaticSA(StringFamily.singletons((0.25, 0.75))))
    assert_array_equal(a, b)


def test_halpern_wittman_reduces_to_single_string_projections():
    prob = corner_problem()
    a = full_xs(prob, HalpernWittman())
    b = full_xs(prob, StaticProjectionSA(StringFamily.single_string(2)),
                steering=PowerLaw(1.0, 1.0))
    assert_array_equal(a, b)


def test_combettes_reduces_to_infinite_static(p4):
    a = full_xs(p4.spec, CombettesSimultaneous())
    b = full_xs(p4.spec, InfiniteStaticSA())
    assert_array_equal(a, b)


def test_single_entry_schedule_reduces_to_static(p2, triangle_families):
    full, _ = triangle_families
    a = full_xs(p2.spec, QuasiDynamicSA((full,)))
    b = full_xs(p2.spec, StaticSA(full))
    assert_array_equal(a, b)


# --- engines ----------------------------------------------------------------


@pytest.mark.parametrize("key", ["p1", "p2", "p3"])
def test_engines_agree(key, p1, p2, p3):
    prob = {"p1": p1, "p2": p2, "p3": p3}[key]
    m = prob.spec.operator_count
    variant = StaticSA(StringFamily.single_string(m))
    a = run(prob.spec, variant, max_iter=200, record_every=1, engine="kernel")
    b = run(prob.spec, variant, max_iter=200, record_every=1, engine="numpy")
    assert a.engine == "kernel" and b.engine == "numpy"
    assert np.max(np.abs(a.trace.xs - b.trace.xs)) <= 1e-10


def test_auto_engine_picks_the_kernel(p1, corner_family):
    res = run(p1.spec, StaticSA(corner_family), max_iter=10)
    assert res.engine == "kernel"


def test_early_stop_truncates_the_trace():
    prob = ProblemSpec(operators=[Identity(2)], anchor=U, x0=U)
    res = run(prob, StaticSA(StringFamily(((1,),), (1.0,))), max_iter=1000,
              record_every=100, stop_step_norm=1e-12)
    assert res.engine == "numpy"  # the early stop runs on the numpy engine
    assert res.trace.ks[-1] < 1000
    assert res.trace.step_norms[-1] <= 1e-12


def test_early_stop_rejected_on_the_kernel_engine():
    prob = corner_problem()
    with pytest.raises(ValueError):
        run(prob, StaticSA(StringFamily(((1,),(2,)), (0.5, 0.5))),
            max_iter=10, engine="kernel", stop_step_norm=1e-6)


def test_fejer_monotone_distances_with_zero_steering(p1, corner_family):
    # lambda_k = 0 exposes the bare averaged operator: distances to any
    # common fixed point must not increase
    zeros = UserTable([0.0] * 200, PowerLaw())
    res = run(p1.spec, StaticSA(corner_family), steering=zeros, max_iter=200,
              record_every=1)
    d = np.linalg.norm(res.trace.xs - p1.spec.witness, axis=1)
    assert np.all(np.diff(d) <= 1e-10)


def test_iterates_stay_finite(p1_long_run, p2_long_runs, p3_long_run, p4_long_run):
    runs = [p1_long_run[0], p3_long_run, p4_long_run, *p2_long_runs.values()]
    for res in runs:
        assert np.isfinite(res.trace.xs).all()
        assert np.isfinite(res.trace.step_norms).all()


def test_distance_shrinks_between_hundred_and_hundred_thousand(
    p1_long_run, p2_long_runs, p3_long_run, p4_long_run
):
    runs = [p1_long_run[0], p3_long_run, p4_long_run, *p2_long_runs.values()]
    for res in runs:
        early = res.trace.row_at(100)["oracle_dist"]
        late = res.trace.row_at(10**5)["oracle_dist"]
        assert late < early


# --- construction and validation errors -------------------------------------


def test_unfit_family_lists_missing_indices(p2):
    fam = StringFamily(((1, 2),), (1.0,))
    with pytest.raises(UnfitFamily) as err:
        run(p2.spec, StaticSA(fam), max_iter=1)
    assert err.value.missing == [3]
    assert "3" in str(err.value)


def test_string_index_beyond_operator_count():
    prob = corner_problem()
    fam = StringFamily(((1, 2), (3,)), (0.5, 0.5))
    with pytest.raises(IndexOutOfRange):
        run(prob, StaticSA(fam), max_iter=1)


def test_halpern_wittman_rejects_other_steering():
    prob = corner_problem()
    with pytest.raises(ValueError) as err:
        run(prob, HalpernWittman(), steering=PowerLaw(0.5, 1.0), max_iter=1)
    assert "1/(k+1)" in str(err.value)


def test_halpern_wittman_rejects_foreign_start_point():
    prob = corner_problem(x0=[0.0, 0.0])
    with pytest.raises(ValueError) as err:
        run(prob, HalpernWittman(), max_iter=1)
    assert "x0" in str(err.value)


def test_countable_variant_needs_a_countable_problem():
    prob = corner_problem()
    with pytest.raises(ValueError):
        run(prob, InfiniteStaticSA(), max_iter=1)


def test_finite_variant_needs_a_finite_problem(p4):
    with pytest.raises(ValueError):
        run(p4.spec, FullySimultaneous((1.0,)), max_iter=1)


def test_unverified_steering_is_refused():
    prob = corner_problem()
    bad = UserTable([1.5], PowerLaw())
    with pytest.raises(ValueError) as err:
        run(prob, StaticSA(StringFamily(((1, 2),), (1.0,))), steering=bad,
            max_iter=1)
    assert "verified" in str(err.value)


def test_projection_variant_rejects_relaxed_operators():
    ops = [CORNER_OPS[0], RelaxedProjection(CORNER_OPS[1], 0.5)]
    prob = ProblemSpec(operators=ops, anchor=U)
    with pytest.raises(ValueError):
        run(prob, StaticProjectionSA(StringFamily.single_string(2)), max_iter=1)
    with pytest.raises(ValueError):
        run(prob, HalpernWittman(), max_iter=1)


def test_variant_weight_validation():
    with pytest.raises(ValueError):
        FullySimultaneous((0.5, 0.4))
    with pytest.raises(ValueError):
        SimultaneousSA((StringFamily(((1,),), (1.0,)),), (0.9,))


def test_problem_spec_validation():
    with pytest.raises(ValueError):
        ProblemSpec(operators=CORNER_OPS, anchor=[1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        ProblemSpec(operators=[], anchor=[1.0])
    fam = CountableFamily.geometric_singletons(shrinking, 0.5, 0.5, 2)
    with pytest.raises(ValueError):
        ProblemSpec(operators=CORNER_OPS, countable=fam, anchor=U)


def test_unknown_engine_rejected():
    prob = corner_problem()
    with pytest.raises(ValueError):
        run(prob, StaticSA(StringFamily(((1, 2),), (1.0,))), engine="gpu")


def test_metadata_describes_the_run(p4):
    res = run(p4.spec, InfiniteStaticSA(), max_iter=10, record_every=5)
    meta = res.metadata()
    assert meta["variant"]["algorithm"] == "infinite-static"
    assert meta["steering"]["family"] == "power-law"
    assert meta["problem"] == "p4"
    assert meta["epsilon"] == 1e-12
    assert meta["tail_mass"] <= 1e-12

    finite = run(corner_problem(), StaticSA(StringFamily(((1, 2),), (1.0,))),
                 max_iter=10)
    fm = finite.metadata()
    assert fm["epsilon"] is None and fm["tail_mass"] is None
