from fractions import Fraction
from itertools import permutations, combinations

import pytest
from hypothesis import given, settings, strategies as st

from blocklab.errors import InstanceTooLargeError, OracleLimitError, ParseError, ContractViolation
from blocklab.knapsack import (
    Item,
    KnapsackInstance,
    PositionWeight,
    format_instance,
    greedy_01,
    greedy_fractional,
    parse_instance,
    position_dependent_pack,
    solve_brute_force,
    solve_exact,
    subset_sum_pack,
)

from suites import knapsack_suite

THREE = KnapsackInstance.from_pairs([(6, 4), (5, 3), (4, 3)], 6)
DECOY = KnapsackInstance.from_pairs([(1, 1), (9, 10)], 10)


def inst(pairs, cap):
    return KnapsackInstance.from_pairs(pairs, cap)


# -- exact solver and oracle ------------------------------------------------------


def test_exact_three_items():
    r = solve_exact(THREE)
    assert r.selected == (2, 3)
    assert r.total_value == 9
    assert r.total_size == 6


def test_exact_single_item_filling_capacity():
    r = solve_exact(inst([(7, 5)], 5))
    assert r.selected == (1,) and r.total_value == 7


def test_exact_decoy_instance():
    assert solve_exact(DECOY).total_value == 9


@pytest.mark.parametrize("case", [THREE, inst([(7, 5)], 5), DECOY])
def test_brute_force_agrees_on_examples(case):
    assert solve_brute_force(case).total_value == solve_exact(case).total_value


def test_brute_force_nothing_fits():
    r = solve_brute_force(inst([(5, 7), (3, 9)], 6))
    assert r.selected == () and r.total_value == 0


def test_brute_force_two_equal_items_both_fit():
    assert solve_brute_force(inst([(3, 2), (3, 2)], 4)).total_value == 6


def test_brute_force_refuses_large_n():
    with pytest.raises(OracleLimitError):
        solve_brute_force(inst([(1, 1)] * 21, 5))


def test_exact_budget_guard():
    with pytest.raises(InstanceTooLargeError):
        solve_exact(inst([(1, 1000 + i) for i in range(10)], 10**5), cell_budget=1000)


def test_exact_budget_uses_reduced_sizes():
    # all sizes share a factor of 1000, so the table is tiny after reduction
    big = inst([(5, 1000), (7, 2000)], 3_000_000)
    assert solve_exact(big, cell_budget=10_000).total_value == 12


def test_exact_picks_lexicographically_smallest_optimum():
    # {1,2} and {3} both give value 4
    r = solve_exact(inst([(2, 1), (2, 1), (4, 2)], 2))
    assert r.selected == (1, 2)
    assert r == solve_brute_force(inst([(2, 1), (2, 1), (4, 2)], 2))


def test_oracle_equivalence_on_seeded_suite():
    for case in knapsack_suite(11, 150, max_n=12):
        e, b = solve_exact(case), solve_brute_force(case)
        assert (e.selected, e.total_value) == (b.selected, b.total_value)


item_lists = st.lists(st.tuples(st.integers(0, 50), st.integers(1, 12)), min_size=1, max_size=9)


@settings(max_examples=150, deadline=None)
@given(item_lists, st.integers(1, 40))
def test_exact_matches_brute_force(pairs, cap):
    case = inst(pairs, cap)
    e, b = solve_exact(case), solve_brute_force(case)
    assert e.total_value == b.total_value
    assert e.selected == b.selected
    assert e.total_size <= cap


# -- fractional and 0-1 greedy ------------------------------------------------------


def test_fractional_decoy():
    r = greedy_fractional(DECOY)
    assert r.total_value == Fraction(91, 10)
    assert r.fractional_tail == (2, Fraction(9, 10))


def test_fractional_everything_fits():
    r = greedy_fractional(inst([(3, 1), (4, 2)], 10))
    assert r.fractional_tail is None and r.total_value == 7


def test_fractional_single_split():
    r = greedy_fractional(inst([(9, 8)], 4))
    assert r.fractional_tail == (1, Fraction(1, 2))
    assert r.total_value == Fraction(9, 2)


def test_greedy_decoy_with_and_without_step3():
    off = greedy_01(DECOY, apply_step3=False)
    on = greedy_01(DECOY, apply_step3=True)
    assert (off.selected, off.total_value) == ((1,), 1)
    assert (on.selected, on.total_value) == ((2,), 9)
    assert on.single_item_branch


def test_greedy_skips_and_continues():
    r = greedy_01(THREE, apply_step3=False)
    assert r.selected == (2, 3) and r.total_value == 9


@settings(max_examples=200, deadline=None)
@given(item_lists, st.integers(1, 40))
def test_greedy_half_bound_and_lp_bound(pairs, cap):
    case = inst(pairs, cap)
    opt = solve_exact(case).total_value
    g = greedy_01(case).total_value
    assert 2 * g >= opt
    assert g <= opt <= greedy_fractional(case).total_value


# -- subset sum ---------------------------------------------------------------------


def test_subset_sum_examples():
    assert subset_sum_pack(inst([(0, 4), (0, 3), (0, 3)], 6)).total_size == 6
    assert subset_sum_pack(inst([(0, 6)], 6)).total_size == 6
    assert subset_sum_pack(inst([(0, 5), (0, 5)], 4)).total_size == 0


@settings(max_examples=100, deadline=None)
@given(item_lists, st.integers(1, 40))
def test_subset_sum_is_maximal_fill(pairs, cap):
    case = inst(pairs, cap)
    sizes = [k for _v, k in pairs]
    best = max(
        sum(c) for r in range(len(sizes) + 1) for c in combinations(sizes, r) if sum(c) <= cap
    )
    assert subset_sum_pack(case).total_size == best


# -- position-dependent packing ------------------------------------------------------


def test_position_weights_example():
    r = position_dependent_pack(inst([(10, 1), (8, 1), (6, 1)], 2), PositionWeight((1, Fraction(1, 2))))
    assert r.total_value == 14


def test_constant_weight_reduces_to_exact():
    for case in knapsack_suite(3, 30, max_n=8):
        w = PositionWeight(tuple([1] * len(case.items)))
        assert position_dependent_pack(case, w).total_value == solve_exact(case).total_value


def test_zero_second_weight():
    r = position_dependent_pack(inst([(5, 1), (4, 1)], 2), PositionWeight((1, 0)))
    assert r.total_value == 5


def test_negative_weight_rejected():
    with pytest.raises(ContractViolation):
        PositionWeight((1, -1))


def _brute_positions(case, w):
    best = Fraction(0)
    for r in range(len(case.items) + 1):
        for combo in combinations(case.items, r):
            if sum(it.size for it in combo) > case.capacity:
                continue
            for perm in permutations(combo):
                best = max(best, sum(it.value * w.at(i) for i, it in enumerate(perm, start=1)))
    return best


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 20), st.integers(1, 5)), min_size=1, max_size=5),
    st.integers(1, 12),
    st.lists(st.fractions(min_value=0, max_value=3, max_denominator=4), min_size=1, max_size=5),
)
def test_position_dependent_matches_permutation_search(pairs, cap, ws):
    case = inst(pairs, cap)
    w = PositionWeight(tuple(ws))
    assert position_dependent_pack(case, w).total_value == _brute_positions(case, w)


# -- file format ----------------------------------------------------------------------


def test_parse_and_format_round_trip():
    text = "# demo\nK=6\n1,4,6\n2,3,5\n3,3,4\n"
    case = parse_instance(text)
    assert case.capacity == 6
    assert case.items[0] == Item(1, 4, 6)
    assert parse_instance(format_instance(case)) == case


@pytest.mark.parametrize(
    "text,line",
    [("1,2,3\n", 1), ("K=5\n1,2\n", 2), ("K=5\n1,x,3\n", 2), ("K=5\n1,0,3\n", 2)],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as err:
        parse_instance(text)
    assert err.value.line == line
