import pytest
from hypothesis import given, settings, strategies as st

from blocklab.auctions import (
    Bid,
    BidProfile,
    Rule,
    allocate_exact,
    allocate_greedy,
    allocate_lowest_density_first,
    critical_bid,
    critical_payments,
    parse_profile,
    price_dp,
    price_gsp,
    price_up,
    run_auction,
    vcg_payments,
    verify_monotonicity,
    verify_truthfulness,
)
from blocklab.errors import ContractViolation, ParseError, SearchLimitError

from suites import profile_suite, unit_profile_suite

UNIT = BidProfile.unit([5, 3, 2], 2)
MIXED = BidProfile.from_pairs([(10, 2), (6, 2), (3, 1)], 4)
DECOY = BidProfile.from_pairs([(1, 1), (9, 10)], 10)
THREE = BidProfile.from_pairs([(6, 4), (5, 3), (4, 3)], 6)
SOLE = BidProfile.from_pairs([(7, 2)], 5)


# -- allocation -------------------------------------------------------------------


def test_greedy_allocation_examples():
    assert allocate_greedy(UNIT) == (1, 2)
    assert set(allocate_greedy(MIXED)) == {1, 2}
    assert allocate_greedy(DECOY) == (2,)


def test_exact_allocation_three_items():
    assert set(allocate_exact(THREE)) == {2, 3}


# -- pricing rules ----------------------------------------------------------------


def test_dp_payments():
    out = price_dp(UNIT, allocate_greedy(UNIT))
    assert out.payments == {1: 5, 2: 3} and out.revenue == 8
    assert run_auction(SOLE, Rule.DP).payments == {1: 7}


def test_dp_zero_bid_winner_pays_zero():
    out = run_auction(BidProfile.from_pairs([(0, 1)], 3), Rule.DP)
    assert out.payments == {1: 0}


def test_gsp_payments():
    out = run_auction(UNIT, Rule.GSP)
    assert out.payments == {1: 3, 2: 2} and out.revenue == 5
    assert run_auction(MIXED, Rule.GSP).payments == {1: 6, 2: 6}
    assert run_auction(SOLE, Rule.GSP).payments == {1: 0}


def test_up_payments():
    out = run_auction(UNIT, Rule.UP)
    assert out.payments == {1: 2, 2: 2} and out.revenue == 4
    assert run_auction(MIXED, Rule.UP).payments == {1: 6, 2: 6}
    everyone = BidProfile.unit([4, 3], 5)
    assert run_auction(everyone, Rule.UP).payments == {1: 0, 2: 0}


def test_ladder_price_is_capped_at_bid():
    # winner 2 is packed by skip-and-continue behind a denser loser
    prof = BidProfile.from_pairs([(10, 5), (9, 1), (1, 1)], 5)
    for rule in (Rule.GSP, Rule.UP):
        out = run_auction(prof, rule)
        for w in out.winners:
            assert out.payments[w] <= prof.by_id()[w].amount


def test_critical_payments_examples():
    assert critical_payments(UNIT).payments == {1: 2, 2: 2}
    assert critical_payments(SOLE).payments == {1: 0}
    assert critical_bid(DECOY, 2) == 2


def test_decoy_critical_bid_boundary():
    assert allocate_greedy(DECOY.with_bid(2, 1)) == (1,)
    assert 2 in allocate_greedy(DECOY.with_bid(2, 2))


def test_vcg_exact_example():
    out = vcg_payments(THREE, Rule.VCG_EXACT)
    assert set(out.winners) == {2, 3}
    assert out.payments == {2: 2, 3: 1}
    assert vcg_payments(SOLE, Rule.VCG_EXACT).payments == {1: 0}


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(1, 5)), min_size=1, max_size=6), st.integers(1, 15))
def test_vcg_exact_individually_rational(pairs, cap):
    prof = BidProfile.from_pairs(pairs, cap)
    out = vcg_payments(prof, Rule.VCG_EXACT)
    for w, p in out.payments.items():
        assert 0 <= p <= prof.by_id()[w].amount


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=7), st.integers(1, 3), st.integers(1, 8))
def test_equal_size_revenue_ladder(bids, size, slots):
    prof = BidProfile.from_pairs([(b, size) for b in bids], size * slots)
    dp, gsp, up = (run_auction(prof, r).revenue for r in (Rule.DP, Rule.GSP, Rule.UP))
    assert dp >= gsp >= up


def test_up_equals_critical_on_equal_sizes():
    for prof in unit_profile_suite(5, 300):
        up = run_auction(prof, Rule.UP)
        crit = critical_payments(prof)
        assert up.payments == crit.payments


def test_rule_parse_aliases():
    assert Rule.parse("up") is Rule.UP
    assert Rule.parse("vcg") is Rule.VCG_EXACT
    with pytest.raises(ContractViolation):
        Rule.parse("dutch")


# -- verification -------------------------------------------------------------------


def test_dp_truthfulness_witness():
    rep = verify_truthfulness(Rule.DP, UNIT)
    assert not rep.truthful
    w = rep.witness
    assert (w.agent_id, w.bid) == (1, 4)
    assert w.deviation_utility > w.truthful_utility


def test_up_single_bidder_truthful():
    assert verify_truthfulness(Rule.UP, SOLE).truthful


def test_critical_truthful_on_small_suite():
    for prof in profile_suite(99, 40):
        assert verify_truthfulness(Rule.CRITICAL, prof).truthful


def test_truthfulness_search_limit():
    with pytest.raises(SearchLimitError):
        verify_truthfulness(Rule.DP, UNIT, max_evaluations=3)


def test_monotonicity_greedy_and_negative_control():
    suite = profile_suite(4, 60, max_n=6)
    assert verify_monotonicity(allocate_greedy, suite).monotone
    assert verify_monotonicity(allocate_greedy, [BidProfile.unit([4, 4, 4], 2)]).monotone
    bad = verify_monotonicity(allocate_lowest_density_first, suite)
    assert not bad.monotone and bad.counterexample is not None


# -- profile file --------------------------------------------------------------------


def test_parse_profile_with_true_values():
    prof, values = parse_profile("K=2\n1,1,5,6\n2,1,3\n")
    assert prof.capacity == 2
    assert prof.by_id()[1] == Bid(1, 5, 1)
    assert values == {1: 6, 2: 3}


@pytest.mark.parametrize("text", ["1,1,5\n", "K=2\n1,1\n", "K=2\n1,1,5\n1,1,4\n", "K=two\n"])
def test_parse_profile_errors(text):
    with pytest.raises(ParseError):
        parse_profile(text)
