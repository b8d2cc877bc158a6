from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from blocklab.errors import ContractViolation
from blocklab.feemarket import (
    BaseFeeState,
    admit_demand,
    burn_and_split,
    eligible_users,
    find_contraction_threshold,
    quote,
    simulate_base_fee,
    update_base_fee,
)

TARGET, MAX = 15_000_000, 30_000_000


def state(base, **kw):
    return BaseFeeState(base, **kw)


# -- controller ------------------------------------------------------------------------


def test_fixed_point_at_target():
    assert update_base_fee(state(1000), TARGET).base_fee == 1000


def test_full_and_empty_blocks():
    assert update_base_fee(state(1000), MAX).base_fee == 1125
    assert update_base_fee(state(1000), 0).base_fee == 875


def test_floor_holds():
    s = state(1, min_base_fee=1)
    assert update_base_fee(s, 0).base_fee == 1
    assert update_base_fee(state(0, min_base_fee=0), 0).base_fee == 0


def test_gas_above_limit_rejected():
    with pytest.raises(ContractViolation):
        update_base_fee(state(10), MAX + 1)


def test_bad_state_rejected():
    with pytest.raises(ContractViolation):
        BaseFeeState(10, target_gas=10, max_gas=5)
    with pytest.raises(ContractViolation):
        BaseFeeState(0, min_base_fee=1)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**9), st.integers(0, MAX))
def test_direction_follows_demand(base, used):
    nxt = update_base_fee(state(base), used).base_fee
    if used > TARGET:
        assert nxt >= base
    elif used < TARGET:
        assert nxt <= base
    # one block moves the fee by at most an eighth
    assert abs(nxt - base) <= base // 8 + 1


def test_quote_splits_components():
    q = quote(7, 100, 3, state(2))
    assert (q.base_component, q.tip_component, q.total) == (200, 3, 203)


# -- admission -------------------------------------------------------------------------


def test_admission_drops_users_below_base():
    adm = admit_demand([(12, 100), (9, 100)], state(10))
    assert adm.admitted == (0,) and not adm.oversubscribed


def test_admission_at_zero_base_takes_everyone():
    users = [(0, 10), (5, 10), (1, 10)]
    adm = admit_demand(users, state(0, min_base_fee=0), min_tip=0)
    assert adm.admitted == (0, 1, 2)


def test_oversubscribed_block_runs_an_auction():
    s = state(1, target_gas=50, max_gas=100)
    users = [(10, 60), (5, 60), (3, 30)]
    adm = admit_demand(users, s)
    assert adm.oversubscribed and adm.outcome is not None
    assert sum(users[i][1] for i in adm.admitted) <= 100
    assert set(adm.admitted) <= set(adm.eligible)


def test_eligible_users_respects_min_tip():
    assert eligible_users([(11, 1), (10, 1)], state(10), min_tip=1) == (0,)
    assert eligible_users([(11, 1), (10, 1)], state(10), min_tip=0) == (0, 1)


# -- burn ------------------------------------------------------------------------------


def test_burn_and_split_example():
    b, t, s = burn_and_split([(100, 30), (50, 12)], state(2))
    assert (b, t) == (300, 42)
    assert s.cumulative_burn == 300


def test_empty_block_burns_nothing():
    b, t, s = burn_and_split([], state(2, cumulative_burn=5))
    assert (b, t, s.cumulative_burn) == (0, 0, 5)


def test_burn_rejects_negative_tip():
    with pytest.raises(ContractViolation):
        burn_and_split([(10, -1)], state(2))


# -- contraction threshold -------------------------------------------------------------


def test_threshold_linear_schedule():
    assert find_contraction_threshold(10, lambda n: Fraction(2 * n, 1000)) == 5001


def test_threshold_never_reached():
    assert find_contraction_threshold(10**9, lambda n: Fraction(2 * n, 1000)) is None


def test_threshold_step_schedule():
    assert find_contraction_threshold(10, lambda n: 0 if n < 100 else 20, max_gas=1000) == 100


def test_threshold_rejects_decreasing_schedule():
    with pytest.raises(ContractViolation):
        find_contraction_threshold(10, lambda n: 1000 - n, max_gas=1000)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 50), st.integers(1, 10**5))
def test_threshold_is_minimal(issuance, slope, max_gas):
    sched = lambda n: slope * n  # noqa: E731
    n = find_contraction_threshold(issuance, sched, max_gas=max_gas)
    if n is None:
        assert sched(max_gas) <= issuance
    else:
        assert sched(n) > issuance
        assert n == 0 or sched(n - 1) <= issuance


# -- simulation ------------------------------------------------------------------------


def test_simulation_converges_toward_demand():
    s = state(100, target_gas=100, max_gas=200)
    users = [(150, 50), (120, 50), (90, 50), (60, 50)]
    rows = simulate_base_fee(s, users, 60)
    assert len(rows) == 60
    fees = [r[1] for r in rows]
    assert fees[0] == 100
    # the fee settles where admitted gas hovers near the target
    assert all(r[2] <= 200 for r in rows)
    assert 60 <= fees[-1] <= 150
