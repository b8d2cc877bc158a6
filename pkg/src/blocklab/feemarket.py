"""Base-fee controller, burn accounting and demand admission.

The update is the multiplicative rule

    base_fee' = max(min_base_fee, floor(base_fee * (1 + (used - target) / (target * d))))

evaluated in integer arithmetic. With ``max_gas == 2 * target_gas`` and
``d == 8`` a full block raises the fee by 12.5% and an empty block lowers it by
12.5%.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .auctions import BidProfile, Bid, AuctionOutcome, Rule, run_auction
from .errors import ContractViolation

DEFAULT_TARGET_GAS = 15_000_000
DEFAULT_MAX_GAS = 30_000_000


@dataclass(frozen=True, slots=True)
class BaseFeeState:
    base_fee: int
    target_gas: int = DEFAULT_TARGET_GAS
    max_gas: int = DEFAULT_MAX_GAS
    adjustment_denominator: int = 8
    cumulative_burn: int = 0
    min_base_fee: int = 1

    def __post_init__(self):
        if not 0 < self.target_gas <= self.max_gas:
            raise ContractViolation("need 0 < target_gas <= max_gas")
        if self.adjustment_denominator < 1:
            raise ContractViolation("adjustment denominator must be >= 1")
        if self.min_base_fee < 0 or self.base_fee < self.min_base_fee:
            raise ContractViolation("base fee below its floor")
        if self.cumulative_burn < 0:
            raise ContractViolation("cumulative burn cannot be negative")


@dataclass(frozen=True, slots=True)
class FeeQuote:
    tx_id: int
    base_component: int
    tip_component: int

    @property
    def total(self) -> int:
        return self.base_component + self.tip_component


def update_base_fee(state: BaseFeeState, gas_used_prev: int) -> BaseFeeState:
    if not 0 <= gas_used_prev <= state.max_gas:
        raise ContractViolation(f"gas used {gas_used_prev} outside [0, {state.max_gas}]")
    scale = state.target_gas * state.adjustment_denominator
    new = state.base_fee * (scale + gas_used_prev - state.target_gas) // scale
    return dataclasses.replace(state, base_fee=max(state.min_base_fee, new))


def quote(tx_id: int, gas: int, tip: int, state: BaseFeeState) -> FeeQuote:
    if gas <= 0 or tip < 0:
        raise ContractViolation("gas must be positive and tip non-negative")
    return FeeQuote(tx_id, state.base_fee * gas, tip)


@dataclass(frozen=True)
class Admission:
    """Users let into the block, by index into the input sequence."""

    admitted: tuple[int, ...]
    eligible: tuple[int, ...]
    oversubscribed: bool
    # set only when the eligible gas exceeded the block limit
    outcome: AuctionOutcome | None = None


def admit_demand(
    users: Sequence[tuple[int, int]],
    state: BaseFeeState,
    min_tip: int = 1,
    rule: Rule | str = Rule.DP,
) -> Admission:
    """Users with ``value_per_gas >= base_fee + min_tip`` join.

    Each user offers their whole surplus over the base fee as a tip. If the
    eligible gas exceeds ``max_gas``, a knapsack auction on those tips picks
    who gets in.
    """
    eligible = eligible_users(users, state, min_tip)
    demand = sum(users[i][1] for i in eligible)
    if demand <= state.max_gas:
        return Admission(eligible, eligible, False)
    profile = BidProfile(
        tuple(Bid(i, (users[i][0] - state.base_fee) * users[i][1], users[i][1]) for i in eligible),
        state.max_gas,
    )
    outcome = run_auction(profile, rule)
    return Admission(tuple(outcome.winners), eligible, True, outcome)


def eligible_users(users: Sequence[tuple[int, int]], state: BaseFeeState, min_tip: int = 1) -> tuple[int, ...]:
    """Indices of users whose value per gas covers the base fee plus ``min_tip``."""
    floor = state.base_fee + min_tip
    return tuple(i for i, (vpg, _gas) in enumerate(users) if vpg >= floor)


def burn_and_split(txs: Iterable[tuple[int, int]], state: BaseFeeState) -> tuple[int, int, BaseFeeState]:
    """Burn the base fee on each ``(gas, tip)`` pair and total the tips.

    Returns ``(burn, tips, state)`` with the burn added to ``cumulative_burn``.
    """
    burn = tips = 0
    for gas, tip in txs:
        if gas <= 0 or tip < 0:
            raise ContractViolation("gas must be positive and tip non-negative")
        burn += state.base_fee * gas
        tips += tip
    return burn, tips, dataclasses.replace(state, cumulative_burn=state.cumulative_burn + burn)


NEVER = None


def find_contraction_threshold(
    issuance: int | Fraction,
    burn_schedule: Callable[[int], int | Fraction],
    max_gas: int = DEFAULT_MAX_GAS,
    probes: int = 257,
) -> int | None:
    """Smallest gas volume ``N`` in ``[0, max_gas]`` with ``burn(N) > issuance``.

    Returns ``None`` when even ``burn(max_gas)`` stays at or below issuance.
    The schedule must be non-decreasing; a violation seen on an evenly spaced
    probe grid or along the bisection path raises ``ContractViolation``.
    """
    seen: dict[int, int | Fraction] = {}

    def burn(n: int):
        if n not in seen:
            seen[n] = burn_schedule(n)
        return seen[n]

    for n in sorted({max_gas * j // (probes - 1) for j in range(probes)}):
        burn(n)
    _check_monotone(seen)
    if burn(max_gas) <= issuance:
        return NEVER
    if burn(0) > issuance:
        return 0
    lo, hi = 0, max_gas  # burn(lo) <= R < burn(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if burn(mid) > issuance:
            hi = mid
        else:
            lo = mid
    _check_monotone(seen)
    return hi


def _check_monotone(samples: dict[int, int | Fraction]) -> None:
    xs = sorted(samples)
    for a, b in zip(xs, xs[1:]):
        if samples[b] < samples[a]:
            raise ContractViolation(f"burn schedule decreases between {a} and {b} gas")


def simulate_base_fee(
    state: BaseFeeState,
    users: Sequence[tuple[int, int]],
    blocks: int,
    min_tip: int = 1,
) -> list[tuple[int, int, int, int, int]]:
    """Run the controller against a fixed demand schedule.

    Each block admits from the same ``users`` list. Returns rows of
    ``(block, base_fee, gas_used, burn, tips)``; tips are charged at
    ``min_tip`` per gas.
    """
    rows = []
    for block in range(blocks):
        adm = admit_demand(users, state, min_tip)
        gas = [users[i][1] for i in adm.admitted]
        burn, tips, nxt = burn_and_split(((g, min_tip * g) for g in gas), state)
        used = sum(gas)
        rows.append((block, state.base_fee, used, burn, tips))
        state = update_base_fee(nxt, used)
    return rows


BLOCK_HEADER = ["block", "base_fee", "gas_used", "burn", "tips"]
