"""Sealed-bid knapsack auctions.

Allocation is the density greedy with the single-item comparison (see
:func:`blocklab.knapsack.greedy_01`) or, for VCG, the exact optimum. Pricing
rules:

``DP``        pay-as-bid.
``GSP``       each winner pays the next winner's bid per gas times its own
              gas; the last winner pays the best losing bid per gas.
``UP``        every winner pays the best losing bid per gas times its gas.
``CRITICAL``  each winner pays the lowest integer bid that still wins.
``VCG_*``     Clarke pivot payments under the exact or the greedy allocation.

With equal sizes the per-gas ladders reduce to the textbook next-bid and
highest-losing-bid rules.
"""

from __future__ import annotations

import enum
import io
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ContractViolation, OracleLimitError, ParseError, SearchLimitError
from .knapsack import (
    BRUTE_FORCE_LIMIT,
    Item,
    KnapsackInstance,
    density_order,
    greedy_01,
    solve_exact,
)

log = logging.getLogger(__name__)

MAX_EVALUATIONS = 10**7


class Rule(str, enum.Enum):
    DP = "DP"
    GSP = "GSP"
    UP = "UP"
    CRITICAL = "CRITICAL"
    VCG_EXACT = "VCG_EXACT"
    VCG_GREEDY = "VCG_GREEDY"

    @classmethod
    def parse(cls, name: str) -> "Rule":
        key = name.strip().upper().replace("-", "_")
        aliases = {"VCG": "VCG_EXACT", "FIRST": "DP", "PAB": "DP"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ContractViolation(f"unknown rule {name!r}") from None


@dataclass(frozen=True, slots=True)
class Bid:
    agent_id: int
    amount: int
    size: int

    def __post_init__(self):
        if self.amount < 0:
            raise ContractViolation(f"agent {self.agent_id}: bid must be non-negative")
        if self.size <= 0:
            raise ContractViolation(f"agent {self.agent_id}: size must be positive")

    @property
    def per_unit(self) -> Fraction:
        return Fraction(self.amount, self.size)


@dataclass(frozen=True, slots=True)
class BidProfile:
    bids: tuple[Bid, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "bids", tuple(self.bids))
        ids = [b.agent_id for b in self.bids]
        if len(set(ids)) != len(ids):
            raise ContractViolation("agent ids must be unique within a profile")
        if self.capacity <= 0:
            raise ContractViolation("capacity must be positive")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], capacity: int, first_id: int = 1) -> "BidProfile":
        """Profile from ``(bid, size)`` pairs numbered from ``first_id``."""
        return cls(tuple(Bid(i, b, k) for i, (b, k) in enumerate(pairs, start=first_id)), capacity)

    @classmethod
    def unit(cls, amounts: Sequence[int], capacity: int) -> "BidProfile":
        return cls.from_pairs(((a, 1) for a in amounts), capacity)

    def by_id(self) -> dict[int, Bid]:
        return {b.agent_id: b for b in self.bids}

    def with_bid(self, agent_id: int, amount: int) -> "BidProfile":
        return BidProfile(
            tuple(Bid(b.agent_id, amount, b.size) if b.agent_id == agent_id else b for b in self.bids),
            self.capacity,
        )

    def without(self, agent_id: int) -> "BidProfile | None":
        rest = tuple(b for b in self.bids if b.agent_id != agent_id)
        return BidProfile(rest, self.capacity) if rest else None

    def as_instance(self) -> KnapsackInstance:
        return KnapsackInstance(tuple(Item(b.agent_id, b.size, b.amount) for b in self.bids), self.capacity)


@dataclass(frozen=True, slots=True)
class AuctionOutcome:
    winners: tuple[int, ...]
    payments: Mapping[int, int]
    rule: Rule
    revenue: int = field(init=False)
    allocated_value: int = 0
    # winners whose ladder price exceeded their bid and was cut back to it
    capped: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "winners", tuple(self.winners))
        object.__setattr__(self, "payments", dict(self.payments))
        if set(self.payments) != set(self.winners):
            raise ContractViolation("payments must be defined for winners only")
        object.__setattr__(self, "revenue", sum(self.payments.values()))

    def won(self, agent_id: int) -> bool:
        return agent_id in self.payments

    def payment(self, agent_id: int) -> int:
        return self.payments.get(agent_id, 0)


Allocation = Callable[[BidProfile], Sequence[int]]


def allocate_greedy(profile: BidProfile, *, priority_id: int | None = None) -> tuple[int, ...]:
    """Winners in packing order under the greedy rule with the single-item check."""
    return greedy_01(profile.as_instance(), apply_step3=True, priority_id=priority_id).selected


def allocate_exact(profile: BidProfile) -> tuple[int, ...]:
    """Winners of the surplus-maximising allocation, ordered by density."""
    chosen = set(solve_exact(profile.as_instance()).selected)
    return tuple(it.id for it in density_order(profile.as_instance().items) if it.id in chosen)


def _winner_bids(profile: BidProfile, winners: Sequence[int]) -> list[Bid]:
    bids = profile.by_id()
    missing = [w for w in winners if w not in bids]
    if missing:
        raise ContractViolation(f"winners {missing} are not in the profile")
    if len(set(winners)) != len(winners):
        raise ContractViolation("duplicate winner ids")
    if sum(bids[w].size for w in winners) > profile.capacity:
        raise ContractViolation("winners exceed capacity")
    return [bids[w] for w in winners]


def _outcome(rule: Rule, winners: Sequence[Bid], payments: dict[int, int], capped=()) -> AuctionOutcome:
    return AuctionOutcome(
        winners=tuple(b.agent_id for b in winners),
        payments=payments,
        rule=rule,
        allocated_value=sum(b.amount for b in winners),
        capped=tuple(capped),
    )


def _ladder_price(rule: Rule, bid: Bid, rate: Fraction, capped: list[int]) -> int:
    """Per-gas rate times size, floored, and never above the bid."""
    pay = math.floor(rate * bid.size)
    if pay > bid.amount:
        # mixed sizes: a skipped loser can out-bid a winner per gas
        log.debug("%s price %d above bid %d for agent %d; capped", rule.value, pay, bid.amount, bid.agent_id)
        capped.append(bid.agent_id)
        pay = bid.amount
    return pay


def _best_losing_rate(profile: BidProfile, winners: Sequence[int]) -> Fraction:
    inside = set(winners)
    return max((b.per_unit for b in profile.bids if b.agent_id not in inside), default=Fraction(0))


def price_dp(profile: BidProfile, winners: Sequence[int]) -> AuctionOutcome:
    """Winners pay their own bids."""
    won = _winner_bids(profile, winners)
    return _outcome(Rule.DP, won, {b.agent_id: b.amount for b in won})


def price_gsp(profile: BidProfile, winners: Sequence[int]) -> AuctionOutcome:
    """Generalised second price on the per-gas ladder."""
    won = _winner_bids(profile, winners)
    ids = {b.agent_id for b in won}
    ladder = [it.id for it in density_order(profile.as_instance().items) if it.id in ids]
    bids = profile.by_id()
    floor_rate = _best_losing_rate(profile, winners)
    payments, capped = {}, []
    for rank, agent in enumerate(ladder):
        rate = bids[ladder[rank + 1]].per_unit if rank + 1 < len(ladder) else floor_rate
        payments[agent] = _ladder_price(Rule.GSP, bids[agent], rate, capped)
    return _outcome(Rule.GSP, won, payments, capped)


def price_up(profile: BidProfile, winners: Sequence[int]) -> AuctionOutcome:
    """Uniform price: the best losing bid per gas, charged on each winner's gas."""
    won = _winner_bids(profile, winners)
    rate = _best_losing_rate(profile, winners)
    capped: list[int] = []
    payments = {b.agent_id: _ladder_price(Rule.UP, b, rate, capped) for b in won}
    return _outcome(Rule.UP, won, payments, capped)


def critical_bid(profile: BidProfile, agent_id: int) -> int:
    """Lowest integer bid at which ``agent_id`` still wins, others held fixed.

    Equal-density ties at the probed bid go to ``agent_id``; every other tie
    follows the usual lower-id rule. Bisection is valid because the greedy
    allocation is monotone in a bidder's own bid.
    """
    own = profile.by_id()[agent_id].amount

    def wins(b: int) -> bool:
        return agent_id in allocate_greedy(profile.with_bid(agent_id, b), priority_id=agent_id)

    if wins(0):
        return 0
    lo, hi = 0, own  # loses at lo, wins at hi
    if not wins(hi):
        raise ContractViolation(f"agent {agent_id} does not win at its own bid")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if wins(mid):
            hi = mid
        else:
            lo = mid
    return hi


def critical_payments(profile: BidProfile) -> AuctionOutcome:
    """Greedy allocation with every winner charged its critical bid."""
    winners = allocate_greedy(profile)
    won = _winner_bids(profile, winners)
    return _outcome(Rule.CRITICAL, won, {b.agent_id: critical_bid(profile, b.agent_id) for b in won})


def _welfare(profile: BidProfile | None, rule: Rule) -> int:
    if profile is None:
        return 0
    winners = allocate_exact(profile) if rule is Rule.VCG_EXACT else allocate_greedy(profile)
    bids = profile.by_id()
    return sum(bids[w].amount for w in winners)


def vcg_payments(profile: BidProfile, allocation_rule: Rule | str = Rule.VCG_EXACT) -> AuctionOutcome:
    """Clarke pivot payments.

    ``p_i`` is the welfare the others would get without ``i`` minus what they
    get in the chosen allocation, both computed with the same allocation rule.
    Under the greedy rule payments can be negative.
    """
    rule = Rule.parse(allocation_rule) if isinstance(allocation_rule, str) else allocation_rule
    if rule in (Rule.DP, Rule.GSP, Rule.UP, Rule.CRITICAL):
        raise ContractViolation(f"{rule.value} is not a VCG allocation rule")
    if rule is Rule.VCG_EXACT and len(profile.bids) > BRUTE_FORCE_LIMIT:
        raise OracleLimitError(f"exact VCG is limited to {BRUTE_FORCE_LIMIT} bidders")
    winners = allocate_exact(profile) if rule is Rule.VCG_EXACT else allocate_greedy(profile)
    won = _winner_bids(profile, winners)
    total = sum(b.amount for b in won)
    payments = {}
    for b in won:
        others_now = total - b.amount
        payments[b.agent_id] = _welfare(profile.without(b.agent_id), rule) - others_now
    return _outcome(rule, won, payments)


def run_auction(profile: BidProfile, rule: Rule | str) -> AuctionOutcome:
    """Allocate and price ``profile`` under ``rule``."""
    rule = Rule.parse(rule) if isinstance(rule, str) else rule
    if rule is Rule.CRITICAL:
        return critical_payments(profile)
    if rule in (Rule.VCG_EXACT, Rule.VCG_GREEDY):
        return vcg_payments(profile, rule)
    winners = allocate_greedy(profile)
    return {Rule.DP: price_dp, Rule.GSP: price_gsp, Rule.UP: price_up}[rule](profile, winners)


# -- verification -----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Deviation:
    agent_id: int
    true_value: int
    bid: int
    truthful_utility: int
    deviation_utility: int

    @property
    def gain(self) -> int:
        return self.deviation_utility - self.truthful_utility


@dataclass(frozen=True)
class TruthfulnessReport:
    """Result of a unilateral-deviation scan at the truthful profile.

    ``truthful`` means no agent gains by deviating alone while everyone else
    bids their value. It is weaker than dominant-strategy truthfulness.
    """

    truthful: bool
    evaluations: int
    witness: Deviation | None = None
    best_deviation: Deviation | None = None


Mechanism = Callable[[BidProfile], AuctionOutcome]


def _as_mechanism(mechanism: Mechanism | Rule | str) -> Mechanism:
    if callable(mechanism) and not isinstance(mechanism, (Rule, str)):
        return mechanism
    rule = Rule.parse(mechanism) if isinstance(mechanism, str) else mechanism
    return lambda p: run_auction(p, rule)


def verify_truthfulness(
    mechanism: Mechanism | Rule | str,
    values: BidProfile,
    bid_grid_step: int = 1,
    max_bid: int | None = None,
    max_evaluations: int = MAX_EVALUATIONS,
) -> TruthfulnessReport:
    """Search every unilateral deviation on the bid grid ``0, step, 2*step, ...``.

    ``values`` holds the true values as bids. The grid runs up to ``max_bid``
    (default: twice the largest value). The reported witness is the profitable
    deviation closest to the agent's true value; ``best_deviation`` is the one
    with the largest gain.
    """
    if bid_grid_step < 1:
        raise ContractViolation("bid grid step must be at least 1")
    mech = _as_mechanism(mechanism)
    top = max_bid if max_bid is not None else 2 * max((b.amount for b in values.bids), default=0)
    grid = range(0, top + 1, bid_grid_step)
    needed = len(values.bids) * (len(grid) + 1)
    if needed > max_evaluations:
        raise SearchLimitError(f"{needed} evaluations exceed the limit of {max_evaluations}")

    truthful = mech(values)
    evaluations = 1
    witness = best = None
    for bid in values.bids:
        v = bid.amount
        u_truth = v * truthful.won(bid.agent_id) - truthful.payment(bid.agent_id)
        for b in grid:
            if b == v:
                continue
            out = mech(values.with_bid(bid.agent_id, b))
            evaluations += 1
            u = v * out.won(bid.agent_id) - out.payment(bid.agent_id)
            if u <= u_truth:
                continue
            dev = Deviation(bid.agent_id, v, b, u_truth, u)
            closer = witness is not None and witness.agent_id == dev.agent_id and (abs(b - v), b) < (
                abs(witness.bid - v),
                witness.bid,
            )
            if witness is None or closer:
                witness = dev
            if best is None or dev.gain > best.gain:
                best = dev
    return TruthfulnessReport(witness is None, evaluations, witness, best)


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    checks: int
    # (profile, agent_id, original bid, raised bid) for the first failure
    counterexample: tuple[BidProfile, int, int, int] | None = None


def verify_monotonicity(
    allocation_rule: Allocation,
    instances: Iterable[BidProfile],
    bid_grid_step: int = 1,
    max_bid: int | None = None,
) -> MonotonicityReport:
    """Check that raising a winning bid never turns the bidder into a loser."""
    checks = 0
    for profile in instances:
        top = max_bid if max_bid is not None else 2 * max((b.amount for b in profile.bids), default=0) + bid_grid_step
        winners = set(allocation_rule(profile))
        for bid in profile.bids:
            if bid.agent_id not in winners:
                continue
            for b in range(bid.amount + bid_grid_step, top + 1, bid_grid_step):
                checks += 1
                if bid.agent_id not in allocation_rule(profile.with_bid(bid.agent_id, b)):
                    return MonotonicityReport(False, checks, (profile, bid.agent_id, bid.amount, b))
    return MonotonicityReport(True, checks)


def allocate_lowest_density_first(profile: BidProfile) -> tuple[int, ...]:
    """Deliberately non-monotone rule: pack the worst bids per gas first."""
    room = profile.capacity
    packed = []
    for it in reversed(density_order(profile.as_instance().items)):
        if it.size <= room:
            packed.append(it.id)
            room -= it.size
    return tuple(packed)


# -- file formats -----------------------------------------------------------


def parse_profile(text: str) -> tuple[BidProfile, dict[int, int]]:
    """Parse ``K=<int>`` then ``agent_id,size,bid[,true_value]`` lines.

    Returns the bid profile and the true values (defaulting to the bid).
    """
    capacity = None
    bids: list[Bid] = []
    values: dict[int, int] = {}
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if capacity is None:
            if not line.startswith("K="):
                raise ParseError("expected header 'K=<int>'", lineno)
            try:
                capacity = int(line[2:])
            except ValueError:
                raise ParseError(f"bad capacity {line[2:]!r}", lineno) from None
            continue
        parts = line.split(",")
        if len(parts) not in (3, 4):
            raise ParseError(f"expected 'agent_id,size,bid[,true_value]', got {line!r}", lineno)
        try:
            agent, size, amount = (int(p) for p in parts[:3])
            bids.append(Bid(agent, amount, size))
            values[agent] = int(parts[3]) if len(parts) == 4 else amount
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if capacity is None:
        raise ParseError("missing header 'K=<int>'", 1)
    try:
        return BidProfile(tuple(bids), capacity), values
    except ContractViolation as exc:
        raise ParseError(str(exc)) from None


OUTCOME_HEADER = ["rule", "agent_id", "won", "payment", "bid", "size"]


def outcome_rows(profile: BidProfile, outcome: AuctionOutcome) -> list[list[str]]:
    rows = []
    for b in profile.bids:
        won = outcome.won(b.agent_id)
        rows.append([outcome.rule.value, str(b.agent_id), str(int(won)), str(outcome.payment(b.agent_id)), str(b.amount), str(b.size)])
    return rows
