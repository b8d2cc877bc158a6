"""Searchers: mempool scanning, ordering-based extraction, bundles and PGAs.

Opportunities are exogenous integers attached to user transactions. Which
action captures them depends only on the kind of transaction:

=================== =========== ===========
kind                action      effect
=================== =========== ===========
ARBITRAGE_CAPTURE   FRONT_RUN   diverting
VULNERABLE_FUNDS    FRONT_RUN   diverting
ANOMALY_CREATOR     BACK_RUN    creating
=================== =========== ===========

A front-run works iff the searcher's transaction sits before its target in the
block; a back-run works iff it sits after. Gas prices play no part.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .auctions import Bid, BidProfile
from .errors import ConfigurationError, ContractViolation


class TxKind(str, enum.Enum):
    PLAIN = "PLAIN"
    ARBITRAGE_CAPTURE = "ARBITRAGE_CAPTURE"
    ANOMALY_CREATOR = "ANOMALY_CREATOR"
    VULNERABLE_FUNDS = "VULNERABLE_FUNDS"


class Action(str, enum.Enum):
    FRONT_RUN = "FRONT_RUN"
    BACK_RUN = "BACK_RUN"


class MevClass(str, enum.Enum):
    DIVERTING = "DIVERTING"
    CREATING = "CREATING"


ACTION_FOR_KIND = {
    TxKind.ARBITRAGE_CAPTURE: Action.FRONT_RUN,
    TxKind.VULNERABLE_FUNDS: Action.FRONT_RUN,
    TxKind.ANOMALY_CREATOR: Action.BACK_RUN,
}
CLASS_FOR_ACTION = {Action.FRONT_RUN: MevClass.DIVERTING, Action.BACK_RUN: MevClass.CREATING}


@dataclass(frozen=True, slots=True)
class MempoolTx:
    """A pending transaction.

    User transactions carry a ``true_value``; for diverting kinds the embedded
    opportunity is part of that value and is lost to a successful front-run.
    Searcher transactions set ``target_tx`` and ``action`` instead.
    ``shade_pct`` is the share of surplus the sender offers as a fee and
    ``fee`` the amount actually offered in the current auction.
    """

    tx_id: int
    sender_id: int
    size: int
    true_value: int
    kind: TxKind = TxKind.PLAIN
    visible: bool = True
    embedded_opportunity: int | None = None
    shade_pct: int = 100
    fee: int = 0
    target_tx: int | None = None
    action: Action | None = None

    def __post_init__(self):
        if self.size <= 0:
            raise ContractViolation(f"tx {self.tx_id}: size must be positive")
        if self.true_value < 0 or self.fee < 0:
            raise ContractViolation(f"tx {self.tx_id}: values must be non-negative")
        has_opp = self.embedded_opportunity is not None
        if has_opp != (self.kind is not TxKind.PLAIN):
            raise ContractViolation(f"tx {self.tx_id}: opportunity must be present iff kind is not PLAIN")
        if has_opp:
            if self.embedded_opportunity < 0:
                raise ContractViolation(f"tx {self.tx_id}: opportunity must be non-negative")
            if ACTION_FOR_KIND[self.kind] is Action.FRONT_RUN and self.embedded_opportunity > self.true_value:
                raise ContractViolation(f"tx {self.tx_id}: diverted value cannot exceed the user's value")
        if (self.target_tx is None) != (self.action is None):
            raise ContractViolation(f"tx {self.tx_id}: target_tx and action go together")
        if not 0 <= self.shade_pct <= 100:
            raise ContractViolation(f"tx {self.tx_id}: shade_pct must be in [0, 100]")

    @property
    def is_searcher(self) -> bool:
        return self.target_tx is not None


@dataclass(frozen=True, slots=True)
class Bundle:
    bundle_id: int
    searcher_id: int
    txs: tuple[MempoolTx, ...]
    bid: int

    def __post_init__(self):
        object.__setattr__(self, "txs", tuple(self.txs))
        if not self.txs:
            raise ContractViolation("a bundle needs at least one transaction")
        if self.bid < 0:
            raise ContractViolation("bundle bid must be non-negative")

    @property
    def size(self) -> int:
        return sum(t.size for t in self.txs)

    @property
    def target_tx(self) -> int | None:
        return next((t.target_tx for t in self.txs if t.target_tx is not None), None)

    @property
    def action(self) -> Action | None:
        return next((t.action for t in self.txs if t.action is not None), None)


@dataclass(frozen=True, slots=True)
class Opportunity:
    source_tx: int
    value: int
    action: Action


@dataclass(frozen=True, slots=True)
class MevEvent:
    searcher_id: int
    source_tx: int
    captured_value: int
    classification: MevClass


def scan_mempool(mempool: Iterable[MempoolTx]) -> list[Opportunity]:
    """Opportunities a searcher can see: visible, non-plain user transactions."""
    found = []
    for tx in mempool:
        if not tx.visible or tx.is_searcher or tx.kind is TxKind.PLAIN:
            continue
        found.append(Opportunity(tx.tx_id, tx.embedded_opportunity, ACTION_FOR_KIND[tx.kind]))
    return found


@dataclass(frozen=True)
class Extraction:
    events: tuple[MevEvent, ...]
    # realised value per included user tx, after any diversion
    realized: dict[int, int]

    @property
    def diverted(self) -> int:
        return sum(e.captured_value for e in self.events if e.classification is MevClass.DIVERTING)

    @property
    def created(self) -> int:
        return sum(e.captured_value for e in self.events if e.classification is MevClass.CREATING)

    @property
    def captured(self) -> int:
        return self.diverted + self.created


def apply_extraction(block_order: Sequence[MempoolTx]) -> Extraction:
    """Resolve searcher transactions against the final block order.

    For each opportunity only the first qualifying searcher transaction
    captures anything; others, and any searcher transaction whose target is
    missing or of the wrong kind, realise nothing.
    """
    position = {tx.tx_id: i for i, tx in enumerate(block_order)}
    realized = {tx.tx_id: tx.true_value for tx in block_order if not tx.is_searcher}
    taken: set[int] = set()
    events = []
    for i, tx in enumerate(block_order):
        if not tx.is_searcher or tx.target_tx in taken:
            continue
        j = position.get(tx.target_tx)
        if j is None:
            continue
        source = block_order[j]
        if source.is_searcher or source.kind is TxKind.PLAIN or ACTION_FOR_KIND[source.kind] is not tx.action:
            continue
        ok = i < j if tx.action is Action.FRONT_RUN else i > j
        if not ok:
            continue
        taken.add(source.tx_id)
        cls = CLASS_FOR_ACTION[tx.action]
        events.append(MevEvent(tx.sender_id, source.tx_id, source.embedded_opportunity, cls))
        if cls is MevClass.DIVERTING:
            realized[source.tx_id] -= source.embedded_opportunity
    return Extraction(tuple(events), realized)


@dataclass(frozen=True)
class PgaResult:
    winner: int | None
    winning_fee: int
    sunk: tuple[int, ...]
    bids_placed: int
    opportunity_value: int

    @property
    def miner_revenue(self) -> int:
        return self.winning_fee + sum(self.sunk)

    @property
    def payoffs(self) -> tuple[int, ...]:
        won = [self.opportunity_value - self.winning_fee if j == self.winner else 0 for j in range(len(self.sunk))]
        return tuple(w - s for w, s in zip(won, self.sunk))


def run_pga(opportunity_value: int, searchers: int, increment: int, per_bid_gas_cost: int) -> PgaResult:
    """Open ascending escalation where every bid burns gas.

    Searchers take turns. On its turn a searcher raises the standing fee by
    ``increment`` if ``value - new_fee - gas already sunk >= 0``, paying
    ``per_bid_gas_cost`` for the attempt; otherwise it drops out for good.
    The last searcher standing wins and pays its fee. All gas is paid, win
    or lose, so the miner collects the fee plus every participant's gas.
    """
    if searchers < 2:
        raise ContractViolation("a PGA needs at least two searchers")
    if increment < 1:
        raise ContractViolation("increment must be at least 1")
    if opportunity_value < 0 or per_bid_gas_cost < 0:
        raise ContractViolation("value and gas cost must be non-negative")
    sunk = [0] * searchers
    active = [True] * searchers
    fee, leader, placed = 0, None, 0
    turn, n_active = 0, searchers
    while n_active - (leader is not None) > 0:
        j = turn % searchers
        turn += 1
        if not active[j] or j == leader:
            continue
        nxt = fee + increment
        if opportunity_value - nxt - sunk[j] >= 0:
            sunk[j] += per_bid_gas_cost
            fee, leader = nxt, j
            placed += 1
        else:
            active[j] = False
            n_active -= 1
    return PgaResult(leader, fee if leader is not None else 0, tuple(sunk), placed, opportunity_value)


@dataclass(frozen=True, slots=True)
class Relay:
    relay_id: int
    # fraction of each sealed bid kept by the relay; zero by default
    fee_pct: int = 0


def route_private(
    items: Sequence[MempoolTx | Bundle],
    relay: Relay | None,
    capacity: int,
) -> tuple[BidProfile, list[MempoolTx | Bundle]]:
    """Send transactions and bundles through a relay.

    Returned transactions are hidden from :func:`scan_mempool`. Each item
    becomes one sealed bid: a transaction bids its ``fee``, a bundle its
    ``bid`` over the summed gas of its members.
    """
    if relay is None:
        raise ConfigurationError("no relay exists in this era")
    hidden: list[MempoolTx | Bundle] = []
    bids = []
    for item in items:
        if isinstance(item, Bundle):
            txs = tuple(_hide(t) for t in item.txs)
            hidden.append(Bundle(item.bundle_id, item.searcher_id, txs, item.bid))
            bids.append(Bid(item.bundle_id, item.bid, item.size))
        else:
            hidden.append(_hide(item))
            bids.append(Bid(item.tx_id, item.fee, item.size))
    return BidProfile(tuple(bids), capacity), hidden


def _hide(tx: MempoolTx) -> MempoolTx:
    return replace(tx, visible=False)


def price_gap_opportunity(rng: random.Random, gap_range: tuple[int, int], qty_range: tuple[int, int]) -> int:
    """Arbitrage profit from buying on the cheaper of two venues: gap times quantity."""
    return rng.randint(*gap_range) * rng.randint(*qty_range)


EVENT_HEADER = ["block", "searcher_id", "source_tx", "classification", "captured_value"]
