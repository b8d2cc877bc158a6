"""Slot-by-slot block production across five market structures.

Every block yields a :class:`FlowLedger` of integer flows. Payoffs are derived
from the flows by formula and, independently, from a double-entry book that
records each transfer as it happens. The two must agree to the unit and the
total must equal ``V_hat + R - B``; any mismatch raises
:class:`LedgerImbalanceError`.

Era summary:

* ``BASELINE``: users bid fees, the miner runs a greedy knapsack auction.
* ``PGA_ERA``: searchers fight an open all-pay escalation for each visible
  opportunity; winners get priority inclusion next to their target.
* ``RELAY_ERA``: searchers send sealed bundle bids; some users route
  privately. One sealed auction per opportunity, then one for block space.
* ``EIP1559_ERA``: as the relay era plus a burned base fee and admission.
* ``PBS_ERA``: several builders assemble blocks and bribe the proposer, who
  sees only headers relayed to it and picks the largest bribe.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import hashlib
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .auctions import Bid, BidProfile, Rule, run_auction
from .errors import ConfigurationError, ContractViolation, LedgerImbalanceError
from .feemarket import BaseFeeState, eligible_users, update_base_fee
from .knapsack import Item, KnapsackInstance, solve_exact
from .mev import (
    ACTION_FOR_KIND,
    Action,
    Bundle,
    MempoolTx,
    MevEvent,
    Relay,
    TxKind,
    apply_extraction,
    price_gap_opportunity,
    route_private,
    run_pga,
    scan_mempool,
)


class Era(str, enum.Enum):
    BASELINE = "BASELINE"
    PGA_ERA = "PGA_ERA"
    RELAY_ERA = "RELAY_ERA"
    EIP1559_ERA = "EIP1559_ERA"
    PBS_ERA = "PBS_ERA"

    @classmethod
    def parse(cls, name: str) -> "Era":
        key = name.strip().upper().replace("-", "_")
        for era in cls:
            if key in (era.value, era.value.removesuffix("_ERA")):
                return era
        raise ConfigurationError(f"unknown era {name!r}")

    @property
    def burns(self) -> bool:
        return self in (Era.EIP1559_ERA, Era.PBS_ERA)

    @property
    def has_relays(self) -> bool:
        return self in (Era.RELAY_ERA, Era.EIP1559_ERA, Era.PBS_ERA)


BLOCK_SPACE_RULES = (Rule.DP, Rule.GSP, Rule.UP, Rule.CRITICAL)

# id ranges inside one slot; user ids stay below the first searcher id
SEARCHER_TX_BASE = 1_000_000
BUNDLE_BASE = 2_000_000


@dataclass(frozen=True)
class EraConfig:
    """Everything a single era needs to produce blocks.

    ``relay_count=None`` picks 0 for eras without relays and 1 otherwise.
    Percentages are integers in ``[0, 100]``.
    """

    era: Era
    auction_rule: Rule = Rule.DP
    block_reward: int = 500_000_000
    relay_count: int | None = None
    builder_count: int = 3
    slot_seconds: int = 12
    slots_per_epoch: int = 32
    # fee market
    target_gas: int = 15_000_000
    max_gas: int = 30_000_000
    adjustment_denominator: int = 8
    min_base_fee: int = 1
    initial_base_fee: int = 20
    min_tip: int = 1
    # agents
    searcher_count: int = 3
    searcher_gas: int = 100_000
    searcher_bid_pct: tuple[int, int] = (70, 95)
    bundle_setup_pct: int = 30
    setup_gas: int = 50_000
    pga_increment: int = 10_000
    pga_gas_cost: int = 2_000
    private_share_pct: int = 50
    private_flow_pct: int = 60
    bribe_pct: int = 90
    builder_mev: int = 0
    proposer_mev: int = 0
    relay_fee_pct: int = 0

    def __post_init__(self):
        era = Era.parse(self.era) if isinstance(self.era, str) else self.era
        object.__setattr__(self, "era", era)
        rule = Rule.parse(self.auction_rule) if isinstance(self.auction_rule, str) else self.auction_rule
        if rule not in BLOCK_SPACE_RULES:
            raise ConfigurationError(f"block space cannot be sold under {rule.value}")
        object.__setattr__(self, "auction_rule", rule)
        relays = self.relay_count
        if relays is None:
            relays = 1 if era.has_relays else 0
            object.__setattr__(self, "relay_count", relays)
        if relays < 0 or self.builder_count < 0:
            raise ConfigurationError("relay and builder counts must be non-negative")
        if not era.has_relays and relays:
            raise ConfigurationError(f"{era.value} has no relays, got relay_count={relays}")
        if era.has_relays and relays < 1:
            raise ConfigurationError(f"{era.value} needs at least one relay")
        if era is Era.PBS_ERA and self.builder_count < 1:
            raise ConfigurationError("PBS_ERA needs at least one builder")
        if self.slots_per_epoch < 1 or self.slot_seconds < 1:
            raise ConfigurationError("slot timing must be positive")
        if self.block_reward < 0 or self.builder_mev < 0 or self.proposer_mev < 0:
            raise ConfigurationError("reward and self-extraction must be non-negative")
        if not 0 < self.target_gas <= self.max_gas:
            raise ConfigurationError("need 0 < target_gas <= max_gas")
        if self.searcher_count < 2 and era is Era.PGA_ERA:
            raise ConfigurationError("a PGA needs at least two searchers")
        if self.searcher_count < 0 or self.searcher_gas <= 0 or self.setup_gas <= 0:
            raise ConfigurationError("searcher count and gas must be positive")
        lo, hi = self.searcher_bid_pct
        if not 0 <= lo <= hi <= 100:
            raise ConfigurationError("searcher_bid_pct must satisfy 0 <= lo <= hi <= 100")
        for name in ("bundle_setup_pct", "private_share_pct", "private_flow_pct", "bribe_pct", "relay_fee_pct"):
            if not 0 <= getattr(self, name) <= 100:
                raise ConfigurationError(f"{name} must be in [0, 100]")
        if self.pga_increment < 1 or self.pga_gas_cost < 0:
            raise ConfigurationError("PGA increment must be >= 1 and gas cost >= 0")
        if self.initial_base_fee < self.min_base_fee or self.min_tip < 0:
            raise ConfigurationError("initial base fee below its floor or negative tip")

    @property
    def capacity(self) -> int:
        """Block gas limit: the old single limit before the fee market, ``max_gas`` after."""
        return self.max_gas if self.era.burns else self.target_gas

    def initial_state(self) -> "ChainState":
        fee = None
        if self.era.burns:
            fee = BaseFeeState(
                self.initial_base_fee,
                self.target_gas,
                self.max_gas,
                self.adjustment_denominator,
                0,
                self.min_base_fee,
            )
        return ChainState(0, fee)


@dataclass(frozen=True)
class MempoolParams:
    tx_count: int = 150
    size_bounds: tuple[int, int] = (21_000, 500_000)
    gas_quantum: int = 1_000
    vpg_bounds: tuple[int, int] = (1, 100)
    shade_bounds: tuple[int, int] = (30, 90)
    mix: Mapping[TxKind, float] = field(
        default_factory=lambda: {
            TxKind.PLAIN: 0.85,
            TxKind.ARBITRAGE_CAPTURE: 0.06,
            TxKind.VULNERABLE_FUNDS: 0.02,
            TxKind.ANOMALY_CREATOR: 0.07,
        }
    )
    gap_bounds: tuple[int, int] = (1, 200)
    qty_bounds: tuple[int, int] = (1_000, 50_000)

    def __post_init__(self):
        mix = {TxKind(k) if isinstance(k, str) else k: float(v) for k, v in dict(self.mix).items()}
        object.__setattr__(self, "mix", mix)
        if self.tx_count < 0 or self.tx_count >= SEARCHER_TX_BASE:
            raise ConfigurationError(f"tx_count must be in [0, {SEARCHER_TX_BASE})")
        if any(w < 0 for w in mix.values()):
            raise ConfigurationError("mix weights must be non-negative")
        if self.tx_count and sum(mix.values()) <= 0:
            raise ConfigurationError("mix needs a positive weight")
        if self.tx_count == 0 and any(w > 0 for k, w in mix.items() if k is not TxKind.PLAIN):
            raise ConfigurationError("zero transactions cannot carry a non-plain mix")
        for name in ("size_bounds", "vpg_bounds", "shade_bounds", "gap_bounds", "qty_bounds"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ConfigurationError(f"{name} must satisfy 0 <= lo <= hi")
        if self.gas_quantum < 1:
            raise ConfigurationError("gas_quantum must be >= 1")
        lo, hi = self.size_bounds
        if lo < 1 or -(-lo // self.gas_quantum) * self.gas_quantum > hi:
            raise ConfigurationError("no quantized size fits inside size_bounds")
        if self.shade_bounds[1] > 100:
            raise ConfigurationError("shade percentages cannot exceed 100")


def _slot_rng(seed: int, slot: int, stream: str) -> random.Random:
    # string seeds hash through sha512, so this is stable across processes
    return random.Random(f"{seed}:{slot}:{stream}")


def generate_mempool(seed: int, params: MempoolParams = MempoolParams(), slot: int = 0) -> list[MempoolTx]:
    """User transactions for one slot, fully determined by ``(seed, slot)``.

    Sizes are multiples of ``gas_quantum`` inside ``size_bounds``. Plain and
    anomaly-creating users value their transaction at ``vpg * size``. For a
    diverting kind the value at stake is the opportunity itself, so a
    successful front-run leaves the user with nothing.
    """
    rng = _slot_rng(seed, slot, "mempool")
    q = params.gas_quantum
    lo = -(-params.size_bounds[0] // q)
    hi = params.size_bounds[1] // q
    kinds = list(params.mix)
    weights = [params.mix[k] for k in kinds]
    out = []
    for tx_id in range(1, params.tx_count + 1):
        kind = rng.choices(kinds, weights)[0]
        size = rng.randint(lo, hi) * q
        vpg = rng.randint(*params.vpg_bounds)
        shade = rng.randint(*params.shade_bounds)
        opp = None
        value = vpg * size
        if kind is not TxKind.PLAIN:
            opp = price_gap_opportunity(rng, params.gap_bounds, params.qty_bounds)
            if ACTION_FOR_KIND[kind] is Action.FRONT_RUN:
                value = opp
        out.append(MempoolTx(tx_id, tx_id, size, value, kind, True, opp, shade))
    return out


@dataclass(frozen=True)
class ChainState:
    slot: int
    fee: BaseFeeState | None = None

    @property
    def base_fee(self) -> int:
        return self.fee.base_fee if self.fee is not None else 0


# -- ledger -----------------------------------------------------------------


@dataclass(frozen=True)
class FlowLedger:
    """Per-block flows. ``pga_sunk`` is informational and already inside ``T_s``."""

    era: Era
    V_u: int = 0
    M_s: int = 0
    M_b: int = 0
    M_p: int = 0
    F_b: int = 0
    T_u: int = 0
    T_s: int = 0
    B_u: int = 0
    B_s: int = 0
    R: int = 0
    relay_cut: int = 0
    pga_sunk: int = 0
    diverted: int = 0
    created: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name != "era" and getattr(self, f.name) < 0:
                raise LedgerImbalanceError(f"negative flow {f.name}={getattr(self, f.name)}")
        if self.relay_cut > self.F_b:
            raise LedgerImbalanceError("relay cut exceeds the bribe")

    @property
    def F_u(self) -> int:
        return self.B_u + self.T_u

    @property
    def F_s(self) -> int:
        return self.B_s + self.T_s

    @property
    def B(self) -> int:
        return self.B_u + self.B_s

    @property
    def separated(self) -> bool:
        return self.era is Era.PBS_ERA

    @property
    def V_hat(self) -> int:
        return self.V_u + self.M_s + self.M_b + self.M_p

    @property
    def pi_u(self) -> int:
        return self.V_u - self.F_u

    @property
    def pi_s(self) -> int:
        return self.M_s - self.F_s

    @property
    def pi_b(self) -> int:
        reward = 0 if self.separated else self.R
        return self.M_b + self.T_u + self.T_s - self.F_b + reward

    @property
    def pi_p(self) -> int:
        reward = self.R if self.separated else 0
        return self.M_p + self.F_b - self.relay_cut + reward

    @property
    def pi_r(self) -> int:
        return self.relay_cut

    @property
    def Pi(self) -> int:
        return self.pi_u + self.pi_s + self.pi_b + self.pi_p + self.pi_r

    def identity_holds(self) -> bool:
        return self.Pi == self.V_hat + self.R - self.B


class Books:
    """Double-entry record of who paid whom. ``burn`` is a sink, not an agent."""

    ROLES = ("user", "searcher", "builder", "proposer", "relay", "burn")

    def __init__(self):
        self.balance = dict.fromkeys(self.ROLES, 0)
        self.minted = 0

    def create(self, role: str, amount: int) -> None:
        self.balance[role] += amount
        self.minted += amount

    def transfer(self, src: str, dst: str, amount: int) -> None:
        if amount < 0:
            raise LedgerImbalanceError(f"negative transfer {src}->{dst}")
        self.balance[src] -= amount
        self.balance[dst] += amount

    def check(self, ledger: FlowLedger) -> None:
        b = self.balance
        derived = {
            "user": ledger.pi_u,
            "searcher": ledger.pi_s,
            "builder": ledger.pi_b,
            "proposer": ledger.pi_p,
            "relay": ledger.pi_r,
            "burn": ledger.B,
        }
        for role, want in derived.items():
            if b[role] != want:
                raise LedgerImbalanceError(f"{role}: books say {b[role]}, flows say {want}")
        if sum(b.values()) != self.minted:
            raise LedgerImbalanceError("transfers created or destroyed value")
        if not ledger.identity_holds():
            raise LedgerImbalanceError(
                f"payoffs {ledger.Pi} != V_hat + R - B = {ledger.V_hat + ledger.R - ledger.B}"
            )


# -- block assembly ---------------------------------------------------------


@dataclass(frozen=True)
class _Candidate:
    """One sealed bid for block space: a user transaction or a bundle."""

    bid_id: int
    txs: tuple[MempoolTx, ...]
    amount: int
    searcher_id: int | None = None
    target: int | None = None
    action: Action | None = None

    @property
    def size(self) -> int:
        return sum(t.size for t in self.txs)


@dataclass(frozen=True)
class _Assembly:
    order: tuple[MempoolTx, ...]
    payments: dict[int, int]  # by candidate id
    candidates: dict[int, _Candidate]
    pga_fees: int = 0
    pga_sunk: int = 0

    @property
    def gas_used(self) -> int:
        return sum(t.size for t in self.order)

    @property
    def tip_revenue(self) -> int:
        return sum(self.payments.values()) + self.pga_fees + self.pga_sunk


@dataclass(frozen=True)
class Header:
    builder_id: int
    relay_id: int
    bribe: int
    digest: str


@dataclass(frozen=True)
class CandidateBlock:
    builder_id: int
    txs: tuple[MempoolTx, ...]
    gas_used: int
    builder_tip_revenue: int
    bribe: int
    header: Header


class RelayDesk:
    """Holds submitted blocks and hands out headers only.

    Contents are released by :meth:`reveal` once the proposer has signed a
    header, never before.
    """

    def __init__(self, relay: Relay):
        self.relay = relay
        self._blocks: dict[str, tuple[CandidateBlock, _Assembly]] = {}
        self._signed: set[str] = set()

    def submit(self, block: CandidateBlock, assembly: _Assembly) -> Header:
        self._blocks[block.header.digest] = (block, assembly)
        return block.header

    def sign(self, header: Header) -> None:
        if header.digest not in self._blocks:
            raise ContractViolation("unknown header")
        self._signed.add(header.digest)

    def reveal(self, header: Header) -> tuple[CandidateBlock, _Assembly]:
        if header.digest not in self._signed:
            raise ContractViolation("block contents requested before the header was signed")
        return self._blocks[header.digest]


def select_header(headers: Sequence[Header]) -> Header:
    """Largest bribe; ties go to the lower relay id, then the lower builder id."""
    if not headers:
        raise ContractViolation("no headers to choose from")
    return min(headers, key=lambda h: (-h.bribe, h.relay_id, h.builder_id))


def _digest(builder_id: int, txs: Sequence[MempoolTx], bribe: int) -> str:
    h = hashlib.sha256(f"{builder_id}|{bribe}|".encode())
    h.update(",".join(str(t.tx_id) for t in txs).encode())
    return h.hexdigest()


def _user_bid(tx: MempoolTx, base_fee: int, min_tip: int, burns: bool) -> int:
    if not burns:
        return tx.true_value * tx.shade_pct // 100
    surplus = tx.true_value - base_fee * tx.size
    return max(min_tip * tx.size, surplus * tx.shade_pct // 100)


def _user_candidates(users: Sequence[MempoolTx], cfg: EraConfig, state: ChainState) -> list[_Candidate]:
    if cfg.era.burns:
        pairs = [(t.true_value // t.size, t.size) for t in users]
        keep = [users[i] for i in eligible_users(pairs, state.fee, cfg.min_tip)]
    else:
        keep = list(users)
    return [
        _Candidate(t.tx_id, (t,), _user_bid(t, state.base_fee, cfg.min_tip, cfg.era.burns)) for t in keep
    ]


def _searcher_bids(cfg: EraConfig, rng: random.Random) -> list[int]:
    lo, hi = cfg.searcher_bid_pct
    return [rng.randint(lo, hi) for _ in range(cfg.searcher_count)]


def _bundles_for(
    opportunities,
    cfg: EraConfig,
    state: ChainState,
    pct: Sequence[int],
    rng: random.Random,
    counter: list[int],
) -> list[tuple[int, Bundle]]:
    """Every searcher's sealed bundle for every opportunity, as ``(source_tx, bundle)``."""
    out = []
    for opp in opportunities:
        for s, share in enumerate(pct, start=1):
            txs = []
            if rng.randrange(100) < cfg.bundle_setup_pct:
                counter[0] += 1
                txs.append(MempoolTx(SEARCHER_TX_BASE + counter[0], s, cfg.setup_gas, 0))
            counter[0] += 1
            txs.append(
                MempoolTx(SEARCHER_TX_BASE + counter[0], s, cfg.searcher_gas, 0, target_tx=opp.source_tx, action=opp.action)
            )
            gas = sum(t.size for t in txs)
            net = opp.value - state.base_fee * gas
            amount = net * share // 100
            if amount <= 0 or amount < cfg.min_tip * gas:
                continue
            counter[0] += 1
            out.append((opp.source_tx, Bundle(BUNDLE_BASE + counter[0], s, tuple(txs), amount)))
    return out


def _sealed_stage_one(bundles: Sequence[tuple[int, Bundle]]) -> list[_Candidate]:
    """Pay-as-bid auction per opportunity; the top bundle goes on to the block auction."""
    by_source: dict[int, list[Bundle]] = {}
    for src, b in bundles:
        by_source.setdefault(src, []).append(b)
    winners = []
    for src in sorted(by_source):
        group = by_source[src]
        profile = BidProfile(tuple(Bid(b.bundle_id, b.bid, 1) for b in group), 1)
        won = run_auction(profile, Rule.DP).winners[0]
        b = next(x for x in group if x.bundle_id == won)
        winners.append(_Candidate(b.bundle_id, b.txs, b.bid, b.searcher_id, b.target_tx, b.action))
    return winners


def _order_block(user_order: Sequence[_Candidate], extras: Sequence[_Candidate]) -> tuple[MempoolTx, ...]:
    """Place each searcher item next to its target, keeping bundles contiguous.

    Front-runs go immediately before the target and back-runs immediately
    after. Items whose target is absent lead the block.
    """
    present = {c.bid_id for c in user_order}
    before: dict[int, list[_Candidate]] = {}
    after: dict[int, list[_Candidate]] = {}
    orphans = []
    for c in extras:
        if c.target not in present:
            orphans.append(c)
        elif c.action is Action.FRONT_RUN:
            before.setdefault(c.target, []).append(c)
        else:
            after.setdefault(c.target, []).append(c)
    order: list[MempoolTx] = []
    for c in orphans:
        order.extend(c.txs)
    for u in user_order:
        for c in before.get(u.bid_id, ()):
            order.extend(c.txs)
        order.extend(u.txs)
        for c in after.get(u.bid_id, ()):
            order.extend(c.txs)
    return tuple(order)


def _block_auction(cands: Sequence[_Candidate], capacity: int, rule: Rule) -> _Assembly:
    """Sell block space; drop bundles whose target lost and re-run until stable."""
    live = {c.bid_id: c for c in cands}
    live = {k: c for k, c in live.items() if c.target is None or c.target in live}
    while True:
        if not live:
            return _Assembly((), {}, {})
        profile = BidProfile(tuple(Bid(c.bid_id, c.amount, c.size) for c in live.values()), capacity)
        outcome = run_auction(profile, rule)
        won = set(outcome.winners)
        orphaned = [k for k in won if live[k].target is not None and live[k].target not in won]
        if not orphaned:
            break
        for k in orphaned:
            del live[k]
    users = [live[k] for k in outcome.winners if live[k].target is None]
    extras = [live[k] for k in outcome.winners if live[k].target is not None]
    order = _order_block(users, extras)
    return _Assembly(order, dict(outcome.payments), {k: live[k] for k in outcome.winners})


def _pga_assembly(users: Sequence[MempoolTx], cfg: EraConfig, state: ChainState) -> _Assembly:
    cap = cfg.capacity
    cands = _user_candidates(users, cfg, state)
    priority = []
    fees = sunk = 0
    used = 0
    for n, opp in enumerate(scan_mempool(users), start=1):
        res = run_pga(opp.value, cfg.searcher_count, cfg.pga_increment, cfg.pga_gas_cost)
        sunk += sum(res.sunk)
        if res.winner is None or used + cfg.searcher_gas > cap:
            continue
        used += cfg.searcher_gas
        fees += res.winning_fee
        tx = MempoolTx(SEARCHER_TX_BASE + n, res.winner + 1, cfg.searcher_gas, 0, target_tx=opp.source_tx, action=opp.action)
        priority.append(_Candidate(BUNDLE_BASE + n, (tx,), res.winning_fee, res.winner + 1, opp.source_tx, opp.action))
    payments: dict[int, int] = {}
    winners: list[_Candidate] = []
    by_id = {c.bid_id: c for c in cands}
    if cands and cap - used > 0:
        profile = BidProfile(tuple(Bid(c.bid_id, c.amount, c.size) for c in cands), cap - used)
        outcome = run_auction(profile, cfg.auction_rule)
        payments = dict(outcome.payments)
        winners = [by_id[k] for k in outcome.winners]
    order = _order_block(winners, priority)
    chosen = {c.bid_id: c for c in winners}
    chosen.update({c.bid_id: c for c in priority})
    return _Assembly(order, payments, chosen, fees, sunk)


def _sealed_assembly(
    users: Sequence[MempoolTx],
    bundles: Sequence[tuple[int, Bundle]],
    cfg: EraConfig,
    state: ChainState,
) -> _Assembly:
    cands = _user_candidates(users, cfg, state) + _sealed_stage_one(bundles)
    return _block_auction(cands, cfg.capacity, cfg.auction_rule)


# -- block production -------------------------------------------------------


@dataclass(frozen=True)
class Block:
    slot: int
    era: Era
    txs: tuple[MempoolTx, ...]
    gas_used: int
    base_fee: int
    builder_id: int | None = None
    header: Header | None = None
    events: tuple[MevEvent, ...] = ()


def _private_split(users: Sequence[MempoolTx], cfg: EraConfig, seed: int, slot: int):
    """Diverting-kind users with a relay available hide their transaction with some probability."""
    if not cfg.era.has_relays:
        return list(users), []
    rng = _slot_rng(seed, slot, "routing")
    public, private = [], []
    for tx in users:
        roll = rng.randrange(100)
        diverting = tx.kind is not TxKind.PLAIN and ACTION_FOR_KIND[tx.kind] is Action.FRONT_RUN
        (private if diverting and roll < cfg.private_share_pct else public).append(tx)
    if private:
        _profile, private = route_private(private, Relay(0, cfg.relay_fee_pct), cfg.capacity)
    return public, private


def run_block(
    era: EraConfig,
    mempool: Sequence[MempoolTx],
    state: ChainState,
    seed: int = 0,
) -> tuple[Block, FlowLedger, ChainState]:
    """Produce one block from ``mempool`` and settle every payment.

    ``seed`` feeds the agents' per-slot randomness (searcher bid shares,
    private routing, private order flow); the mempool carries its own.
    """
    cfg = era
    if (state.fee is not None) != cfg.era.burns:
        raise ContractViolation(f"{cfg.era.value}: base fee state must be present iff the era burns")
    slot = state.slot
    rng = _slot_rng(seed, slot, "agents")
    public, private = _private_split(mempool, cfg, seed, slot)
    users = public + private
    header = None
    builder_id = None
    F_b = 0

    if cfg.era is Era.BASELINE:
        asm = _block_auction(_user_candidates(users, cfg, state), cfg.capacity, cfg.auction_rule)
    elif cfg.era is Era.PGA_ERA:
        asm = _pga_assembly(users, cfg, state)
    elif cfg.era is not Era.PBS_ERA:
        pct = _searcher_bids(cfg, rng)
        bundles = _bundles_for(scan_mempool(public), cfg, state, pct, rng, [0])
        asm = _sealed_assembly(users, bundles, cfg, state)
    else:
        asm, header, F_b = _pbs_auction(public, private, cfg, state, rng)
        builder_id = header.builder_id

    ext = apply_extraction(asm.order)
    ledger, books = _settle(cfg, state, asm, ext, F_b)
    books.check(ledger)

    gas = asm.gas_used
    if gas > cfg.capacity:
        raise ContractViolation(f"block uses {gas} gas over the {cfg.capacity} limit")
    fee = state.fee
    if fee is not None:
        fee = update_base_fee(dataclasses.replace(fee, cumulative_burn=fee.cumulative_burn + ledger.B), gas)
    block = Block(slot, cfg.era, asm.order, gas, state.base_fee, builder_id, header, ext.events)
    return block, ledger, ChainState(slot + 1, fee)


def _pbs_auction(public, private, cfg: EraConfig, state: ChainState, rng: random.Random):
    pct = _searcher_bids(cfg, rng)
    bundles = _bundles_for(scan_mempool(public), cfg, state, pct, rng, [0])
    desks = [RelayDesk(Relay(r, cfg.relay_fee_pct)) for r in range(cfg.relay_count)]
    headers = []
    for b in range(1, cfg.builder_count + 1):
        # each builder hears about each private item independently
        mine_u = [t for t in private if rng.randrange(100) < cfg.private_flow_pct]
        mine_b = [x for x in bundles if rng.randrange(100) < cfg.private_flow_pct]
        asm = _sealed_assembly(public + mine_u, mine_b, cfg, state)
        tips = asm.tip_revenue
        bribe = cfg.bribe_pct * (tips + cfg.builder_mev) // 100
        relay = desks[(b - 1) % len(desks)]
        head = Header(b, relay.relay.relay_id, bribe, _digest(b, asm.order, bribe))
        block = CandidateBlock(b, asm.order, asm.gas_used, tips, bribe, head)
        headers.append((relay, relay.submit(block, asm)))
    chosen = select_header([h for _, h in headers])
    desk = next(d for d, h in headers if h is chosen)
    desk.sign(chosen)
    block, asm = desk.reveal(chosen)
    return asm, chosen, block.bribe


def _settle(cfg: EraConfig, state: ChainState, asm: _Assembly, ext, F_b: int):
    """Fill the ledger from aggregates and the books from individual transfers."""
    base = state.base_fee
    books = Books()
    V_u = T_u = T_s = B_u = B_s = 0
    for cid, cand in asm.candidates.items():
        pay = asm.payments.get(cid, 0)
        if cand.target is None:
            (tx,) = cand.txs
            books.create("user", tx.true_value)
            burn = base * tx.size
            books.transfer("user", "burn", burn)
            books.transfer("user", "builder", pay)
            V_u += ext.realized[tx.tx_id]
            T_u += pay
            B_u += burn
        else:
            burn = base * cand.size
            books.transfer("searcher", "burn", burn)
            books.transfer("searcher", "builder", pay)
            T_s += pay
            B_s += burn
    # PGA fees and all-pay gas go to the miner as searcher payments
    books.transfer("searcher", "builder", asm.pga_fees + asm.pga_sunk)
    T_s += asm.pga_fees + asm.pga_sunk
    for ev in ext.events:
        if ev.classification.value == "DIVERTING":
            books.transfer("user", "searcher", ev.captured_value)
        else:
            books.create("searcher", ev.captured_value)
    books.create("builder", cfg.builder_mev)
    books.create("proposer", cfg.proposer_mev)
    books.create("proposer" if cfg.era is Era.PBS_ERA else "builder", cfg.block_reward)
    cut = F_b * cfg.relay_fee_pct // 100
    books.transfer("builder", "proposer", F_b - cut)
    books.transfer("builder", "relay", cut)
    ledger = FlowLedger(
        cfg.era,
        V_u=V_u,
        M_s=ext.captured,
        M_b=cfg.builder_mev,
        M_p=cfg.proposer_mev,
        F_b=F_b,
        T_u=T_u,
        T_s=T_s,
        B_u=B_u,
        B_s=B_s,
        R=cfg.block_reward,
        relay_cut=cut,
        pga_sunk=asm.pga_sunk,
        diverted=ext.diverted,
        created=ext.created,
    )
    return ledger, books


def efficiency_ratio(users: Sequence[MempoolTx], block: Block, capacity: int) -> float:
    """Included users' true value over the best packing of all users."""
    if not users:
        return 1.0
    inst = KnapsackInstance(tuple(Item(t.tx_id, t.size, t.true_value) for t in users), capacity)
    best = solve_exact(inst).total_value
    got = sum(t.true_value for t in block.txs if not t.is_searcher)
    return 1.0 if best == 0 else got / best


# -- runs -------------------------------------------------------------------


REPORT_HEADER = ["slot", "era", "pi_u", "pi_s", "pi_b", "pi_p", "Pi", "V_hat", "R", "B", "F_b", "efficiency_ratio"]


@dataclass(frozen=True)
class SlotRow:
    slot: int
    ledger: FlowLedger
    efficiency: float
    base_fee: int
    gas_used: int
    builder_id: int | None

    def csv(self) -> list[str]:
        L = self.ledger
        vals = [L.pi_u, L.pi_s, L.pi_b, L.pi_p, L.Pi, L.V_hat, L.R, L.B, L.F_b]
        return [str(self.slot), L.era.value, *map(str, vals), f"{self.efficiency:.6f}"]


@dataclass(frozen=True)
class RunReport:
    era: Era
    seed: int
    rows: tuple[SlotRow, ...]

    def total(self, attr: str) -> int:
        return sum(getattr(r.ledger, attr) for r in self.rows)

    @property
    def violations(self) -> int:
        return sum(not r.ledger.identity_holds() for r in self.rows)

    @property
    def revenue(self) -> int:
        """Producer-side receipts from users and searchers, burn excluded."""
        return self.total("T_u") + self.total("T_s")

    @property
    def surplus(self) -> int:
        return self.total("Pi")

    @property
    def mean_efficiency(self) -> float:
        return sum(r.efficiency for r in self.rows) / len(self.rows)

    @property
    def burn_trajectory(self) -> list[int]:
        out, acc = [], 0
        for r in self.rows:
            acc += r.ledger.B
            out.append(acc)
        return out


def run_epochs(
    era: EraConfig,
    epochs: int,
    seed: int,
    mempool: MempoolParams = MempoolParams(),
) -> RunReport:
    if epochs < 1:
        raise ContractViolation("epochs must be >= 1")
    state = era.initial_state()
    rows = []
    for _ in range(epochs * era.slots_per_epoch):
        users = generate_mempool(seed, mempool, state.slot)
        block, ledger, nxt = run_block(era, users, state, seed)
        eff = efficiency_ratio(users, block, era.capacity)
        rows.append(SlotRow(state.slot, ledger, eff, block.base_fee, block.gas_used, block.builder_id))
        state = nxt
    return RunReport(era.era, seed, tuple(rows))


COMPARE_HEADER = ["era", "pi_u", "pi_s", "pi_b", "pi_p", "Pi", "V_hat", "R", "B", "diverted", "created", "pga_sunk", "violations"]


@dataclass(frozen=True)
class Scenario:
    """A base era configuration plus the mempool stream shared by all eras."""

    eras: tuple[Era, ...] = (Era.PBS_ERA,)
    epochs: int = 1
    base: Mapping[str, object] = field(default_factory=dict)
    mempool: MempoolParams = MempoolParams()

    def config(self, era: Era) -> EraConfig:
        return EraConfig(era=era, **dict(self.base))


def compare_eras(scenario: Scenario, eras: Iterable[Era | str] | None, seed: int) -> list[tuple[Era, RunReport]]:
    """Run every era on the same seeded mempool stream."""
    eras = scenario.eras if eras is None else tuple(Era.parse(e) if isinstance(e, str) else e for e in eras)
    return [(e, run_epochs(scenario.config(e), scenario.epochs, seed, scenario.mempool)) for e in eras]


def comparison_rows(results: Sequence[tuple[Era, RunReport]]) -> list[list[str]]:
    rows = []
    for era, rep in results:
        vals = [rep.total(a) for a in ("pi_u", "pi_s", "pi_b", "pi_p", "Pi", "V_hat", "R", "B", "diverted", "created", "pga_sunk")]
        rows.append([era.value, *map(str, vals), str(rep.violations)])
    return rows


# -- scenario files -----------------------------------------------------------

_INT_KEYS = {f.name for f in dataclasses.fields(EraConfig) if f.type in ("int", "int | None")}
_PAIR_KEYS = {"searcher_bid_pct"}
_FEE_KEYS = {"target_gas", "max_gas", "adjustment_denominator", "min_base_fee", "initial_base_fee", "min_tip"}
_MEMPOOL_PAIRS = {"size_bounds", "vpg_bounds", "shade_bounds", "gap_bounds", "qty_bounds"}


def _pair(text: str) -> tuple[int, int]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ConfigurationError(f"expected two integers, got {text!r}")
    return int(parts[0]), int(parts[1])


def parse_scenario(text: str) -> tuple[Scenario, configparser.ConfigParser]:
    """Read an INI-style scenario. Returns the scenario and the raw parser.

    Unknown keys in ``[era]``, ``[mempool]`` and ``[feemarket]`` are errors;
    ``[agents]`` also carries tournament settings, so keys this module does
    not know are left for other readers.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"bad scenario file: {exc}") from exc
    base: dict[str, object] = {}
    eras: tuple[Era, ...] = (Era.PBS_ERA,)
    epochs = 1
    try:
        if cp.has_section("era"):
            for key, val in cp.items("era"):
                if key in ("era", "eras"):
                    eras = tuple(Era.parse(e) for e in val.replace(",", " ").split())
                elif key == "epochs":
                    epochs = int(val)
                elif key == "auction_rule":
                    base[key] = val
                elif key in _INT_KEYS and key not in _FEE_KEYS:
                    base[key] = int(val)
                else:
                    raise ConfigurationError(f"[era]: unknown key {key!r}")
        if cp.has_section("feemarket"):
            for key, val in cp.items("feemarket"):
                if key not in _FEE_KEYS:
                    raise ConfigurationError(f"[feemarket]: unknown key {key!r}")
                base[key] = int(val)
        if cp.has_section("agents"):
            for key, val in cp.items("agents"):
                if key in _PAIR_KEYS:
                    base[key] = _pair(val)
                elif key in _INT_KEYS and key not in _FEE_KEYS:
                    base[key] = int(val)
        mp: dict[str, object] = {}
        if cp.has_section("mempool"):
            for key, val in cp.items("mempool"):
                if key in _MEMPOOL_PAIRS:
                    mp[key] = _pair(val)
                elif key in ("tx_count", "gas_quantum"):
                    mp[key] = int(val)
                elif key.startswith("mix."):
                    mp.setdefault("mix", {})[TxKind(key[4:].upper())] = float(val)
                else:
                    raise ConfigurationError(f"[mempool]: unknown key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc
    if epochs < 1:
        raise ConfigurationError("epochs must be >= 1")
    scenario = Scenario(eras, epochs, base, MempoolParams(**mp))
    for e in eras:
        scenario.config(e)  # validate every era up front
    return scenario, cp
