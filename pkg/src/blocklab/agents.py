"""Bidders for the repeated knapsack auction: truthful, fixed shading, Q-learning.

A Q-learner keeps a table over (price bucket, bid multiplier). The state is
the bucket of last episode's price signal per unit of gas: the clearing price
under ``UP`` and the lowest winning bid otherwise. Each episode it bids
``floor(multiplier * value)`` for an epsilon-greedy multiplier and learns from
its own payoff.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .auctions import Bid, BidProfile, Rule, run_auction
from .errors import ConfigurationError, ContractViolation
from .knapsack import Item, KnapsackInstance, solve_exact

DEFAULT_MULTIPLIERS = tuple(round(0.5 + 0.1 * i, 1) for i in range(8))  # 0.5 .. 1.2


class Kind(str, enum.Enum):
    TRUTHFUL = "TRUTHFUL"
    SHADE = "SHADE"
    QLEARN = "QLEARN"


@dataclass(frozen=True)
class QParams:
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon: float = 0.2
    epsilon_decay: float = 0.999
    buckets: int = 10
    # starting value of every table entry; a high value makes early play explore
    initial_q: float = 0.0

    def __post_init__(self):
        if not self.multipliers or any(m <= 0 for m in self.multipliers):
            raise ConfigurationError("multipliers must be positive")
        if not 0 <= self.epsilon <= 1 or not 0 <= self.epsilon_decay <= 1:
            raise ConfigurationError("epsilon and its decay must lie in [0, 1]")
        if not 0 < self.alpha <= 1 or not 0 <= self.gamma < 1:
            raise ConfigurationError("need 0 < alpha <= 1 and 0 <= gamma < 1")
        if self.buckets < 1:
            raise ConfigurationError("need at least one price bucket")


@dataclass
class Strategy:
    """How one agent turns its value into a bid.

    ``QLEARN`` strategies own a mutable table and exploration state; the
    others are stateless.
    """

    kind: Kind
    factor: float = 1.0
    params: QParams | None = None
    table: np.ndarray | None = None
    epsilon: float = 0.0
    rng: random.Random | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind is Kind.SHADE and not 0 <= self.factor <= 1:
            raise ConfigurationError("shade factor must lie in [0, 1]")

    @classmethod
    def truthful(cls) -> "Strategy":
        return cls(Kind.TRUTHFUL)

    @classmethod
    def shade(cls, factor: float) -> "Strategy":
        return cls(Kind.SHADE, factor)

    @classmethod
    def qlearn(cls, params: QParams = QParams(), rng: random.Random | None = None) -> "Strategy":
        table = np.full((params.buckets, len(params.multipliers)), float(params.initial_q))
        return cls(Kind.QLEARN, params=params, table=table, epsilon=params.epsilon, rng=rng or random.Random(0))

    def choose(self, state: int) -> int:
        """Index of the multiplier to play in ``state``."""
        p = self.params
        if self.epsilon > 0 and self.rng.random() < self.epsilon:
            return self.rng.randrange(len(p.multipliers))
        row = self.table[state]
        return int(np.flatnonzero(row == row.max())[-1])

    def learn(self, state: int, action: int, reward: float, next_state: int) -> None:
        p = self.params
        target = reward + p.gamma * self.table[next_state].max()
        self.table[state, action] += p.alpha * (target - self.table[state, action])

    def decay(self) -> None:
        self.epsilon *= self.params.epsilon_decay


def bid(strategy: Strategy, true_value: int, size: int, observed_state: int = 0) -> int:
    """Integer bid for an item of ``size`` worth ``true_value``."""
    amount, _ = _bid_with_action(strategy, true_value, observed_state)
    return amount


@functools.lru_cache(maxsize=None)
def _exact(x: float) -> Fraction:
    # go through the decimal text so that 0.8 means 4/5, not the nearest double
    return Fraction(repr(x))


def _bid_with_action(strategy: Strategy, value: int, state: int) -> tuple[int, int | None]:
    if strategy.kind is Kind.TRUTHFUL:
        return value, None
    if strategy.kind is Kind.SHADE:
        return math.floor(_exact(strategy.factor) * value), None
    a = strategy.choose(state)
    return math.floor(_exact(strategy.params.multipliers[a]) * value), a


# -- environment --------------------------------------------------------------


@dataclass(frozen=True)
class AuctionScenario:
    """Repeated auction setting. Each episode every agent draws a size and a per-gas value."""

    agents: int = 10
    capacity: int = 6
    size_bounds: tuple[int, int] = (1, 3)
    unit_value_bounds: tuple[int, int] = (10, 100)
    # 0 gives every agent the same value range; at 1 the last agent's upper
    # bound falls to the common lower bound
    asymmetry: float = 0.6
    # when set, agent i always has size sizes[i % len(sizes)]
    sizes: tuple[int, ...] = ()
    episodes: int = 3000
    eval_episodes: int = 300
    kind: Kind = Kind.QLEARN
    shade_factor: float = 0.8
    # optimistic start so every multiplier is tried before the table settles
    qparams: QParams = QParams(initial_q=1000.0)

    def __post_init__(self):
        if self.agents < 1 or self.capacity < 1 or self.episodes < 1 or self.eval_episodes < 1:
            raise ConfigurationError("agents, capacity and episode counts must be >= 1")
        lo, hi = self.size_bounds
        if not 1 <= lo <= hi:
            raise ConfigurationError("size bounds must satisfy 1 <= lo <= hi")
        lo, hi = self.unit_value_bounds
        if not 1 <= lo <= hi:
            raise ConfigurationError("value bounds must satisfy 1 <= lo <= hi")
        if any(k < 1 for k in self.sizes):
            raise ConfigurationError("sizes must be >= 1")
        if not 0 <= self.asymmetry <= 1:
            raise ConfigurationError("asymmetry must lie in [0, 1]")

    def strategies(self, seed: int) -> list[Strategy]:
        if self.kind is Kind.TRUTHFUL:
            return [Strategy.truthful() for _ in range(self.agents)]
        if self.kind is Kind.SHADE:
            return [Strategy.shade(self.shade_factor) for _ in range(self.agents)]
        return [Strategy.qlearn(self.qparams, random.Random(f"{seed}:explore:{i}")) for i in range(self.agents)]

    def draw(self, rng: random.Random) -> list[tuple[int, int]]:
        """``(value, size)`` per agent."""
        out = []
        for i in range(self.agents):
            k = self.sizes[i % len(self.sizes)] if self.sizes else rng.randint(*self.size_bounds)
            out.append((rng.randint(*self.value_range(i)) * k, k))
        return out

    def value_range(self, agent: int) -> tuple[int, int]:
        """Per-gas value range of agent ``agent`` (0-based)."""
        return _value_range(self, agent)

    def bucket(self, price_per_unit: Fraction) -> int:
        top = self.unit_value_bounds[1] * max(self.qparams.multipliers)
        b = int(price_per_unit / Fraction(top) * self.qparams.buckets)
        return min(self.qparams.buckets - 1, max(0, b))


@functools.lru_cache(maxsize=1024)
def _value_range(scenario: AuctionScenario, agent: int) -> tuple[int, int]:
    lo, hi = scenario.unit_value_bounds
    if scenario.agents == 1:
        return lo, hi
    frac = _exact(scenario.asymmetry) * agent / (scenario.agents - 1)
    return lo, hi - math.floor(frac * (hi - lo))


@dataclass(frozen=True)
class EpisodeResult:
    bids: tuple[int, ...]
    winners: tuple[int, ...]
    payments: dict[int, int]
    rewards: tuple[int, ...]
    revenue: int
    surplus: int
    efficiency: float
    signal: Fraction


@functools.lru_cache(maxsize=1 << 16)
def _optimum_cached(draw: tuple[tuple[int, int], ...], capacity: int) -> int:
    return _optimum(draw, capacity)


def _optimum(draw: Sequence[tuple[int, int]], capacity: int) -> int:
    inst = KnapsackInstance(tuple(Item(i, k, v) for i, (v, k) in enumerate(draw, start=1)), capacity)
    return solve_exact(inst).total_value


def play_episode(rule: Rule, draw: Sequence[tuple[int, int]], bids: Sequence[int], capacity: int) -> EpisodeResult:
    """One sealed auction. Agent ``i`` (0-based) bids as id ``i + 1``."""
    profile = BidProfile(tuple(Bid(i + 1, b, k) for i, (b, (_v, k)) in enumerate(zip(bids, draw))), capacity)
    out = run_auction(profile, rule)
    won = set(out.winners)
    rewards = tuple(v - out.payment(i + 1) if i + 1 in won else 0 for i, (v, _k) in enumerate(draw))
    value = sum(draw[i - 1][0] for i in out.winners)
    best = _optimum_cached(tuple(draw), capacity)
    eff = 1.0 if best == 0 else value / best
    signal = _price_signal(rule, profile, out.winners)
    return EpisodeResult(tuple(bids), out.winners, dict(out.payments), rewards, out.revenue, value, eff, signal)


def _price_signal(rule: Rule, profile: BidProfile, winners: Sequence[int]) -> Fraction:
    by_id = profile.by_id()
    if rule is Rule.UP:
        losing = [b.per_unit for b in profile.bids if b.agent_id not in set(winners)]
        return max(losing, default=Fraction(0))
    return min((by_id[w].per_unit for w in winners), default=Fraction(0))


@dataclass(frozen=True)
class TrainingReport:
    rule: Rule
    episodes: int
    revenue: tuple[int, ...]
    surplus: tuple[int, ...]
    efficiency: tuple[float, ...]
    bid_value_ratio: tuple[float, ...]

    def rows(self) -> list[list[str]]:
        return [
            [str(t), self.rule.value, str(r), str(s), f"{e:.6f}"]
            for t, (r, s, e) in enumerate(zip(self.revenue, self.surplus, self.efficiency))
        ]

    @property
    def mean_ratio(self) -> float:
        return sum(self.bid_value_ratio) / len(self.bid_value_ratio)


TRAINING_HEADER = ["episode", "rule", "revenue", "surplus", "efficiency"]


def _run(rule: Rule, strategies: Sequence[Strategy], scenario: AuctionScenario, episodes: int,
         draws: random.Random, learn: bool):
    state = 0
    results = []
    ratios = [[] for _ in strategies]
    for _ in range(episodes):
        draw = scenario.draw(draws)
        acts = [_bid_with_action(s, v, state) for s, (v, _k) in zip(strategies, draw)]
        res = play_episode(rule, draw, [a for a, _ in acts], scenario.capacity)
        nxt = scenario.bucket(res.signal)
        for i, (s, (_b, a)) in enumerate(zip(strategies, acts)):
            if learn and a is not None:
                s.learn(state, a, res.rewards[i], nxt)
                s.decay()
            ratios[i].append(acts[i][0] / draw[i][0])
        state = nxt
        results.append(res)
    return results, ratios


def train(
    rule: Rule | str,
    agents: Sequence[Strategy] | AuctionScenario,
    episodes: int,
    seed: int,
    scenario: AuctionScenario | None = None,
) -> TrainingReport:
    """Train (or just run) ``agents`` for ``episodes`` auctions under ``rule``.

    Value draws come from a generator seeded only by ``seed``, so two rules
    trained with the same seed face the same sequence of draws.
    """
    rule = Rule.parse(rule) if isinstance(rule, str) else rule
    if rule not in (Rule.DP, Rule.GSP, Rule.UP, Rule.CRITICAL):
        raise ConfigurationError(f"agents cannot train under {rule.value}")
    if episodes < 1:
        raise ContractViolation("episodes must be >= 1")
    if isinstance(agents, AuctionScenario):
        scenario, agents = agents, agents.strategies(seed)
    scenario = scenario or AuctionScenario(agents=len(agents))
    if len(agents) != scenario.agents:
        raise ConfigurationError("agent count does not match the scenario")
    results, ratios = _run(rule, agents, scenario, episodes, random.Random(f"{seed}:draws"), True)
    tail = max(1, episodes // 10)
    return TrainingReport(
        rule,
        episodes,
        tuple(r.revenue for r in results),
        tuple(r.surplus for r in results),
        tuple(r.efficiency for r in results),
        tuple(sum(r[-tail:]) / tail for r in ratios),
    )


def greedy_policy(strategies: Sequence[Strategy]) -> None:
    """Switch learners to pure exploitation."""
    for s in strategies:
        if s.kind is Kind.QLEARN:
            s.epsilon = 0.0


@dataclass(frozen=True)
class SeedResult:
    seed: int
    revenue: dict[Rule, float]
    efficiency: dict[Rule, float]

    def revenue_order_holds(self) -> bool:
        r = self.revenue
        return _ladder(r, (Rule.DP, Rule.GSP, Rule.UP))

    def efficiency_order_holds(self) -> bool:
        return _ladder(self.efficiency, (Rule.UP, Rule.GSP, Rule.DP))


def _ladder(scores: dict[Rule, float], order: tuple[Rule, ...]) -> bool:
    """Non-increasing along ``order``; rules that were not played are skipped."""
    present = [scores[r] for r in order if r in scores]
    return all(a >= b for a, b in zip(present, present[1:]))


@dataclass(frozen=True)
class TournamentReport:
    rules: tuple[Rule, ...]
    seeds: tuple[SeedResult, ...]

    def mean(self, attr: str, rule: Rule) -> float:
        return sum(getattr(s, attr)[rule] for s in self.seeds) / len(self.seeds)

    @property
    def revenue_fraction(self) -> float:
        return sum(s.revenue_order_holds() for s in self.seeds) / len(self.seeds)

    @property
    def efficiency_fraction(self) -> float:
        return sum(s.efficiency_order_holds() for s in self.seeds) / len(self.seeds)

    @property
    def both_fraction(self) -> float:
        return sum(s.revenue_order_holds() and s.efficiency_order_holds() for s in self.seeds) / len(self.seeds)

    def rows(self) -> list[list[str]]:
        out = []
        for s in self.seeds:
            for r in self.rules:
                out.append([str(s.seed), r.value, f"{s.revenue[r]:.6f}", f"{s.efficiency[r]:.6f}",
                            str(int(s.revenue_order_holds())), str(int(s.efficiency_order_holds()))])
        for r in self.rules:
            out.append(["all", r.value, f"{self.mean('revenue', r):.6f}", f"{self.mean('efficiency', r):.6f}",
                        f"{self.revenue_fraction:.6f}", f"{self.efficiency_fraction:.6f}"])
        return out


TOURNAMENT_HEADER = ["seed", "rule", "mean_revenue", "mean_efficiency", "revenue_order", "efficiency_order"]


def _evaluate(rule: Rule, scenario: AuctionScenario, seed: int) -> tuple[float, float]:
    strategies = scenario.strategies(seed)
    if scenario.kind is Kind.QLEARN:
        _run(rule, strategies, scenario, scenario.episodes, random.Random(f"{seed}:draws"), True)
        greedy_policy(strategies)
    results, _ = _run(rule, strategies, scenario, scenario.eval_episodes, random.Random(f"{seed}:eval"), False)
    n = len(results)
    return sum(r.revenue for r in results) / n, sum(r.efficiency for r in results) / n


def tournament(
    rules: Sequence[Rule | str] = (Rule.DP, Rule.GSP, Rule.UP),
    scenario: AuctionScenario = AuctionScenario(),
    seeds: Sequence[int] = range(30),
) -> TournamentReport:
    """Train per rule and seed, then score the greedy policies on a shared evaluation stream."""
    rules = tuple(Rule.parse(r) if isinstance(r, str) else r for r in rules)
    out = []
    for seed in seeds:
        rev, eff = {}, {}
        for rule in rules:
            rev[rule], eff[rule] = _evaluate(rule, scenario, seed)
        out.append(SeedResult(seed, rev, eff))
    return TournamentReport(rules, tuple(out))


def _pair(text: str, cast=int) -> tuple:
    parts = text.replace(",", " ").split()
    if len(parts) != 2:
        raise ConfigurationError(f"expected two numbers, got {text!r}")
    return cast(parts[0]), cast(parts[1])


def scenario_from_config(cp) -> AuctionScenario:
    """Build an :class:`AuctionScenario` from the ``[agents]`` section of a parsed config.

    Keys this reader does not know are ignored, since the block-production
    simulator keeps its searcher and builder settings in the same section.
    """
    if not cp.has_section("agents"):
        return AuctionScenario()
    sec = dict(cp.items("agents"))
    kw: dict = {}
    q: dict = {}
    try:
        for key, val in sec.items():
            if key == "kind":
                kw["kind"] = Kind(val.strip().upper())
            elif key == "count":
                kw["agents"] = int(val)
            elif key in ("capacity", "episodes", "eval_episodes"):
                kw[key] = int(val)
            elif key in ("asymmetry", "shade_factor"):
                kw[key] = float(val)
            elif key in ("size_bounds", "unit_value_bounds"):
                kw[key] = _pair(val)
            elif key == "sizes":
                kw[key] = tuple(int(x) for x in val.replace(",", " ").split())
            elif key in ("alpha", "gamma", "epsilon", "epsilon_decay", "initial_q"):
                q[key] = float(val)
            elif key == "buckets":
                q[key] = int(val)
            elif key == "multipliers":
                q[key] = tuple(float(x) for x in val.replace(",", " ").split())
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"[agents]: {exc}") from exc
    if q:
        kw["qparams"] = dataclasses.replace(AuctionScenario().qparams, **q)
    return AuctionScenario(**kw)
