"""Knapsack solvers for block packing.

Items carry an integer size (gas) and an integer value. Every 0-1 solver here
returns a :class:`PackingResult` whose ``selected`` field lists item ids in
packing order.

Tie-breaking is deterministic throughout:

* density ties (equal value per gas) go to the lower id;
* among several optimal subsets the exact solvers return the one whose sorted
  id tuple is lexicographically smallest.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation, InstanceTooLargeError, OracleLimitError, ParseError

DEFAULT_CELL_BUDGET = 10**8
BRUTE_FORCE_LIMIT = 20

_INT64_SAFE = 2**62


@dataclass(frozen=True, slots=True)
class Item:
    id: int
    size: int
    value: int

    def __post_init__(self):
        if self.id < 0:
            raise ContractViolation(f"item id must be non-negative, got {self.id}")
        if self.size <= 0:
            raise ContractViolation(f"item {self.id}: size must be positive, got {self.size}")
        if self.value < 0:
            raise ContractViolation(f"item {self.id}: value must be non-negative, got {self.value}")


@dataclass(frozen=True, slots=True)
class KnapsackInstance:
    items: tuple[Item, ...]
    capacity: int

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.capacity <= 0:
            raise ContractViolation(f"capacity must be positive, got {self.capacity}")
        if not self.items:
            raise ContractViolation("instance needs at least one item")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ContractViolation("item ids must be unique")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], capacity: int, first_id: int = 1):
        """Build an instance from ``(value, size)`` pairs numbered from ``first_id``."""
        items = [Item(i, k, v) for i, (v, k) in enumerate(pairs, start=first_id)]
        return cls(tuple(items), capacity)

    def by_id(self) -> dict[int, Item]:
        return {it.id: it for it in self.items}


@dataclass(frozen=True, slots=True)
class PackingResult:
    selected: tuple[int, ...]
    total_size: int
    total_value: int | Fraction
    fractional_tail: tuple[int, Fraction] | None = None
    # True when greedy_01 returned the single best excluded item instead of
    # the density packing.
    single_item_branch: bool = False

    def as_row(self, solver: str) -> list[str]:
        return [solver, ";".join(str(i) for i in self.selected), str(self.total_size), str(self.total_value)]


@dataclass(frozen=True, slots=True)
class PositionWeight:
    """Multipliers ``f(r)`` applied to the value of the item packed at position ``r`` (1-based)."""

    weights: tuple[Fraction, ...]
    monotone: str = field(init=False)

    def __post_init__(self):
        ws = tuple(Fraction(w) for w in self.weights)
        if any(w < 0 for w in ws):
            raise ContractViolation("position weights must be non-negative")
        object.__setattr__(self, "weights", ws)
        pairs = list(zip(ws, ws[1:]))
        if all(a >= b for a, b in pairs):
            kind = "non-increasing"
        elif all(a <= b for a, b in pairs):
            kind = "non-decreasing"
        else:
            kind = "neither"
        object.__setattr__(self, "monotone", kind)

    def at(self, position: int) -> Fraction:
        """Weight at 1-based ``position``; positions past the end weigh zero."""
        if 1 <= position <= len(self.weights):
            return self.weights[position - 1]
        return Fraction(0)


def density_order(items: Sequence[Item], priority_id: int | None = None) -> list[Item]:
    """Items by decreasing value/size; ties to the lower id.

    ``priority_id`` moves one item ahead of every item it ties with, which the
    auction code uses to locate critical bids.
    """

    def key(it: Item):
        return (Fraction(-it.value, it.size), 0 if it.id == priority_id else 1, it.id)

    return sorted(items, key=key)


def _check_budget(n: int, cap: int, budget: int) -> None:
    if n * (cap + 1) > budget:
        raise InstanceTooLargeError(
            f"table of {n} x {cap + 1} cells exceeds the budget of {budget}"
        )


def _reduced(instance: KnapsackInstance) -> tuple[list[Item], list[int], int]:
    """Items sorted by id, sizes divided by their gcd, and the matching capacity.

    Dividing by the common gcd keeps feasibility intact and keeps gas-scale
    instances tractable.
    """
    items = sorted(instance.items, key=lambda it: it.id)
    g = reduce(math.gcd, (it.size for it in items))
    sizes = [it.size // g for it in items]
    cap = min(instance.capacity // g, sum(sizes))
    return items, sizes, cap


def _result(chosen: Sequence[Item]) -> PackingResult:
    return PackingResult(
        selected=tuple(it.id for it in chosen),
        total_size=sum(it.size for it in chosen),
        total_value=sum(it.value for it in chosen),
    )


def solve_exact(instance: KnapsackInstance, cell_budget: int = DEFAULT_CELL_BUDGET) -> PackingResult:
    """Optimal 0-1 packing by dynamic programming over capacity.

    Builds suffix tables ``best[i][c]`` (best value from items ``i..n-1`` in
    capacity ``c``), then walks forward picking the smallest id that can still
    complete an optimal packing. Selected ids come back in ascending order.
    """
    items, sizes, cap = _reduced(instance)
    n = len(items)
    _check_budget(n, cap, cell_budget)
    values = [it.value for it in items]
    dtype = np.int64 if sum(values) < _INT64_SAFE else object

    best = np.zeros((n + 1, cap + 1), dtype=dtype)
    for i in range(n - 1, -1, -1):
        row = best[i + 1].copy()
        k = sizes[i]
        if k <= cap:
            take = best[i + 1][: cap + 1 - k] + values[i]
            np.maximum(row[k:], take, out=row[k:])
        best[i] = row

    need = best[0][cap]
    chosen: list[Item] = []
    c, i = cap, 0
    while need > 0:
        for j in range(i, n):
            k = sizes[j]
            if k <= c and values[j] + best[j + 1][c - k] == need:
                chosen.append(items[j])
                need -= values[j]
                c -= k
                i = j + 1
                break
        else:  # pragma: no cover - the table guarantees a completion exists
            raise AssertionError("reconstruction failed")
    return _result(chosen)


def _lex_smallest_mask(cands: np.ndarray) -> int:
    prefix = 0
    while True:
        if np.any(cands == prefix):
            return prefix
        rest = cands & ~prefix
        low = rest & -rest
        pick = low.min()
        cands = cands[low == pick]
        prefix |= int(pick)


def solve_brute_force(instance: KnapsackInstance) -> PackingResult:
    """Exhaustive subset enumeration; the test oracle for :func:`solve_exact`."""
    items = sorted(instance.items, key=lambda it: it.id)
    n = len(items)
    if n > BRUTE_FORCE_LIMIT:
        raise OracleLimitError(f"brute force handles at most {BRUTE_FORCE_LIMIT} items, got {n}")
    dtype = np.int64 if sum(it.value for it in items) < _INT64_SAFE else object
    sizes = np.zeros(1, dtype=np.int64)
    values = np.zeros(1, dtype=dtype)
    for it in items:
        sizes = np.concatenate([sizes, sizes + it.size])
        values = np.concatenate([values, values + it.value])
    feasible = sizes <= instance.capacity
    top = values[feasible].max()
    masks = np.nonzero(feasible & (values == top))[0].astype(np.int64)
    mask = _lex_smallest_mask(masks)
    return _result([it for b, it in enumerate(items) if mask >> b & 1])


def greedy_fractional(instance: KnapsackInstance) -> PackingResult:
    """Fractional optimum: pack by density and split the first item that overflows."""
    room = instance.capacity
    chosen: list[Item] = []
    tail = None
    for it in density_order(instance.items):
        if room == 0:
            break
        if it.size <= room:
            chosen.append(it)
            room -= it.size
        else:
            tail = (it.id, Fraction(room, it.size))
            room = 0
    value: Fraction = Fraction(sum(it.value for it in chosen))
    size = sum(it.size for it in chosen)
    if tail is not None:
        tail_item = instance.by_id()[tail[0]]
        value += tail[1] * tail_item.value
        size = instance.capacity
    return PackingResult(tuple(it.id for it in chosen), size, value, tail)


def greedy_01(
    instance: KnapsackInstance,
    apply_step3: bool = True,
    *,
    priority_id: int | None = None,
) -> PackingResult:
    """Density greedy for the 0-1 problem.

    Items are scanned in density order and packed when they fit; items that do
    not fit are skipped and the scan continues. With ``apply_step3`` the
    packing is compared with the single highest-value item it left out, and
    that item alone is returned if it is worth strictly more.
    """
    room = instance.capacity
    packed: list[Item] = []
    for it in density_order(instance.items, priority_id):
        if it.size <= room:
            packed.append(it)
            room -= it.size
    result = _result(packed)
    if not apply_step3:
        return result

    inside = set(result.selected)
    left_out = [it for it in instance.items if it.id not in inside and it.size <= instance.capacity]
    if not left_out:
        return result
    best = min(left_out, key=lambda it: (-it.value, 0 if it.id == priority_id else 1, it.id))
    if best.value > result.total_value:
        return PackingResult((best.id,), best.size, best.value, single_item_branch=True)
    return result


def subset_sum_pack(instance: KnapsackInstance, cell_budget: int = DEFAULT_CELL_BUDGET) -> PackingResult:
    """Fill as much capacity as possible, ignoring values.

    Reachable fills are tracked as Python-int bitsets per suffix of the item
    list; the reconstruction mirrors :func:`solve_exact`.
    """
    items, sizes, cap = _reduced(instance)
    n = len(items)
    _check_budget(n, cap, cell_budget)
    full = (1 << (cap + 1)) - 1
    reach = [0] * (n + 1)
    reach[n] = 1
    for i in range(n - 1, -1, -1):
        reach[i] = (reach[i + 1] | (reach[i + 1] << sizes[i])) & full
    need = reach[0].bit_length() - 1
    chosen: list[Item] = []
    i = 0
    while need > 0:
        for j in range(i, n):
            k = sizes[j]
            if k <= need and reach[j + 1] >> (need - k) & 1:
                chosen.append(items[j])
                need -= k
                i = j + 1
                break
        else:  # pragma: no cover
            raise AssertionError("reconstruction failed")
    return _result(chosen)


def position_dependent_pack(
    instance: KnapsackInstance,
    weights: PositionWeight,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> PackingResult:
    """Maximise sum of ``value_i * f(position_i)`` over packed sequences.

    For a fixed subset of ``m`` items the best sequence pairs values sorted
    high-to-low with ``f(1..m)`` sorted high-to-low (rearrangement inequality),
    whatever the shape of ``f``. So for each ``m`` a DP over items in
    descending value order with state (items taken, capacity used) is exact.
    Returns the smallest optimal ``m``; ``total_value`` is a ``Fraction``.
    """
    items = sorted(instance.items, key=lambda it: (-it.value, it.id))
    g = reduce(math.gcd, (it.size for it in items))
    sizes = [it.size // g for it in items]
    cap = min(instance.capacity // g, sum(sizes))
    n = len(items)
    m_max = n
    _check_budget(n * (m_max + 1), cap, cell_budget)

    denom = reduce(lambda a, b: a * b // math.gcd(a, b), (w.denominator for w in weights.weights), 1)

    best_value = Fraction(0)
    best_seq: list[Item] = []
    for m in range(1, m_max + 1):
        ranked = sorted(((weights.at(r), r) for r in range(1, m + 1)), key=lambda p: (-p[0], p[1]))
        w_int = [int(w * denom) for w, _ in ranked]
        if max(w_int) == 0:
            continue
        top = sum(it.value for it in items[:m]) * max(w_int)
        dtype = np.int64 if top < _INT64_SAFE else object
        # table[i][t][c]: best scaled value using items[:i], t taken, c capacity used exactly
        table = np.full((n + 1, m + 1, cap + 1), -1, dtype=dtype)
        table[0, 0, 0] = 0
        for i, it in enumerate(items):
            cur = table[i].copy()
            k = sizes[i]
            if k <= cap:
                for t in range(m):
                    src = table[i, t, : cap + 1 - k]
                    cand = np.where(src >= 0, src + w_int[t] * it.value, -1)
                    dst = cur[t + 1, k:]
                    np.maximum(dst, cand, out=dst)
            table[i + 1] = cur
        final = table[n, m]
        if final.max() < 0:
            break  # no m-item subset fits, nor any larger one
        c = int(np.argmax(final))
        scaled = final[c]
        value = Fraction(int(scaled), denom)
        if value <= best_value:
            continue
        # walk back through the table to recover the chosen items
        picked: list[Item] = []
        t = m
        for i in range(n - 1, -1, -1):
            if t == 0:
                break
            if table[i + 1, t, c] != table[i, t, c]:
                picked.append(items[i])
                c -= sizes[i]
                t -= 1
        picked.reverse()  # descending value order
        seq: list[Item | None] = [None] * m
        for it, (_, r) in zip(picked, ranked):
            seq[r - 1] = it
        best_value = value
        best_seq = [it for it in seq if it is not None]

    return PackingResult(
        selected=tuple(it.id for it in best_seq),
        total_size=sum(it.size for it in best_seq),
        total_value=best_value,
    )


SOLVERS = {
    "exact": solve_exact,
    "bruteforce": solve_brute_force,
    "fractional": greedy_fractional,
    "greedy01": lambda inst: greedy_01(inst, apply_step3=False),
    "greedy": lambda inst: greedy_01(inst, apply_step3=True),
    "subsetsum": subset_sum_pack,
}

# what ``--solver all`` fans out to
ALL_SOLVERS = ("exact", "greedy", "fractional", "subsetsum")


def parse_instance(text: str) -> KnapsackInstance:
    """Parse ``K=<int>`` followed by ``id,size,value`` lines.

    Blank lines and ``#`` comments are ignored.
    """
    capacity = None
    items: list[Item] = []
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
        if len(parts) != 3:
            raise ParseError(f"expected 'id,size,value', got {line!r}", lineno)
        try:
            items.append(Item(*(int(p) for p in parts)))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if capacity is None:
        raise ParseError("missing header 'K=<int>'", 1)
    try:
        return KnapsackInstance(tuple(items), capacity)
    except ContractViolation as exc:
        raise ParseError(str(exc)) from None


def format_instance(instance: KnapsackInstance) -> str:
    lines = [f"K={instance.capacity}"]
    lines += [f"{it.id},{it.size},{it.value}" for it in instance.items]
    return "\n".join(lines) + "\n"


RESULT_HEADER = ["solver", "selected_ids", "total_size", "total_value"]
