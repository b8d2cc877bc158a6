"""Seeded instance generators shared by the unit and acceptance tests."""

from __future__ import annotations

import random

from blocklab.auctions import BidProfile
from blocklab.knapsack import KnapsackInstance


def knapsack_suite(seed: int, count: int, max_n: int = 20) -> list[KnapsackInstance]:
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(1, max_n)
        pairs = [(rng.randint(0, 100), rng.randint(1, 30)) for _ in range(n)]
        cap = rng.randint(1, max(1, sum(k for _v, k in pairs) // 2 + 5))
        out.append(KnapsackInstance.from_pairs(pairs, cap))
    return out


def profile_suite(seed: int, count: int, max_n: int = 4, max_value: int = 20) -> list[BidProfile]:
    """Small profiles; bids double as true values."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(1, max_n)
        pairs = [(rng.randint(0, max_value), rng.randint(1, 5)) for _ in range(n)]
        out.append(BidProfile.from_pairs(pairs, rng.randint(1, 10)))
    return out


def unit_profile_suite(seed: int, count: int, max_n: int = 6, max_value: int = 30) -> list[BidProfile]:
    """Equal-size profiles for the revenue ladder."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(1, max_n)
        size = rng.randint(1, 3)
        pairs = [(rng.randint(0, max_value), size) for _ in range(n)]
        out.append(BidProfile.from_pairs(pairs, size * rng.randint(1, n + 1)))
    return out
