"""Knapsack auctions, fee markets and block production experiments."""

__version__ = "0.1.0"
