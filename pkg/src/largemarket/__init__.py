"""Finite-space toolkit for admissible portfolios, Emery distances and
no-arbitrage conditions in large financial markets."""

__version__ = "0.1.0"
