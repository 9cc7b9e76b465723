from __future__ import annotations

import numpy as np
import pytest

from largemarket.portfolio import WealthProcess
from largemarket.probspace import ScenarioTree
from largemarket.process import AdaptedProcess, PredictableStrategy


def random_tree(rng: np.random.Generator, max_depth: int = 4, max_atoms: int = 16,
                min_depth: int = 1) -> ScenarioTree:
    """Irregular tree with every leaf at the final depth."""
    depth = int(rng.integers(min_depth, max_depth + 1))
    parent = [-1]
    frontier = [0]
    for d in range(depth):
        nxt = []
        budget = max_atoms - len(frontier)
        for node in frontier:
            k = 1 + int(rng.integers(0, 3)) if budget > 0 else 1
            k = min(k, 1 + budget)
            budget -= k - 1
            for _ in range(k):
                parent.append(node)
                nxt.append(len(parent) - 1)
        frontier = nxt
    probs = rng.dirichlet(np.ones(len(frontier))) * 0.9 + 0.1 / len(frontier)
    return ScenarioTree(parent, probs / probs.sum())


def random_process(rng: np.random.Generator, tree: ScenarioTree, scale: float = 1.0,
                   start_zero: bool = True) -> AdaptedProcess:
    vals = rng.normal(0.0, scale, tree.n_nodes)
    if start_zero:
        vals[0] = 0.0
    return AdaptedProcess(tree, vals)


def random_wealth(rng: np.random.Generator, prices: dict, lam: float = 1.0) -> WealthProcess:
    """Random holdings in ``prices``, rescaled so the wealth is lam-admissible."""
    tree = next(iter(prices.values())).tree
    raw = {k: PredictableStrategy(tree, rng.uniform(-1, 1, tree.n_nodes)) for k in prices}
    w = WealthProcess.from_strategies(prices, raw)
    s = min(1.0, lam / max(w.level, 1e-300)) * rng.uniform(0.3, 1.0)
    return WealthProcess.from_strategies(prices, {k: v * s for k, v in raw.items()})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def fair_tree() -> ScenarioTree:
    return ScenarioTree.from_branching([[0.5, 0.5], [0.5, 0.5]])
