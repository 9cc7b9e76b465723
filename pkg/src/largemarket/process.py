"""Adapted processes, predictable strategies and discrete stochastic integrals."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .probspace import ScenarioTree, StoppingTime, TreeMismatchError


def _frozen(values, n: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{what}: expected {n} node values, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    """One value per tree node; adaptedness is structural."""

    tree: ScenarioTree
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _frozen(self.values, self.tree.n_nodes, "process"))

    @classmethod
    def zeros(cls, tree: ScenarioTree) -> "AdaptedProcess":
        return cls(tree, np.zeros(tree.n_nodes))

    @classmethod
    def from_terminal(cls, tree: ScenarioTree, payoff: Sequence[float]) -> "AdaptedProcess":
        """Process that is 0 before the horizon and jumps to ``payoff`` at the end."""
        v = np.zeros(tree.n_nodes)
        v[tree.atoms] = payoff
        return cls(tree, v)

    @property
    def terminal(self) -> np.ndarray:
        return self.values[self.tree.atoms]

    def paths(self) -> np.ndarray:
        """Values along every atom path, shape (atoms, horizon + 1)."""
        return self.values[self.tree.atom_paths]

    def _check(self, other: "AdaptedProcess") -> None:
        if not self.tree.same_as(other.tree):
            raise TreeMismatchError("processes live on different trees")

    def __add__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        self._check(other)
        return AdaptedProcess(self.tree, self.values + other.values)

    def __sub__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        self._check(other)
        return AdaptedProcess(self.tree, self.values - other.values)

    def __neg__(self) -> "AdaptedProcess":
        return AdaptedProcess(self.tree, -self.values)

    def __mul__(self, c: float) -> "AdaptedProcess":
        return AdaptedProcess(self.tree, float(c) * self.values)

    __rmul__ = __mul__

    def allclose(self, other: "AdaptedProcess", atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))

    def to_csv(self) -> str:
        """Rows of (atom path, depth, value); the path is '/'-joined node ids."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["atom_path", "depth", "value"])
        for path in self.tree.atom_paths:
            label = "/".join(str(int(x)) for x in path)
            for d, v in enumerate(path):
                w.writerow([label, d, repr(float(self.values[v]))])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class PredictableStrategy:
    """Strategy stored on parent nodes.

    ``values[u]`` is the position held over every edge leaving the internal
    node ``u``, so the strategy is predictable by construction.  Entries on
    leaves are ignored and kept at zero.
    """

    tree: ScenarioTree
    values: np.ndarray
    tag: str = field(default="user", compare=False)

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.tree.n_nodes,):
            raise ValueError(f"strategy: expected {self.tree.n_nodes} node values, got {v.shape}")
        v[self.tree.atoms] = 0.0
        object.__setattr__(self, "values", _frozen(v, self.tree.n_nodes, "strategy"))

    @classmethod
    def constant(cls, tree: ScenarioTree, c: float, tag: str = "user") -> "PredictableStrategy":
        return cls(tree, np.full(tree.n_nodes, float(c)), tag)

    @classmethod
    def from_internal(cls, tree: ScenarioTree, vals: Sequence[float], tag: str = "user") -> "PredictableStrategy":
        """Build from one value per internal node (in ``tree.internal`` order)."""
        v = np.zeros(tree.n_nodes)
        v[tree.internal] = vals
        return cls(tree, v, tag)

    @classmethod
    def until(cls, tau: StoppingTime) -> "PredictableStrategy":
        """The indicator 1_{[0, tau]}: held over step k -> k+1 iff tau > k."""
        tree = tau.tree
        return cls(tree, tau.alive().astype(float), "indicator")

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values[self.tree.internal])))

    def edge_values(self) -> np.ndarray:
        """Position applied to the increment into each node (0 at the root)."""
        out = self.values[self.tree.parent].copy()
        out[0] = 0.0
        return out

    def __mul__(self, other: "PredictableStrategy | float") -> "PredictableStrategy":
        if isinstance(other, PredictableStrategy):
            if not self.tree.same_as(other.tree):
                raise TreeMismatchError("strategies live on different trees")
            return PredictableStrategy(self.tree, self.values * other.values, "product")
        return PredictableStrategy(self.tree, self.values * float(other), self.tag)

    __rmul__ = __mul__

    def __add__(self, other: "PredictableStrategy") -> "PredictableStrategy":
        if not self.tree.same_as(other.tree):
            raise TreeMismatchError("strategies live on different trees")
        return PredictableStrategy(self.tree, self.values + other.values, "sum")


def jumps(X: AdaptedProcess) -> np.ndarray:
    """Increment X_v - X_parent(v) per node; 0 at the root."""
    d = X.values - X.values[X.tree.parent]
    d[0] = 0.0
    return d


def stochastic_integral(K: PredictableStrategy, X: AdaptedProcess) -> AdaptedProcess:
    """(K . X) along each path, starting from 0 at the root."""
    if not K.tree.same_as(X.tree):
        raise TreeMismatchError("strategy and process live on different trees")
    return AdaptedProcess(X.tree, cumulate(X.tree, K.edge_values() * jumps(X)))


def cumulate(tree: ScenarioTree, increments: np.ndarray) -> np.ndarray:
    """Running sum of node increments from the root; works on a trailing node axis."""
    out = np.array(increments, dtype=float)
    par = tree.parent
    for d in range(1, tree.horizon + 1):
        nodes = tree.nodes_at(d)
        out[..., nodes] += out[..., par[nodes]]
    return out


def batch_integral(tree: ScenarioTree, K: np.ndarray, dX: np.ndarray) -> np.ndarray:
    """Integrals for a stack of strategies ``K`` (shape (S, nodes)) against jumps ``dX``."""
    inc = K[:, tree.parent] * dX
    inc[:, 0] = 0.0
    return cumulate(tree, inc)


def stop(X: AdaptedProcess, tau: StoppingTime) -> AdaptedProcess:
    """X^tau, the process frozen from tau on."""
    if not X.tree.same_as(tau.tree):
        raise TreeMismatchError("stopping time and process live on different trees")
    tree = X.tree
    frozen_depth = tau.node_depth()
    src = tree.ancestor[frozen_depth, np.arange(tree.n_nodes)]
    return AdaptedProcess(tree, X.values[src])


def running_sup_abs(X: AdaptedProcess) -> np.ndarray:
    """sup_t |X_t| per atom."""
    return np.max(np.abs(X.paths()), axis=1)
