"""Finite filtered probability spaces represented as scenario trees.

Nodes are numbered so that every parent precedes its children and the root
is node 0.  All leaves (atoms) sit at the final depth, so depth ``k`` of the
tree carries the sigma-algebra generated by the nodes at that depth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

MASS_TOL = 1e-12


class TreeMismatchError(ValueError):
    """Raised when objects living on different trees are combined."""


@dataclass(frozen=True)
class TimeGrid:
    times: tuple[float, ...]

    def __post_init__(self) -> None:
        t = tuple(float(x) for x in self.times)
        object.__setattr__(self, "times", t)
        if len(t) < 2:
            raise ValueError("time grid needs at least 2 points")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError(f"time grid must start at 0 and end at 1, got {t[0]}..{t[-1]}")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("time grid must be strictly increasing")

    @classmethod
    def uniform(cls, steps: int) -> "TimeGrid":
        return cls(tuple(np.linspace(0.0, 1.0, steps + 1).tolist()))

    def __len__(self) -> int:
        return len(self.times)


class ScenarioTree:
    """Immutable scenario tree.

    ``parent[v]`` is the parent of node ``v`` (``-1`` for the root) and
    ``atom_probs[i]`` the probability of the ``i``-th leaf in node order.
    The constructor only enforces the shape of the tree; probability
    defects are reported by :func:`validate_tree`.
    """

    def __init__(
        self,
        parent: Sequence[int],
        atom_probs: Sequence[float],
        times: TimeGrid | Sequence[float] | None = None,
    ) -> None:
        par = np.asarray(parent, dtype=np.int64)
        n = len(par)
        if n == 0 or par[0] != -1:
            raise ValueError("node 0 must be the root (parent -1)")
        if n > 1 and (np.any(par[1:] < 0) or np.any(par[1:] >= np.arange(1, n))):
            raise ValueError("every parent must precede its child")

        depth = np.zeros(n, dtype=np.int64)
        for v in range(1, n):
            depth[v] = depth[par[v]] + 1
        n_children = np.bincount(par[1:], minlength=n)
        leaves = np.flatnonzero(n_children == 0)
        horizon = int(depth.max())
        if horizon < 1:
            raise ValueError("tree needs at least one period")
        if np.any(depth[leaves] != horizon):
            raise ValueError("all leaves must sit at the final depth")

        probs = np.asarray(atom_probs, dtype=float)
        if probs.shape != (len(leaves),):
            raise ValueError(f"expected {len(leaves)} atom probabilities, got {probs.shape}")

        if times is None:
            grid = TimeGrid.uniform(horizon)
        elif isinstance(times, TimeGrid):
            grid = times
        else:
            grid = TimeGrid(tuple(times))
        if len(grid) != horizon + 1:
            raise ValueError(f"time grid has {len(grid)} points for {horizon} periods")

        weight = np.zeros(n)
        weight[leaves] = probs
        for v in range(n - 1, 0, -1):
            weight[par[v]] += weight[v]

        # ancestor[d, v] = ancestor of v at depth d (v itself when depth[v] == d)
        ancestor = np.full((horizon + 1, n), -1, dtype=np.int64)
        ancestor[0, :] = 0
        for v in range(1, n):
            ancestor[: depth[v], v] = ancestor[: depth[v], par[v]]
            ancestor[depth[v], v] = v

        self.parent = par
        self.depth = depth
        self.times = grid
        self.horizon = horizon
        self.atoms = leaves
        self.atom_probs = probs
        self.node_weight = weight
        self.ancestor = ancestor
        self.atom_paths = ancestor[:, leaves].T.copy()
        self.internal = np.flatnonzero(n_children > 0)
        self._children = [np.flatnonzero(par == v) for v in range(n)]
        self._by_depth = [np.flatnonzero(depth == d) for d in range(horizon + 1)]
        for arr in (self.parent, self.depth, self.atoms, self.atom_probs, self.node_weight,
                    self.ancestor, self.atom_paths, self.internal):
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def children(self, v: int) -> np.ndarray:
        return self._children[v]

    def nodes_at(self, depth: int) -> np.ndarray:
        return self._by_depth[depth]

    def cond_prob(self) -> np.ndarray:
        """P(node | parent) for every non-root node (1 at the root)."""
        out = np.ones(self.n_nodes)
        pw = self.node_weight[self.parent[1:]]
        with np.errstate(invalid="ignore", divide="ignore"):
            out[1:] = np.where(pw > 0, self.node_weight[1:] / pw, 0.0)
        return out

    # construction helpers -------------------------------------------------

    @classmethod
    def from_branching(cls, branch_probs: Sequence[Sequence[float]], times=None) -> "ScenarioTree":
        """Recombining-free tree where every node at depth k splits with ``branch_probs[k]``."""
        parent = [-1]
        frontier = [(0, 1.0)]
        for probs in branch_probs:
            nxt = []
            for node, mass in frontier:
                for q in probs:
                    parent.append(node)
                    nxt.append((len(parent) - 1, mass * q))
            frontier = nxt
        return cls(parent, [m for _, m in frontier], times)

    @classmethod
    def one_period(cls, probs: Sequence[float]) -> "ScenarioTree":
        return cls([-1] + [0] * len(probs), probs)

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "times": list(self.times.times),
            "nodes": [
                {"id": v, "depth": int(self.depth[v]), "parent": int(self.parent[v])}
                for v in range(self.n_nodes)
            ],
            "atoms": [
                {"path": [int(x) for x in self.atom_paths[i]], "prob": float(self.atom_probs[i])}
                for i in range(self.n_atoms)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ScenarioTree":
        nodes = sorted(doc["nodes"], key=lambda nd: nd["id"])
        if [nd["id"] for nd in nodes] != list(range(len(nodes))):
            raise ValueError("nodes: ids must be 0..n-1")
        parent = [int(nd["parent"]) for nd in nodes]
        n_leaves = len(parent) - len(set(parent[1:]))
        tree = cls(parent, [0.0] * n_leaves, doc.get("times"))
        for nd in nodes:
            if "depth" in nd and int(nd["depth"]) != tree.depth[nd["id"]]:
                raise ValueError(f"nodes[{nd['id']}].depth inconsistent with parent links")
        leaf_pos = {int(v): i for i, v in enumerate(tree.atoms)}
        probs = [math.nan] * tree.n_atoms
        for j, atom in enumerate(doc["atoms"]):
            path = [int(x) for x in atom["path"]]
            if path[-1] not in leaf_pos or path != [int(x) for x in tree.atom_paths[leaf_pos[path[-1]]]]:
                raise ValueError(f"atoms[{j}].path is not a root-to-leaf path")
            probs[leaf_pos[path[-1]]] = float(atom["prob"])
        if any(math.isnan(p) for p in probs):
            raise ValueError("atoms: every leaf needs a probability")
        return cls(parent, probs, tree.times)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioTree":
        return cls.from_dict(json.loads(text))

    def same_as(self, other: "ScenarioTree") -> bool:
        return self is other or (
            np.array_equal(self.parent, other.parent)
            and np.array_equal(self.atom_probs, other.atom_probs)
            and self.times == other.times
        )

    def __repr__(self) -> str:
        return f"ScenarioTree(nodes={self.n_nodes}, atoms={self.n_atoms}, horizon={self.horizon})"


def validate_tree(tree: ScenarioTree) -> list[str]:
    """Return the violated invariants of ``tree``; empty when well formed."""
    problems = []
    p = tree.atom_probs
    if not np.all(np.isfinite(p)):
        problems.append("non-finite atom probability")
        return problems
    total = math.fsum(p)
    if abs(total - 1.0) > MASS_TOL:
        problems.append(f"atom mass {total:.12g} != 1")
    for i in np.flatnonzero(p <= 0):
        kind = "zero-mass atom" if p[i] == 0 else "negative-mass atom"
        problems.append(f"{kind} at leaf {int(tree.atoms[i])}")
    for v in tree.internal:
        kids = tree.children(v)
        s = math.fsum(tree.node_weight[kids])
        if abs(s - tree.node_weight[v]) > MASS_TOL:
            problems.append(f"node {int(v)} weight differs from sum of children")
    return problems


def node_expectation(tree: ScenarioTree, leaf_values: Sequence[float]) -> np.ndarray:
    """E[value | node] for every node of the tree."""
    vals = np.asarray(leaf_values, dtype=float)
    if vals.shape != (tree.n_atoms,):
        raise ValueError(f"expected {tree.n_atoms} leaf values, got {vals.shape}")
    acc = np.zeros(tree.n_nodes)
    acc[tree.atoms] = vals * tree.atom_probs
    for v in range(tree.n_nodes - 1, 0, -1):
        acc[tree.parent[v]] += acc[v]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = acc / tree.node_weight
    out[tree.atoms] = vals
    return out


def condexp(tree: ScenarioTree, leaf_values: Sequence[float], depth: int) -> np.ndarray:
    """Conditional expectation given the nodes at ``depth``.

    Returned per atom, i.e. as the depth-measurable random variable, so that
    repeated application composes (tower property).
    """
    if not 0 <= depth <= tree.horizon:
        raise IndexError(f"depth {depth} outside 0..{tree.horizon}")
    by_node = node_expectation(tree, leaf_values)
    return by_node[tree.atom_paths[:, depth]]


class StoppingTime:
    """Per-atom stopping depth, checked for measurability on construction."""

    def __init__(self, tree: ScenarioTree, depths: Sequence[int]) -> None:
        d = np.asarray(depths, dtype=np.int64)
        if d.shape != (tree.n_atoms,):
            raise ValueError(f"expected {tree.n_atoms} stopping depths, got {d.shape}")
        if np.any(d < 0) or np.any(d > tree.horizon):
            raise ValueError("stopping depths must lie in 0..horizon")
        for k in range(tree.horizon + 1):
            nodes = tree.atom_paths[:, k]
            event = d <= k
            for v in np.unique(nodes):
                sel = event[nodes == v]
                if sel.any() and not sel.all():
                    raise ValueError(f"stopping time not measurable: {{tau <= {k}}} splits node {int(v)}")
        d.setflags(write=False)
        self.tree = tree
        self.depths = d

    @classmethod
    def constant(cls, tree: ScenarioTree, depth: int) -> "StoppingTime":
        return cls(tree, np.full(tree.n_atoms, depth))

    @classmethod
    def first_hit(cls, tree: ScenarioTree, node_flags: Sequence[bool]) -> "StoppingTime":
        """First depth at which a node-indexed flag is set (horizon if never)."""
        flags = np.asarray(node_flags, dtype=bool)
        hit = flags[tree.atom_paths]
        d = np.where(hit.any(axis=1), hit.argmax(axis=1), tree.horizon)
        return cls(tree, d)

    def _tau_below(self) -> np.ndarray:
        """tau of an arbitrary atom below each node."""
        some_atom = np.empty(self.tree.n_nodes, dtype=np.int64)
        for d in range(self.tree.horizon + 1):
            some_atom[self.tree.atom_paths[:, d]] = np.arange(self.tree.n_atoms)
        return self.depths[some_atom]

    def node_depth(self) -> np.ndarray:
        """tau ^ depth(v) for every node v (well defined by measurability)."""
        return np.minimum(self._tau_below(), self.tree.depth)

    def alive(self) -> np.ndarray:
        """Node flag for the event {tau > depth(v)}."""
        return self._tau_below() > self.tree.depth
