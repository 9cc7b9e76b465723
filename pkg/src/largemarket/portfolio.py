"""Admissible wealth processes and the constructive steps built on them.

Covers membership levels, concatenation of admissible portfolios, the
truncated canonical decomposition, the switching construction, the drawdown
exploit and supermartingale-deflator verification.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .probspace import ScenarioTree, StoppingTime, TreeMismatchError
from .process import (
    AdaptedProcess,
    PredictableStrategy,
    cumulate,
    jumps,
    stochastic_integral,
)

ADMISSIBILITY_TOL = 1e-12


class AdmissibilityError(ValueError):
    """A construction would leave the admissible class; ``node`` names the culprit."""

    def __init__(self, message: str, node: int | None = None) -> None:
        super().__init__(message)
        self.node = node


class AssetUniverse:
    """Finite selection of asset labels from an arbitrary index set.

    Every finite subset is admitted, so the family of admissible asset sets
    is closed under finite unions by construction.
    """

    def __init__(self, labels: Iterable[Hashable]) -> None:
        self.labels = tuple(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("asset labels must be distinct")

    def admits(self, subset: Iterable[Hashable]) -> bool:
        s = set(subset)
        return bool(s) and s <= set(self.labels)

    def union(self, a: Iterable[Hashable], b: Iterable[Hashable]) -> frozenset:
        u = frozenset(a) | frozenset(b)
        if not self.admits(u):
            raise ValueError(f"{sorted(map(str, u))} is not a subset of the universe")
        return u

    def subsets(self, n: int) -> Iterable[frozenset]:
        return (frozenset(c) for c in combinations(self.labels, n))


def admissibility_level(X: AdaptedProcess) -> float:
    """Smallest lambda >= 0 with X >= -lambda at every node."""
    return max(0.0, -float(np.min(X.values)))


@dataclass(frozen=True, eq=False)
class WealthProcess:
    """Wealth of a portfolio in finitely many assets, or an Emery-limit candidate.

    ``strategies`` maps asset labels to the holdings that produced
    ``process``; it may be empty for limit candidates, whose membership is
    only certified up to ``residual``.
    """

    process: AdaptedProcess
    assets: frozenset = frozenset()
    strategies: Mapping[Hashable, PredictableStrategy] = field(default_factory=dict)
    provenance: str = "small-market"
    residual: float | None = None

    def __post_init__(self) -> None:
        if abs(self.process.values[0]) > 0.0:
            raise ValueError("wealth processes start at 0")
        object.__setattr__(self, "assets", frozenset(self.assets))

    @property
    def tree(self) -> ScenarioTree:
        return self.process.tree

    @property
    def level(self) -> float:
        return admissibility_level(self.process)

    def is_admissible(self, lam: float = 1.0) -> bool:
        return self.level <= lam + ADMISSIBILITY_TOL

    @classmethod
    def from_strategies(
        cls,
        prices: Mapping[Hashable, AdaptedProcess],
        strategies: Mapping[Hashable, PredictableStrategy],
    ) -> "WealthProcess":
        items = list(strategies.items())
        if not items:
            raise ValueError("need at least one asset position")
        total = stochastic_integral(items[0][1], prices[items[0][0]])
        for label, k in items[1:]:
            total = total + stochastic_integral(k, prices[label])
        return cls(total, frozenset(strategies), dict(strategies))

    def replay(self, prices: Mapping[Hashable, AdaptedProcess]) -> AdaptedProcess:
        """Recompute the wealth from the recorded holdings."""
        return WealthProcess.from_strategies(prices, self.strategies).process


def _as_process(x: "AdaptedProcess | WealthProcess") -> AdaptedProcess:
    return x.process if isinstance(x, WealthProcess) else x


def _merge_holdings(parts: Sequence[tuple[PredictableStrategy, WealthProcess]]) -> dict:
    out: dict = {}
    for weight, wp in parts:
        for label, k in wp.strategies.items():
            term = weight * k
            out[label] = out[label] + term if label in out else term
    return out


def concatenate(
    H: PredictableStrategy,
    X: WealthProcess,
    G: PredictableStrategy,
    Y: WealthProcess,
    prices: Mapping[Hashable, AdaptedProcess] | None = None,
) -> WealthProcess:
    """Z = (H . X) + (G . Y) for nonnegative, disjointly supported H and G.

    The result lives on the union of both asset sets and must stay above -1.
    With ``prices`` the combined holdings are replayed and checked against Z.
    """
    tree = X.tree
    for obj in (H, G, Y.process):
        if not obj.tree.same_as(tree):
            raise TreeMismatchError("concatenation inputs live on different trees")
    inner = tree.internal
    for name, K in (("H", H), ("G", G)):
        bad = inner[K.values[inner] < 0]
        if len(bad):
            raise AdmissibilityError(f"{name} >= 0 violated at node {int(bad[0])}", int(bad[0]))
    both = inner[(H.values[inner] * G.values[inner]) != 0]
    if len(both):
        raise AdmissibilityError(f"HG = 0 violated at node {int(both[0])}", int(both[0]))

    Z = stochastic_integral(H, X.process) + stochastic_integral(G, Y.process)
    low = np.flatnonzero(Z.values < -1.0 - ADMISSIBILITY_TOL)
    if len(low):
        v = int(low[0])
        raise AdmissibilityError(f"Z < -1 at node {v} (value {Z.values[v]:.6g})", v)

    holdings = _merge_holdings([(H, X), (G, Y)])
    if prices is not None and holdings:
        replayed = WealthProcess.from_strategies(prices, holdings).process
        if not replayed.allclose(Z, atol=1e-10):
            raise AdmissibilityError("integral identity failed: holdings do not reproduce Z")
    return WealthProcess(Z, X.assets | Y.assets, holdings, "small-market")


@dataclass(frozen=True, eq=False)
class TruncationDecomposition:
    """X = B + M + X_check with jumps above ``threshold`` collected in X_check.

    ``drift[u]`` is the predictable increment of B over every edge leaving the
    internal node u.
    """

    threshold: float
    B: AdaptedProcess
    M: AdaptedProcess
    X_check: AdaptedProcess
    drift: np.ndarray

    def martingale_residuals(self) -> np.ndarray:
        """|E[Delta M | parent]| for every internal node."""
        tree = self.M.tree
        acc = np.zeros(tree.n_nodes)
        np.add.at(acc, tree.parent[1:], tree.cond_prob()[1:] * jumps(self.M)[1:])
        return np.abs(acc[tree.internal])


def truncation_decompose(X: "AdaptedProcess | WealthProcess", C: float) -> TruncationDecomposition:
    if not C > 0:
        raise ValueError(f"threshold C must be positive, got {C}")
    X = _as_process(X)
    tree = X.tree
    dX = jumps(X)
    big = np.where(np.abs(dX) > C, dX, 0.0)
    small = dX - big
    drift = np.zeros(tree.n_nodes)
    np.add.at(drift, tree.parent[1:], tree.cond_prob()[1:] * small[1:])
    dB = drift[tree.parent]
    dB[0] = 0.0
    dM = small - dB
    start = X.values[0]
    B = AdaptedProcess(tree, cumulate(tree, dB) + start)
    return TruncationDecomposition(
        float(C), B, AdaptedProcess(tree, cumulate(tree, dM)),
        AdaptedProcess(tree, cumulate(tree, big)), drift,
    )


@dataclass(frozen=True, eq=False)
class SwitchPlan:
    dominating: np.ndarray
    density_k: np.ndarray
    density_l: np.ndarray
    gamma: np.ndarray
    alpha: float
    sigma: StoppingTime


def switch(
    Xk: WealthProcess,
    Xl: WealthProcess,
    C: float,
    alpha: float,
) -> tuple[SwitchPlan, WealthProcess]:
    """Follow whichever portfolio has the larger drift density, stopped on Y-part underperformance.

    The dominating increasing process adds the absolute drift increments of
    both decompositions; 0/0 densities are 0 and ties go to ``Xk``.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    tree = Xk.tree
    if not Xl.tree.same_as(tree):
        raise TreeMismatchError("switch inputs live on different trees")
    for name, wp in (("Xk", Xk), ("Xl", Xl)):
        if not wp.is_admissible(1.0):
            raise AdmissibilityError(f"{name} is not 1-admissible (level {wp.level:.6g})")

    dk = truncation_decompose(Xk, C)
    dl = truncation_decompose(Xl, C)
    dom = np.abs(dk.drift) + np.abs(dl.drift)
    with np.errstate(invalid="ignore", divide="ignore"):
        rk = np.where(dom > 0, dk.drift / dom, 0.0)
        rl = np.where(dom > 0, dl.drift / dom, 0.0)
    gamma = rk >= rl
    gamma[tree.atoms] = False

    on = PredictableStrategy(tree, gamma.astype(float), "gamma")
    off = PredictableStrategy(tree, (~gamma).astype(float), "gamma-complement")

    Yk = dk.M + dk.X_check
    Yl = dl.M + dl.X_check
    Ysw = stochastic_integral(on, Yk) + stochastic_integral(off, Yl)
    breach = Ysw.values < np.maximum(Yk.values, Yl.values) - alpha
    sigma = StoppingTime.first_hit(tree, breach)

    alive = PredictableStrategy.until(sigma)
    Hk, Hl = on * alive, off * alive
    Xt = stochastic_integral(Hk, Xk.process) + stochastic_integral(Hl, Xl.process)
    low = np.flatnonzero(Xt.values < -(1.0 + alpha) - ADMISSIBILITY_TOL)
    if len(low):
        raise AdmissibilityError(f"switched process below -(1+alpha) at node {int(low[0])}", int(low[0]))
    holdings = _merge_holdings([(Hk, Xk), (Hl, Xl)])
    plan = SwitchPlan(dom, rk, rl, gamma, float(alpha), sigma)
    return plan, WealthProcess(Xt, Xk.assets | Xl.assets, holdings, "small-market")


@dataclass(frozen=True, eq=False)
class DrawdownExploit:
    wealth: WealthProcess
    delta: float
    event_prob: float
    event_nodes: np.ndarray


def drawdown_exploit(Y: WealthProcess, t: int, eps: float, lam: float) -> DrawdownExploit:
    """Buy-and-hold Y after time ``t`` on the event {Y_t <= -(lam - eps)}.

    When Y ends above -1 the resulting terminal wealth is nonnegative
    everywhere and at least ``lam - eps - 1`` on the event.
    """
    tree = Y.tree
    if lam - eps <= 1.0:
        raise ValueError(f"need lam - eps > 1, got {lam - eps}")
    if not 0 <= t < tree.horizon:
        raise ValueError(f"t must lie in 0..{tree.horizon - 1}")
    vals = Y.process.values
    if np.any(Y.process.terminal < -1.0 - ADMISSIBILITY_TOL):
        raise AdmissibilityError("Y_1 >= -1 violated")
    nodes = tree.nodes_at(t)
    hit = nodes[vals[nodes] <= -(lam - eps)]
    if len(hit) == 0:
        raise ValueError(f"empty D: Y_{t} never falls to -(lam - eps) = {-(lam - eps):.6g}")
    in_D = np.isin(tree.ancestor[t], hit) & (tree.depth >= t)
    H = PredictableStrategy(tree, in_D.astype(float), "drawdown")
    wealth = WealthProcess(stochastic_integral(H, Y.process), Y.assets,
                           _merge_holdings([(H, Y)]), "small-market")
    return DrawdownExploit(wealth, lam - eps - 1.0, float(tree.node_weight[hit].sum()), hit)


@dataclass
class DeflatorReport:
    passed: bool
    violations: list[dict]


def check_deflator(
    D: AdaptedProcess,
    Xs: Sequence["WealthProcess | AdaptedProcess"],
    tol: float = 1e-12,
) -> DeflatorReport:
    """Check that D(1 + X) is a supermartingale for every X in ``Xs``."""
    tree = D.tree
    violations: list[dict] = []
    if np.any(D.values < 0):
        violations.append({"process": None, "node": int(np.argmin(D.values)), "reason": "D < 0"})
    if D.values[0] > 1.0:
        violations.append({"process": None, "node": 0, "reason": "D_0 > 1"})
    cp = tree.cond_prob()
    for i, x in enumerate(Xs):
        x = _as_process(x)
        if not x.tree.same_as(tree):
            raise TreeMismatchError("deflator and wealth process live on different trees")
        W = D.values * (1.0 + x.values)
        nxt = np.zeros(tree.n_nodes)
        np.add.at(nxt, tree.parent[1:], cp[1:] * W[1:])
        for u in tree.internal:
            if nxt[u] > W[u] + tol:
                violations.append({"process": i, "node": int(u), "lhs": float(nxt[u]),
                                   "rhs": float(W[u]), "reason": "supermartingale inequality"})
    return DeflatorReport(not violations, violations)


def convex_combine(
    Xs: Sequence["WealthProcess | AdaptedProcess"],
    weights: Sequence[float],
) -> AdaptedProcess:
    w = np.asarray(weights, dtype=float)
    if len(w) != len(Xs) or len(w) == 0:
        raise ValueError("need one weight per process")
    if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    procs = [_as_process(x) for x in Xs]
    tree = procs[0].tree
    for p in procs[1:]:
        if not p.tree.same_as(tree):
            raise TreeMismatchError("processes live on different trees")
    return AdaptedProcess(tree, w @ np.array([p.values for p in procs]))
