"""Emery and ucp distances between adapted processes on a scenario tree.

The Emery distance is a supremum over simple predictable strategies bounded
by one.  Its objective is not concave in the strategy, so everything here
except the one-period closed form is a lower bound obtained from a finite
candidate family.  The exhaustive oracle is exact over {-1, 0, 1}-valued
strategies; on multi-period trees an interior strategy can do better,
because the truncation at 1 rewards spreading the integral over atoms.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .probspace import ScenarioTree, TreeMismatchError
from .process import AdaptedProcess, PredictableStrategy, batch_integral, jumps

ORACLE_MAX_DEPTH = 4
ORACLE_MAX_ATOMS = 16
_CHUNK = 3**9


class GuardError(RuntimeError):
    """Raised when an exact computation would exceed its size guard."""


@dataclass(frozen=True, eq=False)
class CandidateFamily:
    """Finite set of strategies with sup-norm at most one.

    The constant strategies 0 and 1 are always members.
    """

    tree: ScenarioTree
    matrix: np.ndarray
    tags: tuple[str, ...]
    descriptor: str = "user"

    def __post_init__(self) -> None:
        m = np.atleast_2d(np.array(self.matrix, dtype=float))
        if m.shape[1] != self.tree.n_nodes or len(self.tags) != m.shape[0]:
            raise ValueError("family matrix must be (strategies, nodes) with one tag per row")
        m[:, self.tree.atoms] = 0.0
        if np.any(np.abs(m) > 1.0):
            raise ValueError("family members must satisfy |K| <= 1")
        tags = list(self.tags)
        for c in (0.0, 1.0):
            target = np.zeros(self.tree.n_nodes)
            target[self.tree.internal] = c
            if not np.any(np.all(m == target, axis=1)):
                m = np.vstack([m, target])
                tags.append("constant")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "tags", tuple(tags))

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def strategy(self, i: int) -> PredictableStrategy:
        return PredictableStrategy(self.tree, self.matrix[i], self.tags[i])

    def union(self, other: "CandidateFamily") -> "CandidateFamily":
        return CandidateFamily(self.tree, np.vstack([self.matrix, other.matrix]),
                               self.tags + other.tags, f"{self.descriptor}+{other.descriptor}")

    @classmethod
    def from_strategies(cls, strategies: Sequence[PredictableStrategy], descriptor: str = "user") -> "CandidateFamily":
        tree = strategies[0].tree
        return cls(tree, np.array([k.values for k in strategies]), tuple(k.tag for k in strategies), descriptor)

    @classmethod
    def constants(cls, tree: ScenarioTree) -> "CandidateFamily":
        return cls(tree, np.zeros((0, tree.n_nodes)), (), "constants")

    @classmethod
    def greedy(cls, D: AdaptedProcess) -> "CandidateFamily":
        """Sign of the conditional expected next increment of ``D`` (sign(0) = 0), plus -1."""
        tree = D.tree
        drift = np.zeros(tree.n_nodes)
        np.add.at(drift, tree.parent[1:], tree.cond_prob()[1:] * jumps(D)[1:])
        k = np.sign(drift)
        k[tree.atoms] = 0.0
        rows = np.array([k, -k, -np.ones(tree.n_nodes)])
        return cls(tree, rows, ("sign-greedy", "sign-greedy", "constant"), "greedy")

    @classmethod
    def enumerated(cls, tree: ScenarioTree) -> "CandidateFamily":
        """Every {-1, 0, 1}-valued strategy (guarded)."""
        _guard(tree)
        return cls(tree, _enumeration_rows(tree, tree.internal, 0, 3 ** len(tree.internal)),
                   ("enumerated",) * 3 ** len(tree.internal), "enum")

    @classmethod
    def random(cls, tree: ScenarioTree, n: int, seed: int = 0) -> "CandidateFamily":
        rng = np.random.default_rng(seed)
        m = np.zeros((n, tree.n_nodes))
        m[:, tree.internal] = rng.uniform(-1.0, 1.0, size=(n, len(tree.internal)))
        return cls(tree, m, ("random",) * n, f"random:{n}")


def resolve_family(spec: "str | CandidateFamily", D: AdaptedProcess, seed: int = 0) -> CandidateFamily:
    """Turn a family spec (``greedy``, ``enum``, ``random:N`` or a family) into a family."""
    if isinstance(spec, CandidateFamily):
        if not spec.tree.same_as(D.tree):
            raise TreeMismatchError("family and processes live on different trees")
        return spec
    if spec == "greedy":
        return CandidateFamily.greedy(D)
    if spec == "enum":
        return CandidateFamily.enumerated(D.tree)
    if spec.startswith("random:"):
        n = int(spec.split(":", 1)[1])
        return CandidateFamily.greedy(D).union(CandidateFamily.random(D.tree, n, seed))
    raise ValueError(f"unknown family spec {spec!r}; use greedy, enum or random:N")


@dataclass(frozen=True)
class EmeryEstimate:
    value: float
    strategy: PredictableStrategy | None
    family: str
    lower_bound: bool = True
    index: int = field(default=-1, compare=False)


def _check_pair(X: AdaptedProcess, Y: AdaptedProcess) -> AdaptedProcess:
    if not X.tree.same_as(Y.tree):
        raise TreeMismatchError("processes live on different trees")
    return X - Y


def _scores(tree: ScenarioTree, K: np.ndarray, dD: np.ndarray) -> np.ndarray:
    """E[sup_t |(K . D)_t| ^ 1] for every row of K."""
    integ = batch_integral(tree, K, dD)
    sup = np.abs(integ[:, tree.atom_paths]).max(axis=2)
    # atom masses may sum to 1 + ulp; the expectation of a capped quantity cannot
    return np.minimum(np.minimum(sup, 1.0) @ tree.atom_probs, 1.0)


def ucp_distance(X: AdaptedProcess, Y: AdaptedProcess) -> float:
    D = _check_pair(X, Y)
    sup = np.abs(D.paths()).max(axis=1)
    return min(float(np.minimum(sup, 1.0) @ D.tree.atom_probs), 1.0)


def emery_distance(
    X: AdaptedProcess,
    Y: AdaptedProcess,
    family: "str | CandidateFamily" = "greedy",
    seed: int = 0,
) -> EmeryEstimate:
    """Lower bound of the Emery distance: best member of ``family``."""
    D = _check_pair(X, Y)
    fam = resolve_family(family, D, seed)
    s = _scores(D.tree, fam.matrix, jumps(D))
    i = int(np.argmax(s))
    return EmeryEstimate(float(s[i]), fam.strategy(i), fam.descriptor, True, i)


def emery_distance_one_period(X: AdaptedProcess, Y: AdaptedProcess) -> float:
    """Exact distance on a one-period tree: E[|Delta D_1| ^ 1], attained at K = +-1."""
    D = _check_pair(X, Y)
    if D.tree.horizon != 1:
        raise ValueError("closed form needs a one-period tree")
    dD = D.terminal - D.values[0]
    return math.fsum(np.minimum(np.abs(dD), 1.0) * D.tree.atom_probs)


def _guard(tree: ScenarioTree) -> None:
    if tree.horizon > ORACLE_MAX_DEPTH or tree.n_atoms > ORACLE_MAX_ATOMS:
        raise GuardError(
            f"exhaustive enumeration refused: {tree.horizon} depths / {tree.n_atoms} atoms "
            f"exceeds {ORACLE_MAX_DEPTH} / {ORACLE_MAX_ATOMS}"
        )


def _enumeration_rows(tree: ScenarioTree, free: np.ndarray, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop)
    rows = np.zeros((len(idx), tree.n_nodes))
    for j, u in enumerate(free):
        rows[:, u] = (idx // 3**j) % 3 - 1.0
    return rows


def emery_distance_oracle(X: AdaptedProcess, Y: AdaptedProcess) -> EmeryEstimate:
    """Exhaustive maximum over all {-1, 0, 1}-valued strategies.

    Internal nodes whose outgoing increments all vanish cannot affect the
    integral and are pinned to 0.  Exact for one-period trees; otherwise the
    value dominates every {-1, 0, 1}-valued family but is still a lower
    bound on the supremum over the unit ball.
    """
    D = _check_pair(X, Y)
    tree = D.tree
    _guard(tree)
    dD = jumps(D)
    moving = np.zeros(tree.n_nodes, dtype=bool)
    moving[tree.parent[1:][dD[1:] != 0.0]] = True
    free = tree.internal[moving[tree.internal]]
    total = 3 ** len(free)
    best, best_row = -1.0, None
    for start in range(0, total, _CHUNK):
        rows = _enumeration_rows(tree, free, start, min(total, start + _CHUNK))
        s = _scores(tree, rows, dD)
        i = int(np.argmax(s))
        if s[i] > best:
            best, best_row = float(s[i]), rows[i]
    return EmeryEstimate(best, PredictableStrategy(tree, best_row, "enumerated"), "oracle", tree.horizon > 1)


@dataclass
class LimitReport:
    """Outcome of a Cauchy/limit search.

    Distances are lower-bound estimates, so ``cauchy`` is a heuristic verdict.
    """

    cauchy: bool
    candidate: AdaptedProcess | None
    successive: list[float]
    residuals: list[float]
    tol: float
    family: str
    heuristic: bool = True

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else float("nan")

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def pointwise_limit(seq: Sequence[AdaptedProcess]) -> AdaptedProcess:
    """Node-wise most frequent value over the second half of ``seq`` (ties go to the latest)."""
    tail = seq[len(seq) // 2:]
    vals = np.array([x.values for x in tail])
    out = vals[-1].copy()
    for v in range(vals.shape[1]):
        col = vals[:, v]
        uniq, counts = np.unique(col, return_counts=True)
        top = counts.max()
        winners = set(uniq[counts == top].tolist())
        for x in col[::-1]:
            if x in winners:
                out[v] = x
                break
    return AdaptedProcess(seq[0].tree, out)


def cauchy_limit(
    seq: Sequence[AdaptedProcess],
    family: "str | CandidateFamily" = "greedy",
    tol: float = 1e-2,
    candidate: AdaptedProcess | None = None,
    seed: int = 0,
) -> LimitReport:
    """Check whether ``seq`` looks Emery-Cauchy and report a limit candidate.

    The sequence counts as Cauchy when every successive distance over its
    second half is below ``tol``.  Without an explicit ``candidate`` the
    node-wise tail limit from :func:`pointwise_limit` is used.
    """
    if len(seq) < 2:
        raise ValueError("need at least 2 processes")
    tree = seq[0].tree
    for x in seq[1:]:
        if not x.tree.same_as(tree):
            raise TreeMismatchError("sequence members live on different trees")
    succ = [emery_distance(a, b, family, seed).value for a, b in zip(seq, seq[1:])]
    tail = succ[(len(succ) - 1) // 2:]
    ok = all(d < tol for d in tail)
    if not ok:
        return LimitReport(False, None, succ, [], tol, str(family))
    if candidate is None:
        candidate = pointwise_limit(seq)
    res = [emery_distance(x, candidate, family, seed).value for x in seq]
    return LimitReport(True, candidate, succ, res, tol, str(family))


def put_statistic(
    seq: Sequence[AdaptedProcess],
    family: "str | CandidateFamily" = "greedy",
    c: float = 1.0,
    seed: int = 0,
) -> float:
    """sup over the sequence and the family of P[sup_t |(K . X^n)_t| >= c]."""
    if c <= 0:
        raise ValueError("c must be positive")
    worst = 0.0
    for x in seq:
        fam = resolve_family(family, x, seed)
        integ = batch_integral(x.tree, fam.matrix, jumps(x))
        sup = np.abs(integ[:, x.tree.atom_paths]).max(axis=2)
        worst = max(worst, float(((sup >= c) @ x.tree.atom_probs).max()))
    return worst
